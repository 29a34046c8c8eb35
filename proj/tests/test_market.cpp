#include "satsrail/market.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "satsrail/error.hpp"

namespace satsrail::market {
namespace {

const std::filesystem::path kFixtures = SATSRAIL_FIXTURE_DIR;

TEST(Gbm, ZeroVolatilityIsConstant) {
  const auto p = gen_gbm_path({0.0, 0.0, 12}, 100'00, 9);
  ASSERT_EQ(p.prices.size(), 13u);
  for (auto v : p.prices) EXPECT_EQ(v, 100'00);
}

TEST(Gbm, DeterministicPerSeed) {
  const GbmParams g{0.1, 0.6, 36};
  EXPECT_EQ(gen_gbm_path(g, 110'300'00, 1), gen_gbm_path(g, 110'300'00, 1));
  EXPECT_NE(gen_gbm_path(g, 110'300'00, 1), gen_gbm_path(g, 110'300'00, 2));
}

TEST(Gbm, PositiveAndCorrectLength) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto p = gen_gbm_path({-2.0, 3.0, 24}, 500, s);
    ASSERT_EQ(p.prices.size(), 25u);
    ASSERT_EQ(p.prices.front(), 500);
    for (auto v : p.prices) ASSERT_GT(v, 0);
  }
}

TEST(Gbm, MeanLogReturnMatchesDrift) {
  const int n = 10'000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const auto p = gen_gbm_path({0.0, 0.6, 12}, 110'300'00, 1'000 + static_cast<std::uint64_t>(i));
    const double r = std::log(static_cast<double>(p.prices.back()) / static_cast<double>(p.prices.front()));
    sum += r;
    sq += r * r;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_NEAR(mean, -0.18, 3.0 * sd / std::sqrt(n));
  EXPECT_NEAR(sd, 0.6, 0.02);
}

TEST(Gbm, RejectsBadInputs) {
  EXPECT_THROW(gen_gbm_path({0, 0.5, 0}, 100, 1), ValidationError);
  EXPECT_THROW(gen_gbm_path({0, 0.5, 12}, 0, 1), ValidationError);
  EXPECT_THROW(gen_gbm_path({0, -0.5, 12}, 100, 1), ValidationError);
}

TEST(Stress, ZeroDrawdownIsConstant) {
  for (auto kind : {StressKind::kLinear, StressKind::kExponential}) {
    const auto p = gen_stress_path({kind, 0.0, 24}, 110'300'00);
    for (auto v : p.prices) EXPECT_EQ(v, 110'300'00);
  }
}

TEST(Stress, LinearEndpoint) {
  const auto p = gen_stress_path({StressKind::kLinear, 0.70, 18}, 100'000'00);
  ASSERT_EQ(p.prices.size(), 19u);
  EXPECT_EQ(p.prices[18], 30'000'00);
  EXPECT_EQ(p.prices[9], 65'000'00);
  for (std::size_t t = 1; t < p.prices.size(); ++t) EXPECT_LE(p.prices[t], p.prices[t - 1]);
}

TEST(Stress, ExponentialFactor) {
  const auto p = gen_stress_path({StressKind::kExponential, 0.70, 24}, 100'000'00);
  const double f = std::pow(0.3, 1.0 / 24.0);
  EXPECT_NEAR(f, 0.951067, 1e-5);
  EXPECT_EQ(p.prices[1], std::llround(100'000'00 * f));
  EXPECT_EQ(p.prices[1], 95'107'20);
  EXPECT_NEAR(static_cast<double>(p.prices[1]), 95'106'70, 100.0);
  EXPECT_NEAR(static_cast<double>(p.prices[24]), 30'000'00, 1.0);
  for (std::size_t t = 1; t < p.prices.size(); ++t) EXPECT_LE(p.prices[t], p.prices[t - 1]);
}

TEST(Stress, RejectsFullDrawdown) {
  EXPECT_THROW(gen_stress_path({StressKind::kLinear, 1.0, 24}, 100), ValidationError);
  EXPECT_THROW(gen_stress_path({StressKind::kLinear, -0.1, 24}, 100), ValidationError);
  EXPECT_THROW(parse_stress_kind("cubic"), ValidationError);
}

TEST(Pearson, SelfAndNegation) {
  const std::vector<double> x{1, 2, 3, 4, 7};
  std::vector<double> neg;
  for (double v : x) neg.push_back(-v);
  EXPECT_DOUBLE_EQ(pearson_corr(x, x), 1.0);
  EXPECT_DOUBLE_EQ(pearson_corr(x, neg), -1.0);
}

TEST(Pearson, MatchesTwoPassOracle) {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{2, 4, 5, 9};
  EXPECT_NEAR(pearson_corr(x, y), oracle::pearson_two_pass(x, y), 1e-12);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(2 + rng() % 300), b;
    for (auto& v : a) {
      v = 1e4 + 50 * z(rng);
      b.push_back(0.3 * v + 40 * z(rng));
    }
    ASSERT_NEAR(pearson_corr(a, b), oracle::pearson_two_pass(a, b), 1e-12);
  }
}

TEST(Pearson, SymmetricAndAffineInvariant) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5, 5);
  std::vector<double> a(100), b(100), c(100);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = u(rng);
    b[i] = a[i] + u(rng);
    c[i] = 3.5 * b[i] + 12.0;
  }
  EXPECT_NEAR(pearson_corr(a, b), pearson_corr(b, a), 1e-15);
  EXPECT_NEAR(pearson_corr(a, b), pearson_corr(a, c), 1e-12);
}

TEST(Pearson, Errors) {
  const std::vector<double> a{1, 2, 3};
  const std::vector<double> flat{2, 2, 2};
  const std::vector<double> short_{1, 2};
  EXPECT_THROW(pearson_corr(a, flat), UndefinedCorrelationError);
  EXPECT_THROW(pearson_corr(a, short_), ValidationError);
}

TEST(Returns, Definition) {
  const std::vector<double> p{100, 110};
  const auto r = to_returns(p);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(r[0], 0.10, 1e-15);
  const std::vector<double> flat{5, 5, 5, 5};
  for (double v : to_returns(flat)) EXPECT_EQ(v, 0.0);
  const std::vector<double> one{1};
  EXPECT_THROW(to_returns(one), ValidationError);
}

TEST(Returns, TelescopesAndScaleInvariant) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.8, 1.25);
  std::vector<double> p{1000.0}, scaled;
  for (int i = 1; i < 50; ++i) p.push_back(p.back() * u(rng));
  for (double v : p) scaled.push_back(v * 7.0);
  const auto r = to_returns(p);
  double logsum = 0;
  for (double v : r) logsum += std::log1p(v);
  EXPECT_NEAR(std::exp(logsum), p.back() / p.front(), 1e-10);
  const auto rs = to_returns(scaled);
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(r[i], rs[i], 1e-12);
}

TEST(PriceCsv, TwoRows) {
  const auto s = parse_price_csv("date,price\n2024-01-01,100.5\n2024-01-02,101\n");
  ASSERT_EQ(s.prices.size(), 2u);
  EXPECT_EQ(s.prices[0], 100.5);
  EXPECT_EQ(format_date(s.dates[1]), "2024-01-02");
}

TEST(PriceCsv, ToleratesCrlfAndBom) {
  const auto s = parse_price_csv("\xEF\xBB\xBF" "date,price\r\n2024-01-01,1\r\n\r\n2024-01-03,2\r\n");
  EXPECT_EQ(s.prices.size(), 2u);
}

TEST(PriceCsv, ErrorsNameTheRow) {
  try {
    parse_price_csv("date,price\n2024-01-01,1\n2024-01-02,0\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3u);
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
  }
  EXPECT_THROW(parse_price_csv("date,price\n2024-01-02,1\n2024-01-01,2\n"), ParseError);
  EXPECT_THROW(parse_price_csv("date,price\n2024-01-01,1\n2024-01-01,2\n"), ParseError);
  EXPECT_THROW(parse_price_csv("date,price\n2024-13-01,1\n"), ParseError);
  EXPECT_THROW(parse_price_csv("date,price\n2024-01-01,abc\n"), ParseError);
  EXPECT_THROW(parse_price_csv("day,value\n"), ParseError);
}

TEST(PriceCsv, RoundTripExact) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.01, 1e6);
  PriceSeries s;
  std::chrono::sys_days d = std::chrono::sys_days{std::chrono::year{2020} / 1 / 1};
  for (int i = 0; i < 100; ++i) {
    s.dates.emplace_back(d + std::chrono::days{i});
    s.prices.push_back(u(rng));
  }
  const auto path = std::filesystem::temp_directory_path() / "satsrail_roundtrip.csv";
  write_price_csv(path, s);
  const auto back = load_price_csv(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.dates, s.dates);
  EXPECT_EQ(back.prices, s.prices);
}

TEST(PriceCsv, InnerJoinKeepsCommonDates) {
  const auto a = load_price_csv(kFixtures / "prices_a.csv");
  const auto b = load_price_csv(kFixtures / "prices_b.csv");
  const auto j = inner_join(a, b);
  EXPECT_LT(j.dates.size(), a.dates.size());
  EXPECT_GT(j.dates.size(), 100u);
  for (std::size_t i = 1; i < j.dates.size(); ++i) EXPECT_LT(j.dates[i - 1], j.dates[i]);
}

}  // namespace
}  // namespace satsrail::market
