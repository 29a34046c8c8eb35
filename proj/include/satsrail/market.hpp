#pragma once

// BTC price paths (stochastic and stress), historical price files, and
// correlation analytics.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "satsrail/money.hpp"

namespace satsrail::market {

// Monthly cents-per-BTC series; prices[0] is month 0 and size() == horizon + 1.
struct PricePath {
  cents_t start_price = 0;
  std::vector<cents_t> prices;

  int horizon_months() const { return static_cast<int>(prices.size()) - 1; }
  bool operator==(const PricePath&) const = default;
};

struct GbmParams {
  double mu = 0.0;     // annualized drift
  double sigma = 0.0;  // annualized volatility
  int horizon_months = 12;
};

enum class StressKind { kLinear, kExponential };

struct StressShape {
  StressKind kind = StressKind::kLinear;
  double total_drawdown = 0.0;  // in [0, 1)
  int horizon_months = 24;
};

StressKind parse_stress_kind(const std::string& name);
std::string to_string(StressKind kind);

// Monthly geometric Brownian motion with dt = 1/12:
//   p[t+1] = p[t] * exp((mu - sigma^2/2) dt + sigma sqrt(dt) Z_t)
// Z_t comes from Xoshiro256ss(seed) via Box-Muller. Each step is applied to the
// previous stored (whole-cent) price and rounded to the nearest cent, with a
// floor of 1 cent.
PricePath gen_gbm_path(const GbmParams& params, cents_t start_price, std::uint64_t seed);

// Deterministic bear path ending at round(start * (1 - drawdown)).
PricePath gen_stress_path(const StressShape& shape, cents_t start_price);

// Pearson product-moment correlation. Throws UndefinedCorrelationError when
// either series has zero variance.
double pearson_corr(std::span<const double> xs, std::span<const double> ys);

// r_t = p_t / p_{t-1} - 1
std::vector<double> to_returns(std::span<const double> series);

struct PriceSeries {
  std::vector<std::chrono::year_month_day> dates;  // strictly ascending
  std::vector<double> prices;                      // all positive

  std::size_t size() const { return prices.size(); }
};

// Reads a `date,price` CSV (ISO-8601 dates, positive decimals, LF or CRLF).
PriceSeries load_price_csv(const std::filesystem::path& path);
PriceSeries parse_price_csv(const std::string& content);
// Writes with shortest round-trip formatting so load(write(s)) == s exactly.
void write_price_csv(const std::filesystem::path& path, const PriceSeries& series);

// Inner join on date. Both outputs share the joined dates.
struct AlignedSeries {
  std::vector<std::chrono::year_month_day> dates;
  std::vector<double> a;
  std::vector<double> b;
};
AlignedSeries inner_join(const PriceSeries& a, const PriceSeries& b);

std::string format_date(std::chrono::year_month_day date);

}  // namespace satsrail::market
