#include "satsrail/market.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "satsrail/error.hpp"
#include "satsrail/rng.hpp"

namespace satsrail::market {

namespace {

constexpr double kMonth = 1.0 / 12.0;

cents_t to_cents_floored(double value) {
  const double rounded = std::round(value);
  if (!(rounded >= 1.0)) return 1;
  if (rounded >= 9.0e18) throw ValidationError("price path overflow");
  return static_cast<cents_t>(rounded);
}

void check_start(cents_t start_price, int horizon) {
  if (start_price <= 0) throw ValidationError("start price must be positive");
  if (horizon < 1) throw ValidationError("horizon must be at least one month");
}

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

bool parse_date(std::string_view text, std::chrono::year_month_day& out) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  auto num = [&](std::string_view s, auto& v) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc{} && p == s.data() + s.size();
  };
  if (!num(text.substr(0, 4), y) || !num(text.substr(5, 2), m) || !num(text.substr(8, 2), d)) return false;
  out = std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d};
  return out.ok();
}

}  // namespace

StressKind parse_stress_kind(const std::string& name) {
  if (name == "linear") return StressKind::kLinear;
  if (name == "exponential") return StressKind::kExponential;
  throw ValidationError("unknown stress shape '" + name + "' (expected linear or exponential)");
}

std::string to_string(StressKind kind) { return kind == StressKind::kLinear ? "linear" : "exponential"; }

PricePath gen_gbm_path(const GbmParams& params, cents_t start_price, std::uint64_t seed) {
  check_start(start_price, params.horizon_months);
  if (!(params.sigma >= 0.0)) throw ValidationError("sigma must be non-negative");

  Xoshiro256ss rng(seed);
  const double drift = (params.mu - 0.5 * params.sigma * params.sigma) * kMonth;
  const double vol = params.sigma * std::sqrt(kMonth);

  PricePath path{start_price, {}};
  path.prices.reserve(static_cast<std::size_t>(params.horizon_months) + 1);
  path.prices.push_back(start_price);
  for (int t = 0; t < params.horizon_months; ++t) {
    const double z = rng.standard_normal();
    const double next = static_cast<double>(path.prices.back()) * std::exp(drift + vol * z);
    path.prices.push_back(to_cents_floored(next));
  }
  return path;
}

PricePath gen_stress_path(const StressShape& shape, cents_t start_price) {
  check_start(start_price, shape.horizon_months);
  if (!(shape.total_drawdown >= 0.0) || shape.total_drawdown >= 1.0) {
    throw ValidationError("stress drawdown must be in [0, 1)");
  }
  const int horizon = shape.horizon_months;
  const double start = static_cast<double>(start_price);
  const cents_t end = to_cents_floored(start * (1.0 - shape.total_drawdown));

  PricePath path{start_price, {}};
  path.prices.reserve(static_cast<std::size_t>(horizon) + 1);
  path.prices.push_back(start_price);
  if (shape.kind == StressKind::kLinear) {
    const double step = static_cast<double>(end - start_price) / horizon;
    for (int t = 1; t < horizon; ++t) path.prices.push_back(to_cents_floored(start + step * t));
  } else {
    const double factor = std::pow(1.0 - shape.total_drawdown, 1.0 / horizon);
    for (int t = 1; t < horizon; ++t) path.prices.push_back(to_cents_floored(start * std::pow(factor, t)));
  }
  path.prices.push_back(end);
  return path;
}

double pearson_corr(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ValidationError("correlation: series lengths differ");
  if (xs.size() < 2) throw ValidationError("correlation: need at least two observations");

  // Single-pass co-moment accumulation (Welford).
  double mean_x = 0.0;
  double mean_y = 0.0;
  double m2x = 0.0;
  double m2y = 0.0;
  double cxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    const double dx = xs[i] - mean_x;
    const double dy = ys[i] - mean_y;
    mean_x += dx / n;
    mean_y += dy / n;
    m2x += dx * (xs[i] - mean_x);
    m2y += dy * (ys[i] - mean_y);
    cxy += dx * (ys[i] - mean_y);
  }
  if (m2x == 0.0 || m2y == 0.0) throw UndefinedCorrelationError("correlation undefined for a constant series");
  const double r = cxy / std::sqrt(m2x * m2y);
  return std::clamp(r, -1.0, 1.0);
}

std::vector<double> to_returns(std::span<const double> series) {
  if (series.size() < 2) throw ValidationError("returns need at least two observations");
  std::vector<double> out;
  out.reserve(series.size() - 1);
  for (std::size_t t = 1; t < series.size(); ++t) out.push_back(series[t] / series[t - 1] - 1.0);
  return out;
}

PriceSeries parse_price_csv(const std::string& content) {
  PriceSeries series;
  std::istringstream in(content);
  std::string raw;
  std::size_t row = 0;
  bool saw_header = false;
  while (std::getline(in, raw)) {
    ++row;
    const std::string_view line = trim_cr(raw);
    if (!saw_header) {
      std::string_view header = line;
      if (header.starts_with("\xEF\xBB\xBF")) header.remove_prefix(3);
      if (header != "date,price") throw ParseError(row, "expected header 'date,price'");
      saw_header = true;
      continue;
    }
    if (line.empty()) continue;

    const auto comma = line.find(',');
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos) {
      throw ParseError(row, "expected two fields");
    }
    std::chrono::year_month_day date{};
    if (!parse_date(line.substr(0, comma), date)) throw ParseError(row, "invalid ISO-8601 date");

    const std::string_view price_text = line.substr(comma + 1);
    double price = 0.0;
    auto [p, ec] = std::from_chars(price_text.data(), price_text.data() + price_text.size(), price);
    if (ec != std::errc{} || p != price_text.data() + price_text.size() || !std::isfinite(price)) {
      throw ParseError(row, "invalid price");
    }
    if (price <= 0.0) throw ParseError(row, "price must be positive");

    if (!series.dates.empty()) {
      if (date == series.dates.back()) throw ParseError(row, "duplicate date");
      if (date < series.dates.back()) throw ParseError(row, "dates out of order");
    }
    series.dates.push_back(date);
    series.prices.push_back(price);
  }
  if (!saw_header) throw ParseError(1, "missing header");
  return series;
}

PriceSeries load_price_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open price file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_price_csv(buf.str());
}

std::string format_date(std::chrono::year_month_day date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

void write_price_csv(const std::filesystem::path& path, const PriceSeries& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write price file " + path.string());
  out << "date,price\n";
  char buf[64];
  for (std::size_t i = 0; i < series.size(); ++i) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, series.prices[i]);
    out << format_date(series.dates[i]) << ',' << std::string_view(buf, static_cast<std::size_t>(p - buf)) << '\n';
  }
}

AlignedSeries inner_join(const PriceSeries& a, const PriceSeries& b) {
  AlignedSeries out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (a.dates[i] < b.dates[j]) {
      ++i;
    } else if (b.dates[j] < a.dates[i]) {
      ++j;
    } else {
      out.dates.push_back(a.dates[i]);
      out.a.push_back(a.prices[i]);
      out.b.push_back(b.prices[j]);
      ++i;
      ++j;
    }
  }
  return out;
}

}  // namespace satsrail::market
