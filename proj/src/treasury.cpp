#include "satsrail/treasury.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "satsrail/error.hpp"

namespace satsrail::treasury {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

SurvivalMode parse_survival_mode(const std::string& name) {
  if (name == "pathwise") return SurvivalMode::kPathwise;
  if (name == "terminal") return SurvivalMode::kTerminal;
  throw ValidationError("unknown survival mode '" + name + "' (expected pathwise or terminal)");
}

std::string to_string(SurvivalMode mode) { return mode == SurvivalMode::kPathwise ? "pathwise" : "terminal"; }

void TreasuryConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) { throw ValidationError(field + ": " + why); };
  if (btc_core_sats < 0) fail("btc_core_sats", "must be non-negative");
  if (!(sleeve_fraction >= 0.0 && sleeve_fraction <= 1.0)) fail("sleeve_fraction", "must be in [0, 1]");
  if (cash0_cents < 0) fail("cash0_cents", "must be non-negative");
  if (opex_monthly_cents < 0) fail("opex_monthly_cents", "must be non-negative");
  if (interest_monthly_cents < 0) fail("interest_monthly_cents", "must be non-negative");
  if (capex_monthly_cents < 0) fail("capex_monthly_cents", "must be non-negative");
  if (horizon_months < 1) fail("horizon_months", "must be at least 1");
  if (!(var_cap_fraction >= 0.0 && var_cap_fraction <= 1.0)) fail("var_cap_fraction", "must be in [0, 1]");
  if (!(var_confidence > 0.5 && var_confidence < 1.0)) fail("var_confidence", "must be in (0.5, 1)");
  if (!(var_sigma_monthly >= 0.0)) fail("var_sigma_monthly", "must be non-negative");
  if (!(cash_yield_apy >= 0.0)) fail("cash_yield_apy", "must be non-negative");
}

TreasuryState initial_state(const TreasuryConfig& config, msat_t sleeve_deployed_msat) {
  TreasuryState s;
  s.btc_core_sats = config.btc_core_sats;
  s.sleeve_deployed_msat = sleeve_deployed_msat;
  s.cash_cents = config.cash0_cents;
  s.min_cash_cents = config.cash0_cents;
  return s;
}

TreasuryState step_treasury(const TreasuryState& state, const TreasuryConfig& config, cents_t price_cents_per_btc,
                            cents_t rail_inflow_cents, cents_t extra_outflow_cents) {
  if (state.month >= config.horizon_months) throw ValidationError("cannot step past the horizon");
  if (price_cents_per_btc <= 0) throw ValidationError("price must be positive");
  if (extra_outflow_cents < 0) throw ValidationError("extra outflow must be non-negative");

  TreasuryState next = state;
  next.month = state.month + 1;

  LedgerEntry entry;
  entry.month = next.month;
  entry.rail_inflow_cents = rail_inflow_cents;
  entry.outflow_cents = config.base_outflow_cents() + extra_outflow_cents;

  if (config.cash_yield_apy > 0.0 && state.cash_cents > 0) {
    const double monthly_rate = std::pow(1.0 + config.cash_yield_apy, 1.0 / 12.0) - 1.0;
    const double accrued = static_cast<double>(state.cash_cents) * monthly_rate + state.yield_carry_cents;
    entry.yield_cents = static_cast<cents_t>(std::floor(accrued));
    next.yield_carry_cents = accrued - static_cast<double>(entry.yield_cents);
  }

  const cents_t inflow = entry.rail_inflow_cents + entry.yield_cents;
  next.cumulative_inflows_cents += inflow;
  next.cumulative_outflows_cents += entry.outflow_cents;
  const cents_t cash = state.cash_cents + inflow - entry.outflow_cents;
  entry.cash_before_floor_cents = cash;
  next.min_cash_cents = std::min(state.min_cash_cents, cash);

  const bool judged_now = config.survival_mode == SurvivalMode::kPathwise || next.month == config.horizon_months;
  if (cash < 0 && judged_now) {
    next.forced_sale = true;
    if (!next.breach_month) next.breach_month = next.month;
    const sats_t sale = mul_div_ceil(-cash, kSatsPerBtc, price_cents_per_btc);
    next.required_sale_sats = next.required_sale_sats.value_or(0) + sale;
  }
  if (cash < 0 && config.survival_mode == SurvivalMode::kPathwise) {
    entry.floor_adjustment_cents = -cash;
    next.cumulative_floor_adjustment_cents += entry.floor_adjustment_cents;
  }
  next.cash_cents = cash + entry.floor_adjustment_cents;
  entry.cash_after_cents = next.cash_cents;
  next.ledger.push_back(entry);
  return next;
}

SurvivalVerdict no_forced_sale(cents_t cash0_cents, std::span<const cents_t> inflows_cents,
                               std::span<const cents_t> outflows_cents, SurvivalMode mode) {
  if (inflows_cents.size() != outflows_cents.size()) throw ValidationError("inflow and outflow lengths differ");
  if (inflows_cents.empty()) throw ValidationError("horizon must be at least one month");

  SurvivalVerdict v;
  cents_t running = cash0_cents;
  v.min_cash_cents = running;
  for (std::size_t k = 0; k < inflows_cents.size(); ++k) {
    running += inflows_cents[k] - outflows_cents[k];
    v.min_cash_cents = std::min(v.min_cash_cents, running);
    if (mode == SurvivalMode::kPathwise && running < 0 && !v.breach_month) {
      v.breach_month = static_cast<int>(k + 1);
    }
  }
  v.terminal_cash_cents = running;
  if (mode == SurvivalMode::kTerminal && running < 0) v.breach_month = static_cast<int>(inflows_cents.size());
  v.survives = !v.breach_month.has_value();
  return v;
}

cents_t sleeve_var(cents_t sleeve_value_cents, double sigma_monthly, double alpha) {
  if (!(alpha > 0.5 && alpha < 1.0)) throw ValidationError("VaR confidence must be in (0.5, 1)");
  if (!(sigma_monthly >= 0.0)) throw ValidationError("sigma must be non-negative");
  if (sleeve_value_cents < 0) throw ValidationError("sleeve value must be non-negative");
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(), alpha);
  const double loss_fraction = -std::expm1(-z * sigma_monthly);
  return std::llround(static_cast<double>(sleeve_value_cents) * loss_fraction);
}

VarCheck check_var_cap(cents_t var_cents, cents_t cash_cents, double cap_fraction) {
  if (!(cap_fraction >= 0.0 && cap_fraction <= 1.0)) throw ValidationError("VaR cap fraction must be in [0, 1]");
  VarCheck c;
  c.var_cents = var_cents;
  c.cap_cents = static_cast<cents_t>(std::floor(cap_fraction * static_cast<double>(std::max<cents_t>(cash_cents, 0))));
  c.headroom_cents = c.cap_cents - var_cents;
  c.passes = var_cents <= c.cap_cents;
  return c;
}

double mnav(cents_t mkt_cap_cents, double btc_held, double price_cents_per_btc) {
  if (!(btc_held > 0.0)) throw ValidationError("BTC held must be positive");
  if (!(price_cents_per_btc > 0.0)) throw ValidationError("price must be positive");
  if (mkt_cap_cents < 0) throw ValidationError("market cap must be non-negative");
  return static_cast<double>(mkt_cap_cents) / (btc_held * price_cents_per_btc);
}

double btc_per_share(double btc_held, std::int64_t shares_outstanding) {
  if (shares_outstanding <= 0) throw ValidationError("shares outstanding must be positive");
  return btc_held / static_cast<double>(shares_outstanding);
}

double implied_price_cents(cents_t mkt_cap_cents, double btc_held, double mnav_value) {
  if (!(btc_held > 0.0) || !(mnav_value > 0.0)) throw ValidationError("holdings and mNAV must be positive");
  return static_cast<double>(mkt_cap_cents) / (btc_held * mnav_value);
}

std::vector<HoldingsRow> parse_holdings_csv(const std::string& content) {
  std::istringstream in(content);
  std::string raw;
  std::size_t row = 0;
  bool saw_header = false;
  std::vector<HoldingsRow> rows;
  while (std::getline(in, raw)) {
    ++row;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!saw_header) {
      if (line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
      if (line != "ticker,btc_held,mkt_cap_usd,shares_outstanding") {
        throw ParseError(row, "expected header 'ticker,btc_held,mkt_cap_usd,shares_outstanding'");
      }
      saw_header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 4) throw ParseError(row, "expected 4 fields, got " + std::to_string(fields.size()));

    HoldingsRow h;
    h.ticker = std::string(fields[0]);
    if (h.ticker.empty()) throw ParseError(row, "empty ticker");

    auto [p, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), h.btc_held);
    if (ec != std::errc{} || p != fields[1].data() + fields[1].size() || !std::isfinite(h.btc_held)) {
      throw ParseError(row, "invalid btc_held");
    }
    if (h.btc_held <= 0.0) throw ParseError(row, "btc_held must be positive");

    try {
      h.mkt_cap_cents = parse_usd_cents(fields[2]);
    } catch (const ValidationError& e) {
      throw ParseError(row, std::string("invalid mkt_cap_usd: ") + e.what());
    }

    if (!fields[3].empty()) {
      std::int64_t shares = 0;
      auto [sp, sec] = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), shares);
      if (sec != std::errc{} || sp != fields[3].data() + fields[3].size()) {
        throw ParseError(row, "invalid shares_outstanding");
      }
      if (shares <= 0) throw ParseError(row, "shares_outstanding must be positive");
      h.shares_outstanding = shares;
    }
    rows.push_back(std::move(h));
  }
  if (!saw_header) throw ParseError(1, "missing header");
  return rows;
}

std::vector<HoldingsRow> load_holdings_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open holdings file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_holdings_csv(buf.str());
}

}  // namespace satsrail::treasury
