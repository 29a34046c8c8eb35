#pragma once

// Balance-sheet model: core BTC, the liquidity sleeve, the cash ledger, the
// no-forced-sale test, the sleeve VaR cap, and holdings analytics (mNAV,
// BTC per share).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "satsrail/money.hpp"

namespace satsrail::treasury {

enum class SurvivalMode {
  kTerminal,  // Cash_0 + sum(C_P) >= sum(Out) evaluated once at the horizon
  kPathwise,  // running cash must stay >= 0 after every month
};

SurvivalMode parse_survival_mode(const std::string& name);
std::string to_string(SurvivalMode mode);

struct TreasuryConfig {
  sats_t btc_core_sats = 0;
  double sleeve_fraction = 0.02;
  cents_t cash0_cents = 0;
  cents_t opex_monthly_cents = 0;
  cents_t interest_monthly_cents = 0;
  cents_t capex_monthly_cents = 0;
  int horizon_months = 24;
  double var_cap_fraction = 0.20;
  double var_confidence = 0.99;
  double var_sigma_monthly = 0.20;
  double cash_yield_apy = 0.0;
  SurvivalMode survival_mode = SurvivalMode::kPathwise;

  // Out_t before any extra outflow: opex + interest + maintenance capex.
  cents_t base_outflow_cents() const { return opex_monthly_cents + interest_monthly_cents + capex_monthly_cents; }
  // Throws ValidationError naming the field.
  void validate() const;
};

struct LedgerEntry {
  int month = 0;
  cents_t rail_inflow_cents = 0;  // C_P,t (may be negative when rail costs exceed revenue)
  cents_t yield_cents = 0;
  cents_t outflow_cents = 0;      // Out_t
  cents_t cash_before_floor_cents = 0;
  cents_t floor_adjustment_cents = 0;
  cents_t cash_after_cents = 0;
};

struct TreasuryState {
  int month = 0;
  sats_t btc_core_sats = 0;
  msat_t sleeve_deployed_msat = 0;
  cents_t cash_cents = 0;
  cents_t cumulative_inflows_cents = 0;   // rail inflows plus yield
  cents_t cumulative_outflows_cents = 0;
  cents_t cumulative_floor_adjustment_cents = 0;
  cents_t min_cash_cents = 0;             // lowest running cash before flooring, month 0 included
  double yield_carry_cents = 0.0;         // sub-cent accrued yield not yet credited
  bool forced_sale = false;
  std::optional<int> breach_month;
  std::optional<sats_t> required_sale_sats;  // total BTC that would have been sold
  std::vector<LedgerEntry> ledger;
};

TreasuryState initial_state(const TreasuryConfig& config, msat_t sleeve_deployed_msat = 0);

// Advances one month: cash' = cash + C_P + yield - Out_t. A shortfall sets the
// forced-sale flag and records the BTC that would have to be sold (rounded up
// at price_t); the sale itself is not executed. In pathwise mode cash is then
// floored at zero so the path can continue; in terminal mode the shortfall is
// carried and only judged at the horizon.
TreasuryState step_treasury(const TreasuryState& state, const TreasuryConfig& config, cents_t price_cents_per_btc,
                            cents_t rail_inflow_cents, cents_t extra_outflow_cents = 0);

struct SurvivalVerdict {
  bool survives = true;
  std::optional<int> breach_month;
  cents_t min_cash_cents = 0;
  cents_t terminal_cash_cents = 0;
};

SurvivalVerdict no_forced_sale(cents_t cash0_cents, std::span<const cents_t> inflows_cents,
                               std::span<const cents_t> outflows_cents, SurvivalMode mode = SurvivalMode::kPathwise);

// One-month lognormal VaR: value * (1 - exp(-z_alpha * sigma_monthly)),
// rounded to the nearest cent. alpha must lie in (0.5, 1).
cents_t sleeve_var(cents_t sleeve_value_cents, double sigma_monthly, double alpha);

struct VarCheck {
  cents_t var_cents = 0;
  cents_t cap_cents = 0;
  bool passes = true;
  cents_t headroom_cents = 0;  // cap - var, negative when breached
};

// var <= cap_fraction * max(cash, 0)
VarCheck check_var_cap(cents_t var_cents, cents_t cash_cents, double cap_fraction);

struct HoldingsRow {
  std::string ticker;
  double btc_held = 0.0;
  cents_t mkt_cap_cents = 0;
  std::optional<std::int64_t> shares_outstanding;
};

// Market cap over the market value of BTC held; other assets are ignored.
double mnav(cents_t mkt_cap_cents, double btc_held, double price_cents_per_btc);
double btc_per_share(double btc_held, std::int64_t shares_outstanding);
// Price (cents per BTC) at which a row's mNAV would equal `mnav_value`.
double implied_price_cents(cents_t mkt_cap_cents, double btc_held, double mnav_value);

// Header `ticker,btc_held,mkt_cap_usd,shares_outstanding`; shares may be empty.
std::vector<HoldingsRow> parse_holdings_csv(const std::string& content);
std::vector<HoldingsRow> load_holdings_csv(const std::filesystem::path& path);

}  // namespace satsrail::treasury
