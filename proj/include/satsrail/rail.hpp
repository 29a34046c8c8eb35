#pragma once

// Payments-rail business layer: merchants, monthly payment generation,
// acquiring / hedge / sats-back economics, churn, and the monthly
// non-mark-to-market cash inflow booked into the treasury.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "satsrail/money.hpp"

namespace satsrail::rail {

enum class SettleMode { kBtc, kFiat };

SettleMode parse_settle_mode(const std::string& name);
std::string to_string(SettleMode mode);

struct Merchant {
  std::string id;
  std::string node;  // channel-graph node that receives the merchant's payments
  cents_t monthly_gmv_cents = 0;
  std::int64_t take_rate_bps = 30;
  SettleMode settle_mode = SettleMode::kFiat;
  std::int64_t sats_back_bps = 0;
  bool active = true;

  bool operator==(const Merchant&) const = default;
};

// Parses a roster (JSON array of merchant objects). Errors carry the key path
// rooted at `key_prefix`, e.g. "merchants[2].take_rate_bps".
std::vector<Merchant> parse_merchants(const nlohmann::json& doc, const std::string& key_prefix = "merchants");
nlohmann::json merchants_to_json(const std::vector<Merchant>& merchants);

struct TicketModel {
  cents_t mean_ticket_cents = 5'000;
  cents_t median_ticket_cents = 3'630;
  double shape = 0.8;  // lognormal sigma
  cents_t min_ticket_cents = 100;
  cents_t max_ticket_cents = 1'000'000;
};

struct PaymentRequest {
  std::size_t merchant_index = 0;
  std::string payer;
  std::string merchant_node;
  cents_t fiat_cents = 0;
  msat_t amount_msat = 0;
};

struct MerchantDraw {
  std::size_t merchant_index = 0;
  std::int64_t tx_count = 0;  // round(gmv / mean_ticket)
  std::int64_t sampled = 0;   // payments actually generated
};

struct PaymentBatch {
  std::vector<PaymentRequest> requests;
  std::vector<MerchantDraw> draws;  // active merchants only, roster order
  std::int64_t total_tx_count = 0;
};

// Generates one month of checkout payments. Per merchant the count is
// round(gmv / mean_ticket); ticket sizes are lognormal(median, shape)
// truncated to [min, max] by resampling, converted to msat at `price`. Draws
// are a pure function of (seed, month, merchant id). With sample_cap > 0 and
// more transactions than the cap, the cap is apportioned across merchants by
// transaction count and only that many payments are generated.
PaymentBatch gen_monthly_payments(const std::vector<Merchant>& merchants, int month, cents_t price_cents_per_btc,
                                  std::uint64_t seed, const TicketModel& tickets,
                                  const std::vector<std::string>& payers, std::int64_t sample_cap = 0);

// floor(amount * bps / 10_000); shared by every bps-denominated charge.
cents_t apply_bps(cents_t amount_cents, std::int64_t bps);

cents_t acquiring_fee(cents_t gmv_settled_cents, std::int64_t take_rate_bps);

struct HedgeSplit {
  cents_t gross_cents = 0;
  cents_t merchant_fiat_cents = 0;
  cents_t spread_revenue_cents = 0;
};

// Converts a sats receipt to fiat at the locked price. The BTC leg is hedged
// back-to-back in the same instant, so no price exposure is carried.
HedgeSplit hedge_settlement(msat_t amount_msat, cents_t price_cents_per_btc, std::int64_t spread_bps);

cents_t sats_back_outlay(cents_t gmv_settled_cents, std::int64_t sats_back_bps);

struct ChurnParams {
  double base = 0.0;
  double sensitivity = 0.0;
};

struct ChurnOutcome {
  std::int64_t active_before = 0;
  std::int64_t deactivated = 0;
  double churn_rate = 0.0;  // deactivated / active_before, 0 when none active
};

// Each active merchant leaves with p = clamp(base + sensitivity * (1 - success), 0, 1).
ChurnOutcome apply_churn(std::vector<Merchant>& merchants, double month_success_rate, std::uint64_t seed, int month,
                         const ChurnParams& params);

struct RailComponents {
  int month = 0;
  cents_t gmv_cents = 0;
  std::int64_t tx_count = 0;
  std::int64_t tx_settled = 0;
  cents_t acquiring_fee_cents = 0;
  cents_t hedge_spread_cents = 0;
  cents_t routing_fee_cents = 0;
  cents_t rebalancing_cost_cents = 0;
  cents_t sats_back_cents = 0;
  cents_t variable_cost_cents = 0;
};

struct RailMonthRecord {
  int month = 0;
  cents_t gmv_cents = 0;
  std::int64_t tx_count = 0;
  std::int64_t tx_settled = 0;
  cents_t acquiring_fee_cents = 0;
  cents_t hedge_spread_cents = 0;
  cents_t routing_fee_cents = 0;
  cents_t rebalancing_cost_cents = 0;
  cents_t sats_back_cents = 0;
  cents_t variable_cost_cents = 0;
  // acquiring + spread + routing - rebalancing - sats_back - variable_cost
  cents_t net_inflow_cents = 0;

  cents_t fee_revenue_cents() const { return acquiring_fee_cents + hedge_spread_cents + routing_fee_cents; }
  bool operator==(const RailMonthRecord&) const = default;
};

RailMonthRecord month_rail_cashflow(const RailComponents& components);

nlohmann::json to_json(const RailMonthRecord& record);

}  // namespace satsrail::rail
