#include "satsrail/rail.hpp"

#include <algorithm>
#include <cmath>

#include "satsrail/error.hpp"
#include "satsrail/rng.hpp"

namespace satsrail::rail {

namespace {

constexpr int kMaxTicketRedraws = 64;

template <typename T>
T require(const nlohmann::json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) throw ConfigError(path + "." + key, "missing");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + "." + key, "has the wrong type");
  }
}

cents_t draw_ticket(Xoshiro256ss& rng, const TicketModel& t) {
  const double lo = static_cast<double>(t.min_ticket_cents);
  const double hi = static_cast<double>(t.max_ticket_cents);
  const double log_median = std::log(static_cast<double>(t.median_ticket_cents));
  double value = 0.0;
  for (int i = 0; i < kMaxTicketRedraws; ++i) {
    value = std::exp(log_median + t.shape * rng.standard_normal());
    if (value >= lo && value <= hi) break;
  }
  value = std::clamp(value, lo, hi);
  return std::max<cents_t>(1, std::llround(value));
}

}  // namespace

SettleMode parse_settle_mode(const std::string& name) {
  if (name == "btc") return SettleMode::kBtc;
  if (name == "fiat") return SettleMode::kFiat;
  throw ValidationError("unknown settle mode '" + name + "' (expected btc or fiat)");
}

std::string to_string(SettleMode mode) { return mode == SettleMode::kBtc ? "btc" : "fiat"; }

std::vector<Merchant> parse_merchants(const nlohmann::json& doc, const std::string& key_prefix) {
  if (!doc.is_array()) throw ConfigError(key_prefix, "must be an array of merchants");
  static const std::vector<std::string> known = {"id",          "node",          "monthly_gmv_cents", "take_rate_bps",
                                                 "settle_mode", "sats_back_bps", "active"};
  std::vector<Merchant> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string path = key_prefix + "[" + std::to_string(i) + "]";
    const auto& m = doc.at(i);
    if (!m.is_object()) throw ConfigError(path, "must be an object");
    for (const auto& [key, _] : m.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError(path + "." + key, "unknown key");
    }
    Merchant merchant;
    merchant.id = require<std::string>(m, "id", path);
    merchant.node = require<std::string>(m, "node", path);
    merchant.monthly_gmv_cents = require<cents_t>(m, "monthly_gmv_cents", path);
    if (m.contains("take_rate_bps")) merchant.take_rate_bps = require<std::int64_t>(m, "take_rate_bps", path);
    if (m.contains("settle_mode")) {
      try {
        merchant.settle_mode = parse_settle_mode(require<std::string>(m, "settle_mode", path));
      } catch (const ValidationError& e) {
        throw ConfigError(path + ".settle_mode", e.what());
      }
    }
    if (m.contains("sats_back_bps")) merchant.sats_back_bps = require<std::int64_t>(m, "sats_back_bps", path);
    if (m.contains("active")) merchant.active = require<bool>(m, "active", path);

    if (merchant.id.empty()) throw ConfigError(path + ".id", "must be non-empty");
    if (merchant.monthly_gmv_cents <= 0 && merchant.active) {
      throw ConfigError(path + ".monthly_gmv_cents", "must be positive for an active merchant");
    }
    if (merchant.take_rate_bps < 0) throw ConfigError(path + ".take_rate_bps", "must be non-negative");
    if (merchant.sats_back_bps < 0) throw ConfigError(path + ".sats_back_bps", "must be non-negative");
    for (const auto& prev : out) {
      if (prev.id == merchant.id) throw ConfigError(path + ".id", "duplicate merchant id '" + merchant.id + "'");
    }
    out.push_back(std::move(merchant));
  }
  return out;
}

nlohmann::json merchants_to_json(const std::vector<Merchant>& merchants) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& m : merchants) {
    out.push_back({{"id", m.id},
                   {"node", m.node},
                   {"monthly_gmv_cents", m.monthly_gmv_cents},
                   {"take_rate_bps", m.take_rate_bps},
                   {"settle_mode", to_string(m.settle_mode)},
                   {"sats_back_bps", m.sats_back_bps},
                   {"active", m.active}});
  }
  return out;
}

PaymentBatch gen_monthly_payments(const std::vector<Merchant>& merchants, int month, cents_t price_cents_per_btc,
                                  std::uint64_t seed, const TicketModel& tickets,
                                  const std::vector<std::string>& payers, std::int64_t sample_cap) {
  if (price_cents_per_btc <= 0) throw ValidationError("price must be positive");
  if (tickets.mean_ticket_cents <= 0 || tickets.median_ticket_cents <= 0) {
    throw ValidationError("ticket sizes must be positive");
  }
  if (tickets.min_ticket_cents <= 0 || tickets.min_ticket_cents > tickets.max_ticket_cents) {
    throw ValidationError("ticket bounds must satisfy 0 < min <= max");
  }
  if (!(tickets.shape >= 0.0)) throw ValidationError("ticket shape must be non-negative");

  PaymentBatch batch;
  for (std::size_t i = 0; i < merchants.size(); ++i) {
    const Merchant& m = merchants[i];
    if (!m.active) continue;
    const std::int64_t count =
        (2 * m.monthly_gmv_cents + tickets.mean_ticket_cents) / (2 * tickets.mean_ticket_cents);
    batch.draws.push_back({i, count, count});
    batch.total_tx_count += count;
  }
  if (batch.total_tx_count == 0) return batch;
  if (payers.empty()) throw ValidationError("payment generation needs at least one payer node");

  if (sample_cap > 0 && batch.total_tx_count > sample_cap) {
    std::vector<std::size_t> with_tx;
    std::vector<std::uint64_t> weights;
    for (std::size_t k = 0; k < batch.draws.size(); ++k) {
      if (batch.draws[k].tx_count > 0) {
        with_tx.push_back(k);
        weights.push_back(static_cast<std::uint64_t>(batch.draws[k].tx_count));
      }
    }
    const auto shares = apportion_largest_remainder(sample_cap, weights);
    for (std::size_t k = 0; k < with_tx.size(); ++k) batch.draws[with_tx[k]].sampled = shares[k];
  }

  for (const auto& draw : batch.draws) {
    const Merchant& m = merchants[draw.merchant_index];
    Xoshiro256ss rng(derive_seed({seed, static_cast<std::uint64_t>(StreamTag::kPayments),
                                  static_cast<std::uint64_t>(month), fnv1a64(m.id)}));
    for (std::int64_t k = 0; k < draw.sampled; ++k) {
      const cents_t fiat = draw_ticket(rng, tickets);
      const std::string& payer = payers[rng.below(payers.size())];
      const msat_t amount = std::max<msat_t>(1, cents_to_msat_floor(fiat, price_cents_per_btc));
      batch.requests.push_back({draw.merchant_index, payer, m.node, fiat, amount});
    }
  }
  return batch;
}

cents_t apply_bps(cents_t amount_cents, std::int64_t bps) {
  if (amount_cents < 0 || bps < 0) throw ValidationError("bps charge needs non-negative inputs");
  return mul_div_floor(amount_cents, bps, kBpsDenominator);
}

cents_t acquiring_fee(cents_t gmv_settled_cents, std::int64_t take_rate_bps) {
  return apply_bps(gmv_settled_cents, take_rate_bps);
}

HedgeSplit hedge_settlement(msat_t amount_msat, cents_t price_cents_per_btc, std::int64_t spread_bps) {
  if (price_cents_per_btc <= 0) throw ValidationError("price must be positive");
  if (amount_msat < 0) throw ValidationError("settlement amount must be non-negative");
  HedgeSplit split;
  split.gross_cents = msat_to_cents_floor(amount_msat, price_cents_per_btc);
  split.spread_revenue_cents = apply_bps(split.gross_cents, spread_bps);
  split.merchant_fiat_cents = split.gross_cents - split.spread_revenue_cents;
  return split;
}

cents_t sats_back_outlay(cents_t gmv_settled_cents, std::int64_t sats_back_bps) {
  return apply_bps(gmv_settled_cents, sats_back_bps);
}

ChurnOutcome apply_churn(std::vector<Merchant>& merchants, double month_success_rate, std::uint64_t seed, int month,
                         const ChurnParams& params) {
  if (!(month_success_rate >= 0.0 && month_success_rate <= 1.0)) {
    throw ValidationError("success rate must be in [0, 1]");
  }
  const double p = std::clamp(params.base + params.sensitivity * (1.0 - month_success_rate), 0.0, 1.0);
  ChurnOutcome out;
  for (auto& m : merchants) {
    if (!m.active) continue;
    ++out.active_before;
    Xoshiro256ss rng(derive_seed(
        {seed, static_cast<std::uint64_t>(StreamTag::kChurn), static_cast<std::uint64_t>(month), fnv1a64(m.id)}));
    if (rng.uniform01() < p) {
      m.active = false;
      ++out.deactivated;
    }
  }
  if (out.active_before > 0) {
    out.churn_rate = static_cast<double>(out.deactivated) / static_cast<double>(out.active_before);
  }
  return out;
}

RailMonthRecord month_rail_cashflow(const RailComponents& c) {
  for (auto v : {c.gmv_cents, c.tx_count, c.tx_settled, c.acquiring_fee_cents, c.hedge_spread_cents,
                 c.routing_fee_cents, c.rebalancing_cost_cents, c.sats_back_cents, c.variable_cost_cents}) {
    if (v < 0) throw ValidationError("rail components must be non-negative");
  }
  if (c.tx_settled > c.tx_count) throw ValidationError("settled transactions exceed attempted");
  RailMonthRecord r;
  r.month = c.month;
  r.gmv_cents = c.gmv_cents;
  r.tx_count = c.tx_count;
  r.tx_settled = c.tx_settled;
  r.acquiring_fee_cents = c.acquiring_fee_cents;
  r.hedge_spread_cents = c.hedge_spread_cents;
  r.routing_fee_cents = c.routing_fee_cents;
  r.rebalancing_cost_cents = c.rebalancing_cost_cents;
  r.sats_back_cents = c.sats_back_cents;
  r.variable_cost_cents = c.variable_cost_cents;
  r.net_inflow_cents = c.acquiring_fee_cents + c.hedge_spread_cents + c.routing_fee_cents -
                       c.rebalancing_cost_cents - c.sats_back_cents - c.variable_cost_cents;
  return r;
}

nlohmann::json to_json(const RailMonthRecord& r) {
  return {{"month", r.month},
          {"gmv_cents", r.gmv_cents},
          {"tx_count", r.tx_count},
          {"tx_settled", r.tx_settled},
          {"acquiring_fee_cents", r.acquiring_fee_cents},
          {"hedge_spread_cents", r.hedge_spread_cents},
          {"routing_fee_cents", r.routing_fee_cents},
          {"rebalancing_cost_cents", r.rebalancing_cost_cents},
          {"sats_back_cents", r.sats_back_cents},
          {"variable_cost_cents", r.variable_cost_cents},
          {"net_inflow_cents", r.net_inflow_cents}};
}

}  // namespace satsrail::rail
