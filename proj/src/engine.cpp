#include "satsrail/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "satsrail/error.hpp"
#include "satsrail/rng.hpp"

namespace satsrail::engine {

namespace {

using nlohmann::json;

struct RebalanceTally {
  msat_t cost_msat = 0;
  msat_t volume_msat = 0;
};

double hub_share(const ln::ChannelGraph& g, std::size_t idx) {
  const auto& c = g.channel(idx);
  return static_cast<double>(c.balance_of(g.hub())) / static_cast<double>(c.capacity_msat);
}

// Tops up the hub's most depleted channels from its fullest one with circular
// payments until every channel is above the low watermark or no further
// rebalance succeeds.
RebalanceTally rebalance_hub(ln::ChannelGraph& g, const RebalanceParams& p) {
  RebalanceTally tally;
  if (!p.enabled) return tally;
  std::set<std::string> exhausted;
  for (int i = 0; i < p.max_per_month; ++i) {
    const auto chans = g.hub_channels();
    std::optional<std::size_t> needy;
    std::optional<std::size_t> donor;
    for (std::size_t idx : chans) {
      const auto& id = g.channel(idx).id;
      const double share = hub_share(g, idx);
      if (!exhausted.contains(id) &&
          (!needy || share < hub_share(g, *needy) || (share == hub_share(g, *needy) && id < g.channel(*needy).id))) {
        needy = idx;
      }
      if (!donor || share > hub_share(g, *donor) || (share == hub_share(g, *donor) && id < g.channel(*donor).id)) {
        donor = idx;
      }
    }
    if (!needy || !donor || *needy == *donor) break;
    if (hub_share(g, *needy) >= p.low_watermark || hub_share(g, *donor) <= p.target) break;

    const auto& n = g.channel(*needy);
    const auto& d = g.channel(*donor);
    const auto want = static_cast<msat_t>(p.target * static_cast<double>(n.capacity_msat)) - n.balance_of(g.hub());
    const auto spare = d.balance_of(g.hub()) - static_cast<msat_t>(std::ceil(p.target * static_cast<double>(d.capacity_msat)));
    const msat_t amount = std::min(want, spare);
    if (amount <= 0) {
      exhausted.insert(n.id);
      continue;
    }
    const msat_t max_fee = mul_div_floor(amount, p.max_fee_ppm, kPpmDenominator);
    const std::string needy_id = n.id;
    const auto result = ln::rebalance(g, d.id, needy_id, amount, max_fee);
    if (result.status != ln::PaymentStatus::kSettled) {
      exhausted.insert(needy_id);
      continue;
    }
    tally.cost_msat += result.cost_msat;
    tally.volume_msat += amount;
  }
  return tally;
}

msat_t sleeve_capacity(const ln::ChannelGraph& g, const std::vector<std::string>& ids) {
  msat_t total = 0;
  for (const auto& id : ids) {
    const auto& c = g.channel(*g.channel_index(id));
    if (c.open) total += c.capacity_msat;
  }
  return total;
}

json coverage_json(double coverage) {
  if (std::isinf(coverage)) return "uncovered-by-zero-opex";
  return coverage;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json optional_json(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }
json optional_json(const std::optional<sats_t>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

KpiRow kpi_month(const rail::RailMonthRecord& record, const RoutingStats& routing, cents_t opex_cents,
                 double churn_rate) {
  if (opex_cents < 0) throw ValidationError("opex must be non-negative");
  KpiRow k;
  k.gmv_cents = record.gmv_cents;
  if (record.gmv_cents > 0) {
    k.realized_take_rate_bps =
        static_cast<double>(record.acquiring_fee_cents) * 10'000.0 / static_cast<double>(record.gmv_cents);
  }
  if (routing.attempted > 0) {
    k.payment_success_rate = static_cast<double>(routing.settled) / static_cast<double>(routing.attempted);
    k.routing_revenue_per_100k_tx_cents =
        static_cast<double>(record.routing_fee_cents) * 100'000.0 / static_cast<double>(routing.attempted);
  }
  if (routing.rebalance_volume_cents > 0) {
    k.rebalancing_cost_bps = static_cast<double>(record.rebalancing_cost_cents) * 10'000.0 /
                             static_cast<double>(routing.rebalance_volume_cents);
  }
  k.merchant_churn_rate = churn_rate;
  k.opex_coverage_ratio = opex_cents == 0 ? kUncoveredByZeroOpex
                                          : static_cast<double>(record.fee_revenue_cents()) /
                                                static_cast<double>(opex_cents);
  return k;
}

market::PricePath price_path_for(const ScenarioConfig& config, int path_index) {
  const int horizon = config.treasury.horizon_months;
  if (config.market.model == MarketModel::kGbm) {
    const std::uint64_t seed = derive_seed({config.monte_carlo.master_seed, static_cast<std::uint64_t>(path_index),
                                            static_cast<std::uint64_t>(StreamTag::kMarket)});
    return market::gen_gbm_path({config.market.gbm_mu, config.market.gbm_sigma, horizon},
                                config.market.start_price_cents, seed);
  }
  return market::gen_stress_path({config.market.stress_kind, config.market.stress_drawdown, horizon},
                                 config.market.start_price_cents);
}

PathResult run_path(const ScenarioConfig& config, int path_index) {
  const auto& tc = config.treasury;
  const auto& rp = config.rail;

  ln::ChannelGraph graph = ln::build_graph(config.graph);
  std::vector<std::string> sleeve_ids;
  const msat_t sleeve_msat = static_cast<msat_t>(std::floor(tc.sleeve_fraction * static_cast<double>(tc.btc_core_sats))) * kMsatPerSat;
  if (sleeve_msat > 0 && !config.sleeve.peers.empty()) {
    ln::SleeveOptions opts;
    opts.min_channel_msat = config.sleeve.min_channel_msat;
    opts.hub_policy = config.sleeve.hub_policy;
    opts.peer_policy = config.sleeve.peer_policy;
    sleeve_ids = ln::deploy_sleeve(graph, sleeve_msat, config.sleeve.peers, opts);
  }
  const msat_t sleeve_baseline = sleeve_capacity(graph, sleeve_ids);

  const market::PricePath path = price_path_for(config, path_index);
  const std::uint64_t path_seed =
      derive_seed({config.monte_carlo.master_seed, static_cast<std::uint64_t>(path_index)});

  std::vector<rail::Merchant> merchants = config.merchants;
  std::int64_t active_start = 0;
  for (const auto& m : merchants) active_start += m.active ? 1 : 0;

  treasury::TreasuryState state = treasury::initial_state(tc, sleeve_baseline);
  PathResult result;
  result.path_index = path_index;
  result.prices = path.prices;

  rail::RailMonthRecord agg_record;
  RoutingStats agg_routing;
  cents_t peak = path.prices.front();
  bool trigger_armed = true;
  std::vector<cents_t> booked_inflows;
  std::vector<cents_t> booked_outflows;

  for (int t = 1; t <= tc.horizon_months; ++t) {
    const cents_t price = path.prices[static_cast<std::size_t>(t)];
    MonthResult month;
    month.month = t;
    month.price_cents = price;

    // (1)-(2) price step and drawdown-triggered sleeve shrink.
    peak = std::max(peak, price);
    const double drawdown = 1.0 - static_cast<double>(price) / static_cast<double>(peak);
    if (drawdown >= config.stress_trigger.drawdown_threshold) {
      if (trigger_armed && !sleeve_ids.empty()) {
        const auto shrink = ln::shrink_sleeve(graph, config.stress_trigger.shrink_target, sleeve_baseline, sleeve_ids);
        result.sleeve_freed_msat += shrink.freed_msat;
        ++result.stress_trigger_fires;
        month.stress_fired = true;
      }
      trigger_armed = false;
    } else {
      trigger_armed = true;
    }

    // (3) payments, routing, rebalancing.
    const auto batch = rail::gen_monthly_payments(merchants, t, price, path_seed, rp.tickets, rp.payers,
                                                  config.payment_sample_cap);
    const std::size_t n_merchants = merchants.size();
    std::vector<cents_t> attempted_fiat(n_merchants, 0);
    std::vector<cents_t> settled_fiat(n_merchants, 0);
    std::vector<cents_t> spread_sampled(n_merchants, 0);
    std::int64_t settled_count = 0;
    msat_t hub_fees_msat = 0;
    for (const auto& req : batch.requests) {
      attempted_fiat[req.merchant_index] += req.fiat_cents;
      const msat_t max_fee = rp.max_fee_base_msat + mul_div_floor(req.amount_msat, rp.max_fee_ppm, kPpmDenominator);
      const auto sent = ln::send_payment(graph, req.payer, req.merchant_node, req.amount_msat, max_fee, rp.max_retries);
      if (sent.result.status != ln::PaymentStatus::kSettled) continue;
      ++settled_count;
      settled_fiat[req.merchant_index] += req.fiat_cents;
      const ln::Route& route = *sent.result.route;
      for (std::size_t h = 1; h < route.hops.size(); ++h) {
        if (route.hops[h].from == graph.hub()) hub_fees_msat += route.fees_msat[h];
      }
      // (4) same-instant hedge of fiat-settled receipts.
      if (merchants[req.merchant_index].settle_mode == rail::SettleMode::kFiat) {
        spread_sampled[req.merchant_index] += rail::hedge_settlement(req.amount_msat, price, rp.spread_bps).spread_revenue_cents;
      }
    }
    const RebalanceTally rebal = rebalance_hub(graph, config.rebalance);

    // Extrapolate the sampled month to full GMV.
    const auto sampled = static_cast<std::int64_t>(batch.requests.size());
    const std::int64_t total_tx = batch.total_tx_count;
    const std::int64_t scale_num = sampled > 0 ? total_tx : 1;
    const std::int64_t scale_den = sampled > 0 ? sampled : 1;

    rail::RailComponents comp;
    comp.month = t;
    comp.tx_count = total_tx;
    comp.tx_settled = std::min(total_tx, mul_div_floor(settled_count, scale_num, scale_den));
    cents_t sats_back = 0;
    for (const auto& draw : batch.draws) {
      if (draw.sampled == 0) continue;
      const std::size_t i = draw.merchant_index;
      const auto& m = merchants[i];
      const cents_t gmv_settled = mul_div_floor(m.monthly_gmv_cents, settled_fiat[i], attempted_fiat[i]);
      comp.gmv_cents += gmv_settled;
      comp.acquiring_fee_cents += rail::acquiring_fee(gmv_settled, m.take_rate_bps);
      comp.hedge_spread_cents += mul_div_floor(spread_sampled[i], m.monthly_gmv_cents, attempted_fiat[i]);
      sats_back += rail::sats_back_outlay(gmv_settled, m.sats_back_bps);
    }
    comp.sats_back_cents = rp.sats_back_funding == SatsBackFunding::kRail ? sats_back : 0;
    comp.variable_cost_cents = rail::apply_bps(comp.gmv_cents, rp.variable_cost_bps);
    comp.routing_fee_cents = msat_to_cents_floor(mul_div_floor(hub_fees_msat, scale_num, scale_den), price);
    comp.rebalancing_cost_cents = msat_to_cents_ceil(mul_div_ceil(rebal.cost_msat, scale_num, scale_den), price);
    month.rail = rail::month_rail_cashflow(comp);
    month.routing = {total_tx, comp.tx_settled,
                     msat_to_cents_floor(mul_div_floor(rebal.volume_msat, scale_num, scale_den), price)};
    month.sampled_payments = sampled;

    // (5) treasury step with C_P,t = the rail's net inflow.
    state.sleeve_deployed_msat = sleeve_capacity(graph, sleeve_ids);
    state = treasury::step_treasury(state, tc, price, month.rail.net_inflow_cents);
    result.total_rail_booked_cents += state.ledger.back().rail_inflow_cents;
    result.total_rail_net_cents += month.rail.net_inflow_cents;
    booked_inflows.push_back(state.ledger.back().rail_inflow_cents + state.ledger.back().yield_cents);
    booked_outflows.push_back(state.ledger.back().outflow_cents);
    month.cash_cents = state.cash_cents;

    // (6) churn driven by the sampled success rate.
    const double success = sampled > 0 ? static_cast<double>(settled_count) / static_cast<double>(sampled) : 1.0;
    const auto churn = rail::apply_churn(merchants, success, path_seed, t, rp.churn);
    for (const auto& m : merchants) month.active_merchants += m.active ? 1 : 0;

    // (7) sleeve VaR against the cap, reported only.
    month.sleeve_deployed_msat = state.sleeve_deployed_msat;
    const cents_t sleeve_value = msat_to_cents_floor(state.sleeve_deployed_msat, price);
    month.var = treasury::check_var_cap(treasury::sleeve_var(sleeve_value, tc.var_sigma_monthly, tc.var_confidence),
                                        state.cash_cents, tc.var_cap_fraction);
    if (!month.var.passes) ++result.var_breach_months;

    month.kpi = kpi_month(month.rail, month.routing, tc.opex_monthly_cents, churn.churn_rate);

    agg_record.gmv_cents += month.rail.gmv_cents;
    agg_record.acquiring_fee_cents += month.rail.acquiring_fee_cents;
    agg_record.hedge_spread_cents += month.rail.hedge_spread_cents;
    agg_record.routing_fee_cents += month.rail.routing_fee_cents;
    agg_record.rebalancing_cost_cents += month.rail.rebalancing_cost_cents;
    agg_routing.attempted += month.routing.attempted;
    agg_routing.settled += month.routing.settled;
    agg_routing.rebalance_volume_cents += month.routing.rebalance_volume_cents;

    if (config.include_months) result.months.push_back(std::move(month));
  }

  if (result.total_rail_booked_cents != result.total_rail_net_cents) {
    throw std::logic_error("rail inflow booked into the treasury does not reconcile with rail records");
  }
  if (state.cash_cents != tc.cash0_cents + state.cumulative_inflows_cents - state.cumulative_outflows_cents +
                              state.cumulative_floor_adjustment_cents) {
    throw std::logic_error("treasury ledger identity violated");
  }
  const auto verdict = treasury::no_forced_sale(tc.cash0_cents, booked_inflows, booked_outflows, tc.survival_mode);
  if (verdict.survives == state.forced_sale || verdict.breach_month != state.breach_month) {
    throw std::logic_error("treasury step verdict disagrees with the no-forced-sale check");
  }

  std::int64_t active_end = 0;
  for (const auto& m : merchants) active_end += m.active ? 1 : 0;
  const double churn_total =
      active_start > 0 ? 1.0 - static_cast<double>(active_end) / static_cast<double>(active_start) : 0.0;
  result.kpi = kpi_month(agg_record, agg_routing, tc.opex_monthly_cents * tc.horizon_months, churn_total);

  result.survives = !state.forced_sale;
  result.breach_month = state.breach_month;
  result.min_cash_cents = state.min_cash_cents;
  result.terminal_cash_cents = state.cash_cents;
  result.required_sale_sats = state.required_sale_sats;
  result.btc_core_sats = state.btc_core_sats;
  result.total_outflow_cents = state.cumulative_outflows_cents;
  result.total_floor_adjustment_cents = state.cumulative_floor_adjustment_cents;
  for (const auto& e : state.ledger) result.total_yield_cents += e.yield_cents;
  return result;
}

ScenarioReport run_scenario(const ScenarioConfig& config, unsigned threads) {
  validate_config(config);
  const int n = config.monte_carlo.num_paths;
  std::vector<PathResult> results(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));

  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = std::min<unsigned>(workers, static_cast<unsigned>(n));
  auto work = [&](unsigned w) {
    for (int i = static_cast<int>(w); i < n; i += static_cast<int>(workers)) {
      try {
        results[static_cast<std::size_t>(i)] = run_path(config, i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ScenarioReport report;
  report.config_echo = config_to_json(config);
  report.master_seed = config.monte_carlo.master_seed;
  report.num_paths = n;
  double coverage_sum = 0.0;
  int coverage_count = 0;
  json paths_json = json::array();
  for (auto& r : results) {
    if (r.survives) ++report.surviving_paths;
    if (std::isfinite(r.kpi.opex_coverage_ratio)) {
      coverage_sum += r.kpi.opex_coverage_ratio;
      ++coverage_count;
    }
    paths_json.push_back(path_to_json(r));
  }
  report.survival_probability = static_cast<double>(report.surviving_paths) / static_cast<double>(n);
  if (coverage_count > 0) report.mean_coverage = coverage_sum / coverage_count;
  report.reconciliation_hash = hex64(fnv1a64(paths_json.dump()));
  report.paths = std::move(results);
  return report;
}

json kpi_to_json(const KpiRow& k) {
  return {{"gmv_cents", k.gmv_cents},
          {"realized_take_rate_bps", k.realized_take_rate_bps},
          {"payment_success_rate", k.payment_success_rate},
          {"routing_revenue_per_100k_tx_cents", k.routing_revenue_per_100k_tx_cents},
          {"rebalancing_cost_bps", k.rebalancing_cost_bps},
          {"merchant_churn_rate", k.merchant_churn_rate},
          {"opex_coverage_ratio", coverage_json(k.opex_coverage_ratio)}};
}

json path_to_json(const PathResult& p) {
  json j = {{"path_index", p.path_index},
            {"survives", p.survives},
            {"breach_month", optional_json(p.breach_month)},
            {"min_cash_cents", p.min_cash_cents},
            {"terminal_cash_cents", p.terminal_cash_cents},
            {"required_sale_sats", optional_json(p.required_sale_sats)},
            {"btc_core_sats", p.btc_core_sats},
            {"prices_cents", p.prices},
            {"kpi", kpi_to_json(p.kpi)},
            {"stress_trigger_fires", p.stress_trigger_fires},
            {"var_breach_months", p.var_breach_months},
            {"sleeve_freed_msat", p.sleeve_freed_msat},
            {"total_rail_net_cents", p.total_rail_net_cents},
            {"total_rail_booked_cents", p.total_rail_booked_cents},
            {"total_yield_cents", p.total_yield_cents},
            {"total_outflow_cents", p.total_outflow_cents},
            {"total_floor_adjustment_cents", p.total_floor_adjustment_cents}};
  if (!p.months.empty()) {
    json months = json::array();
    for (const auto& m : p.months) {
      months.push_back({{"month", m.month},
                        {"price_cents", m.price_cents},
                        {"cash_cents", m.cash_cents},
                        {"rail", rail::to_json(m.rail)},
                        {"kpi", kpi_to_json(m.kpi)},
                        {"sampled_payments", m.sampled_payments},
                        {"sample_scale_factor", m.sampled_payments > 0 ? static_cast<double>(m.rail.tx_count) /
                                                                             static_cast<double>(m.sampled_payments)
                                                                       : 0.0},
                        {"active_merchants", m.active_merchants},
                        {"sleeve_deployed_msat", m.sleeve_deployed_msat},
                        {"stress_fired", m.stress_fired},
                        {"var",
                         {{"var_cents", m.var.var_cents},
                          {"cap_cents", m.var.cap_cents},
                          {"passes", m.var.passes},
                          {"headroom_cents", m.var.headroom_cents}}}});
    }
    j["months"] = std::move(months);
  }
  return j;
}

json report_to_json(const ScenarioReport& r) {
  json paths = json::array();
  for (const auto& p : r.paths) paths.push_back(path_to_json(p));
  return {{"survival_probability", r.survival_probability},
          {"surviving_paths", r.surviving_paths},
          {"num_paths", r.num_paths},
          {"master_seed", r.master_seed},
          {"mean_coverage", r.mean_coverage ? json(*r.mean_coverage) : json("uncovered-by-zero-opex")},
          {"reconciliation_hash", r.reconciliation_hash},
          {"config", r.config_echo},
          {"paths", std::move(paths)}};
}

std::string report_to_csv(const ScenarioReport& report) {
  std::ostringstream out;
  out << "month,price,cash,gmv,success_rate,coverage,net_inflow,routing_fee,rebalancing_cost,churn_rate,"
         "sleeve_deployed_msat,var_ok,path\n";
  char buf[64];
  auto real = [&](double v) {
    if (std::isinf(v)) return std::string("inf");
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  for (const auto& p : report.paths) {
    for (const auto& m : p.months) {
      out << m.month << ',' << m.price_cents << ',' << m.cash_cents << ',' << m.rail.gmv_cents << ','
          << real(m.kpi.payment_success_rate) << ',' << real(m.kpi.opex_coverage_ratio) << ','
          << m.rail.net_inflow_cents << ',' << m.rail.routing_fee_cents << ',' << m.rail.rebalancing_cost_cents << ','
          << real(m.kpi.merchant_churn_rate) << ',' << m.sleeve_deployed_msat << ',' << (m.var.passes ? 1 : 0) << ','
          << p.path_index << '\n';
    }
  }
  return out.str();
}

}  // namespace satsrail::engine
