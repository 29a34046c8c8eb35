#include "satsrail/engine.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "satsrail/error.hpp"

namespace satsrail::engine {
namespace {

const std::filesystem::path kFixtures = SATSRAIL_FIXTURE_DIR;

std::int64_t floor_div(__int128 num, std::int64_t den) { return static_cast<std::int64_t>(num / den); }

ScenarioConfig fixture(const std::string& name) { return load_scenario_config(kFixtures / name); }

TEST(Kpi, EmptyMonth) {
  const auto k = kpi_month({}, {}, 100);
  EXPECT_EQ(k.gmv_cents, 0);
  EXPECT_EQ(k.realized_take_rate_bps, 0.0);
  EXPECT_EQ(k.payment_success_rate, 1.0);
  EXPECT_EQ(k.routing_revenue_per_100k_tx_cents, 0.0);
  EXPECT_EQ(k.rebalancing_cost_bps, 0.0);
  EXPECT_EQ(k.merchant_churn_rate, 0.0);
  EXPECT_EQ(k.opex_coverage_ratio, 0.0);
}

TEST(Kpi, Ratios) {
  rail::RailMonthRecord r;
  r.gmv_cents = 100'000'000;
  r.acquiring_fee_cents = 300'000;
  r.hedge_spread_cents = 50'000;
  r.routing_fee_cents = 150'000;
  r.rebalancing_cost_cents = 20;
  const auto k = kpi_month(r, {400, 300, 100'000}, 500'000, 0.1);
  EXPECT_DOUBLE_EQ(k.realized_take_rate_bps, 30.0);
  EXPECT_DOUBLE_EQ(k.payment_success_rate, 0.75);
  EXPECT_DOUBLE_EQ(k.routing_revenue_per_100k_tx_cents, 150'000.0 * 100'000 / 400);
  EXPECT_DOUBLE_EQ(k.rebalancing_cost_bps, 2.0);
  EXPECT_DOUBLE_EQ(k.opex_coverage_ratio, 1.0);
  EXPECT_DOUBLE_EQ(k.merchant_churn_rate, 0.1);
  EXPECT_TRUE(std::isinf(kpi_month(r, {}, 0).opex_coverage_ratio));
  EXPECT_EQ(kpi_to_json(kpi_month(r, {}, 0))["opex_coverage_ratio"], "uncovered-by-zero-opex");
}

TEST(RunPath, NothingHappensWithoutMerchantsOrOpex) {
  auto c = fixture("scenario_minimal.json");
  c.treasury.opex_monthly_cents = 0;
  c.market.stress_drawdown = 0.0;
  const auto p = run_path(c, 0);
  EXPECT_TRUE(p.survives);
  EXPECT_EQ(p.terminal_cash_cents, c.treasury.cash0_cents);
  EXPECT_EQ(p.kpi.gmv_cents, 0);
  EXPECT_EQ(p.kpi.payment_success_rate, 1.0);
  EXPECT_EQ(p.kpi.routing_revenue_per_100k_tx_cents, 0.0);
  EXPECT_EQ(p.kpi.rebalancing_cost_bps, 0.0);
  EXPECT_TRUE(std::isinf(p.kpi.opex_coverage_ratio));
}

TEST(RunPath, Deterministic) {
  const auto c = fixture("scenario_sweep.json");
  EXPECT_EQ(path_to_json(run_path(c, 3)).dump(), path_to_json(run_path(c, 3)).dump());
  EXPECT_NE(path_to_json(run_path(c, 3)).dump(), path_to_json(run_path(c, 4)).dump());
}

TEST(RunPath, HandLedger) {
  const auto c = fixture("scenario_hand_ledger.json");
  const auto p = run_path(c, 0);
  ASSERT_EQ(p.months.size(), 6u);
  cents_t cash = 10'000;
  for (int t = 1; t <= 6; ++t) {
    const auto price = static_cast<std::int64_t>(std::llround(10'000'000.0 - t * 5'000'000.0 / 6.0));
    ASSERT_EQ(p.prices[static_cast<std::size_t>(t)], price);
    const std::int64_t amount = floor_div(static_cast<__int128>(5'000) * 100'000'000'000, price);
    const std::int64_t hub_fee = 1'000'000 + floor_div(static_cast<__int128>(amount) * 10'000, 1'000'000);
    const std::int64_t routing = floor_div(static_cast<__int128>(hub_fee) * price, 100'000'000'000);
    const std::int64_t gross = floor_div(static_cast<__int128>(amount) * price, 100'000'000'000);
    const std::int64_t spread = gross * 5 / 10'000;
    const std::int64_t acquiring = 5'000 * 30 / 10'000;
    const auto& m = p.months[static_cast<std::size_t>(t - 1)];
    EXPECT_EQ(m.rail.routing_fee_cents, routing) << "month " << t;
    EXPECT_EQ(m.rail.hedge_spread_cents, spread) << "month " << t;
    EXPECT_EQ(m.rail.acquiring_fee_cents, acquiring);
    cash += acquiring + spread + routing - 200;
    EXPECT_EQ(m.cash_cents, cash) << "month " << t;
  }
  EXPECT_EQ(p.terminal_cash_cents, cash);
  EXPECT_EQ(p.terminal_cash_cents, 9'624);
  EXPECT_TRUE(p.survives);
}

TEST(RunPath, CoveredScenarioSurvivesStress) {
  const auto c = fixture("scenario_covered.json");
  const auto p = run_path(c, 0);
  EXPECT_TRUE(p.survives);
  EXPECT_EQ(p.prices.back(), 3'309'000);
  for (const auto& m : p.months) {
    EXPECT_GE(m.rail.net_inflow_cents, c.treasury.base_outflow_cents()) << "month " << m.month;
    EXPECT_GE(m.kpi.opex_coverage_ratio, 1.0);
  }
  EXPECT_EQ(p.total_rail_booked_cents, p.total_rail_net_cents);
  EXPECT_EQ(p.btc_core_sats, c.treasury.btc_core_sats);
  EXPECT_EQ(p.stress_trigger_fires, 1);
}

TEST(RunPath, NoMerchantsMatchesDirectSurvivalCheck) {
  const auto c = fixture("scenario_no_merchants.json");
  const auto p = run_path(c, 0);
  const std::vector<cents_t> in(24, 0), out(24, c.treasury.opex_monthly_cents);
  const auto direct = treasury::no_forced_sale(c.treasury.cash0_cents, in, out);
  EXPECT_FALSE(p.survives);
  EXPECT_EQ(p.breach_month, direct.breach_month);
  // $1,050,000 against $100,000 a month: $50,000 left after month 10, short in month 11.
  EXPECT_EQ(p.breach_month, 11);
  EXPECT_EQ(p.total_rail_net_cents, 0);
}

TEST(RunPath, TerminalModeJudgesAtHorizon) {
  auto c = fixture("scenario_no_merchants.json");
  c.treasury.survival_mode = treasury::SurvivalMode::kTerminal;
  const auto p = run_path(c, 0);
  EXPECT_FALSE(p.survives);
  EXPECT_EQ(p.breach_month, 24);
  EXPECT_EQ(p.terminal_cash_cents, 105'000'000 - 24 * 10'000'000);
  EXPECT_EQ(p.total_floor_adjustment_cents, 0);
}

TEST(RunPath, StressTriggerFiresOnceOnMonotonePath) {
  for (double dd : {0.3, 0.6, 0.9}) {
    auto c = fixture("scenario_covered.json");
    c.market.stress_drawdown = dd;
    c.market.stress_kind = market::StressKind::kExponential;
    const auto p = run_path(c, 0);
    EXPECT_EQ(p.stress_trigger_fires, dd >= c.stress_trigger.drawdown_threshold ? 1 : 0);
  }
}

TEST(RunScenario, SinglePathEqualsRunPath) {
  const auto c = fixture("scenario_covered.json");
  const auto r = run_scenario(c, 1);
  ASSERT_EQ(r.paths.size(), 1u);
  EXPECT_EQ(path_to_json(r.paths[0]).dump(), path_to_json(run_path(c, 0)).dump());
  EXPECT_EQ(r.survival_probability, 1.0);
}

TEST(RunScenario, SerialAndParallelAreByteIdentical) {
  auto c = fixture("scenario_sweep.json");
  c.monte_carlo.num_paths = 8;
  const auto serial = report_to_json(run_scenario(c, 1)).dump();
  const auto parallel = report_to_json(run_scenario(c, 4)).dump();
  EXPECT_EQ(serial, parallel);
}

TEST(RunScenario, SurvivalMonotoneInCash0) {
  auto c = fixture("scenario_sweep.json");
  double prev = -1.0;
  for (cents_t cash0 : {0LL, 20'000'000LL, 40'000'000LL, 80'000'000LL, 160'000'000LL}) {
    c.treasury.cash0_cents = cash0;
    const double p = run_scenario(c, 1).survival_probability;
    EXPECT_GE(p, prev);
    prev = p;
  }
  EXPECT_EQ(prev, 1.0);
}

TEST(Config, UnknownKeyIsNamed) {
  auto doc = config_to_json(fixture("scenario_minimal.json"));
  doc["rail"]["spred_bps"] = 5;
  try {
    parse_scenario_config(doc);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "rail.spred_bps");
  }
}

TEST(Config, MissingAndInvalidKeys) {
  using nlohmann::json;
  auto expect_key = [](const json& doc, const std::string& key) {
    try {
      parse_scenario_config(doc);
      ADD_FAILURE() << "expected failure for " << key;
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.key(), key);
    }
  };
  expect_key(json::parse(R"({"graph": {"nodes": ["h"], "hub": "h"}})"), "treasury");
  expect_key(json::parse(R"({"treasury": {}, "graph": {"nodes": ["h"], "hub": "h"}})"), "treasury.cash0_cents");
  expect_key(json::parse(R"({"treasury": {"cash0_cents": 1, "horizon_months": 0}, "graph": {"nodes": ["h"], "hub": "h"}})"),
             "treasury.horizon_months");
  expect_key(json::parse(R"({"treasury": {"cash0_cents": 1}, "graph": {"nodes": ["h"], "hub": "h"},
                            "monte_carlo": {"num_paths": 0}})"),
             "monte_carlo.num_paths");
  expect_key(json::parse(R"({"treasury": {"cash0_cents": 1}, "graph": {"nodes": ["h"], "hub": "x"}})"), "graph");
  expect_key(json::parse(R"({"treasury": {"cash0_cents": "lots"}, "graph": {"nodes": ["h"], "hub": "h"}})"),
             "treasury.cash0_cents");
  expect_key(json::parse(R"({"treasury": {"cash0_cents": 1}, "graph": {"nodes": ["h"], "hub": "h"},
                            "merchants": [{"id": "m", "node": "nowhere", "monthly_gmv_cents": 5}],
                            "rail": {"payers": ["h"]}})"),
             "merchants[0].node");
}

TEST(Config, EchoRoundTrips) {
  const auto c = fixture("scenario_covered.json");
  const auto echo = config_to_json(c);
  EXPECT_EQ(config_to_json(parse_scenario_config(echo)), echo);
}

TEST(Report, CsvHasOneRowPerMonth) {
  const auto r = run_scenario(fixture("scenario_hand_ledger.json"), 1);
  const auto csv = report_to_csv(r);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_EQ(csv.rfind("month,price,cash,gmv,success_rate,coverage", 0), 0u);
}

}  // namespace
}  // namespace satsrail::engine
