#include "satsrail/treasury.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "satsrail/error.hpp"

namespace satsrail::treasury {
namespace {

const std::filesystem::path kData = SATSRAIL_DATA_DIR;

TreasuryConfig config(cents_t cash0, cents_t opex, int horizon = 24, SurvivalMode mode = SurvivalMode::kPathwise) {
  TreasuryConfig c;
  c.btc_core_sats = 50 * kSatsPerBtc;
  c.cash0_cents = cash0;
  c.opex_monthly_cents = opex;
  c.horizon_months = horizon;
  c.survival_mode = mode;
  return c;
}

TEST(Step, ZeroFlowsOnlyAdvanceMonth) {
  const auto cfg = config(1'000, 0);
  const auto s0 = initial_state(cfg);
  const auto s1 = step_treasury(s0, cfg, 11'030'000, 0);
  EXPECT_EQ(s1.month, 1);
  EXPECT_EQ(s1.cash_cents, s0.cash_cents);
  EXPECT_EQ(s1.btc_core_sats, s0.btc_core_sats);
  EXPECT_FALSE(s1.forced_sale);
}

TEST(Step, BreachRecordsRequiredSale) {
  auto cfg = config(100, 150);
  const auto s1 = step_treasury(initial_state(cfg), cfg, 10'000'000, 0);
  EXPECT_TRUE(s1.forced_sale);
  EXPECT_EQ(s1.breach_month, 1);
  EXPECT_EQ(s1.required_sale_sats, 500);
  EXPECT_EQ(s1.cash_cents, 0);
  EXPECT_EQ(s1.min_cash_cents, -50);
  EXPECT_EQ(s1.btc_core_sats, cfg.btc_core_sats);
}

TEST(Step, RequiredSaleRoundsUp) {
  auto cfg = config(0, 1);
  const auto s1 = step_treasury(initial_state(cfg), cfg, 11'030'000, 0);
  EXPECT_EQ(s1.required_sale_sats, 10);  // ceil(1e8 / 11,030,000)
}

TEST(Step, CannotStepPastHorizon) {
  auto cfg = config(0, 0, 1);
  const auto s1 = step_treasury(initial_state(cfg), cfg, 100, 0);
  EXPECT_THROW(step_treasury(s1, cfg, 100, 0), ValidationError);
}

TEST(Step, CompoundYieldMatchesClosedForm) {
  auto cfg = config(1'000'000'00, 0, 12);
  cfg.cash_yield_apy = 0.05;
  auto s = initial_state(cfg);
  for (int t = 0; t < 12; ++t) s = step_treasury(s, cfg, 11'030'000, 0);
  const double expect = 1'000'000'00.0 * 1.05;
  EXPECT_LE(std::abs(static_cast<double>(s.cash_cents) - expect), 1.0);
}

TEST(Step, HandLedger) {
  // cash0 $1,000; months: rail +200/-50/+0/+400, opex 300, interest 50, capex 25 (cents).
  auto cfg = config(1'000, 300, 4);
  cfg.interest_monthly_cents = 50;
  cfg.capex_monthly_cents = 25;
  const cents_t rail[] = {200, -50, 0, 400};
  // 1000+200-375=825; 825-50-375=400; 400-375=25; 25+400-375-10=40
  const cents_t expect[] = {825, 400, 25, 40};
  auto s = initial_state(cfg);
  for (int t = 0; t < 4; ++t) {
    s = step_treasury(s, cfg, 11'030'000, rail[t], t == 3 ? 10 : 0);
    ASSERT_EQ(s.cash_cents, expect[t]);
  }
  EXPECT_FALSE(s.forced_sale);
  EXPECT_EQ(s.min_cash_cents, 25);
  EXPECT_EQ(s.cumulative_outflows_cents, 4 * 375 + 10);
  EXPECT_EQ(s.cumulative_inflows_cents, 550);
}

TEST(Step, LedgerIdentityHoldsAcrossBreaches) {
  std::mt19937_64 rng(31);
  for (auto mode : {SurvivalMode::kPathwise, SurvivalMode::kTerminal}) {
    for (int trial = 0; trial < 200; ++trial) {
      auto cfg = config(static_cast<cents_t>(rng() % 10'000), static_cast<cents_t>(rng() % 1'000), 36, mode);
      cfg.cash_yield_apy = (rng() % 2) ? 0.04 : 0.0;
      auto s = initial_state(cfg);
      for (int t = 0; t < 36; ++t) {
        s = step_treasury(s, cfg, 1 + static_cast<cents_t>(rng() % 20'000'000),
                          static_cast<cents_t>(rng() % 1'600) - 500);
      }
      cents_t in = 0, out = 0, adj = 0;
      for (const auto& e : s.ledger) {
        in += e.rail_inflow_cents + e.yield_cents;
        out += e.outflow_cents;
        adj += e.floor_adjustment_cents;
      }
      ASSERT_EQ(in, s.cumulative_inflows_cents);
      ASSERT_EQ(out, s.cumulative_outflows_cents);
      ASSERT_EQ(s.cash_cents, cfg.cash0_cents + in - out + adj);
      ASSERT_EQ(s.forced_sale, s.breach_month.has_value());
      ASSERT_EQ(s.btc_core_sats, cfg.btc_core_sats);
      if (mode == SurvivalMode::kTerminal) ASSERT_EQ(adj, 0);
    }
  }
}

TEST(NoForcedSale, EqualityBoundarySurvives) {
  const std::vector<cents_t> flows{100, 200, 300};
  for (auto mode : {SurvivalMode::kPathwise, SurvivalMode::kTerminal}) {
    const auto v = no_forced_sale(0, flows, flows, mode);
    EXPECT_TRUE(v.survives);
    EXPECT_EQ(v.terminal_cash_cents, 0);
  }
}

TEST(NoForcedSale, ModeGap) {
  const std::vector<cents_t> in{0, 200}, out{150, 0};
  const auto terminal = no_forced_sale(100, in, out, SurvivalMode::kTerminal);
  EXPECT_TRUE(terminal.survives);
  EXPECT_EQ(terminal.terminal_cash_cents, 150);
  const auto pathwise = no_forced_sale(100, in, out, SurvivalMode::kPathwise);
  EXPECT_FALSE(pathwise.survives);
  EXPECT_EQ(pathwise.breach_month, 1);
  EXPECT_EQ(pathwise.min_cash_cents, -50);
}

TEST(NoForcedSale, Errors) {
  const std::vector<cents_t> a{1, 2}, b{1};
  EXPECT_THROW(no_forced_sale(0, a, b), ValidationError);
}

TEST(NoForcedSale, MonotoneDominanceAndScaleInvariant) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 2'000; ++trial) {
    const std::size_t n = 1 + rng() % 24;
    std::vector<cents_t> in(n), out(n);
    for (std::size_t i = 0; i < n; ++i) {
      in[i] = static_cast<cents_t>(rng() % 1'000);
      out[i] = static_cast<cents_t>(rng() % 1'000);
    }
    const cents_t cash0 = static_cast<cents_t>(rng() % 5'000);
    const auto p = no_forced_sale(cash0, in, out, SurvivalMode::kPathwise);
    const auto t = no_forced_sale(cash0, in, out, SurvivalMode::kTerminal);
    if (p.survives) ASSERT_TRUE(t.survives);
    if (p.survives) ASSERT_TRUE(no_forced_sale(cash0 + 1 + static_cast<cents_t>(rng() % 100), in, out).survives);
    auto more = in;
    more[rng() % n] += 1 + static_cast<cents_t>(rng() % 100);
    if (p.survives) ASSERT_TRUE(no_forced_sale(cash0, more, out).survives);
    std::vector<cents_t> in100, out100;
    for (auto v : in) in100.push_back(v * 100);
    for (auto v : out) out100.push_back(v * 100);
    const auto scaled = no_forced_sale(cash0 * 100, in100, out100);
    ASSERT_EQ(scaled.survives, p.survives);
    ASSERT_EQ(scaled.breach_month, p.breach_month);
  }
}

TEST(Var, ClosedForm) {
  EXPECT_EQ(sleeve_var(1'000'000'00, 0.0, 0.99), 0);
  const cents_t v = sleeve_var(1'000'000'00, 0.20, 0.99);
  EXPECT_NEAR(static_cast<double>(v), 372'100'00.0, 500'00.0);
  EXPECT_LT(sleeve_var(1'000'000'00, 0.19, 0.99), v);
  EXPECT_LT(sleeve_var(1'000'000'00, 0.20, 0.98), v);
  EXPECT_THROW(sleeve_var(100, 0.2, 1.0), ValidationError);
  EXPECT_THROW(sleeve_var(100, 0.2, 0.4), ValidationError);
}

TEST(Var, AgreesWithMonteCarloQuantile) {
  const double mc = oracle::var_monte_carlo(1'000'000'00.0, 0.20, 0.99, 1'000'000, 2024);
  const auto v = static_cast<double>(sleeve_var(1'000'000'00, 0.20, 0.99));
  EXPECT_NEAR(v / mc, 1.0, 0.01);
}

TEST(Var, CapCheck) {
  const auto pass = check_var_cap(100, 1'000, 0.2);
  EXPECT_TRUE(pass.passes);
  EXPECT_EQ(pass.cap_cents, 200);
  EXPECT_EQ(pass.headroom_cents, 100);
  const auto fail = check_var_cap(100, -5, 0.2);
  EXPECT_FALSE(fail.passes);
  EXPECT_EQ(fail.cap_cents, 0);
  EXPECT_TRUE(check_var_cap(0, 0, 0.2).passes);
}

TEST(Mnav, Identity) {
  EXPECT_DOUBLE_EQ(mnav(11'030'000 * 10, 10.0, 11'030'000.0), 1.0);
  EXPECT_NEAR(mnav(7'739'500'000'000, 640'808, 11'030'000.0), 1.095, 0.005);
  EXPECT_DOUBLE_EQ(mnav(3 * 500, 2.0, 3 * 250.0), mnav(500, 2.0, 250.0));
  EXPECT_THROW(mnav(100, 0.0, 1.0), ValidationError);
  EXPECT_THROW(mnav(100, 1.0, 0.0), ValidationError);
}

TEST(Mnav, ImpliedPriceReproducesPublishedRows) {
  const auto rows = load_holdings_csv(kData / "top10_btc_holdings.csv");
  ASSERT_EQ(rows.size(), 10u);
  const double implied = implied_price_cents(rows[0].mkt_cap_cents, rows[0].btc_held, 1.095);
  EXPECT_NEAR(implied / 100.0, 110'300.0, 50.0);
  const std::vector<double> printed{1.095, 1.020, 1.077, 0.065, 2.136, 2.227, 3.486, 1159.877, 0.090, 0.979};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_NEAR(mnav(rows[i].mkt_cap_cents, rows[i].btc_held, 11'030'000.0) / printed[i], 1.0, 0.01) << rows[i].ticker;
  }
}

TEST(BtcPerShare, Basics) {
  EXPECT_DOUBLE_EQ(btc_per_share(5.0, 5), 1.0);
  EXPECT_NEAR(btc_per_share(640'808, 287'170'000), 0.00223146, 5e-9);
  EXPECT_DOUBLE_EQ(btc_per_share(10.0, 50), 2.0 * btc_per_share(10.0, 100));
  EXPECT_THROW(btc_per_share(1.0, 0), ValidationError);
}

TEST(HoldingsCsv, OptionalSharesAndRowErrors) {
  const auto rows = parse_holdings_csv("ticker,btc_held,mkt_cap_usd,shares_outstanding\nAAA,10,1000000,\nBBB,2.5,10.50,100\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].shares_outstanding);
  EXPECT_EQ(rows[1].mkt_cap_cents, 1'050);
  EXPECT_EQ(rows[1].shares_outstanding, 100);
  try {
    parse_holdings_csv("ticker,btc_held,mkt_cap_usd,shares_outstanding\nAAA,10,1000,\nBBB,x,10,\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3u);
  }
  EXPECT_THROW(parse_holdings_csv("ticker,btc_held,mkt_cap_usd,shares_outstanding\nAAA,10\n"), ParseError);
  EXPECT_THROW(parse_holdings_csv("ticker,btc_held,mkt_cap_usd,shares_outstanding\nAAA,0,10,\n"), ParseError);
}

TEST(Config, ValidateNamesField) {
  auto c = config(0, 0);
  c.sleeve_fraction = 1.5;
  try {
    c.validate();
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("sleeve_fraction", 0), 0u);
  }
}

}  // namespace
}  // namespace satsrail::treasury
