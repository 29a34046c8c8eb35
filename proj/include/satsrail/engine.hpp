#pragma once

// Scenario orchestration: per-path monthly loop, Monte Carlo aggregation and
// the KPI set disclosed for the payments rail.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "satsrail/lightning.hpp"
#include "satsrail/market.hpp"
#include "satsrail/rail.hpp"
#include "satsrail/treasury.hpp"

namespace satsrail::engine {

enum class MarketModel { kGbm, kStress };

struct MarketConfig {
  MarketModel model = MarketModel::kStress;
  cents_t start_price_cents = 110'300'00;
  double gbm_mu = 0.0;
  double gbm_sigma = 0.6;
  market::StressKind stress_kind = market::StressKind::kLinear;
  double stress_drawdown = 0.70;
};

enum class SatsBackFunding {
  kRail,      // booked as a rail cost
  kMerchant,  // pass-through, reimbursed by the merchant on top of the take rate
};

struct RailParams {
  rail::TicketModel tickets;
  std::vector<std::string> payers;
  std::int64_t spread_bps = 5;
  std::int64_t variable_cost_bps = 0;
  rail::ChurnParams churn;
  int max_retries = 3;
  std::int64_t max_fee_ppm = 5'000;
  msat_t max_fee_base_msat = 5'000;
  std::int64_t take_rate_min_bps = 10;
  std::int64_t take_rate_max_bps = 50;
  SatsBackFunding sats_back_funding = SatsBackFunding::kRail;
};

struct SleeveConfig {
  std::vector<ln::PeerWeight> peers;
  msat_t min_channel_msat = 1'000'000;
  ln::FeePolicy hub_policy{1'000, 100};
  ln::FeePolicy peer_policy{1'000, 100};
};

struct RebalanceParams {
  bool enabled = true;
  double low_watermark = 0.2;  // hub-side share that triggers a top-up
  double target = 0.5;         // hub-side share to restore
  int max_per_month = 8;
  std::int64_t max_fee_ppm = 2'000;
};

struct StressTrigger {
  double drawdown_threshold = 0.5;  // peak-to-current drawdown that fires the shrink
  double shrink_target = 0.5;       // fraction of the original sleeve left deployed
};

struct MonteCarlo {
  int num_paths = 1;
  std::uint64_t master_seed = 42;
};

struct ScenarioConfig {
  treasury::TreasuryConfig treasury;
  MarketConfig market;
  ln::GraphSpec graph;
  std::vector<rail::Merchant> merchants;
  RailParams rail;
  SleeveConfig sleeve;
  RebalanceParams rebalance;
  StressTrigger stress_trigger;
  MonteCarlo monte_carlo;
  std::int64_t payment_sample_cap = 500;  // 0 simulates every payment
  bool include_months = true;
};

// Parses a scenario document. Relative graph/merchant file references are
// resolved against `base_dir`. Unknown keys are rejected; every error is a
// ConfigError naming the key path.
ScenarioConfig parse_scenario_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario_config(const std::filesystem::path& path);
// Fully expanded config with every default filled in (graph and roster inline).
nlohmann::json config_to_json(const ScenarioConfig& config);
// Cross-field checks (graph references, ranges). Throws ConfigError.
void validate_config(const ScenarioConfig& config);

// Routing activity behind one month's rail record, at full (extrapolated) scale.
struct RoutingStats {
  std::int64_t attempted = 0;
  std::int64_t settled = 0;
  cents_t rebalance_volume_cents = 0;
};

inline constexpr double kUncoveredByZeroOpex = std::numeric_limits<double>::infinity();

struct KpiRow {
  cents_t gmv_cents = 0;
  double realized_take_rate_bps = 0.0;
  double payment_success_rate = 1.0;
  double routing_revenue_per_100k_tx_cents = 0.0;
  double rebalancing_cost_bps = 0.0;
  double merchant_churn_rate = 0.0;
  // (acquiring + spread + routing) / opex; kUncoveredByZeroOpex when opex is 0.
  double opex_coverage_ratio = 0.0;

  bool operator==(const KpiRow&) const = default;
};

KpiRow kpi_month(const rail::RailMonthRecord& record, const RoutingStats& routing, cents_t opex_cents,
                 double churn_rate = 0.0);

struct MonthResult {
  int month = 0;
  cents_t price_cents = 0;
  cents_t cash_cents = 0;
  rail::RailMonthRecord rail;
  RoutingStats routing;
  KpiRow kpi;
  std::int64_t sampled_payments = 0;
  std::int64_t active_merchants = 0;
  msat_t sleeve_deployed_msat = 0;
  bool stress_fired = false;
  treasury::VarCheck var;
};

struct PathResult {
  int path_index = 0;
  bool survives = true;
  std::optional<int> breach_month;
  cents_t min_cash_cents = 0;
  cents_t terminal_cash_cents = 0;
  std::optional<sats_t> required_sale_sats;
  sats_t btc_core_sats = 0;
  std::vector<cents_t> prices;
  std::vector<MonthResult> months;  // empty unless include_months
  KpiRow kpi;                       // whole-horizon aggregate
  int stress_trigger_fires = 0;
  int var_breach_months = 0;
  msat_t sleeve_freed_msat = 0;
  cents_t total_rail_net_cents = 0;
  cents_t total_rail_booked_cents = 0;  // sum of C_P,t handed to the treasury
  cents_t total_yield_cents = 0;
  cents_t total_outflow_cents = 0;
  cents_t total_floor_adjustment_cents = 0;
};

struct ScenarioReport {
  nlohmann::json config_echo;
  std::uint64_t master_seed = 0;
  int num_paths = 0;
  int surviving_paths = 0;
  double survival_probability = 0.0;
  std::optional<double> mean_coverage;  // over paths with finite coverage
  std::string reconciliation_hash;      // FNV-1a over the canonical per-path JSON
  std::vector<PathResult> paths;        // sorted by path index
};

// Price path for one Monte Carlo path (GBM seeded per path, or the stress shape).
market::PricePath price_path_for(const ScenarioConfig& config, int path_index);

// Deterministic in (config, master_seed, path_index). A path whose treasury
// breaches still runs to the horizon so its KPIs are complete.
PathResult run_path(const ScenarioConfig& config, int path_index);

// Runs every path, in parallel when threads != 1 (0 picks the hardware
// concurrency). The report is byte-identical regardless of thread count.
ScenarioReport run_scenario(const ScenarioConfig& config, unsigned threads = 0);

nlohmann::json kpi_to_json(const KpiRow& kpi);
nlohmann::json path_to_json(const PathResult& path);
nlohmann::json report_to_json(const ScenarioReport& report);
// Per-month time series: path,month,price,cash,gmv,success_rate,coverage,...
std::string report_to_csv(const ScenarioReport& report);

}  // namespace satsrail::engine
