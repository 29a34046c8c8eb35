#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "satsrail/engine.hpp"
#include "satsrail/error.hpp"
#include "satsrail/lightning.hpp"
#include "satsrail/market.hpp"
#include "satsrail/money.hpp"
#include "satsrail/treasury.hpp"

namespace satsrail::cli {

namespace {

namespace fs = std::filesystem;

// Usage-class failure detected after CLI11 parsing (bad config, bad flag value).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path resolve_config(const std::string& flag) {
  const char* dir = std::getenv(kConfigDirEnv);
  if (flag.empty()) {
    if (dir == nullptr || *dir == '\0') throw UsageError("--config is required (or set " + std::string(kConfigDirEnv) + ")");
    return fs::path(dir) / "scenario.json";
  }
  fs::path p = flag;
  if (p.is_relative() && !fs::exists(p) && dir != nullptr && *dir != '\0' && fs::exists(fs::path(dir) / p)) {
    return fs::path(dir) / p;
  }
  return p;
}

engine::ScenarioConfig load_config(const std::string& flag) {
  try {
    return engine::load_scenario_config(resolve_config(flag));
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << content;
  if (!f) throw Error("failed writing " + path);
}

struct RunOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  unsigned threads = 0;
  std::string out;
  std::string csv;
};

int emit_report(engine::ScenarioConfig config, const RunOptions& o, std::ostream& out) {
  if (!o.csv.empty()) config.include_months = true;
  try {
    engine::validate_config(config);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  const auto report = engine::run_scenario(config, o.threads);
  if (!o.out.empty()) write_file(o.out, engine::report_to_json(report).dump(2) + "\n");
  if (!o.csv.empty()) write_file(o.csv, engine::report_to_csv(report));
  out << "survival_probability=" << fmt("%.6f", report.survival_probability) << " surviving=" << report.surviving_paths
      << "/" << report.num_paths << " mean_coverage="
      << (report.mean_coverage ? fmt("%.6f", *report.mean_coverage) : std::string("uncovered-by-zero-opex"))
      << " hash=" << report.reconciliation_hash << "\n";
  return kExitOk;
}

void add_run_flags(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--config", o.config,
                  "Scenario JSON; relative paths also resolve against $" + std::string(kConfigDirEnv) +
                      " (default: $" + kConfigDirEnv + "/scenario.json)");
  cmd->add_option("--threads", o.threads, "Worker threads, 0 = hardware concurrency")->capture_default_str();
  cmd->add_option("--out", o.out, "Write the JSON report here (default: not written)");
  cmd->add_option("--csv", o.csv, "Write the per-month CSV time series here (default: not written)");
}

int cmd_simulate(const RunOptions& o, std::ostream& out) {
  auto config = load_config(o.config);
  if (o.seed) config.monte_carlo.master_seed = *o.seed;
  if (o.paths) config.monte_carlo.num_paths = *o.paths;
  return emit_report(std::move(config), o, out);
}

struct StressOptions {
  double drawdown = 0.70;
  int months = 24;
  std::string shape = "linear";
};

int cmd_stress(const RunOptions& o, const StressOptions& s, std::ostream& out) {
  if (!(s.drawdown >= 0.0 && s.drawdown < 1.0)) throw UsageError("--drawdown must lie in [0, 1)");
  auto config = load_config(o.config);
  config.market.model = engine::MarketModel::kStress;
  config.market.stress_drawdown = s.drawdown;
  config.market.stress_kind = market::parse_stress_kind(s.shape);
  config.treasury.horizon_months = s.months;
  config.monte_carlo.num_paths = 1;
  return emit_report(std::move(config), o, out);
}

struct MnavOptions {
  std::string holdings;
  std::string price;
  std::string csv;
};

int cmd_mnav(const MnavOptions& o, std::ostream& out) {
  cents_t price = 0;
  try {
    price = parse_usd_cents(o.price);
  } catch (const Error& e) {
    throw UsageError(std::string("--price: ") + e.what());
  }
  if (price <= 0) throw UsageError("--price must be positive");
  auto rows = treasury::load_holdings_csv(o.holdings);
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.btc_held > b.btc_held; });

  char line[160];
  std::snprintf(line, sizeof line, "%-8s %14s %20s %12s %14s\n", "ticker", "btc_held", "mkt_cap_usd", "mnav",
                "btc_per_share");
  out << line;
  std::string csv = "ticker,btc_held,mkt_cap_usd,mnav,btc_per_share\n";
  for (const auto& r : rows) {
    const double m = treasury::mnav(r.mkt_cap_cents, r.btc_held, static_cast<double>(price));
    const std::string bps =
        r.shares_outstanding ? fmt("%.8f", treasury::btc_per_share(r.btc_held, *r.shares_outstanding)) : "-";
    const std::string cap = format_cents(r.mkt_cap_cents);
    std::snprintf(line, sizeof line, "%-8s %14.3f %20s %12.4f %14s\n", r.ticker.c_str(), r.btc_held, cap.c_str(), m,
                  bps.c_str());
    out << line;
    csv += r.ticker + "," + fmt("%.8g", r.btc_held) + "," + cap + "," + fmt("%.6f", m) + "," +
           (r.shares_outstanding ? bps : "") + "\n";
  }
  if (!o.csv.empty()) write_file(o.csv, csv);
  return kExitOk;
}

struct RouteOptions {
  std::string graph;
  std::string from;
  std::string to;
  std::int64_t amount_sats = 0;
  std::optional<std::int64_t> max_fee_sats;
};

int cmd_route(const RouteOptions& o, std::ostream& out, std::ostream& err) {
  ln::ChannelGraph graph = [&] {
    try {
      return ln::load_graph(o.graph);
    } catch (const ValidationError& e) {
      throw UsageError(e.what());
    }
  }();
  if (o.amount_sats <= 0) throw UsageError("--amount-sats must be positive");
  std::optional<msat_t> max_fee;
  if (o.max_fee_sats) {
    if (*o.max_fee_sats < 0) throw UsageError("--max-fee-sats must be non-negative");
    max_fee = *o.max_fee_sats * kMsatPerSat;
  }
  ln::RouteOutcome outcome;
  try {
    outcome = ln::find_route(graph, o.from, o.to, o.amount_sats * kMsatPerSat, max_fee);
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  if (outcome.status == ln::RouteStatus::kNoRoute) {
    err << "no route\n";
    return kExitDomain;
  }
  if (outcome.status == ln::RouteStatus::kFeeCapExceeded) {
    err << "no route within fee cap\n";
    return kExitDomain;
  }
  const ln::Route& r = *outcome.route;
  for (std::size_t i = 0; i < r.hops.size(); ++i) {
    const auto& h = r.hops[i];
    out << "  " << h.from << " -> " << h.to << " via " << h.channel_id << ": forward " << r.amounts_msat[i]
        << " msat, fee " << r.fees_msat[i] << " msat\n";
  }
  out << r.hops.size() << (r.hops.size() == 1 ? " hop" : " hops") << ", fee " << r.total_fee_msat << " msat\n";
  return kExitOk;
}

struct CorrOptions {
  std::string a;
  std::string b;
  bool returns = false;
};

int cmd_corr(const CorrOptions& o, std::ostream& out, std::ostream& err) {
  const auto joined = market::inner_join(market::load_price_csv(o.a), market::load_price_csv(o.b));
  if (joined.dates.size() < 2) {
    err << "fewer than 2 overlapping dates\n";
    return kExitDomain;
  }
  const double r = o.returns ? market::pearson_corr(market::to_returns(joined.a), market::to_returns(joined.b))
                             : market::pearson_corr(joined.a, joined.b);
  out << fmt("%.5f", r) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Treasury, payments-rail and payment-channel simulator"};
  app.name("satsrail");
  app.require_subcommand(1);

  RunOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Run a scenario config (Monte Carlo over price paths)");
  add_run_flags(simulate, sim);
  simulate->add_option("--seed", sim.seed, "Override monte_carlo.master_seed");
  simulate->add_option("--paths", sim.paths, "Override monte_carlo.num_paths (>= 1)")->check(CLI::PositiveNumber);

  RunOptions st;
  StressOptions so;
  auto* stress = app.add_subcommand("stress", "Run one deterministic bear path against a scenario config");
  add_run_flags(stress, st);
  stress->add_option("--drawdown", so.drawdown, "Peak-to-trough drawdown in [0, 1)")->capture_default_str();
  stress->add_option("--months", so.months, "Horizon in months")->check(CLI::PositiveNumber)->capture_default_str();
  stress->add_option("--shape", so.shape, "Path shape")
      ->check(CLI::IsMember({"linear", "exponential"}))
      ->capture_default_str();

  MnavOptions mo;
  auto* mnav = app.add_subcommand("mnav", "mNAV and BTC per share for a holdings table");
  mnav->add_option("--holdings", mo.holdings, "Holdings CSV: ticker,btc_held,mkt_cap_usd,shares_outstanding")
      ->required();
  mnav->add_option("--price", mo.price, "BTC price in USD")->required();
  mnav->add_option("--csv", mo.csv, "Also write the table as CSV here (default: not written)");

  RouteOptions ro;
  auto* route = app.add_subcommand("route", "Cheapest route between two nodes of a channel graph");
  route->add_option("--graph", ro.graph, "Channel graph JSON")->required();
  route->add_option("--from", ro.from, "Source node")->required();
  route->add_option("--to", ro.to, "Destination node")->required();
  route->add_option("--amount-sats", ro.amount_sats, "Amount to deliver, in sats")->required();
  route->add_option("--max-fee-sats", ro.max_fee_sats, "Fee cap in sats (default: uncapped)");

  CorrOptions co;
  auto* corr = app.add_subcommand("corr", "Pearson correlation of two date,price series on common dates");
  corr->add_option("--a", co.a, "First price CSV (date,price)")->required();
  corr->add_option("--b", co.b, "Second price CSV (date,price)")->required();
  corr->add_flag("--returns", co.returns, "Correlate simple returns instead of levels (default: levels)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    err << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim, out);
    if (*stress) return cmd_stress(st, so, out);
    if (*mnav) return cmd_mnav(mo, out);
    if (*route) return cmd_route(ro, out, err);
    if (*corr) return cmd_corr(co, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace satsrail::cli
