#include <cmath>
#include <fstream>
#include <set>

#include "satsrail/engine.hpp"
#include "satsrail/error.hpp"

namespace satsrail::engine {

namespace {

using nlohmann::json;

// Typed access to one JSON object that remembers which keys were read, so
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json* obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (obj_ && !obj_->is_object()) throw ConfigError(path_, "must be an object");
  }

  bool has(const char* key) const { return obj_ && obj_->contains(key); }
  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* raw(const char* key) {
    used_.insert(key);
    return has(key) ? &obj_->at(key) : nullptr;
  }

  std::int64_t integer(const char* key, std::int64_t fallback) {
    const json* v = raw(key);
    if (!v) return fallback;
    if (v->is_number_unsigned() && v->get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
      throw ConfigError(key_path(key), "integer out of range");
    }
    if (!v->is_number_integer()) throw ConfigError(key_path(key), "expected an integer");
    return v->get<std::int64_t>();
  }

  std::int64_t required_integer(const char* key) {
    if (!has(key)) throw ConfigError(key_path(key), "missing required key");
    return integer(key, 0);
  }

  std::uint64_t unsigned_integer(const char* key, std::uint64_t fallback) {
    const json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<std::int64_t>() < 0)) {
      throw ConfigError(key_path(key), "expected a non-negative integer");
    }
    return v->get<std::uint64_t>();
  }

  double number(const char* key, double fallback) {
    const json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_number()) throw ConfigError(key_path(key), "expected a number");
    const double d = v->get<double>();
    if (!std::isfinite(d)) throw ConfigError(key_path(key), "must be finite");
    return d;
  }

  bool boolean(const char* key, bool fallback) {
    const json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ConfigError(key_path(key), "expected true or false");
    return v->get<bool>();
  }

  std::string string(const char* key, const std::string& fallback) {
    const json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_string()) throw ConfigError(key_path(key), "expected a string");
    return v->get<std::string>();
  }

  Section child(const char* key) { return Section(raw(key), key_path(key)); }

  void finish() const {
    if (!obj_) return;
    for (const auto& [key, _] : obj_->items()) {
      if (!used_.contains(key)) throw ConfigError(key_path(key), "unknown key");
    }
  }

 private:
  const json* obj_;
  std::string path_;
  std::set<std::string> used_;
};

ln::FeePolicy parse_policy(Section s, ln::FeePolicy fallback) {
  ln::FeePolicy p{s.integer("base_msat", fallback.base_msat), s.integer("ppm", fallback.ppm)};
  s.finish();
  return p;
}

json read_json_file(const std::filesystem::path& path, const std::string& key) {
  std::ifstream in(path);
  if (!in) throw ConfigError(key, "cannot open file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(key, "invalid JSON in " + path.string() + ": " + e.what());
  }
}

// A value that is either an inline document or a path to one.
json inline_or_file(const json* v, const std::filesystem::path& base_dir, const std::string& key) {
  if (!v->is_string()) return *v;
  std::filesystem::path p = v->get<std::string>();
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  return read_json_file(p, key);
}

json policy_json(const ln::FeePolicy& p) { return {{"base_msat", p.base_msat}, {"ppm", p.ppm}}; }

}  // namespace

ScenarioConfig parse_scenario_config(const json& doc, const std::filesystem::path& base_dir) {
  ScenarioConfig c;
  Section root(&doc, "");

  {
    if (!root.has("treasury")) throw ConfigError("treasury", "missing required section");
    Section t = root.child("treasury");
    auto& tc = c.treasury;
    tc.btc_core_sats = t.integer("btc_core_sats", tc.btc_core_sats);
    tc.sleeve_fraction = t.number("sleeve_fraction", tc.sleeve_fraction);
    tc.cash0_cents = t.required_integer("cash0_cents");
    tc.opex_monthly_cents = t.integer("opex_monthly_cents", tc.opex_monthly_cents);
    tc.interest_monthly_cents = t.integer("interest_monthly_cents", tc.interest_monthly_cents);
    tc.capex_monthly_cents = t.integer("capex_monthly_cents", tc.capex_monthly_cents);
    tc.horizon_months = static_cast<int>(t.integer("horizon_months", tc.horizon_months));
    tc.var_cap_fraction = t.number("var_cap_fraction", tc.var_cap_fraction);
    tc.var_confidence = t.number("var_confidence", tc.var_confidence);
    tc.var_sigma_monthly = t.number("var_sigma_monthly", tc.var_sigma_monthly);
    tc.cash_yield_apy = t.number("cash_yield_apy", tc.cash_yield_apy);
    const std::string mode = t.string("survival_mode", treasury::to_string(tc.survival_mode));
    try {
      tc.survival_mode = treasury::parse_survival_mode(mode);
    } catch (const ValidationError& e) {
      throw ConfigError("treasury.survival_mode", e.what());
    }
    t.finish();
  }

  {
    Section m = root.child("market");
    auto& mc = c.market;
    const std::string model = m.string("model", mc.model == MarketModel::kGbm ? "gbm" : "stress");
    if (model == "gbm") {
      mc.model = MarketModel::kGbm;
    } else if (model == "stress") {
      mc.model = MarketModel::kStress;
    } else {
      throw ConfigError("market.model", "expected gbm or stress");
    }
    const double start_usd = m.number("start_price_usd", static_cast<double>(mc.start_price_cents) / 100.0);
    mc.start_price_cents = std::llround(start_usd * 100.0);
    Section g = m.child("gbm");
    mc.gbm_mu = g.number("mu", mc.gbm_mu);
    mc.gbm_sigma = g.number("sigma", mc.gbm_sigma);
    g.finish();
    Section s = m.child("stress");
    const std::string shape = s.string("shape", market::to_string(mc.stress_kind));
    try {
      mc.stress_kind = market::parse_stress_kind(shape);
    } catch (const ValidationError& e) {
      throw ConfigError("market.stress.shape", e.what());
    }
    mc.stress_drawdown = s.number("drawdown", mc.stress_drawdown);
    s.finish();
    m.finish();
  }

  {
    const json* g = root.raw("graph");
    if (!g) throw ConfigError("graph", "missing required key");
    const json graph_doc = inline_or_file(g, base_dir, "graph");
    try {
      c.graph = ln::parse_graph_spec(graph_doc);
    } catch (const ValidationError& e) {
      throw ConfigError("graph", e.what());
    }
  }

  if (const json* m = root.raw("merchants")) {
    c.merchants = rail::parse_merchants(inline_or_file(m, base_dir, "merchants"), "merchants");
  }

  {
    Section r = root.child("rail");
    auto& rp = c.rail;
    if (const json* payers = r.raw("payers")) {
      if (!payers->is_array()) throw ConfigError("rail.payers", "expected an array of node ids");
      for (const auto& p : *payers) {
        if (!p.is_string()) throw ConfigError("rail.payers", "expected an array of node ids");
        rp.payers.push_back(p.get<std::string>());
      }
    }
    rp.tickets.mean_ticket_cents = r.integer("mean_ticket_cents", rp.tickets.mean_ticket_cents);
    rp.tickets.shape = r.number("ticket_shape", rp.tickets.shape);
    // Default median keeps the lognormal mean equal to the configured mean ticket.
    const auto implied_median = std::llround(static_cast<double>(rp.tickets.mean_ticket_cents) *
                                             std::exp(-0.5 * rp.tickets.shape * rp.tickets.shape));
    rp.tickets.median_ticket_cents = r.integer("median_ticket_cents", implied_median);
    rp.tickets.min_ticket_cents = r.integer("min_ticket_cents", rp.tickets.min_ticket_cents);
    rp.tickets.max_ticket_cents = r.integer("max_ticket_cents", rp.tickets.max_ticket_cents);
    rp.spread_bps = r.integer("spread_bps", rp.spread_bps);
    rp.variable_cost_bps = r.integer("variable_cost_bps", rp.variable_cost_bps);
    rp.churn.base = r.number("base_churn", rp.churn.base);
    rp.churn.sensitivity = r.number("churn_sensitivity", rp.churn.sensitivity);
    rp.max_retries = static_cast<int>(r.integer("max_retries", rp.max_retries));
    rp.max_fee_ppm = r.integer("max_fee_ppm", rp.max_fee_ppm);
    rp.max_fee_base_msat = r.integer("max_fee_base_msat", rp.max_fee_base_msat);
    rp.take_rate_min_bps = r.integer("take_rate_min_bps", rp.take_rate_min_bps);
    rp.take_rate_max_bps = r.integer("take_rate_max_bps", rp.take_rate_max_bps);
    const std::string funding = r.string("sats_back_funding", "rail");
    if (funding == "rail") {
      rp.sats_back_funding = SatsBackFunding::kRail;
    } else if (funding == "merchant") {
      rp.sats_back_funding = SatsBackFunding::kMerchant;
    } else {
      throw ConfigError("rail.sats_back_funding", "expected rail or merchant");
    }
    r.finish();
  }

  {
    Section s = root.child("sleeve");
    auto& sc = c.sleeve;
    if (const json* peers = s.raw("peers")) {
      if (!peers->is_array()) throw ConfigError("sleeve.peers", "expected an array");
      for (std::size_t i = 0; i < peers->size(); ++i) {
        Section p(&peers->at(i), "sleeve.peers[" + std::to_string(i) + "]");
        ln::PeerWeight pw;
        pw.node = p.string("node", "");
        if (pw.node.empty()) throw ConfigError(p.key_path("node"), "missing required key");
        const auto w = p.integer("weight", 1);
        if (w <= 0) throw ConfigError(p.key_path("weight"), "must be positive");
        pw.weight = static_cast<std::uint64_t>(w);
        p.finish();
        sc.peers.push_back(std::move(pw));
      }
    }
    sc.min_channel_msat = s.integer("min_channel_msat", sc.min_channel_msat);
    sc.hub_policy = parse_policy(s.child("hub_policy"), sc.hub_policy);
    sc.peer_policy = parse_policy(s.child("peer_policy"), sc.peer_policy);
    s.finish();
  }

  {
    Section r = root.child("rebalance");
    auto& rb = c.rebalance;
    rb.enabled = r.boolean("enabled", rb.enabled);
    rb.low_watermark = r.number("low_watermark", rb.low_watermark);
    rb.target = r.number("target", rb.target);
    rb.max_per_month = static_cast<int>(r.integer("max_per_month", rb.max_per_month));
    rb.max_fee_ppm = r.integer("max_fee_ppm", rb.max_fee_ppm);
    r.finish();
  }

  {
    Section s = root.child("stress_trigger");
    c.stress_trigger.drawdown_threshold = s.number("drawdown_threshold", c.stress_trigger.drawdown_threshold);
    c.stress_trigger.shrink_target = s.number("shrink_target", c.stress_trigger.shrink_target);
    s.finish();
  }

  {
    Section s = root.child("monte_carlo");
    c.monte_carlo.num_paths = static_cast<int>(s.integer("num_paths", c.monte_carlo.num_paths));
    c.monte_carlo.master_seed = s.unsigned_integer("master_seed", c.monte_carlo.master_seed);
    s.finish();
  }

  c.payment_sample_cap = root.integer("payment_sample_cap", c.payment_sample_cap);
  {
    Section s = root.child("report");
    c.include_months = s.boolean("include_months", c.include_months);
    s.finish();
  }
  root.finish();

  validate_config(c);
  return c;
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
  return parse_scenario_config(read_json_file(path, "config"), path.parent_path());
}

void validate_config(const ScenarioConfig& c) {
  try {
    c.treasury.validate();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    throw ConfigError("treasury." + msg.substr(0, colon), msg.substr(colon + 2));
  }

  const auto& m = c.market;
  if (m.start_price_cents <= 0) throw ConfigError("market.start_price_usd", "must be positive");
  if (!(m.gbm_sigma >= 0.0)) throw ConfigError("market.gbm.sigma", "must be non-negative");
  if (!(m.stress_drawdown >= 0.0 && m.stress_drawdown < 1.0)) {
    throw ConfigError("market.stress.drawdown", "must be in [0, 1)");
  }

  ln::ChannelGraph graph;
  try {
    graph = ln::build_graph(c.graph);
  } catch (const ValidationError& e) {
    throw ConfigError("graph", e.what());
  }

  const auto& r = c.rail;
  for (std::size_t i = 0; i < c.merchants.size(); ++i) {
    const auto& merchant = c.merchants[i];
    const std::string path = "merchants[" + std::to_string(i) + "]";
    if (!graph.has_node(merchant.node)) throw ConfigError(path + ".node", "unknown graph node '" + merchant.node + "'");
    if (merchant.take_rate_bps < r.take_rate_min_bps || merchant.take_rate_bps > r.take_rate_max_bps) {
      throw ConfigError(path + ".take_rate_bps", "outside [" + std::to_string(r.take_rate_min_bps) + ", " +
                                                     std::to_string(r.take_rate_max_bps) + "]");
    }
  }
  if (!c.merchants.empty() && r.payers.empty()) throw ConfigError("rail.payers", "required when merchants exist");
  for (const auto& payer : r.payers) {
    if (!graph.has_node(payer)) throw ConfigError("rail.payers", "unknown graph node '" + payer + "'");
    for (const auto& merchant : c.merchants) {
      if (merchant.node == payer) throw ConfigError("rail.payers", "'" + payer + "' is also a merchant node");
    }
  }
  if (r.tickets.mean_ticket_cents <= 0) throw ConfigError("rail.mean_ticket_cents", "must be positive");
  if (r.tickets.median_ticket_cents <= 0) throw ConfigError("rail.median_ticket_cents", "must be positive");
  if (!(r.tickets.shape >= 0.0)) throw ConfigError("rail.ticket_shape", "must be non-negative");
  if (r.tickets.min_ticket_cents <= 0) throw ConfigError("rail.min_ticket_cents", "must be positive");
  if (r.tickets.max_ticket_cents < r.tickets.min_ticket_cents) {
    throw ConfigError("rail.max_ticket_cents", "must be >= min_ticket_cents");
  }
  if (r.spread_bps < 0) throw ConfigError("rail.spread_bps", "must be non-negative");
  if (r.variable_cost_bps < 0) throw ConfigError("rail.variable_cost_bps", "must be non-negative");
  if (r.churn.base < 0.0) throw ConfigError("rail.base_churn", "must be non-negative");
  if (r.churn.sensitivity < 0.0) throw ConfigError("rail.churn_sensitivity", "must be non-negative");
  if (r.max_retries < 0) throw ConfigError("rail.max_retries", "must be non-negative");
  if (r.max_fee_ppm < 0) throw ConfigError("rail.max_fee_ppm", "must be non-negative");
  if (r.max_fee_base_msat < 0) throw ConfigError("rail.max_fee_base_msat", "must be non-negative");
  if (r.take_rate_min_bps < 0 || r.take_rate_max_bps < r.take_rate_min_bps) {
    throw ConfigError("rail.take_rate_max_bps", "take-rate range must satisfy 0 <= min <= max");
  }

  for (std::size_t i = 0; i < c.sleeve.peers.size(); ++i) {
    const auto& node = c.sleeve.peers[i].node;
    if (!graph.has_node(node)) {
      throw ConfigError("sleeve.peers[" + std::to_string(i) + "].node", "unknown graph node '" + node + "'");
    }
    if (node == graph.hub()) throw ConfigError("sleeve.peers[" + std::to_string(i) + "].node", "cannot be the hub");
  }
  if (c.sleeve.min_channel_msat < 0) throw ConfigError("sleeve.min_channel_msat", "must be non-negative");

  const auto& rb = c.rebalance;
  if (!(rb.low_watermark >= 0.0 && rb.low_watermark <= 1.0)) {
    throw ConfigError("rebalance.low_watermark", "must be in [0, 1]");
  }
  if (!(rb.target >= rb.low_watermark && rb.target <= 1.0)) {
    throw ConfigError("rebalance.target", "must be in [low_watermark, 1]");
  }
  if (rb.max_per_month < 0) throw ConfigError("rebalance.max_per_month", "must be non-negative");
  if (rb.max_fee_ppm < 0) throw ConfigError("rebalance.max_fee_ppm", "must be non-negative");

  const auto& st = c.stress_trigger;
  if (!(st.drawdown_threshold >= 0.0 && st.drawdown_threshold <= 1.0)) {
    throw ConfigError("stress_trigger.drawdown_threshold", "must be in [0, 1]");
  }
  if (!(st.shrink_target >= 0.0 && st.shrink_target <= 1.0)) {
    throw ConfigError("stress_trigger.shrink_target", "must be in [0, 1]");
  }
  if (c.monte_carlo.num_paths < 1) throw ConfigError("monte_carlo.num_paths", "must be at least 1");
  if (c.payment_sample_cap < 0) throw ConfigError("payment_sample_cap", "must be non-negative");
}

json config_to_json(const ScenarioConfig& c) {
  const auto& t = c.treasury;
  json peers = json::array();
  for (const auto& p : c.sleeve.peers) peers.push_back({{"node", p.node}, {"weight", p.weight}});

  const ln::ChannelGraph graph = ln::build_graph(c.graph);
  return {
      {"treasury",
       {{"btc_core_sats", t.btc_core_sats},
        {"sleeve_fraction", t.sleeve_fraction},
        {"cash0_cents", t.cash0_cents},
        {"opex_monthly_cents", t.opex_monthly_cents},
        {"interest_monthly_cents", t.interest_monthly_cents},
        {"capex_monthly_cents", t.capex_monthly_cents},
        {"horizon_months", t.horizon_months},
        {"var_cap_fraction", t.var_cap_fraction},
        {"var_confidence", t.var_confidence},
        {"var_sigma_monthly", t.var_sigma_monthly},
        {"cash_yield_apy", t.cash_yield_apy},
        {"survival_mode", treasury::to_string(t.survival_mode)}}},
      {"market",
       {{"model", c.market.model == MarketModel::kGbm ? "gbm" : "stress"},
        {"start_price_usd", static_cast<double>(c.market.start_price_cents) / 100.0},
        {"gbm", {{"mu", c.market.gbm_mu}, {"sigma", c.market.gbm_sigma}}},
        {"stress", {{"shape", market::to_string(c.market.stress_kind)}, {"drawdown", c.market.stress_drawdown}}}}},
      {"graph", ln::graph_to_json(graph)},
      {"merchants", rail::merchants_to_json(c.merchants)},
      {"rail",
       {{"payers", c.rail.payers},
        {"mean_ticket_cents", c.rail.tickets.mean_ticket_cents},
        {"median_ticket_cents", c.rail.tickets.median_ticket_cents},
        {"ticket_shape", c.rail.tickets.shape},
        {"min_ticket_cents", c.rail.tickets.min_ticket_cents},
        {"max_ticket_cents", c.rail.tickets.max_ticket_cents},
        {"spread_bps", c.rail.spread_bps},
        {"variable_cost_bps", c.rail.variable_cost_bps},
        {"base_churn", c.rail.churn.base},
        {"churn_sensitivity", c.rail.churn.sensitivity},
        {"max_retries", c.rail.max_retries},
        {"max_fee_ppm", c.rail.max_fee_ppm},
        {"max_fee_base_msat", c.rail.max_fee_base_msat},
        {"take_rate_min_bps", c.rail.take_rate_min_bps},
        {"take_rate_max_bps", c.rail.take_rate_max_bps},
        {"sats_back_funding", c.rail.sats_back_funding == SatsBackFunding::kRail ? "rail" : "merchant"}}},
      {"sleeve",
       {{"peers", peers},
        {"min_channel_msat", c.sleeve.min_channel_msat},
        {"hub_policy", policy_json(c.sleeve.hub_policy)},
        {"peer_policy", policy_json(c.sleeve.peer_policy)}}},
      {"rebalance",
       {{"enabled", c.rebalance.enabled},
        {"low_watermark", c.rebalance.low_watermark},
        {"target", c.rebalance.target},
        {"max_per_month", c.rebalance.max_per_month},
        {"max_fee_ppm", c.rebalance.max_fee_ppm}}},
      {"stress_trigger",
       {{"drawdown_threshold", c.stress_trigger.drawdown_threshold},
        {"shrink_target", c.stress_trigger.shrink_target}}},
      {"monte_carlo", {{"num_paths", c.monte_carlo.num_paths}, {"master_seed", c.monte_carlo.master_seed}}},
      {"payment_sample_cap", c.payment_sample_cap},
      {"report", {{"include_months", c.include_months}}},
  };
}

}  // namespace satsrail::engine
