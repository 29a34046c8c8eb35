#include "satsrail/lightning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <sstream>

#include "satsrail/error.hpp"

namespace satsrail::ln {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
constexpr msat_t kUnset = -1;

void check_policy(const FeePolicy& p, const std::string& where) {
  if (p.base_msat < 0 || p.ppm < 0) throw ValidationError(where + ": fee policy fields must be non-negative");
}

// amount + hop_fee(policy, amount), or nullopt if it does not fit in 64 bits.
std::optional<msat_t> amount_with_fee(const FeePolicy& p, msat_t amount) {
  const __int128 fee = static_cast<__int128>(p.base_msat) + static_cast<__int128>(amount) * p.ppm / kPpmDenominator;
  const __int128 total = fee + amount;
  if (total > std::numeric_limits<msat_t>::max()) return std::nullopt;
  return static_cast<msat_t>(total);
}

struct PathIndices {
  std::vector<std::size_t> nodes;     // src .. dst
  std::vector<std::size_t> channels;  // one per hop
  std::vector<Direction> directions;
};

// Backward label-setting search from dst. The label of a node is the amount
// that must arrive at it for dst to receive `amount`; for src it is the
// amount src sends. Labels grow strictly along every edge, so the search is
// exact and lexicographic tie-breaks survive extension.
std::optional<PathIndices> cheapest_path(const ChannelGraph& g, std::size_t src, std::size_t dst, msat_t amount,
                                         const Exclusions& exclusions) {
  const std::size_t n = g.nodes().size();
  std::vector<char> node_excluded(n, 0);
  for (const auto& name : exclusions.nodes) {
    if (g.has_node(name)) node_excluded[g.node_index(name)] = 1;
  }
  std::vector<std::array<char, 2>> edge_excluded(g.channels().size(), {0, 0});
  for (const auto& [id, dir] : exclusions.edges) {
    if (auto idx = g.channel_index(id)) edge_excluded[*idx][static_cast<int>(dir)] = 1;
  }

  std::vector<msat_t> label(n, kUnset);
  std::vector<std::size_t> next_node(n, kNone);
  std::vector<std::size_t> next_channel(n, kNone);
  std::vector<Direction> next_dir(n, Direction::kAtoB);
  std::vector<char> settled(n, 0);

  // Does reaching v via (w, ch) give a lexicographically smaller path than
  // v's current next pointer?
  auto better_suffix = [&](std::size_t v, std::size_t w, std::size_t ch) {
    auto walk = [&](std::size_t first_node, std::size_t first_ch) {
      std::vector<const std::string*> node_ids;
      std::vector<const std::string*> channel_ids{&g.channel(first_ch).id};
      std::size_t cur = first_node;
      node_ids.push_back(&g.nodes()[cur]);
      while (cur != dst) {
        channel_ids.push_back(&g.channel(next_channel[cur]).id);
        cur = next_node[cur];
        node_ids.push_back(&g.nodes()[cur]);
      }
      return std::pair{node_ids, channel_ids};
    };
    const auto cand = walk(w, ch);
    const auto curr = walk(next_node[v], next_channel[v]);
    auto less = [](const std::vector<const std::string*>& l, const std::vector<const std::string*>& r) {
      return std::lexicographical_compare(l.begin(), l.end(), r.begin(), r.end(),
                                          [](const std::string* a, const std::string* b) { return *a < *b; });
    };
    if (less(cand.first, curr.first)) return true;
    if (less(curr.first, cand.first)) return false;
    return less(cand.second, curr.second);
  };

  using Entry = std::pair<msat_t, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  label[dst] = amount;
  queue.push({amount, dst});

  while (!queue.empty()) {
    const auto [reach, w] = queue.top();
    queue.pop();
    if (settled[w] || reach != label[w]) continue;
    if (label[src] != kUnset && reach > label[src]) break;
    if (w == src) continue;
    settled[w] = 1;

    for (std::size_t ch : g.incident(w)) {
      const Channel& c = g.channel(ch);
      if (!c.open) continue;
      const auto& ends = g.endpoints(ch);
      const std::size_t u = ends[0] == w ? ends[1] : ends[0];
      const Direction d = ends[0] == u ? Direction::kAtoB : Direction::kBtoA;
      if (u == dst || settled[u] || node_excluded[u] || edge_excluded[ch][static_cast<int>(d)]) continue;
      if (c.capacity_msat < reach) continue;

      msat_t cand = reach;
      if (u != src) {
        auto with_fee = amount_with_fee(c.policy(d), reach);
        if (!with_fee) continue;
        cand = *with_fee;
      }
      if (label[u] == kUnset || cand < label[u] || (cand == label[u] && better_suffix(u, w, ch))) {
        label[u] = cand;
        next_node[u] = w;
        next_channel[u] = ch;
        next_dir[u] = d;
        if (u != src) queue.push({cand, u});
      }
    }
  }

  if (label[src] == kUnset) return std::nullopt;
  PathIndices path;
  std::size_t cur = src;
  path.nodes.push_back(cur);
  while (cur != dst) {
    path.channels.push_back(next_channel[cur]);
    path.directions.push_back(next_dir[cur]);
    cur = next_node[cur];
    path.nodes.push_back(cur);
  }
  return path;
}

std::vector<Hop> to_hops(const ChannelGraph& g, const PathIndices& path) {
  std::vector<Hop> hops;
  for (std::size_t i = 0; i < path.channels.size(); ++i) {
    const Channel& c = g.channel(path.channels[i]);
    hops.push_back({c.id, path.directions[i], c.sender(path.directions[i]), c.receiver(path.directions[i])});
  }
  return hops;
}

msat_t get_msat(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ValidationError(where + ": missing key '" + key + "'");
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ValidationError(where + ": '" + key + "' must be an integer");
  return v.get<msat_t>();
}

std::string get_string(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj.at(key).is_string()) {
    throw ValidationError(where + ": '" + key + "' must be a string");
  }
  return obj.at(key).get<std::string>();
}

FeePolicy parse_policy(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj.at(key).is_object()) throw ValidationError(where + ": missing object '" + key + "'");
  const auto& p = obj.at(key);
  const std::string sub = where + "." + key;
  return {get_msat(p, "base_msat", sub), get_msat(p, "ppm", sub)};
}

nlohmann::json policy_json(const FeePolicy& p) { return {{"base_msat", p.base_msat}, {"ppm", p.ppm}}; }

}  // namespace

msat_t hop_fee(const FeePolicy& policy, msat_t forward_amount_msat) {
  if (forward_amount_msat < 0) throw ValidationError("hop_fee: negative forward amount");
  auto total = amount_with_fee(policy, forward_amount_msat);
  if (!total) throw ValidationError("hop_fee: fee overflows 64 bits");
  return *total - forward_amount_msat;
}

// ---------------------------------------------------------------------------
// ChannelGraph

bool ChannelGraph::has_node(std::string_view node) const { return node_idx_.contains(std::string(node)); }

std::size_t ChannelGraph::node_index(std::string_view node) const {
  auto it = node_idx_.find(std::string(node));
  if (it == node_idx_.end()) throw UnknownNodeError(std::string(node));
  return it->second;
}

std::optional<std::size_t> ChannelGraph::channel_index(std::string_view id) const {
  auto it = channel_idx_.find(std::string(id));
  if (it == channel_idx_.end()) return std::nullopt;
  return it->second;
}

msat_t ChannelGraph::local_balance(std::string_view node) const {
  const std::size_t idx = node_index(node);
  msat_t total = 0;
  for (std::size_t ch : incident_[idx]) {
    const Channel& c = channels_[ch];
    if (c.open) total += c.balance_of(node);
  }
  return total;
}

msat_t ChannelGraph::total_open_capacity() const {
  msat_t total = 0;
  for (const auto& c : channels_) {
    if (c.open) total += c.capacity_msat;
  }
  return total;
}

msat_t ChannelGraph::total_open_balance() const {
  msat_t total = 0;
  for (const auto& c : channels_) {
    if (c.open) total += c.balance_a_msat + c.balance_b_msat();
  }
  return total;
}

std::vector<std::size_t> ChannelGraph::hub_channels() const {
  std::vector<std::size_t> out;
  for (std::size_t ch : incident_[node_index(hub_)]) {
    if (channels_[ch].open) out.push_back(ch);
  }
  return out;
}

msat_t ChannelGraph::hub_deployed_msat() const {
  msat_t total = 0;
  for (std::size_t ch : hub_channels()) total += channels_[ch].capacity_msat;
  return total;
}

void ChannelGraph::add_node(const std::string& node) {
  if (node.empty()) throw ValidationError("node id must be non-empty");
  if (node_idx_.contains(node)) throw ValidationError("duplicate node '" + node + "'");
  node_idx_.emplace(node, nodes_.size());
  nodes_.push_back(node);
  incident_.emplace_back();
}

std::size_t ChannelGraph::open_channel(Channel channel) {
  const std::string where = "channel '" + channel.id + "'";
  if (channel.id.empty()) throw ValidationError("channel id must be non-empty");
  if (channel_idx_.contains(channel.id)) throw ValidationError("duplicate channel id '" + channel.id + "'");
  if (!has_node(channel.node_a)) throw ValidationError(where + ": dangling endpoint '" + channel.node_a + "'");
  if (!has_node(channel.node_b)) throw ValidationError(where + ": dangling endpoint '" + channel.node_b + "'");
  if (channel.node_a == channel.node_b) throw ValidationError(where + ": endpoints must differ");
  if (channel.capacity_msat <= 0) throw ValidationError(where + ": capacity must be positive");
  if (channel.balance_a_msat < 0 || channel.balance_a_msat > channel.capacity_msat) {
    throw ValidationError(where + ": balance exceeds capacity");
  }
  check_policy(channel.policy_ab, where);
  check_policy(channel.policy_ba, where);

  const std::size_t idx = channels_.size();
  const std::size_t a = node_index(channel.node_a);
  const std::size_t b = node_index(channel.node_b);
  channel_idx_.emplace(channel.id, idx);
  channels_.push_back(std::move(channel));
  endpoints_.push_back({a, b});
  incident_[a].push_back(idx);
  incident_[b].push_back(idx);
  return idx;
}

void ChannelGraph::close_channel(std::size_t index) { channels_.at(index).open = false; }

void ChannelGraph::move_balance(std::size_t index, Direction d, msat_t amount) {
  Channel& c = channels_.at(index);
  if (!c.open) throw StaleRouteError("channel '" + c.id + "' is closed");
  if (amount < 0 || amount > c.sender_balance(d)) throw ValidationError("move_balance: amount exceeds sender balance");
  c.balance_a_msat += d == Direction::kAtoB ? -amount : amount;
}

ChannelGraph build_graph(const GraphSpec& spec) {
  ChannelGraph g;
  for (const auto& node : spec.nodes) g.add_node(node);
  if (spec.hub.empty() || !g.has_node(spec.hub)) throw ValidationError("hub '" + spec.hub + "' must be a declared node");
  g.hub_ = spec.hub;
  for (const auto& c : spec.channels) g.open_channel(c);
  return g;
}

GraphSpec parse_graph_spec(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("graph: top level must be an object");
  GraphSpec spec;
  if (!doc.contains("nodes") || !doc.at("nodes").is_array()) throw ValidationError("graph: 'nodes' must be an array");
  for (const auto& n : doc.at("nodes")) {
    if (!n.is_string()) throw ValidationError("graph: node ids must be strings");
    spec.nodes.push_back(n.get<std::string>());
  }
  spec.hub = get_string(doc, "hub", "graph");
  if (doc.contains("channels")) {
    if (!doc.at("channels").is_array()) throw ValidationError("graph: 'channels' must be an array");
    std::size_t i = 0;
    for (const auto& c : doc.at("channels")) {
      const std::string where = "graph.channels[" + std::to_string(i++) + "]";
      if (!c.is_object()) throw ValidationError(where + ": must be an object");
      Channel ch;
      ch.id = get_string(c, "id", where);
      ch.node_a = get_string(c, "a", where);
      ch.node_b = get_string(c, "b", where);
      ch.capacity_msat = get_msat(c, "capacity_msat", where);
      ch.balance_a_msat = get_msat(c, "balance_a_msat", where);
      ch.policy_ab = parse_policy(c, "policy_ab", where);
      ch.policy_ba = parse_policy(c, "policy_ba", where);
      if (c.contains("open")) {
        if (!c.at("open").is_boolean()) throw ValidationError(where + ": 'open' must be a boolean");
        ch.open = c.at("open").get<bool>();
      }
      spec.channels.push_back(std::move(ch));
    }
  }
  return spec;
}

nlohmann::json graph_to_json(const ChannelGraph& graph) {
  std::vector<std::string> nodes = graph.nodes();
  std::sort(nodes.begin(), nodes.end());
  std::vector<const Channel*> chans;
  for (const auto& c : graph.channels()) chans.push_back(&c);
  std::sort(chans.begin(), chans.end(), [](const Channel* l, const Channel* r) { return l->id < r->id; });

  nlohmann::json channels = nlohmann::json::array();
  for (const Channel* c : chans) {
    nlohmann::json j = {{"id", c->id},
                        {"a", c->node_a},
                        {"b", c->node_b},
                        {"capacity_msat", c->capacity_msat},
                        {"balance_a_msat", c->balance_a_msat},
                        {"policy_ab", policy_json(c->policy_ab)},
                        {"policy_ba", policy_json(c->policy_ba)}};
    if (!c->open) j["open"] = false;
    channels.push_back(std::move(j));
  }
  return {{"nodes", nodes}, {"hub", graph.hub()}, {"channels", channels}};
}

std::string serialize_graph(const ChannelGraph& graph) { return graph_to_json(graph).dump(2) + "\n"; }

ChannelGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open graph file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("graph file " + path.string() + ": " + e.what());
  }
  return build_graph(parse_graph_spec(doc));
}

// ---------------------------------------------------------------------------
// Routing and payments

std::string to_string(PaymentStatus status) {
  switch (status) {
    case PaymentStatus::kSettled:
      return "settled";
    case PaymentStatus::kNoRoute:
      return "no_route";
    case PaymentStatus::kInsufficientBalance:
      return "insufficient_balance";
    case PaymentStatus::kFeeCapExceeded:
      return "fee_cap_exceeded";
  }
  return "unknown";
}

Route price_route(const ChannelGraph& graph, std::vector<Hop> hops, msat_t amount_msat) {
  if (hops.empty()) throw ValidationError("route has no hops");
  if (amount_msat <= 0) throw ValidationError("amount must be positive");
  for (std::size_t i = 1; i < hops.size(); ++i) {
    if (hops[i].from != hops[i - 1].to) throw ValidationError("route hops are not contiguous");
  }
  Route route;
  route.amounts_msat.assign(hops.size(), 0);
  route.fees_msat.assign(hops.size(), 0);
  route.amounts_msat.back() = amount_msat;
  for (std::size_t i = hops.size() - 1; i > 0; --i) {
    auto idx = graph.channel_index(hops[i].channel_id);
    if (!idx) throw StaleRouteError("unknown channel '" + hops[i].channel_id + "'");
    const msat_t fee = hop_fee(graph.channel(*idx).policy(hops[i].direction), route.amounts_msat[i]);
    route.fees_msat[i] = fee;
    route.amounts_msat[i - 1] = route.amounts_msat[i] + fee;
    route.total_fee_msat += fee;
  }
  route.hops = std::move(hops);
  return route;
}

RouteOutcome find_route(const ChannelGraph& graph, std::string_view src, std::string_view dst, msat_t amount_msat,
                        std::optional<msat_t> max_fee_msat, const Exclusions& exclusions) {
  const std::size_t s = graph.node_index(src);
  const std::size_t d = graph.node_index(dst);
  if (s == d) throw ValidationError("source and destination must differ");
  if (amount_msat <= 0) throw ValidationError("amount must be positive");

  auto path = cheapest_path(graph, s, d, amount_msat, exclusions);
  if (!path) return {RouteStatus::kNoRoute, std::nullopt};
  Route route = price_route(graph, to_hops(graph, *path), amount_msat);
  if (max_fee_msat && route.total_fee_msat > *max_fee_msat) return {RouteStatus::kFeeCapExceeded, std::nullopt};
  return {RouteStatus::kFound, std::move(route)};
}

PaymentResult execute_payment(ChannelGraph& graph, const Route& route, msat_t amount_msat) {
  if (route.hops.empty() || route.amounts_msat.size() != route.hops.size()) {
    throw ValidationError("malformed route");
  }
  if (route.delivered_amount() != amount_msat) throw ValidationError("route was priced for a different amount");

  std::vector<std::size_t> indices;
  indices.reserve(route.hops.size());
  for (const auto& hop : route.hops) {
    auto idx = graph.channel_index(hop.channel_id);
    if (!idx) throw StaleRouteError("route references unknown channel '" + hop.channel_id + "'");
    const Channel& c = graph.channel(*idx);
    if (!c.open) throw StaleRouteError("route references closed channel '" + hop.channel_id + "'");
    if (c.sender(hop.direction) != hop.from || c.receiver(hop.direction) != hop.to) {
      throw StaleRouteError("route hop does not match channel '" + hop.channel_id + "'");
    }
    indices.push_back(*idx);
  }

  // Dry run against pending deltas so a channel used twice is checked correctly.
  std::map<std::size_t, msat_t> delta_a;
  for (std::size_t i = 0; i < route.hops.size(); ++i) {
    const Channel& c = graph.channel(indices[i]);
    const Direction dir = route.hops[i].direction;
    const msat_t bal_a = c.balance_a_msat + delta_a[indices[i]];
    const msat_t available = dir == Direction::kAtoB ? bal_a : c.capacity_msat - bal_a;
    if (available < route.amounts_msat[i]) {
      return {PaymentStatus::kInsufficientBalance, route, i};
    }
    delta_a[indices[i]] += dir == Direction::kAtoB ? -route.amounts_msat[i] : route.amounts_msat[i];
  }
  for (std::size_t i = 0; i < route.hops.size(); ++i) {
    graph.move_balance(indices[i], route.hops[i].direction, route.amounts_msat[i]);
  }
  return {PaymentStatus::kSettled, route, std::nullopt};
}

SendResult send_payment(ChannelGraph& graph, std::string_view src, std::string_view dst, msat_t amount_msat,
                        std::optional<msat_t> max_fee_msat, int max_retries) {
  Exclusions exclusions;
  SendResult out;
  std::optional<PaymentResult> last_failure;
  for (int attempt = 0; attempt <= std::max(0, max_retries); ++attempt) {
    RouteOutcome found = find_route(graph, src, dst, amount_msat, max_fee_msat, exclusions);
    if (found.status != RouteStatus::kFound) {
      if (last_failure) {
        out.result = *last_failure;
      } else {
        out.result.status =
            found.status == RouteStatus::kFeeCapExceeded ? PaymentStatus::kFeeCapExceeded : PaymentStatus::kNoRoute;
      }
      return out;
    }
    ++out.attempts;
    PaymentResult result = execute_payment(graph, *found.route, amount_msat);
    if (result.status == PaymentStatus::kSettled) {
      out.result = std::move(result);
      return out;
    }
    const Hop& failed = result.route->hops[*result.failed_hop];
    exclusions.edges.insert({failed.channel_id, failed.direction});
    last_failure = std::move(result);
  }
  out.result = *last_failure;
  return out;
}

// ---------------------------------------------------------------------------
// Sleeve management

std::vector<std::string> deploy_sleeve(ChannelGraph& graph, msat_t sleeve_msat, const std::vector<PeerWeight>& peers,
                                       const SleeveOptions& options) {
  if (sleeve_msat <= 0) throw ValidationError("sleeve must be positive");
  if (peers.empty()) throw ValidationError("sleeve needs at least one peer");
  check_policy(options.hub_policy, "sleeve hub policy");
  check_policy(options.peer_policy, "sleeve peer policy");

  std::vector<PeerWeight> sorted = peers;
  std::sort(sorted.begin(), sorted.end(), [](const auto& l, const auto& r) { return l.node < r.node; });
  std::vector<std::uint64_t> weights;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& p = sorted[i];
    if (p.weight == 0) throw ValidationError("peer '" + p.node + "' has non-positive weight");
    if (!graph.has_node(p.node)) throw UnknownNodeError(p.node);
    if (p.node == graph.hub()) throw ValidationError("hub cannot be its own sleeve peer");
    if (i > 0 && sorted[i - 1].node == p.node) throw ValidationError("duplicate sleeve peer '" + p.node + "'");
    weights.push_back(p.weight);
  }

  const auto shares = apportion_largest_remainder(sleeve_msat, weights);
  for (std::size_t i = 0; i < shares.size(); ++i) {
    if (shares[i] < std::max<msat_t>(1, options.min_channel_msat)) {
      throw ValidationError("sleeve too small: peer '" + sorted[i].node + "' would get " + std::to_string(shares[i]) +
                            " msat, minimum is " + std::to_string(options.min_channel_msat));
    }
  }

  std::vector<std::string> opened;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    std::string id = options.id_prefix + "-" + sorted[i].node;
    for (int suffix = 2; graph.channel_index(id); ++suffix) {
      id = options.id_prefix + "-" + sorted[i].node + "-" + std::to_string(suffix);
    }
    Channel c{id, graph.hub(), sorted[i].node, shares[i], shares[i], options.hub_policy, options.peer_policy, true};
    graph.open_channel(std::move(c));
    opened.push_back(id);
  }
  return opened;
}

ShrinkResult shrink_sleeve(ChannelGraph& graph, double target_fraction, msat_t baseline_msat,
                           std::span<const std::string> eligible) {
  if (!(target_fraction >= 0.0 && target_fraction <= 1.0)) throw ValidationError("shrink target must be in [0, 1]");
  if (baseline_msat < 0) throw ValidationError("shrink baseline must be non-negative");

  const std::string& hub = graph.hub();
  std::vector<std::size_t> order = graph.hub_channels();
  if (!eligible.empty()) {
    std::erase_if(order, [&](std::size_t idx) {
      return std::find(eligible.begin(), eligible.end(), graph.channel(idx).id) == eligible.end();
    });
  }
  std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    const Channel& a = graph.channel(l);
    const Channel& b = graph.channel(r);
    const msat_t ba = a.balance_of(hub);
    const msat_t bb = b.balance_of(hub);
    return ba != bb ? ba < bb : a.id < b.id;
  });

  const auto limit = static_cast<msat_t>(
      std::floor(static_cast<long double>(target_fraction) * static_cast<long double>(baseline_msat)));
  ShrinkResult out;
  for (std::size_t idx : order) out.deployed_before_msat += graph.channel(idx).capacity_msat;
  msat_t deployed = out.deployed_before_msat;
  for (std::size_t idx : order) {
    if (deployed <= limit) break;
    const Channel& c = graph.channel(idx);
    const msat_t hub_side = c.balance_of(hub);
    out.freed_msat += hub_side;
    out.returned_to_peers_msat += c.capacity_msat - hub_side;
    deployed -= c.capacity_msat;
    out.closed.push_back(c.id);
    graph.close_channel(idx);
  }
  out.deployed_after_msat = deployed;
  return out;
}

ShrinkResult shrink_sleeve(ChannelGraph& graph, double target_fraction) {
  return shrink_sleeve(graph, target_fraction, graph.hub_deployed_msat());
}

RebalanceResult rebalance(ChannelGraph& graph, std::string_view from_channel, std::string_view to_channel,
                          msat_t amount_msat, std::optional<msat_t> max_fee_msat) {
  const std::string& hub = graph.hub();
  auto from_idx = graph.channel_index(from_channel);
  auto to_idx = graph.channel_index(to_channel);
  if (!from_idx || !to_idx) throw ValidationError("rebalance: unknown channel");
  if (*from_idx == *to_idx) throw ValidationError("rebalance: channels must differ");
  const Channel& from = graph.channel(*from_idx);
  const Channel& to = graph.channel(*to_idx);
  if (!from.open || !to.open) throw ValidationError("rebalance: channels must be open");
  if ((from.node_a != hub && from.node_b != hub) || (to.node_a != hub && to.node_b != hub)) {
    throw ValidationError("rebalance: both channels must be adjacent to the hub");
  }
  if (amount_msat <= 0) throw ValidationError("rebalance: amount must be positive");
  if (amount_msat > from.balance_of(hub)) throw ValidationError("rebalance: amount exceeds hub balance on source");

  const Direction out_dir = from.outgoing_from(hub);
  const Direction in_dir = reverse(to.outgoing_from(hub));
  const std::string first_peer = from.receiver(out_dir);
  const std::string last_peer = to.sender(in_dir);

  RebalanceResult result;
  if (to.capacity_msat < amount_msat) return result;
  auto last_with_fee = amount_with_fee(to.policy(in_dir), amount_msat);
  if (!last_with_fee) return result;

  std::vector<Hop> hops{{from.id, out_dir, hub, first_peer}};
  if (first_peer != last_peer) {
    Exclusions ex;
    ex.nodes.insert(hub);
    auto middle = find_route(graph, first_peer, last_peer, *last_with_fee, std::nullopt, ex);
    if (middle.status != RouteStatus::kFound) return result;
    for (auto& h : middle.route->hops) hops.push_back(std::move(h));
  }
  hops.push_back({to.id, in_dir, last_peer, hub});

  Route route = price_route(graph, std::move(hops), amount_msat);
  if (graph.channel(*from_idx).capacity_msat < route.sender_amount()) return result;
  if (max_fee_msat && route.total_fee_msat > *max_fee_msat) {
    result.status = PaymentStatus::kFeeCapExceeded;
    return result;
  }
  PaymentResult paid = execute_payment(graph, route, amount_msat);
  result.status = paid.status;
  result.route = std::move(route);
  if (paid.status == PaymentStatus::kSettled) {
    result.cost_msat = result.route->total_fee_msat;
    result.cost_bps = static_cast<double>(result.cost_msat) * 10'000.0 / static_cast<double>(amount_msat);
  }
  return result;
}

}  // namespace satsrail::ln
