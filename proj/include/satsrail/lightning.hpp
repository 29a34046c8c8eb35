#pragma once

// Payment-channel network micro-simulator.
//
// The model is economic, not protocol-level: channels are two directional
// balances with a fixed capacity, forwarding nodes charge base + ppm fees on
// the amount they forward, and a payment either settles along its whole route
// or leaves every balance untouched.

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "satsrail/money.hpp"

namespace satsrail::ln {

struct FeePolicy {
  msat_t base_msat = 0;
  std::int64_t ppm = 0;  // proportional fee, parts per million

  bool operator==(const FeePolicy&) const = default;
};

// fee = base_msat + floor(forward_amount * ppm / 1_000_000). This is the only
// place fee math lives.
msat_t hop_fee(const FeePolicy& policy, msat_t forward_amount_msat);

enum class Direction : std::uint8_t { kAtoB = 0, kBtoA = 1 };

inline Direction reverse(Direction d) { return d == Direction::kAtoB ? Direction::kBtoA : Direction::kAtoB; }

struct Channel {
  std::string id;
  std::string node_a;
  std::string node_b;
  msat_t capacity_msat = 0;
  msat_t balance_a_msat = 0;
  FeePolicy policy_ab;  // charged by node_a when forwarding towards node_b
  FeePolicy policy_ba;  // charged by node_b when forwarding towards node_a
  bool open = true;

  msat_t balance_b_msat() const { return capacity_msat - balance_a_msat; }
  // Spendable balance on the sending side of `d`.
  msat_t sender_balance(Direction d) const { return d == Direction::kAtoB ? balance_a_msat : balance_b_msat(); }
  const FeePolicy& policy(Direction d) const { return d == Direction::kAtoB ? policy_ab : policy_ba; }
  const std::string& sender(Direction d) const { return d == Direction::kAtoB ? node_a : node_b; }
  const std::string& receiver(Direction d) const { return d == Direction::kAtoB ? node_b : node_a; }
  // Direction in which `node` sends; node must be an endpoint.
  Direction outgoing_from(std::string_view node) const {
    return node == node_a ? Direction::kAtoB : Direction::kBtoA;
  }
  msat_t balance_of(std::string_view node) const { return node == node_a ? balance_a_msat : balance_b_msat(); }

  bool operator==(const Channel&) const = default;
};

// Unvalidated description of a graph, as read from a graph file.
struct GraphSpec {
  std::vector<std::string> nodes;
  std::string hub;
  std::vector<Channel> channels;
};

class ChannelGraph {
 public:
  const std::string& hub() const { return hub_; }
  // Insertion order; indices are stable for the graph's lifetime.
  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<Channel>& channels() const { return channels_; }

  bool has_node(std::string_view node) const;
  // Throws UnknownNodeError.
  std::size_t node_index(std::string_view node) const;
  std::optional<std::size_t> channel_index(std::string_view id) const;
  const Channel& channel(std::size_t index) const { return channels_.at(index); }
  std::span<const std::size_t> incident(std::size_t node_index) const { return incident_.at(node_index); }
  // Node indices of a channel's endpoints {a, b}.
  const std::array<std::size_t, 2>& endpoints(std::size_t channel_index) const { return endpoints_.at(channel_index); }

  // Sum of the node's balances over its open channels.
  msat_t local_balance(std::string_view node) const;
  msat_t total_open_capacity() const;
  msat_t total_open_balance() const;
  // Open channels with the hub as an endpoint.
  std::vector<std::size_t> hub_channels() const;
  msat_t hub_deployed_msat() const;

  void add_node(const std::string& node);
  // Validates and appends; returns the new channel's index.
  std::size_t open_channel(Channel channel);
  void close_channel(std::size_t index);
  // Moves `amount` from the sender side of `d` to the receiver side.
  void move_balance(std::size_t index, Direction d, msat_t amount);

  // Structural equality of hub, nodes and channel state.
  bool operator==(const ChannelGraph& other) const {
    return hub_ == other.hub_ && nodes_ == other.nodes_ && channels_ == other.channels_;
  }

 private:
  friend ChannelGraph build_graph(const GraphSpec& spec);

  std::string hub_;
  std::vector<std::string> nodes_;
  std::unordered_map<std::string, std::size_t> node_idx_;
  std::vector<Channel> channels_;
  std::unordered_map<std::string, std::size_t> channel_idx_;
  std::vector<std::vector<std::size_t>> incident_;
  std::vector<std::array<std::size_t, 2>> endpoints_;
};

// Validates every invariant (hub exists, unique ids, endpoints exist and
// differ, 0 <= balance <= capacity, capacity > 0).
ChannelGraph build_graph(const GraphSpec& spec);

GraphSpec parse_graph_spec(const nlohmann::json& doc);
// Canonical form: sorted keys, nodes sorted, channels sorted by id.
nlohmann::json graph_to_json(const ChannelGraph& graph);
std::string serialize_graph(const ChannelGraph& graph);
ChannelGraph load_graph(const std::filesystem::path& path);

struct Hop {
  std::string channel_id;
  Direction direction = Direction::kAtoB;
  std::string from;
  std::string to;

  bool operator==(const Hop&) const = default;
};

// amounts_msat[i] is the amount entering hop i. fees_msat[i] is the fee kept
// by hops[i].from for forwarding over hop i; fees_msat[0] is always 0 because
// the sender does not pay itself. amounts_msat[i-1] - amounts_msat[i] ==
// fees_msat[i].
struct Route {
  std::vector<Hop> hops;
  std::vector<msat_t> amounts_msat;
  std::vector<msat_t> fees_msat;
  msat_t total_fee_msat = 0;

  msat_t sender_amount() const { return amounts_msat.front(); }
  msat_t delivered_amount() const { return amounts_msat.back(); }
  bool operator==(const Route&) const = default;
};

// Computes amounts and fees for a fixed hop sequence delivering `amount`.
Route price_route(const ChannelGraph& graph, std::vector<Hop> hops, msat_t amount_msat);

using EdgeKey = std::pair<std::string, Direction>;

struct Exclusions {
  std::set<EdgeKey> edges;
  std::set<std::string> nodes;
};

enum class RouteStatus { kFound, kNoRoute, kFeeCapExceeded };

struct RouteOutcome {
  RouteStatus status = RouteStatus::kNoRoute;
  std::optional<Route> route;
};

// Cheapest-total-fee route from src to dst. Only channel directions whose
// capacity covers the amount that would enter them are considered; private
// balances are not visible to the router. Equal-fee routes are broken by the
// lexicographic order of the node-id path, then of the channel-id path.
RouteOutcome find_route(const ChannelGraph& graph, std::string_view src, std::string_view dst, msat_t amount_msat,
                        std::optional<msat_t> max_fee_msat = std::nullopt, const Exclusions& exclusions = {});

enum class PaymentStatus { kSettled, kNoRoute, kInsufficientBalance, kFeeCapExceeded };

std::string to_string(PaymentStatus status);

struct PaymentResult {
  PaymentStatus status = PaymentStatus::kNoRoute;
  std::optional<Route> route;
  std::optional<std::size_t> failed_hop;
};

// Checks actual balances hop by hop; on failure the graph is left untouched.
// Throws StaleRouteError if the route references a closed or unknown channel.
PaymentResult execute_payment(ChannelGraph& graph, const Route& route, msat_t amount_msat);

struct SendResult {
  PaymentResult result;
  int attempts = 0;
};

// find_route + execute_payment, re-routing around the failed channel direction
// up to `max_retries` additional times.
SendResult send_payment(ChannelGraph& graph, std::string_view src, std::string_view dst, msat_t amount_msat,
                        std::optional<msat_t> max_fee_msat, int max_retries);

struct PeerWeight {
  std::string node;
  std::uint64_t weight = 1;
};

struct SleeveOptions {
  msat_t min_channel_msat = 1;
  FeePolicy hub_policy;   // hub -> peer direction
  FeePolicy peer_policy;  // peer -> hub direction
  std::string id_prefix = "sleeve";
};

// Opens one hub->peer channel per peer with capacity apportioned by weight
// (largest remainder, ties by peer id) and the whole balance on the hub side.
// Returns the new channel ids in peer-id order.
std::vector<std::string> deploy_sleeve(ChannelGraph& graph, msat_t sleeve_msat, const std::vector<PeerWeight>& peers,
                                       const SleeveOptions& options = {});

struct ShrinkResult {
  msat_t deployed_before_msat = 0;
  msat_t deployed_after_msat = 0;
  msat_t freed_msat = 0;               // hub-side balances, back to the treasury sleeve account
  msat_t returned_to_peers_msat = 0;   // counterparty balances, never claimed by the hub
  std::vector<std::string> closed;
};

// Closes hub channels, smallest hub-side balance first (ties by channel id),
// until deployed hub capacity <= target_fraction * baseline_msat. When
// `eligible` is non-empty only those channel ids count as deployed sleeve and
// only they may be closed.
ShrinkResult shrink_sleeve(ChannelGraph& graph, double target_fraction, msat_t baseline_msat,
                           std::span<const std::string> eligible = {});
// Baseline is the currently deployed hub capacity.
ShrinkResult shrink_sleeve(ChannelGraph& graph, double target_fraction);

struct RebalanceResult {
  PaymentStatus status = PaymentStatus::kNoRoute;
  msat_t cost_msat = 0;
  double cost_bps = 0.0;
  std::optional<Route> route;
};

// Circular self-payment: the hub sends over `from_channel`, the payment comes
// back over `to_channel` delivering exactly `amount_msat`. The hub pays the
// intermediaries' fees, so its total balance drops by cost_msat.
RebalanceResult rebalance(ChannelGraph& graph, std::string_view from_channel, std::string_view to_channel,
                          msat_t amount_msat, std::optional<msat_t> max_fee_msat = std::nullopt);

}  // namespace satsrail::ln
