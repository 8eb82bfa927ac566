#pragma once

// Forward-pass operation counts: per-layer cost times layer count, plus any
// fixed encode/decode cost, so estimates are exactly linear in the number of
// stacked layers. MACs count multiply-accumulates in matrix products;
// comparisons count min/max selections; activations count nonlinearity and
// softmax-exponential evaluations.

#include <cstdint>

#include "platoon/auction.hpp"
#include "platoon/commnet.hpp"

namespace platoon::cost {

struct OpCounts {
  std::uint64_t macs = 0;
  std::uint64_t comparisons = 0;
  std::uint64_t activations = 0;

  OpCounts operator+(const OpCounts& o) const {
    return {macs + o.macs, comparisons + o.comparisons, activations + o.activations};
  }
  OpCounts operator*(std::uint64_t f) const {
    return {macs * f, comparisons * f, activations * f};
  }
  bool operator==(const OpCounts&) const = default;
};

struct CostEstimate {
  OpCounts per_layer;        // replicated cost of one stacked layer
  std::uint64_t layers = 1;  // stack depth
  OpCounts fixed;            // encode/decode cost outside the stack

  OpCounts total() const { return fixed + per_layer * layers; }
};

// One max-of-min transform evaluated for every bidder: K*J MACs and
// K*(J-1) + (K-1) comparisons per bidder per layer.
inline CostEstimate monotonic_inference_cost(int groups, int units, int bidders,
                                             std::uint64_t layers = 1) {
  num::require(groups >= 1 && units >= 1 && bidders >= 1,
               "monotonic_inference_cost: sizes must be >= 1");
  num::require(layers >= 1, "monotonic_inference_cost: layers must be >= 1");
  const auto k = static_cast<std::uint64_t>(groups);
  const auto j = static_cast<std::uint64_t>(units);
  const auto n = static_cast<std::uint64_t>(bidders);
  CostEstimate est;
  est.per_layer = OpCounts{k * j, k * (j - 1) + (k - 1), 0} * n;
  est.layers = layers;
  return est;
}

inline CostEstimate inference_cost(const auction::MonotonicNet& net,
                                   int bidders) {
  return monotonic_inference_cost(net.groups, net.units, bidders);
}

// Per communication layer and agent: the self and communication products
// (2 d^2 MACs) and d activations. Encoder, decoder and the action softmax
// are fixed cost outside the stack.
inline CostEstimate commnet_inference_cost(const comm::CommNetConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::uint64_t>(cfg.agents);
  const auto d = static_cast<std::uint64_t>(cfg.hidden);
  const auto obs = static_cast<std::uint64_t>(cfg.obs_dim);
  const auto acts = static_cast<std::uint64_t>(cfg.actions);
  CostEstimate est;
  est.per_layer = OpCounts{2 * d * d, 0, d} * n;
  est.layers = static_cast<std::uint64_t>(cfg.layers);
  est.fixed = OpCounts{obs * d + d * acts, 0, acts} * n;
  return est;
}

inline CostEstimate inference_cost(const comm::CommNetPolicy& policy) {
  return commnet_inference_cost(policy.cfg);
}

}  // namespace platoon::cost
