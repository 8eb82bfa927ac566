#pragma once

// Trainable revenue-optimal single-item auction: a strictly increasing
// max-of-min piecewise-linear value transform per bidder, softmax winner
// selection against a zero dummy slot, a ReLU'd second-highest payment in
// transformed space mapped back through the exact inverse transform, and
// batched SGD on the negative-revenue objective with hand-derived gradients.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "platoon/mechanisms.hpp"
#include "platoon/numeric.hpp"
#include "platoon/params.hpp"
#include "platoon/rng.hpp"
#include "platoon/sampler.hpp"

namespace platoon::auction {

using BidProfile = std::vector<double>;

inline void validate_bids(const BidProfile& bids) {
  num::require(!bids.empty(), "bid profile must not be empty");
  for (double v : bids)
    num::require(std::isfinite(v) && v >= 0.0, "bids must be finite and >= 0");
}

// Max-of-min network over increasing affine pieces. Weights are stored as
// log-weights so every effective weight exp(alpha) stays strictly positive
// under unconstrained SGD, which keeps the transform strictly increasing
// and exactly invertible.
struct MonotonicNet {
  int groups = 1;  // K
  int units = 1;   // J per group
  bool shared = true;
  int bidders = 1;
  std::vector<num::Matrix> log_weight;  // one K x J set, or one per bidder
  std::vector<num::Matrix> bias;

  int param_sets() const { return shared ? 1 : bidders; }

  const num::Matrix& alpha_of(int bidder) const {
    return log_weight[shared ? 0 : static_cast<std::size_t>(bidder)];
  }
  const num::Matrix& beta_of(int bidder) const {
    return bias[shared ? 0 : static_cast<std::size_t>(bidder)];
  }

  void validate() const {
    num::require(groups >= 1 && units >= 1, "MonotonicNet: need K, J >= 1");
    num::require(bidders >= 1, "MonotonicNet: need at least one bidder");
    num::require(log_weight.size() == static_cast<std::size_t>(param_sets()) &&
                     bias.size() == log_weight.size(),
                 "MonotonicNet: parameter set count mismatch");
    for (std::size_t s = 0; s < log_weight.size(); ++s) {
      num::require(log_weight[s].rows() == static_cast<std::size_t>(groups) &&
                       log_weight[s].cols() == static_cast<std::size_t>(units) &&
                       bias[s].rows() == log_weight[s].rows() &&
                       bias[s].cols() == log_weight[s].cols(),
                   "MonotonicNet: coefficient shape mismatch");
      num::require_finite(log_weight[s].values(), "MonotonicNet log-weights");
      num::require_finite(bias[s].values(), "MonotonicNet biases");
    }
  }

  // phi(v) = v.
  static MonotonicNet identity(int bidders = 1) {
    MonotonicNet net;
    net.bidders = bidders;
    net.log_weight = {num::Matrix(1, 1, 0.0)};
    net.bias = {num::Matrix(1, 1, 0.0)};
    return net;
  }

  // phi(v) = 2v - 1, the uniform[0,1] virtual valuation.
  static MonotonicNet uniform01_preset(int bidders = 1) {
    MonotonicNet net;
    net.bidders = bidders;
    net.log_weight = {num::Matrix(1, 1, std::log(2.0))};
    net.bias = {num::Matrix(1, 1, -1.0)};
    return net;
  }

  // Biases start small so the initial transform is positive over part of the
  // bid support; a transform that starts everywhere below the dummy saturates
  // the allocation softmax and receives no gradient.
  static MonotonicNet random_init(int groups, int units, bool shared,
                                  int bidders, num::Rng& rng) {
    MonotonicNet net;
    net.groups = groups;
    net.units = units;
    net.shared = shared;
    net.bidders = bidders;
    net.validate_dims(groups, units, bidders);
    const int sets = net.param_sets();
    for (int s = 0; s < sets; ++s) {
      num::Matrix a(static_cast<std::size_t>(groups), static_cast<std::size_t>(units));
      num::Matrix b(static_cast<std::size_t>(groups), static_cast<std::size_t>(units));
      for (std::size_t k = 0; k < a.rows(); ++k)
        for (std::size_t j = 0; j < a.cols(); ++j) {
          a(k, j) = rng.uniform(-0.5, 0.5);
          b(k, j) = rng.uniform(-0.25, 0.25);
        }
      net.log_weight.push_back(std::move(a));
      net.bias.push_back(std::move(b));
    }
    return net;
  }

  double transform(double bid, int bidder = 0) const {
    return forward_piece(bid, bidder).value;
  }

  num::GroupedPiece forward_piece(double bid, int bidder) const {
    const auto& a = alpha_of(bidder);
    const auto& b = beta_of(bidder);
    num::GroupedPiece best;
    for (std::size_t k = 0; k < a.rows(); ++k) {
      double inner = std::exp(a(k, 0)) * bid + b(k, 0);
      std::size_t inner_j = 0;
      for (std::size_t j = 1; j < a.cols(); ++j) {
        const double v = std::exp(a(k, j)) * bid + b(k, j);
        if (v < inner) {
          inner = v;
          inner_j = j;
        }
      }
      if (k == 0 || inner > best.value) best = {inner, k, inner_j};
    }
    return best;
  }

  double inverse(double y, int bidder = 0) const {
    return inverse_piece(y, bidder).value;
  }

  // Exact closed-form inverse of a max-of-min of increasing affine pieces:
  // min over groups of (max over units of (y - beta) / w).
  num::GroupedPiece inverse_piece(double y, int bidder) const {
    const auto& a = alpha_of(bidder);
    const auto& b = beta_of(bidder);
    num::GroupedPiece best;
    for (std::size_t k = 0; k < a.rows(); ++k) {
      double inner = (y - b(k, 0)) * std::exp(-a(k, 0));
      std::size_t inner_j = 0;
      for (std::size_t j = 1; j < a.cols(); ++j) {
        const double v = (y - b(k, j)) * std::exp(-a(k, j));
        if (v > inner) {
          inner = v;
          inner_j = j;
        }
      }
      if (k == 0 || inner < best.value) best = {inner, k, inner_j};
    }
    return best;
  }

 private:
  static void validate_dims(int groups, int units, int bidders) {
    num::require(groups >= 1 && units >= 1, "MonotonicNet: need K, J >= 1");
    num::require(bidders >= 1, "MonotonicNet: need at least one bidder");
  }
};

inline std::vector<double> transform_bids(const MonotonicNet& net,
                                          const BidProfile& bids) {
  validate_bids(bids);
  num::require(net.shared || net.bidders == static_cast<int>(bids.size()),
               "transform_bids: bidder count mismatch");
  std::vector<double> out(bids.size());
  for (std::size_t i = 0; i < bids.size(); ++i)
    out[i] = net.transform(bids[i], static_cast<int>(i));
  return out;
}

inline double inverse_transform(const MonotonicNet& net, double y,
                                int bidder = 0) {
  return net.inverse(y, bidder);
}

// Softmax over the transformed bids plus a zero dummy slot; the last entry
// is the no-sale probability.
inline std::vector<double> allocate(const std::vector<double>& transformed,
                                    double temperature) {
  num::Vector z(transformed);
  z.push_back(0.0);
  return num::softmax_temp(z, temperature);
}

// p0_i = relu(max of the other transformed bids); a lone bidder faces the
// dummy floor of 0.
inline std::vector<double> payment_raw(const std::vector<double>& transformed) {
  const std::size_t n = transformed.size();
  num::require(n >= 1, "payment_raw: empty profile");
  std::vector<double> p0(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      best = std::max(best, transformed[j]);
    }
    p0[i] = best;
  }
  return p0;
}

enum class AllocationMode { soft, hard };

struct AuctionOutcome {
  std::vector<double> transformed;   // virtual-value space
  std::vector<double> allocation;    // N + 1 entries, dummy last
  std::vector<double> raw_payments;  // p0, transformed space
  std::vector<double> payments;      // value space
  std::optional<int> winner;         // empty when the dummy takes the max
};

// Hard winner: argmax over transformed bids and the zero dummy, ties to the
// lowest bidder index (a bidder tied with the dummy wins).
inline std::optional<int> hard_winner(const std::vector<double>& transformed) {
  const std::size_t w = num::argmax_first(transformed);
  if (transformed[w] < 0.0) return std::nullopt;
  return static_cast<int>(w);
}

inline AuctionOutcome run_auction(const MonotonicNet& net,
                                  const BidProfile& bids, double temperature,
                                  AllocationMode mode) {
  AuctionOutcome out;
  out.transformed = transform_bids(net, bids);
  out.allocation = allocate(out.transformed, temperature);
  out.raw_payments = payment_raw(out.transformed);
  out.winner = hard_winner(out.transformed);
  out.payments.assign(bids.size(), 0.0);
  if (mode == AllocationMode::soft) {
    for (std::size_t i = 0; i < bids.size(); ++i)
      out.payments[i] = net.inverse(out.raw_payments[i], static_cast<int>(i));
  } else if (out.winner) {
    const auto w = static_cast<std::size_t>(*out.winner);
    out.payments[w] = net.inverse(out.raw_payments[w], *out.winner);
  }
  return out;
}

// Winner and payment only; the hot path for Monte Carlo audits.
inline mech::SaleResult hard_sale(const MonotonicNet& net,
                                  const BidProfile& bids) {
  const auto transformed = transform_bids(net, bids);
  mech::SaleResult sale{hard_winner(transformed),
                        std::vector<double>(bids.size(), 0.0)};
  if (sale.winner) {
    const auto w = static_cast<std::size_t>(*sale.winner);
    double second = 0.0;
    for (std::size_t j = 0; j < transformed.size(); ++j)
      if (j != w) second = std::max(second, transformed[j]);
    sale.payments[w] = net.inverse(second, *sale.winner);
  }
  return sale;
}

inline mech::Mechanism as_mechanism(MonotonicNet net) {
  net.validate();
  return [net = std::move(net)](const BidProfile& bids) {
    return hard_sale(net, bids);
  };
}

// --- parameter binding -----------------------------------------------------

inline std::string alpha_name(const MonotonicNet& net, int set) {
  return net.shared ? "alpha" : "alpha." + std::to_string(set);
}
inline std::string beta_name(const MonotonicNet& net, int set) {
  return net.shared ? "beta" : "beta." + std::to_string(set);
}

inline num::ParamStore to_params(const MonotonicNet& net) {
  num::ParamStore store;
  const auto rows = static_cast<std::size_t>(net.groups);
  const auto cols = static_cast<std::size_t>(net.units);
  for (int s = 0; s < net.param_sets(); ++s) {
    store.add(alpha_name(net, s), {rows, cols}, net.log_weight[static_cast<std::size_t>(s)].values());
    store.add(beta_name(net, s), {rows, cols}, net.bias[static_cast<std::size_t>(s)].values());
  }
  return store;
}

inline void load_params(MonotonicNet& net, const num::ParamStore& store) {
  for (int s = 0; s < net.param_sets(); ++s) {
    net.log_weight[static_cast<std::size_t>(s)].values() = store.at(alpha_name(net, s)).value;
    net.bias[static_cast<std::size_t>(s)].values() = store.at(beta_name(net, s)).value;
  }
}

// --- training objective ----------------------------------------------------

// Batch-mean negative expected revenue of the soft allocation,
//   loss = -(1/B) sum_s sum_i g_i(btilde) phi_i^{-1}(p0_i),
// with analytic parameter gradients accumulated into `grads` when given.
inline double revenue_loss(const MonotonicNet& net,
                           const std::vector<BidProfile>& batch,
                           double temperature,
                           num::ParamStore* grads = nullptr) {
  num::require(!batch.empty(), "revenue_loss: empty batch");
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;

  for (const BidProfile& bids : batch) {
    validate_bids(bids);
    const std::size_t n = bids.size();
    num::require(net.shared || net.bidders == static_cast<int>(n),
                 "revenue_loss: bidder count mismatch");

    std::vector<num::GroupedPiece> fw(n);
    std::vector<double> transformed(n);
    for (std::size_t i = 0; i < n; ++i) {
      fw[i] = net.forward_piece(bids[i], static_cast<int>(i));
      transformed[i] = fw[i].value;
    }
    const auto g = allocate(transformed, temperature);

    // Raw payments with their argmax structure.
    std::vector<double> p0(n, 0.0);
    std::vector<std::ptrdiff_t> paying_rival(n, -1);  // -1: dummy floor binds
    for (std::size_t i = 0; i < n; ++i) {
      double best = 0.0;
      std::ptrdiff_t who = -1;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        if (transformed[j] > best) {
          best = transformed[j];
          who = static_cast<std::ptrdiff_t>(j);
        }
      }
      p0[i] = best;
      paying_rival[i] = who;
    }

    std::vector<num::GroupedPiece> inv(n);
    std::vector<double> pay(n);
    for (std::size_t i = 0; i < n; ++i) {
      inv[i] = net.inverse_piece(p0[i], static_cast<int>(i));
      pay[i] = inv[i].value;
    }

    double sample_revenue = 0.0;
    for (std::size_t i = 0; i < n; ++i) sample_revenue += g[i] * pay[i];
    loss -= scale * sample_revenue;

    if (!grads) continue;

    // d loss / d g_i and the softmax pullback onto the transformed bids.
    // The dummy slot is constant, so its logit receives no gradient.
    std::vector<double> dg(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) dg[i] = -scale * pay[i];
    double mix = 0.0;
    for (std::size_t m = 0; m < n + 1; ++m) mix += dg[m] * g[m];
    std::vector<double> db(n, 0.0);
    for (std::size_t m = 0; m < n; ++m)
      db[m] = temperature * g[m] * (dg[m] - mix);

    for (std::size_t i = 0; i < n; ++i) {
      const double dpay = -scale * g[i];
      const int set = net.shared ? 0 : static_cast<int>(i);
      auto& ga = grads->at(alpha_name(net, set));
      auto& gb = grads->at(beta_name(net, set));
      const std::size_t slot = inv[i].group * static_cast<std::size_t>(net.units) + inv[i].unit;
      const double w_inv =
          std::exp(net.alpha_of(static_cast<int>(i))(inv[i].group, inv[i].unit));
      // Through the active inverse piece (p0 - beta) / w.
      ga.grad[slot] += dpay * (-pay[i]);
      gb.grad[slot] += dpay * (-1.0 / w_inv);
      // Into the rival bid that sets p0, unless the ReLU floor binds.
      if (paying_rival[i] >= 0 && p0[i] > 0.0)
        db[static_cast<std::size_t>(paying_rival[i])] += dpay / w_inv;
    }

    for (std::size_t m = 0; m < n; ++m) {
      if (db[m] == 0.0) continue;
      const int set = net.shared ? 0 : static_cast<int>(m);
      auto& ga = grads->at(alpha_name(net, set));
      auto& gb = grads->at(beta_name(net, set));
      const std::size_t slot = fw[m].group * static_cast<std::size_t>(net.units) + fw[m].unit;
      const double w_fw =
          std::exp(net.alpha_of(static_cast<int>(m))(fw[m].group, fw[m].unit));
      ga.grad[slot] += db[m] * w_fw * bids[m];
      gb.grad[slot] += db[m];
    }
  }

  if (!std::isfinite(loss)) throw num::numeric_error("revenue_loss: non-finite loss");
  return loss;
}

// Mean winner payment of the hard rule over a set of profiles.
inline double hard_revenue(const MonotonicNet& net,
                           const std::vector<BidProfile>& profiles) {
  num::require(!profiles.empty(), "hard_revenue: empty profile set");
  double total = 0.0;
  for (const auto& bids : profiles) {
    const auto sale = hard_sale(net, bids);
    for (double p : sale.payments) total += p;
  }
  return total / static_cast<double>(profiles.size());
}

// --- trainer -----------------------------------------------------------------

struct AuctionTrainConfig {
  int bidders = 3;
  int groups = 5;  // K
  int units = 10;  // J
  double temp_train = 50.0;
  double temp_eval = 500.0;
  double learning_rate = 1e-3;
  int batch = 128;
  int iterations = 5000;
  bool shared = true;
  std::uint64_t seed = 1;

  void validate() const {
    num::require(bidders >= 1 && groups >= 1 && units >= 1,
                 "AuctionTrainConfig: sizes must be >= 1");
    num::require(temp_train > 0.0 && temp_eval >= temp_train,
                 "AuctionTrainConfig: need 0 < temp_train <= temp_eval");
    num::require(learning_rate >= 0.0, "AuctionTrainConfig: negative learning rate");
    num::require(batch >= 1 && iterations >= 0,
                 "AuctionTrainConfig: batch >= 1 and iterations >= 0");
  }
};

struct AuctionTrainRow {
  int iteration = 0;
  double loss = 0.0;
  double revenue_hard = 0.0;  // Monte Carlo estimate on the training batch
  double seconds = 0.0;       // wall clock since training start
};

struct AuctionTrainResult {
  MonotonicNet net;
  std::vector<AuctionTrainRow> metrics;
};

inline AuctionTrainResult train_auction(const AuctionTrainConfig& config,
                                        const ValuationSampler& sampler) {
  config.validate();
  num::require(sampler.bidders() == config.bidders,
               "train_auction: sampler bidder count mismatch");
  num::Rng rng(config.seed);
  MonotonicNet net = MonotonicNet::random_init(
      config.groups, config.units, config.shared, config.bidders, rng);
  num::ParamStore store = to_params(net);

  AuctionTrainResult result;
  result.metrics.reserve(static_cast<std::size_t>(config.iterations));
  const auto start = std::chrono::steady_clock::now();

  std::vector<BidProfile> batch(static_cast<std::size_t>(config.batch));
  for (int iter = 0; iter < config.iterations; ++iter) {
    for (auto& bids : batch) bids = sampler.sample_profile(rng);
    load_params(net, store);
    store.zero_grads();
    double loss;
    try {
      loss = revenue_loss(net, batch, config.temp_train, &store);
    } catch (const num::numeric_error& e) {
      throw num::numeric_error(std::string(e.what()) + " at iteration " +
                               std::to_string(iter));
    }
    const double rev = hard_revenue(net, batch);
    try {
      num::sgd_step(store, config.learning_rate);
    } catch (const num::numeric_error& e) {
      throw num::numeric_error(std::string(e.what()) + " at iteration " +
                               std::to_string(iter));
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    result.metrics.push_back({iter, loss, rev, seconds});
  }
  load_params(net, store);
  result.net = std::move(net);
  return result;
}

}  // namespace platoon::auction
