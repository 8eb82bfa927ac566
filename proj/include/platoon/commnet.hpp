#pragma once

// Communication-augmented multi-agent policy: one shared network encodes
// each agent's observation, interleaves dense layers with the mean of the
// other agents' hidden states, and decodes per-agent action distributions.
// Trained centrally with REINFORCE on team reward; executed per agent on
// local observations only.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "platoon/numeric.hpp"
#include "platoon/params.hpp"
#include "platoon/rng.hpp"

namespace platoon::comm {

using JointObservation = std::vector<num::Vector>;  // one vector per agent

struct CommNetConfig {
  int agents = 2;
  int obs_dim = 1;
  int hidden = 32;
  int layers = 2;
  int actions = 2;
  num::Activation activation = num::Activation::tanh;

  void validate() const {
    num::require(agents >= 1, "CommNetConfig: need at least one agent");
    num::require(obs_dim >= 1 && hidden >= 1 && actions >= 1,
                 "CommNetConfig: dimensions must be >= 1");
    num::require(layers >= 1, "CommNetConfig: need at least one layer");
  }
};

// Mean of the other agents' hidden vectors. Addends are summed in ascending
// value order per coordinate, so the result does not depend on how agents
// are indexed; a single agent gets a zero vector.
inline num::Vector comm_mean(const std::vector<num::Vector>& hidden,
                             std::size_t self_index) {
  const std::size_t n = hidden.size();
  num::require(n >= 1 && self_index < n, "comm_mean: bad agent index");
  const std::size_t d = hidden[0].size();
  num::Vector c(d, 0.0);
  if (n == 1) return c;
  std::vector<double> addends(n - 1);
  for (std::size_t t = 0; t < d; ++t) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == self_index) continue;
      addends[m++] = hidden[j][t];
    }
    std::sort(addends.begin(), addends.end());
    double sum = 0.0;
    for (double a : addends) sum += a;
    c[t] = sum / static_cast<double>(n - 1);
  }
  return c;
}

struct CommNetPolicy {
  CommNetConfig cfg;
  num::Matrix encoder;                   // hidden x obs_dim
  std::vector<num::Matrix> self_weight;  // layers, hidden x hidden
  std::vector<num::Matrix> comm_weight;  // layers, hidden x hidden
  num::Matrix decoder;                   // actions x hidden

  // Hidden weights draw from U(-s, s) with s = 1/sqrt(fan_in); the decoder
  // starts at zero so the initial policy is exactly uniform.
  static CommNetPolicy init(const CommNetConfig& cfg, num::Rng& rng) {
    cfg.validate();
    auto draw = [&rng](std::size_t rows, std::size_t cols) {
      num::Matrix m(rows, cols);
      const double s = 1.0 / std::sqrt(static_cast<double>(cols));
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.uniform(-s, s);
      return m;
    };
    CommNetPolicy p;
    p.cfg = cfg;
    const auto d = static_cast<std::size_t>(cfg.hidden);
    p.encoder = draw(d, static_cast<std::size_t>(cfg.obs_dim));
    for (int l = 0; l < cfg.layers; ++l) {
      p.self_weight.push_back(draw(d, d));
      p.comm_weight.push_back(draw(d, d));
    }
    p.decoder = num::Matrix(static_cast<std::size_t>(cfg.actions), d, 0.0);
    return p;
  }

  void validate_obs(const JointObservation& obs) const {
    num::require(obs.size() == static_cast<std::size_t>(cfg.agents),
                 "CommNetPolicy: agent count mismatch");
    for (const auto& o : obs) {
      num::require(o.size() == static_cast<std::size_t>(cfg.obs_dim),
                   "CommNetPolicy: observation dimension mismatch");
      num::require_finite(o, "CommNetPolicy observation");
    }
  }
};

struct ForwardCache {
  // hidden[l][agent]: post-activation state entering layer l (l = 0 is the
  // encoder output); pre[l][agent] and comm[l][agent] belong to layer l.
  std::vector<std::vector<num::Vector>> hidden;
  std::vector<std::vector<num::Vector>> pre;
  std::vector<std::vector<num::Vector>> comm;
  std::vector<num::Vector> logits;
  std::vector<num::Vector> dists;
};

inline std::vector<num::Vector> forward_cached(const CommNetPolicy& policy,
                                               const JointObservation& obs,
                                               ForwardCache& cache) {
  policy.validate_obs(obs);
  const auto n = static_cast<std::size_t>(policy.cfg.agents);
  const auto layers = static_cast<std::size_t>(policy.cfg.layers);
  const num::Vector zero_hidden(static_cast<std::size_t>(policy.cfg.hidden), 0.0);
  const num::Vector zero_actions(static_cast<std::size_t>(policy.cfg.actions), 0.0);

  cache.hidden.assign(layers + 1, std::vector<num::Vector>(n));
  cache.pre.assign(layers, std::vector<num::Vector>(n));
  cache.comm.assign(layers, std::vector<num::Vector>(n));
  cache.logits.assign(n, {});
  cache.dists.assign(n, {});

  for (std::size_t i = 0; i < n; ++i)
    cache.hidden[0][i] = num::affine_eval(policy.encoder, obs[i], zero_hidden);

  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t i = 0; i < n; ++i)
      cache.comm[l][i] = comm_mean(cache.hidden[l], i);
    for (std::size_t i = 0; i < n; ++i) {
      num::Vector pre = num::affine_eval(policy.self_weight[l],
                                         cache.hidden[l][i], zero_hidden);
      const num::Vector via_comm = num::affine_eval(
          policy.comm_weight[l], cache.comm[l][i], zero_hidden);
      for (std::size_t t = 0; t < pre.size(); ++t) pre[t] += via_comm[t];
      cache.pre[l][i] = pre;
      cache.hidden[l + 1][i] =
          num::apply_activation(policy.cfg.activation, pre);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    cache.logits[i] =
        num::affine_eval(policy.decoder, cache.hidden[layers][i], zero_actions);
    cache.dists[i] = num::softmax_temp(cache.logits[i], 1.0);
  }
  return cache.dists;
}

// Per-agent action distributions for a joint observation.
inline std::vector<num::Vector> forward(const CommNetPolicy& policy,
                                        const JointObservation& obs) {
  ForwardCache cache;
  return forward_cached(policy, obs, cache);
}

struct JointAction {
  std::vector<int> actions;
  std::vector<double> log_probs;
};

inline JointAction sample_joint_action(const std::vector<num::Vector>& dists,
                                       num::Rng& rng) {
  JointAction out;
  out.actions.reserve(dists.size());
  out.log_probs.reserve(dists.size());
  for (const auto& d : dists) {
    const std::size_t a = rng.categorical(d);
    out.actions.push_back(static_cast<int>(a));
    out.log_probs.push_back(std::log(d[a]));
  }
  return out;
}

inline std::vector<int> greedy_joint_action(const std::vector<num::Vector>& dists) {
  std::vector<int> actions;
  actions.reserve(dists.size());
  for (const auto& d : dists)
    actions.push_back(static_cast<int>(num::argmax_first(d)));
  return actions;
}

struct Step {
  JointObservation obs;
  std::vector<int> actions;
  double reward = 0.0;
  std::vector<double> log_probs;
};
using Trajectory = std::vector<Step>;

// --- parameter binding -------------------------------------------------------

inline num::ParamStore to_params(const CommNetPolicy& policy) {
  num::ParamStore store;
  store.add("encoder", {policy.encoder.rows(), policy.encoder.cols()},
            policy.encoder.values());
  for (int l = 0; l < policy.cfg.layers; ++l) {
    const auto& H = policy.self_weight[static_cast<std::size_t>(l)];
    const auto& C = policy.comm_weight[static_cast<std::size_t>(l)];
    store.add("self." + std::to_string(l), {H.rows(), H.cols()}, H.values());
    store.add("comm." + std::to_string(l), {C.rows(), C.cols()}, C.values());
  }
  store.add("decoder", {policy.decoder.rows(), policy.decoder.cols()},
            policy.decoder.values());
  return store;
}

inline void load_params(CommNetPolicy& policy, const num::ParamStore& store) {
  policy.encoder.values() = store.at("encoder").value;
  for (int l = 0; l < policy.cfg.layers; ++l) {
    policy.self_weight[static_cast<std::size_t>(l)].values() =
        store.at("self." + std::to_string(l)).value;
    policy.comm_weight[static_cast<std::size_t>(l)].values() =
        store.at("comm." + std::to_string(l)).value;
  }
  policy.decoder.values() = store.at("decoder").value;
}

// --- REINFORCE ----------------------------------------------------------------

// Discounted team returns G_t for one trajectory.
inline std::vector<double> discounted_returns(const Trajectory& traj,
                                              double gamma) {
  std::vector<double> g(traj.size(), 0.0);
  double acc = 0.0;
  for (std::size_t t = traj.size(); t-- > 0;) {
    acc = traj[t].reward + gamma * acc;
    g[t] = acc;
  }
  return g;
}

struct ReinforceDiag {
  double surrogate_loss = 0.0;
  double baseline = 0.0;
  double grad_norm = 0.0;
  double mean_return = 0.0;  // undiscounted, per trajectory
};

namespace detail {

// Advantages G_t minus the batch-mean return at the same timestep (overall
// batch mean for steps some trajectories lack); baselines are constants with
// respect to the parameters.
inline std::pair<std::vector<std::vector<double>>, double> advantages(
    std::span<const Trajectory> batch, double gamma) {
  std::vector<std::vector<double>> returns;
  returns.reserve(batch.size());
  std::size_t longest = 0;
  for (const auto& traj : batch) {
    returns.push_back(discounted_returns(traj, gamma));
    longest = std::max(longest, returns.back().size());
  }
  std::vector<double> step_mean(longest, 0.0);
  std::vector<std::size_t> step_count(longest, 0);
  double overall = 0.0;
  std::size_t count = 0;
  for (const auto& g : returns)
    for (std::size_t t = 0; t < g.size(); ++t) {
      step_mean[t] += g[t];
      ++step_count[t];
      overall += g[t];
      ++count;
    }
  for (std::size_t t = 0; t < longest; ++t)
    step_mean[t] = step_count[t] > 1 ? step_mean[t] / static_cast<double>(step_count[t])
                                     : (count > 0 ? overall / static_cast<double>(count) : 0.0);
  for (auto& g : returns)
    for (std::size_t t = 0; t < g.size(); ++t) g[t] -= step_mean[t];
  const double baseline = count > 0 ? overall / static_cast<double>(count) : 0.0;
  return {std::move(returns), baseline};
}

}  // namespace detail

// Surrogate objective whose gradient is the REINFORCE estimator:
//   loss = -(1/B) sum_traj sum_t (G_t - baseline) sum_i log pi(a_it | obs_t).
// Advantages are recomputed from the stored rewards, so the value is a
// deterministic function of (policy, batch, gamma).
inline double reinforce_surrogate(const CommNetPolicy& policy,
                                  std::span<const Trajectory> batch,
                                  double gamma) {
  num::require(!batch.empty(), "reinforce: empty batch");
  const auto [adv, baseline] = detail::advantages(batch, gamma);
  double loss = 0.0;
  ForwardCache cache;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& traj = batch[b];
    for (std::size_t t = 0; t < traj.size(); ++t) {
      const auto dists = forward_cached(policy, traj[t].obs, cache);
      double logp = 0.0;
      for (std::size_t i = 0; i < dists.size(); ++i)
        logp += std::log(dists[i][static_cast<std::size_t>(traj[t].actions[i])]);
      loss -= adv[b][t] * logp;
    }
  }
  return loss / static_cast<double>(batch.size());
}

// Analytic gradient of reinforce_surrogate, accumulated into `grads`.
inline ReinforceDiag reinforce_gradient(const CommNetPolicy& policy,
                                        std::span<const Trajectory> batch,
                                        double gamma, num::ParamStore& grads) {
  num::require(!batch.empty(), "reinforce: empty batch");
  const auto [adv, baseline] = detail::advantages(batch, gamma);
  const double scale = 1.0 / static_cast<double>(batch.size());
  const auto n = static_cast<std::size_t>(policy.cfg.agents);
  const auto layers = static_cast<std::size_t>(policy.cfg.layers);
  const auto hidden_dim = static_cast<std::size_t>(policy.cfg.hidden);

  auto& g_enc = grads.at("encoder");
  auto& g_dec = grads.at("decoder");

  ReinforceDiag diag;
  diag.baseline = baseline;
  double loss = 0.0;
  ForwardCache cache;

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& traj = batch[b];
    double total_reward = 0.0;
    for (const auto& step : traj) total_reward += step.reward;
    diag.mean_return += total_reward * scale;

    for (std::size_t t = 0; t < traj.size(); ++t) {
      const auto& step = traj[t];
      const auto dists = forward_cached(policy, step.obs, cache);
      const double coeff = scale * adv[b][t];

      // d loss / d logits_i = coeff * (pi_i - onehot(a_i))
      std::vector<num::Vector> dlogits(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto a = static_cast<std::size_t>(step.actions[i]);
        loss -= coeff * std::log(dists[i][a]);
        dlogits[i] = dists[i];
        for (double& v : dlogits[i]) v *= coeff;
        dlogits[i][a] -= coeff;
      }

      // Decoder.
      std::vector<num::Vector> dh(n, num::Vector(hidden_dim, 0.0));
      for (std::size_t i = 0; i < n; ++i) {
        const auto& top = cache.hidden[layers][i];
        for (std::size_t r = 0; r < policy.decoder.rows(); ++r) {
          const double d = dlogits[i][r];
          if (d == 0.0) continue;
          for (std::size_t c = 0; c < policy.decoder.cols(); ++c) {
            g_dec.grad[r * policy.decoder.cols() + c] += d * top[c];
            dh[i][c] += d * policy.decoder(r, c);
          }
        }
      }

      // Communication layers, top down.
      for (std::size_t l = layers; l-- > 0;) {
        auto& g_self = grads.at("self." + std::to_string(l));
        auto& g_comm = grads.at("comm." + std::to_string(l));
        std::vector<num::Vector> dh_prev(n, num::Vector(hidden_dim, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
          num::Vector du(hidden_dim);
          for (std::size_t r = 0; r < hidden_dim; ++r)
            du[r] = dh[i][r] *
                    num::activation_slope(policy.cfg.activation, cache.pre[l][i][r]);
          num::Vector dc(hidden_dim, 0.0);
          const auto& h_in = cache.hidden[l][i];
          const auto& c_in = cache.comm[l][i];
          const auto& H = policy.self_weight[l];
          const auto& C = policy.comm_weight[l];
          for (std::size_t r = 0; r < hidden_dim; ++r) {
            const double d = du[r];
            if (d == 0.0) continue;
            for (std::size_t c = 0; c < hidden_dim; ++c) {
              g_self.grad[r * hidden_dim + c] += d * h_in[c];
              g_comm.grad[r * hidden_dim + c] += d * c_in[c];
              dh_prev[i][c] += d * H(r, c);
              dc[c] += d * C(r, c);
            }
          }
          // Mean over the other agents.
          if (n > 1) {
            const double share = 1.0 / static_cast<double>(n - 1);
            for (std::size_t j = 0; j < n; ++j) {
              if (j == i) continue;
              for (std::size_t c = 0; c < hidden_dim; ++c)
                dh_prev[j][c] += share * dc[c];
            }
          }
        }
        dh = std::move(dh_prev);
      }

      // Encoder.
      for (std::size_t i = 0; i < n; ++i) {
        const auto& o = step.obs[i];
        for (std::size_t r = 0; r < policy.encoder.rows(); ++r) {
          const double d = dh[i][r];
          if (d == 0.0) continue;
          for (std::size_t c = 0; c < policy.encoder.cols(); ++c)
            g_enc.grad[r * policy.encoder.cols() + c] += d * o[c];
        }
      }
    }
  }

  double norm_sq = 0.0;
  for (const auto& [name, p] : grads)
    for (double g : p.grad) norm_sq += g * g;
  diag.grad_norm = std::sqrt(norm_sq);
  diag.surrogate_loss = loss;
  if (!std::isfinite(loss))
    throw num::numeric_error("reinforce: non-finite surrogate loss");
  return diag;
}

// One policy-gradient step on the shared parameters.
inline ReinforceDiag reinforce_update(CommNetPolicy& policy,
                                      std::span<const Trajectory> batch,
                                      double learning_rate, double gamma) {
  num::ParamStore store = to_params(policy);
  const ReinforceDiag diag = reinforce_gradient(policy, batch, gamma, store);
  num::sgd_step(store, learning_rate);
  load_params(policy, store);
  return diag;
}

// --- rollouts, training, evaluation --------------------------------------------

template <class Env>
concept Environment = requires(const Env& env, const typename Env::State& state,
                               std::span<const int> actions, std::uint64_t seed) {
  { env.n_agents() } -> std::convertible_to<int>;
  { env.obs_dim() } -> std::convertible_to<int>;
  { env.n_actions() } -> std::convertible_to<int>;
  { env.reset(seed) };
  { env.step(state, actions) };
};

enum class EvalMode { greedy, sample };

template <Environment Env>
Trajectory rollout(const Env& env, const CommNetPolicy& policy,
                   std::uint64_t episode_seed, EvalMode mode, num::Rng* rng) {
  Trajectory traj;
  auto r = env.reset(episode_seed);
  auto state = r.state;
  auto obs = r.obs;
  ForwardCache cache;
  bool done = false;
  while (!done) {
    const auto dists = forward_cached(policy, obs, cache);
    Step step;
    step.obs = obs;
    if (mode == EvalMode::sample) {
      auto joint = sample_joint_action(dists, *rng);
      step.actions = std::move(joint.actions);
      step.log_probs = std::move(joint.log_probs);
    } else {
      step.actions = greedy_joint_action(dists);
      step.log_probs.assign(step.actions.size(), 0.0);
    }
    auto outcome = env.step(state, step.actions);
    step.reward = outcome.reward;
    traj.push_back(std::move(step));
    state = std::move(outcome.state);
    obs = std::move(outcome.obs);
    done = outcome.done;
  }
  return traj;
}

struct MarlTrainConfig {
  int hidden = 64;
  int layers = 2;
  num::Activation activation = num::Activation::tanh;
  int episodes = 5000;
  double learning_rate = 5e-3;
  double gamma = 0.99;
  int batch = 16;
  std::uint64_t seed = 1;

  void validate() const {
    num::require(hidden >= 1 && layers >= 1, "MarlTrainConfig: bad network size");
    num::require(episodes >= 0 && batch >= 1, "MarlTrainConfig: bad episode counts");
    num::require(learning_rate >= 0.0, "MarlTrainConfig: negative learning rate");
    num::require(gamma > 0.0 && gamma <= 1.0, "MarlTrainConfig: gamma in (0, 1]");
  }
};

struct MarlTrainRow {
  int episode = 0;
  double episode_return = 0.0;
  double loss = 0.0;  // surrogate loss of the update this episode fed
};

struct MarlTrainResult {
  CommNetPolicy policy;
  std::vector<MarlTrainRow> metrics;
};

template <Environment Env>
MarlTrainResult train_marl(const Env& env, const MarlTrainConfig& config) {
  config.validate();
  CommNetConfig net_cfg{env.n_agents(), env.obs_dim(), config.hidden,
                        config.layers, env.n_actions(), config.activation};
  num::Rng rng(config.seed);
  CommNetPolicy policy = CommNetPolicy::init(net_cfg, rng);

  MarlTrainResult result;
  result.metrics.reserve(static_cast<std::size_t>(config.episodes));
  std::vector<Trajectory> batch;
  std::vector<double> batch_returns;
  int episode = 0;

  auto flush = [&]() {
    if (batch.empty()) return;
    ReinforceDiag diag;
    try {
      diag = reinforce_update(policy, batch, config.learning_rate, config.gamma);
    } catch (const num::numeric_error& e) {
      throw num::numeric_error(std::string(e.what()) + " near episode " +
                               std::to_string(episode));
    }
    const int first = episode - static_cast<int>(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b)
      result.metrics.push_back({first + static_cast<int>(b), batch_returns[b],
                                diag.surrogate_loss});
    batch.clear();
    batch_returns.clear();
  };

  while (episode < config.episodes) {
    Trajectory traj =
        rollout(env, policy, rng.next_u64(), EvalMode::sample, &rng);
    double ep_return = 0.0;
    for (const auto& step : traj) ep_return += step.reward;
    batch.push_back(std::move(traj));
    batch_returns.push_back(ep_return);
    ++episode;
    if (static_cast<int>(batch.size()) == config.batch) flush();
  }
  flush();
  result.policy = std::move(policy);
  return result;
}

struct EvalReport {
  double mean_return = 0.0;
  double standard_error = 0.0;
  int episodes = 0;
};

template <Environment Env>
EvalReport evaluate(const CommNetPolicy& policy, const Env& env, int episodes,
                    EvalMode mode, std::uint64_t seed) {
  num::require(episodes >= 1, "evaluate: need at least one episode");
  num::Rng rng(seed);
  double sum = 0.0, sum_sq = 0.0;
  for (int e = 0; e < episodes; ++e) {
    const Trajectory traj =
        rollout(env, policy, rng.next_u64(), mode, &rng);
    double r = 0.0;
    for (const auto& step : traj) r += step.reward;
    sum += r;
    sum_sq += r * r;
  }
  const double n = static_cast<double>(episodes);
  EvalReport rep{sum / n, 0.0, episodes};
  if (episodes > 1) {
    const double var =
        std::max(0.0, (sum_sq - n * rep.mean_return * rep.mean_return) / (n - 1.0));
    rep.standard_error = std::sqrt(var / n);
  }
  return rep;
}

}  // namespace platoon::comm
