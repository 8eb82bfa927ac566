#pragma once

// JSON checkpoint, config and report schemas. Key order is fixed so that
// re-running a command with the same config and seed reproduces output files
// byte for byte.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>

#include <json.hpp>

#include "platoon/auction.hpp"
#include "platoon/commnet.hpp"
#include "platoon/cost.hpp"
#include "platoon/envs.hpp"
#include "platoon/mechanisms.hpp"

namespace platoon::io {

using json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed JSON in " + path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << text;
  if (!out) throw std::invalid_argument("write failed for " + path);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <class T>
T get_required(const json& j, const char* key) {
  if (!j.contains(key))
    throw std::invalid_argument(std::string("missing required key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad value for '") + key + "': " + e.what());
  }
}

// --- activations ----------------------------------------------------------

inline std::string activation_name(num::Activation a) {
  switch (a) {
    case num::Activation::relu: return "relu";
    case num::Activation::tanh: return "tanh";
    case num::Activation::sigmoid: return "sigmoid";
  }
  throw std::invalid_argument("unknown activation");
}

inline num::Activation activation_from_name(const std::string& name) {
  if (name == "relu") return num::Activation::relu;
  if (name == "tanh") return num::Activation::tanh;
  if (name == "sigmoid") return num::Activation::sigmoid;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

// --- valuation distributions ------------------------------------------------

inline json dist_to_json(const auction::ValuationDist& d) {
  json j;
  if (d.kind == auction::ValuationDist::Kind::uniform) {
    j["kind"] = "uniform";
    j["a"] = d.a;
    j["b"] = d.b;
  } else {
    j["kind"] = "exponential";
    j["rate"] = d.rate;
    j["cap"] = d.cap;
  }
  return j;
}

inline auction::ValuationDist dist_from_json(const json& j) {
  const auto kind = get_required<std::string>(j, "kind");
  if (kind == "uniform")
    return auction::ValuationDist::make_uniform(get_or(j, "a", 0.0), get_or(j, "b", 1.0));
  if (kind == "exponential")
    return auction::ValuationDist::make_exponential(get_or(j, "rate", 1.0),
                                                    get_or(j, "cap", 1.0));
  throw std::invalid_argument("unknown distribution kind '" + kind + "'");
}

// --- auction training config -------------------------------------------------

struct AuctionRun {
  auction::AuctionTrainConfig train;
  auction::ValuationDist dist;
};

inline json auction_config_to_json(const AuctionRun& run) {
  const auto& c = run.train;
  json j;
  j["N"] = c.bidders;
  j["K"] = c.groups;
  j["J"] = c.units;
  j["temp_train"] = c.temp_train;
  j["temp_eval"] = c.temp_eval;
  j["lr"] = c.learning_rate;
  j["batch"] = c.batch;
  j["iterations"] = c.iterations;
  j["shared"] = c.shared;
  j["dist"] = dist_to_json(run.dist);
  j["seed"] = c.seed;
  return j;
}

inline AuctionRun auction_config_from_json(const json& j) {
  AuctionRun run;
  auto& c = run.train;
  c.bidders = get_or(j, "N", c.bidders);
  c.groups = get_or(j, "K", c.groups);
  c.units = get_or(j, "J", c.units);
  c.temp_train = get_or(j, "temp_train", c.temp_train);
  c.temp_eval = get_or(j, "temp_eval", c.temp_eval);
  c.learning_rate = get_or(j, "lr", c.learning_rate);
  c.batch = get_or(j, "batch", c.batch);
  c.iterations = get_or(j, "iterations", c.iterations);
  c.shared = get_or(j, "shared", c.shared);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  run.dist = j.contains("dist") ? dist_from_json(j.at("dist"))
                                : auction::ValuationDist::make_uniform(0.0, 1.0);
  c.validate();
  return run;
}

// --- checkpoints -----------------------------------------------------------

inline json matrix_rows(const num::Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline num::Matrix matrix_from_rows(const json& rows) {
  num::require(rows.is_array() && !rows.empty(), "checkpoint: bad matrix");
  const std::size_t r = rows.size();
  const std::size_t c = rows.at(0).size();
  num::Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    num::require(rows.at(i).size() == c, "checkpoint: ragged matrix");
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rows.at(i).at(j).get<double>();
  }
  return m;
}

inline json myerson_checkpoint(const auction::MonotonicNet& net,
                               const AuctionRun& run) {
  json j;
  j["version"] = 1;
  j["kind"] = "myerson";
  j["shared"] = net.shared;
  j["N"] = net.bidders;
  j["K"] = net.groups;
  j["J"] = net.units;
  if (net.shared) {
    j["alpha"] = matrix_rows(net.log_weight[0]);
    j["beta"] = matrix_rows(net.bias[0]);
  } else {
    json alpha = json::array(), beta = json::array();
    for (int s = 0; s < net.param_sets(); ++s) {
      alpha.push_back(matrix_rows(net.log_weight[static_cast<std::size_t>(s)]));
      beta.push_back(matrix_rows(net.bias[static_cast<std::size_t>(s)]));
    }
    j["alpha"] = std::move(alpha);
    j["beta"] = std::move(beta);
  }
  j["train_config"] = auction_config_to_json(run);
  j["seed"] = run.train.seed;
  return j;
}

inline std::pair<auction::MonotonicNet, AuctionRun> myerson_from_json(const json& j) {
  if (get_or<int>(j, "version", 0) != 1)
    throw std::invalid_argument("checkpoint: unsupported version");
  if (get_required<std::string>(j, "kind") != "myerson")
    throw std::invalid_argument("checkpoint: not a myerson checkpoint");
  auction::MonotonicNet net;
  net.shared = get_required<bool>(j, "shared");
  net.bidders = get_required<int>(j, "N");
  net.groups = get_required<int>(j, "K");
  net.units = get_required<int>(j, "J");
  const auto& alpha = j.at("alpha");
  const auto& beta = j.at("beta");
  if (net.shared) {
    net.log_weight = {matrix_from_rows(alpha)};
    net.bias = {matrix_from_rows(beta)};
  } else {
    for (std::size_t s = 0; s < alpha.size(); ++s) {
      net.log_weight.push_back(matrix_from_rows(alpha.at(s)));
      net.bias.push_back(matrix_from_rows(beta.at(s)));
    }
  }
  net.validate();
  AuctionRun run = j.contains("train_config")
                       ? auction_config_from_json(j.at("train_config"))
                       : AuctionRun{};
  return {std::move(net), std::move(run)};
}

inline json commnet_checkpoint(const comm::CommNetPolicy& policy,
                               std::uint64_t seed) {
  json j;
  j["version"] = 1;
  j["kind"] = "commnet";
  j["n_agents"] = policy.cfg.agents;
  j["obs_dim"] = policy.cfg.obs_dim;
  j["hidden"] = policy.cfg.hidden;
  j["layers"] = policy.cfg.layers;
  j["actions"] = policy.cfg.actions;
  j["activation"] = activation_name(policy.cfg.activation);
  json params;
  for (const auto& [name, p] : comm::to_params(policy)) params[name] = p.value;
  j["params"] = std::move(params);
  j["seed"] = seed;
  return j;
}

inline std::pair<comm::CommNetPolicy, std::uint64_t> commnet_from_json(const json& j) {
  if (get_or<int>(j, "version", 0) != 1)
    throw std::invalid_argument("checkpoint: unsupported version");
  if (get_required<std::string>(j, "kind") != "commnet")
    throw std::invalid_argument("checkpoint: not a commnet checkpoint");
  comm::CommNetConfig cfg;
  cfg.agents = get_required<int>(j, "n_agents");
  cfg.obs_dim = get_required<int>(j, "obs_dim");
  cfg.hidden = get_required<int>(j, "hidden");
  cfg.layers = get_required<int>(j, "layers");
  cfg.actions = get_required<int>(j, "actions");
  cfg.activation = activation_from_name(get_required<std::string>(j, "activation"));
  cfg.validate();
  num::Rng rng(0);
  comm::CommNetPolicy policy = comm::CommNetPolicy::init(cfg, rng);
  num::ParamStore store = comm::to_params(policy);
  const auto& params = j.at("params");
  for (auto& [name, p] : store) {
    if (!params.contains(name))
      throw std::invalid_argument("checkpoint: missing parameter '" + name + "'");
    const auto values = params.at(name).get<std::vector<double>>();
    if (values.size() != p.value.size())
      throw std::invalid_argument("checkpoint: wrong size for parameter '" + name + "'");
    p.value = values;
  }
  comm::load_params(policy, store);
  return {std::move(policy), get_or<std::uint64_t>(j, "seed", 0)};
}

// --- environment configs -----------------------------------------------------

using EnvConfig = std::variant<env::CoverageEnv::Config, env::EnergyEnv::Config>;

inline EnvConfig env_config_from_json(const json& j) {
  const auto kind = get_required<std::string>(j, "kind");
  if (kind == "coverage") {
    env::CoverageEnv::Config c;
    c.width = get_or(j, "W", c.width);
    c.height = get_or(j, "H", c.height);
    c.agents = get_or(j, "agents", c.agents);
    c.radius = get_or(j, "radius", c.radius);
    c.horizon = get_or(j, "horizon", c.horizon);
    if (j.contains("users"))
      for (const auto& u : j.at("users"))
        c.users.push_back({u.at(0).get<int>(), u.at(1).get<int>()});
    c.validate();
    return c;
  }
  if (kind == "energy") {
    env::EnergyEnv::Config c;
    c.stations = get_or(j, "agents", c.stations);
    c.capacity = get_or(j, "capacity", c.capacity);
    c.initial = get_or(j, "initial", c.initial);
    c.pv_schedule = get_or(j, "pv_schedule", std::vector<double>{1.0});
    c.price_schedule = get_or(j, "price_schedule", std::vector<double>{1.0});
    c.demand_max = get_or(j, "demand_max", c.demand_max);
    c.demand_seed = get_or<std::uint64_t>(j, "demand_seed", c.demand_seed);
    c.shortfall_penalty = get_or(j, "shortfall_penalty", c.shortfall_penalty);
    c.horizon = get_or(j, "horizon", c.horizon);
    c.validate();
    return c;
  }
  throw std::invalid_argument("unknown environment kind '" + kind + "'");
}

inline json env_config_to_json(const EnvConfig& config) {
  json j;
  if (const auto* c = std::get_if<env::CoverageEnv::Config>(&config)) {
    j["kind"] = "coverage";
    j["W"] = c->width;
    j["H"] = c->height;
    json users = json::array();
    for (const auto& u : c->users) users.push_back({u[0], u[1]});
    j["users"] = std::move(users);
    j["agents"] = c->agents;
    j["radius"] = c->radius;
    j["horizon"] = c->horizon;
  } else {
    const auto& e = std::get<env::EnergyEnv::Config>(config);
    j["kind"] = "energy";
    j["agents"] = e.stations;
    j["capacity"] = e.capacity;
    j["initial"] = e.initial;
    j["pv_schedule"] = e.pv_schedule;
    j["price_schedule"] = e.price_schedule;
    j["demand_max"] = e.demand_max;
    j["demand_seed"] = e.demand_seed;
    j["shortfall_penalty"] = e.shortfall_penalty;
    j["horizon"] = e.horizon;
  }
  return j;
}

// --- marl training config ----------------------------------------------------

inline json marl_config_to_json(const comm::MarlTrainConfig& c) {
  json j;
  j["hidden"] = c.hidden;
  j["layers"] = c.layers;
  j["activation"] = activation_name(c.activation);
  j["episodes"] = c.episodes;
  j["lr"] = c.learning_rate;
  j["gamma"] = c.gamma;
  j["batch"] = c.batch;
  j["seed"] = c.seed;
  return j;
}

inline comm::MarlTrainConfig marl_config_from_json(const json& j) {
  comm::MarlTrainConfig c;
  c.hidden = get_or(j, "hidden", c.hidden);
  c.layers = get_or(j, "layers", c.layers);
  c.activation = activation_from_name(get_or<std::string>(j, "activation", "tanh"));
  c.episodes = get_or(j, "episodes", c.episodes);
  c.learning_rate = get_or(j, "lr", c.learning_rate);
  c.gamma = get_or(j, "gamma", c.gamma);
  c.batch = get_or(j, "batch", c.batch);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.validate();
  return c;
}

// --- reports -----------------------------------------------------------------

inline json audit_report_json(const mech::AuditReport& r) {
  json j;
  j["revenue"] = r.revenue;
  j["stderr"] = r.standard_error;
  j["ic_regret"] = r.ic_regret;
  j["ir_rate"] = r.ir_rate;
  j["samples"] = r.samples;
  j["seed"] = r.seed;
  return j;
}

inline json outcome_json(const auction::AuctionOutcome& outcome) {
  json j;
  j["transformed"] = outcome.transformed;
  j["allocation"] = outcome.allocation;
  j["payment_raw"] = outcome.raw_payments;
  j["payment"] = outcome.payments;
  if (outcome.winner)
    j["winner"] = *outcome.winner;
  else
    j["winner"] = nullptr;
  return j;
}

inline json op_counts_json(const cost::OpCounts& c) {
  json j;
  j["macs"] = c.macs;
  j["comparisons"] = c.comparisons;
  j["activations"] = c.activations;
  return j;
}

inline json cost_report_json(const cost::CostEstimate& est) {
  json j = op_counts_json(est.total());
  j["layers"] = est.layers;
  j["per_layer"] = op_counts_json(est.per_layer);
  j["fixed"] = op_counts_json(est.fixed);
  return j;
}

}  // namespace platoon::io
