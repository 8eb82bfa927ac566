// Command-line front end: auction training/evaluation/audits/single runs,
// cooperative policy training/evaluation, and inference cost reports.
// stdout carries machine-readable JSON; progress and rendered frames go to
// stderr. Exit codes: 0 success, 2 input error, 3 numerical failure.

#include <charconv>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "platoon/auction.hpp"
#include "platoon/commnet.hpp"
#include "platoon/cost.hpp"
#include "platoon/envs.hpp"
#include "platoon/io.hpp"
#include "platoon/mechanisms.hpp"

namespace {

using namespace platoon;
using io::json;

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<double> parse_bids(const std::string& text) {
  std::vector<double> bids;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      bids.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::invalid_argument("cannot parse bid '" + item + "'");
    }
  }
  if (bids.empty()) throw std::invalid_argument("empty bid list");
  return bids;
}

struct DistFlags {
  std::string kind = "uniform";
  double a = 0.0, b = 1.0;
  double rate = 1.0, cap = 1.0;

  auction::ValuationDist resolve() const {
    if (kind == "uniform") return auction::ValuationDist::make_uniform(a, b);
    if (kind == "exponential")
      return auction::ValuationDist::make_exponential(rate, cap);
    throw std::invalid_argument("unknown distribution '" + kind + "'");
  }
};

void add_dist_flags(CLI::App* cmd, DistFlags& dist) {
  cmd->add_option("--dist", dist.kind, "valuation distribution: uniform|exponential");
  cmd->add_option("--dist-a", dist.a, "uniform lower bound");
  cmd->add_option("--dist-b", dist.b, "uniform upper bound");
  cmd->add_option("--rate", dist.rate, "exponential rate");
  cmd->add_option("--cap", dist.cap, "exponential truncation cap");
}

// Model/mechanism source shared by eval, audit, run and cost.
struct SourceFlags {
  std::string model;      // checkpoint path
  std::string preset;     // uniform01
  std::string mechanism;  // spa | fpa | myerson-uniform

  void add_to(CLI::App* cmd, bool with_mechanism) {
    cmd->add_option("--model", model, "model checkpoint path");
    cmd->add_option("--preset", preset, "built-in net: uniform01");
    if (with_mechanism)
      cmd->add_option("--mechanism", mechanism,
                      "classical baseline: spa|fpa|myerson-uniform");
  }

  std::string describe() const {
    if (!model.empty()) return "model:" + model;
    if (!preset.empty()) return "preset:" + preset;
    if (!mechanism.empty()) return "mechanism:" + mechanism;
    return "";
  }

  auction::MonotonicNet load_net(io::AuctionRun* run_out = nullptr) const {
    if (!model.empty()) {
      auto [net, run] = io::myerson_from_json(io::read_json_file(model));
      if (run_out) *run_out = run;
      return net;
    }
    if (preset == "uniform01") {
      if (run_out) *run_out = io::AuctionRun{};
      return auction::MonotonicNet::uniform01_preset();
    }
    throw std::invalid_argument("need --model PATH or --preset uniform01");
  }

  mech::Mechanism load_mechanism(int* default_bidders,
                                 io::AuctionRun* run_out = nullptr) const {
    if (!mechanism.empty()) {
      if (mechanism == "spa") return mech::second_price();
      if (mechanism == "fpa") return mech::first_price();
      if (mechanism == "myerson-uniform") return mech::myerson_uniform01();
      throw std::invalid_argument("unknown mechanism '" + mechanism + "'");
    }
    io::AuctionRun run;
    auction::MonotonicNet net = load_net(&run);
    if (default_bidders && !model.empty()) *default_bidders = run.train.bidders;
    if (run_out) *run_out = run;
    return auction::as_mechanism(std::move(net));
  }
};

json report_header(const std::string& command, const json& config,
                   std::uint64_t seed) {
  json j;
  j["version"] = io::kToolVersion;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = config;
  return j;
}

void emit(const json& report) { std::cout << report.dump(2) << "\n"; }

// --- auction commands --------------------------------------------------------

int cmd_auction_train(const std::string& config_path, const std::string& out,
                      const std::string& metrics,
                      std::optional<std::uint64_t> seed, int threads) {
  (void)threads;  // training is single-threaded for bit-exact runs
  io::AuctionRun run;
  if (!config_path.empty())
    run = io::auction_config_from_json(io::read_json_file(config_path));
  if (seed) run.train.seed = *seed;

  const auction::ValuationSampler sampler(run.dist, run.train.bidders,
                                          run.train.seed);
  const auto result = auction::train_auction(run.train, sampler);
  const json config = io::auction_config_to_json(run);

  io::write_text_file(out, io::myerson_checkpoint(result.net, run).dump(2) + "\n");
  if (!metrics.empty()) {
    std::ostringstream os;
    os << "# platoon " << io::kToolVersion << " seed=" << run.train.seed
       << " config=" << config.dump() << "\n";
    os << "iter,loss,revenue_hard,seconds\n";
    for (const auto& row : result.metrics)
      os << row.iteration << ',' << fmt(row.loss) << ',' << fmt(row.revenue_hard)
         << ',' << fmt(row.seconds) << "\n";
    io::write_text_file(metrics, os.str());
  }

  json report = report_header("auction-train", config, run.train.seed);
  report["out"] = out;
  report["iterations"] = run.train.iterations;
  if (!result.metrics.empty()) {
    report["final_loss"] = result.metrics.back().loss;
    report["final_revenue_hard"] = result.metrics.back().revenue_hard;
    report["seconds"] = result.metrics.back().seconds;
  }
  emit(report);
  return 0;
}

int cmd_auction_eval(const SourceFlags& source, const DistFlags& dist,
                     int bidders, std::size_t samples, std::uint64_t seed,
                     int threads) {
  int n = bidders;
  const mech::Mechanism mechanism = source.load_mechanism(bidders == 0 ? &n : nullptr);
  if (n == 0) n = 2;
  const auction::ValuationSampler sampler(dist.resolve(), n, seed);
  const auto est = mech::monte_carlo_revenue(mechanism, sampler, samples, threads);

  json config;
  config["source"] = source.describe();
  config["bidders"] = n;
  config["dist"] = io::dist_to_json(sampler.dist(0));
  config["samples"] = samples;
  config["threads"] = threads;
  json report = report_header("auction-eval", config, seed);
  report["revenue"] = est.mean;
  report["stderr"] = est.standard_error;
  report["samples"] = est.samples;
  emit(report);
  return 0;
}

int cmd_auction_audit(const SourceFlags& source, const DistFlags& dist,
                      int bidders, std::size_t samples, int grid,
                      std::size_t ic_samples, std::uint64_t seed, int threads) {
  int n = bidders;
  const mech::Mechanism mechanism = source.load_mechanism(bidders == 0 ? &n : nullptr);
  if (n == 0) n = 2;
  const auction::ValuationSampler sampler(dist.resolve(), n, seed);
  const auto audit = mech::audit(mechanism, sampler, samples, grid, ic_samples, threads);

  json config;
  config["source"] = source.describe();
  config["bidders"] = n;
  config["dist"] = io::dist_to_json(sampler.dist(0));
  config["samples"] = samples;
  config["grid"] = grid;
  config["ic_samples"] = ic_samples;
  config["threads"] = threads;
  json report = report_header("auction-audit", config, seed);
  const json body = io::audit_report_json(audit);
  for (const auto& [key, value] : body.items()) report[key] = value;
  emit(report);
  return 0;
}

int cmd_auction_run(const SourceFlags& source, const std::string& bids_text,
                    std::optional<double> temperature, const std::string& mode) {
  io::AuctionRun run;
  const auction::MonotonicNet net = source.load_net(&run);
  const auto bids = parse_bids(bids_text);
  const double temp = temperature.value_or(run.train.temp_eval);
  auction::AllocationMode alloc_mode;
  if (mode == "hard")
    alloc_mode = auction::AllocationMode::hard;
  else if (mode == "soft")
    alloc_mode = auction::AllocationMode::soft;
  else
    throw std::invalid_argument("mode must be hard or soft");
  const auto outcome = auction::run_auction(net, bids, temp, alloc_mode);

  json config;
  config["source"] = source.describe();
  config["bids"] = bids;
  config["temp"] = temp;
  config["mode"] = mode;
  json report = report_header("auction-run", config, run.train.seed);
  const json body = io::outcome_json(outcome);
  for (const auto& [key, value] : body.items()) report[key] = value;
  emit(report);
  return 0;
}

// --- marl commands -------------------------------------------------------------

template <class Env>
void render_episode(const Env& env, const comm::CommNetPolicy& policy,
                    std::uint64_t episode_seed) {
  auto r = env.reset(episode_seed);
  auto state = r.state;
  auto obs = r.obs;
  int t = 0;
  auto print_frame = [&](const auto& s) {
    std::cerr << "t=" << t << "\n";
    if constexpr (std::is_same_v<Env, env::CoverageEnv>) {
      std::cerr << env.render(s);
    } else {
      std::cerr << "battery:";
      for (double b : s.battery) std::cerr << ' ' << fmt(b);
      std::cerr << "\n";
    }
  };
  print_frame(state);
  bool done = false;
  while (!done) {
    const auto dists = comm::forward(policy, obs);
    const auto actions = comm::greedy_joint_action(dists);
    auto outcome = env.step(state, actions);
    state = std::move(outcome.state);
    obs = std::move(outcome.obs);
    done = outcome.done;
    ++t;
    print_frame(state);
  }
}

int cmd_marl_train(const std::string& env_path, const std::string& config_path,
                   const std::string& out, const std::string& metrics,
                   std::optional<std::uint64_t> seed) {
  const io::EnvConfig env_config = io::env_config_from_json(io::read_json_file(env_path));
  comm::MarlTrainConfig cfg;
  if (!config_path.empty())
    cfg = io::marl_config_from_json(io::read_json_file(config_path));
  if (seed) cfg.seed = *seed;

  const json config = io::marl_config_to_json(cfg);
  const json env_json = io::env_config_to_json(env_config);

  auto train_and_save = [&](const auto& env) {
    const auto result = comm::train_marl(env, cfg);
    io::write_text_file(out,
                        io::commnet_checkpoint(result.policy, cfg.seed).dump(2) + "\n");
    if (!metrics.empty()) {
      std::ostringstream os;
      os << "# platoon " << io::kToolVersion << " seed=" << cfg.seed
         << " config=" << config.dump() << " env=" << env_json.dump() << "\n";
      os << "episode,return,loss\n";
      for (const auto& row : result.metrics)
        os << row.episode << ',' << fmt(row.episode_return) << ','
           << fmt(row.loss) << "\n";
      io::write_text_file(metrics, os.str());
    }
    json report = report_header("marl-train", config, cfg.seed);
    report["env"] = env_json;
    report["out"] = out;
    report["episodes"] = cfg.episodes;
    if (!result.metrics.empty())
      report["final_return"] = result.metrics.back().episode_return;
    emit(report);
  };
  std::visit([&](const auto& c) {
    using Config = std::decay_t<decltype(c)>;
    if constexpr (std::is_same_v<Config, env::CoverageEnv::Config>)
      train_and_save(env::CoverageEnv(c));
    else
      train_and_save(env::EnergyEnv(c));
  }, env_config);
  return 0;
}

int cmd_marl_eval(const std::string& env_path, const std::string& policy_path,
                  int episodes, const std::string& mode, bool render,
                  std::uint64_t seed) {
  const io::EnvConfig env_config = io::env_config_from_json(io::read_json_file(env_path));
  auto [policy, ckpt_seed] = io::commnet_from_json(io::read_json_file(policy_path));
  comm::EvalMode eval_mode;
  if (mode == "greedy")
    eval_mode = comm::EvalMode::greedy;
  else if (mode == "sample")
    eval_mode = comm::EvalMode::sample;
  else
    throw std::invalid_argument("mode must be greedy or sample");

  auto run_eval = [&](const auto& env) {
    num::require(env.n_agents() == policy.cfg.agents,
                 "policy and environment agent counts differ");
    num::require(env.obs_dim() == policy.cfg.obs_dim,
                 "policy and environment observation dimensions differ");
    num::require(env.n_actions() == policy.cfg.actions,
                 "policy and environment action counts differ");
    if (render) {
      num::Rng rng(seed);
      render_episode(env, policy, rng.next_u64());
    }
    const auto rep = comm::evaluate(policy, env, episodes, eval_mode, seed);
    json config;
    config["env"] = io::env_config_to_json(env_config);
    config["policy"] = policy_path;
    config["episodes"] = episodes;
    config["mode"] = mode;
    json report = report_header("marl-eval", config, seed);
    report["mean_return"] = rep.mean_return;
    report["stderr"] = rep.standard_error;
    report["episodes"] = rep.episodes;
    emit(report);
  };
  std::visit([&](const auto& c) {
    using Config = std::decay_t<decltype(c)>;
    if constexpr (std::is_same_v<Config, env::CoverageEnv::Config>)
      run_eval(env::CoverageEnv(c));
    else
      run_eval(env::EnergyEnv(c));
  }, env_config);
  return 0;
}

// --- cost ----------------------------------------------------------------------

int cmd_cost(const SourceFlags& source, int bidders, std::uint64_t layers) {
  json config;
  config["source"] = source.describe();
  cost::CostEstimate est;
  if (!source.model.empty()) {
    const json ckpt = io::read_json_file(source.model);
    const auto kind = io::get_required<std::string>(ckpt, "kind");
    if (kind == "myerson") {
      auto [net, run] = io::myerson_from_json(ckpt);
      const int n = bidders > 0 ? bidders : run.train.bidders;
      est = cost::monotonic_inference_cost(net.groups, net.units, n, layers);
      config["bidders"] = n;
    } else if (kind == "commnet") {
      auto [policy, seed] = io::commnet_from_json(ckpt);
      est = cost::commnet_inference_cost(policy.cfg);
    } else {
      throw std::invalid_argument("unknown checkpoint kind '" + kind + "'");
    }
  } else {
    const auction::MonotonicNet net = source.load_net();
    const int n = bidders > 0 ? bidders : 1;
    est = cost::monotonic_inference_cost(net.groups, net.units, n, layers);
    config["bidders"] = n;
  }
  json report = report_header("cost", config, 0);
  const json body = io::cost_report_json(est);
  for (const auto& [key, value] : body.items()) report[key] = value;
  emit(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"platoon: neural single-item auctions and cooperative platoon policies"};
  app.require_subcommand(1);

  // auction-train
  auto* train = app.add_subcommand("auction-train", "train the neural auction");
  std::string train_config, train_out, train_metrics;
  std::optional<std::uint64_t> train_seed;
  int train_threads = 1;
  train->add_option("--config", train_config, "training config JSON");
  train->add_option("--out", train_out, "checkpoint output path")->required();
  train->add_option("--metrics", train_metrics, "metrics CSV output path");
  train->add_option("--seed", train_seed, "seed override");
  train->add_option("--threads", train_threads, "worker cap");

  // auction-eval
  auto* eval = app.add_subcommand("auction-eval", "Monte Carlo revenue estimate");
  SourceFlags eval_source;
  DistFlags eval_dist;
  int eval_bidders = 0;
  std::size_t eval_samples = 100000;
  std::uint64_t eval_seed = 1;
  int eval_threads = 1;
  eval_source.add_to(eval, true);
  add_dist_flags(eval, eval_dist);
  eval->add_option("--bidders", eval_bidders, "bidder count (default from model)");
  eval->add_option("--samples", eval_samples, "Monte Carlo sample count");
  eval->add_option("--seed", eval_seed, "sampling seed");
  eval->add_option("--threads", eval_threads, "worker cap");

  // auction-audit
  auto* audit = app.add_subcommand("auction-audit", "revenue, IC and IR audit");
  SourceFlags audit_source;
  DistFlags audit_dist;
  int audit_bidders = 0;
  std::size_t audit_samples = 100000;
  int audit_grid = 101;
  std::size_t audit_ic_samples = 10000;
  std::uint64_t audit_seed = 1;
  int audit_threads = 1;
  audit_source.add_to(audit, true);
  add_dist_flags(audit, audit_dist);
  audit->add_option("--bidders", audit_bidders, "bidder count (default from model)");
  audit->add_option("--samples", audit_samples, "revenue and IR sample count");
  audit->add_option("--grid", audit_grid, "misreport grid size");
  audit->add_option("--ic-samples", audit_ic_samples, "opponent samples per grid point");
  audit->add_option("--seed", audit_seed, "sampling seed");
  audit->add_option("--threads", audit_threads, "worker cap");

  // auction-run
  auto* run = app.add_subcommand("auction-run", "run one auction on explicit bids");
  SourceFlags run_source;
  std::string run_bids;
  std::optional<double> run_temp;
  std::string run_mode = "hard";
  run_source.add_to(run, false);
  run->add_option("--bids", run_bids, "comma-separated bid values")->required();
  run->add_option("--temp", run_temp, "softmax temperature (default: eval temp)");
  run->add_option("--mode", run_mode, "hard|soft");

  // marl-train
  auto* mtrain = app.add_subcommand("marl-train", "train a cooperative policy");
  std::string mtrain_env, mtrain_config, mtrain_out, mtrain_metrics;
  std::optional<std::uint64_t> mtrain_seed;
  int mtrain_threads = 1;
  mtrain->add_option("--env", mtrain_env, "environment config JSON")->required();
  mtrain->add_option("--config", mtrain_config, "training config JSON");
  mtrain->add_option("--out", mtrain_out, "policy checkpoint output path")->required();
  mtrain->add_option("--metrics", mtrain_metrics, "metrics CSV output path");
  mtrain->add_option("--seed", mtrain_seed, "seed override");
  mtrain->add_option("--threads", mtrain_threads, "worker cap");

  // marl-eval
  auto* meval = app.add_subcommand("marl-eval", "evaluate a trained policy");
  std::string meval_env, meval_policy, meval_mode = "greedy";
  int meval_episodes = 100;
  bool meval_render = false;
  std::uint64_t meval_seed = 1;
  meval->add_option("--env", meval_env, "environment config JSON")->required();
  meval->add_option("--policy", meval_policy, "policy checkpoint")->required();
  meval->add_option("--episodes", meval_episodes, "evaluation episode count");
  meval->add_option("--mode", meval_mode, "greedy|sample");
  meval->add_flag("--render", meval_render, "print per-step frames to stderr");
  meval->add_option("--seed", meval_seed, "evaluation seed");

  // cost
  auto* cost_cmd = app.add_subcommand("cost", "forward-pass operation counts");
  SourceFlags cost_source;
  int cost_bidders = 0;
  std::uint64_t cost_layers = 1;
  cost_source.add_to(cost_cmd, false);
  cost_cmd->add_option("--bidders", cost_bidders, "bidder count (default from model)");
  cost_cmd->add_option("--layers", cost_layers, "stacked layer count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(train))
      return cmd_auction_train(train_config, train_out, train_metrics,
                               train_seed, train_threads);
    if (app.got_subcommand(eval))
      return cmd_auction_eval(eval_source, eval_dist, eval_bidders, eval_samples,
                              eval_seed, eval_threads);
    if (app.got_subcommand(audit))
      return cmd_auction_audit(audit_source, audit_dist, audit_bidders,
                               audit_samples, audit_grid, audit_ic_samples,
                               audit_seed, audit_threads);
    if (app.got_subcommand(run))
      return cmd_auction_run(run_source, run_bids, run_temp, run_mode);
    if (app.got_subcommand(mtrain))
      return cmd_marl_train(mtrain_env, mtrain_config, mtrain_out,
                            mtrain_metrics, mtrain_seed);
    if (app.got_subcommand(meval))
      return cmd_marl_eval(meval_env, meval_policy, meval_episodes, meval_mode,
                           meval_render, meval_seed);
    if (app.got_subcommand(cost_cmd))
      return cmd_cost(cost_source, cost_bidders, cost_layers);
  } catch (const num::numeric_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
