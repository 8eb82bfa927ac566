#pragma once

// Toy cooperative environments with seeded, value-semantics dynamics: a
// multi-agent coverage gridworld (team reward = users covered by at least
// one agent) and an energy-sharing game between charging stations (team
// reward = minus grid purchase cost minus a shortfall penalty).

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "platoon/commnet.hpp"
#include "platoon/numeric.hpp"
#include "platoon/rng.hpp"

namespace platoon::env {

using Cell = std::array<int, 2>;  // x, y

// Actions: 0 north (y-1), 1 south (y+1), 2 east (x+1), 3 west (x-1), 4 stay.
class CoverageEnv {
 public:
  struct Config {
    int width = 5;
    int height = 5;
    std::vector<Cell> users;
    int agents = 2;
    int radius = 1;  // Chebyshev coverage radius
    int horizon = 10;

    void validate() const {
      num::require(width >= 1 && height >= 1, "CoverageEnv: empty grid");
      num::require(agents >= 1, "CoverageEnv: need at least one agent");
      num::require(radius >= 0, "CoverageEnv: negative radius");
      num::require(horizon >= 1, "CoverageEnv: horizon must be >= 1");
      for (const auto& u : users)
        num::require(u[0] >= 0 && u[0] < width && u[1] >= 0 && u[1] < height,
                     "CoverageEnv: user outside grid");
    }
  };

  struct State {
    std::vector<Cell> agents;
    int t = 0;
  };
  struct Reset {
    State state;
    comm::JointObservation obs;
  };
  struct Outcome {
    State state;
    comm::JointObservation obs;
    double reward = 0.0;
    bool done = false;
  };

  explicit CoverageEnv(Config config) : cfg_(std::move(config)) {
    cfg_.validate();
  }

  const Config& config() const { return cfg_; }
  int n_agents() const { return cfg_.agents; }
  int n_actions() const { return 5; }
  // Own position plus the user counts in the surrounding coverage window.
  int obs_dim() const {
    const int w = 2 * cfg_.radius + 1;
    return 2 + w * w;
  }

  Reset reset(std::uint64_t seed) const {
    num::Rng rng(seed);
    State state;
    state.agents.resize(static_cast<std::size_t>(cfg_.agents));
    for (auto& a : state.agents) {
      a[0] = static_cast<int>(rng.uniform_int(static_cast<std::size_t>(cfg_.width)));
      a[1] = static_cast<int>(rng.uniform_int(static_cast<std::size_t>(cfg_.height)));
    }
    return {state, observe(state)};
  }

  Outcome step(const State& state, std::span<const int> actions) const {
    num::require(actions.size() == state.agents.size(),
                 "CoverageEnv: one action per agent");
    static constexpr int dx[5] = {0, 0, 1, -1, 0};
    static constexpr int dy[5] = {-1, 1, 0, 0, 0};
    Outcome out;
    out.state = state;
    for (std::size_t i = 0; i < state.agents.size(); ++i) {
      const int a = actions[i];
      num::require(a >= 0 && a < 5, "CoverageEnv: invalid action index");
      auto& pos = out.state.agents[i];
      pos[0] = std::clamp(pos[0] + dx[a], 0, cfg_.width - 1);
      pos[1] = std::clamp(pos[1] + dy[a], 0, cfg_.height - 1);
    }
    out.state.t = state.t + 1;
    out.reward = static_cast<double>(coverage(out.state.agents));
    out.done = out.state.t >= cfg_.horizon;
    out.obs = observe(out.state);
    return out;
  }

  // Users within Chebyshev radius of at least one agent; overlap counts once.
  int coverage(std::span<const Cell> agents) const {
    int covered = 0;
    for (const auto& u : cfg_.users)
      if (covered_by_any(u, agents)) ++covered;
    return covered;
  }

  comm::JointObservation observe(const State& state) const {
    comm::JointObservation obs;
    obs.reserve(state.agents.size());
    const int w = 2 * cfg_.radius + 1;
    for (const auto& pos : state.agents) {
      num::Vector o;
      o.reserve(static_cast<std::size_t>(obs_dim()));
      o.push_back(cfg_.width > 1 ? static_cast<double>(pos[0]) / (cfg_.width - 1) : 0.0);
      o.push_back(cfg_.height > 1 ? static_cast<double>(pos[1]) / (cfg_.height - 1) : 0.0);
      std::vector<double> window(static_cast<std::size_t>(w) * static_cast<std::size_t>(w), 0.0);
      for (const auto& u : cfg_.users) {
        const int rx = u[0] - pos[0] + cfg_.radius;
        const int ry = u[1] - pos[1] + cfg_.radius;
        if (rx >= 0 && rx < w && ry >= 0 && ry < w)
          window[static_cast<std::size_t>(ry) * static_cast<std::size_t>(w) +
                 static_cast<std::size_t>(rx)] += 1.0;
      }
      o.insert(o.end(), window.begin(), window.end());
      obs.push_back(std::move(o));
    }
    return obs;
  }

  // Grid with agents 'A', covered users 'U', uncovered users 'u'.
  std::string render(const State& state) const {
    std::string out;
    out.reserve(static_cast<std::size_t>((cfg_.width + 1) * cfg_.height));
    for (int y = 0; y < cfg_.height; ++y) {
      for (int x = 0; x < cfg_.width; ++x) {
        char c = '.';
        for (const auto& u : cfg_.users)
          if (u[0] == x && u[1] == y)
            c = covered_by_any(u, state.agents) ? 'U' : 'u';
        for (const auto& a : state.agents)
          if (a[0] == x && a[1] == y) c = 'A';
        out.push_back(c);
      }
      out.push_back('\n');
    }
    return out;
  }

 private:
  bool covered_by_any(const Cell& user, std::span<const Cell> agents) const {
    for (const auto& a : agents) {
      const int d = std::max(std::abs(a[0] - user[0]), std::abs(a[1] - user[1]));
      if (d <= cfg_.radius) return true;
    }
    return false;
  }

  Config cfg_;
};

struct BruteForceResult {
  int value = 0;
  std::vector<Cell> placement;  // lexicographically smallest optimum
};

// Exhaustive search over joint agent placements for the best single-step
// unique coverage. Bounded to (W*H)^agents <= 1e6 joint placements.
inline BruteForceResult brute_force_optimal(const CoverageEnv& env) {
  const auto& cfg = env.config();
  const std::size_t cells =
      static_cast<std::size_t>(cfg.width) * static_cast<std::size_t>(cfg.height);
  double combos = 1.0;
  for (int i = 0; i < cfg.agents; ++i) combos *= static_cast<double>(cells);
  num::require(combos <= 1e6, "brute_force_optimal: state space too large");

  std::vector<Cell> placement(static_cast<std::size_t>(cfg.agents), Cell{0, 0});
  std::vector<std::size_t> idx(static_cast<std::size_t>(cfg.agents), 0);
  BruteForceResult best;
  best.value = -1;
  for (;;) {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      placement[i][0] = static_cast<int>(idx[i] % static_cast<std::size_t>(cfg.width));
      placement[i][1] = static_cast<int>(idx[i] / static_cast<std::size_t>(cfg.width));
    }
    const int value = env.coverage(placement);
    if (value > best.value) {
      best.value = value;
      best.placement = placement;
    }
    // Odometer over joint placements; most-significant first keeps the first
    // optimum found lexicographically smallest in (x, y) reading order.
    std::size_t i = idx.size();
    while (i-- > 0) {
      if (++idx[i] < cells) break;
      idx[i] = 0;
      if (i == 0) return best;
    }
  }
}

// Actions: 0 serve demand from battery, 1 charge from the PV feed,
// 2 serve demand then donate the remaining battery to the shared pool,
// 3 buy one unit from the grid at the current price.
class EnergyEnv {
 public:
  enum Action : int { serve = 0, charge_pv = 1, share_pool = 2, buy_unit = 3 };

  struct Config {
    int stations = 3;
    double capacity = 5.0;
    std::vector<double> initial;        // per station; empty means all zero
    std::vector<double> pv_schedule;    // per step, applied to every station
    std::vector<double> price_schedule; // per step, currency per unit
    double demand_max = 2.0;            // demand ~ U[0, demand_max) per station-step
    std::uint64_t demand_seed = 0;
    double shortfall_penalty = 10.0;
    int horizon = 8;

    void validate() const {
      num::require(stations >= 1, "EnergyEnv: need at least one station");
      num::require(capacity > 0.0, "EnergyEnv: capacity must be > 0");
      num::require(horizon >= 1, "EnergyEnv: horizon must be >= 1");
      num::require(initial.empty() || initial.size() == static_cast<std::size_t>(stations),
                   "EnergyEnv: initial levels must match station count");
      for (double b : initial)
        num::require(b >= 0.0 && b <= capacity, "EnergyEnv: initial level out of range");
      num::require(!pv_schedule.empty() && !price_schedule.empty(),
                   "EnergyEnv: schedules must not be empty");
      num::require(demand_max >= 0.0, "EnergyEnv: negative demand bound");
      num::require(shortfall_penalty >= 0.0, "EnergyEnv: negative penalty");
    }
  };

  struct State {
    std::vector<double> battery;
    std::vector<double> demand;  // demand due this step
    std::uint64_t episode_seed = 0;
    int t = 0;
  };
  struct Reset {
    State state;
    comm::JointObservation obs;
  };
  struct Outcome {
    State state;
    comm::JointObservation obs;
    double reward = 0.0;
    bool done = false;
  };
  // Per-step accounting, exposed for conservation checks.
  struct Flows {
    double pv_charged = 0.0;
    double purchased = 0.0;
    double served = 0.0;
    double shortfall = 0.0;
    double pool_in = 0.0;   // total donated
    double pool_out = 0.0;  // granted to shortfall stations + returned leftover
  };

  explicit EnergyEnv(Config config) : cfg_(std::move(config)) { cfg_.validate(); }

  const Config& config() const { return cfg_; }
  int n_agents() const { return cfg_.stations; }
  int n_actions() const { return 4; }
  int obs_dim() const { return 3; }  // own battery, current price, own demand

  double pv_at(int t) const {
    return cfg_.pv_schedule[static_cast<std::size_t>(t) % cfg_.pv_schedule.size()];
  }
  double price_at(int t) const {
    return cfg_.price_schedule[static_cast<std::size_t>(t) % cfg_.price_schedule.size()];
  }

  Reset reset(std::uint64_t seed) const {
    State state;
    state.battery = cfg_.initial.empty()
                        ? std::vector<double>(static_cast<std::size_t>(cfg_.stations), 0.0)
                        : cfg_.initial;
    state.episode_seed = seed;
    state.t = 0;
    state.demand = demand_at(seed, 0);
    return {state, observe(state)};
  }

  Outcome step(const State& state, std::span<const int> actions) const {
    Flows flows;
    return step_with_flows(state, actions, flows);
  }

  Outcome step_with_flows(const State& state, std::span<const int> actions,
                          Flows& flows) const {
    const auto n = static_cast<std::size_t>(cfg_.stations);
    num::require(actions.size() == n, "EnergyEnv: one action per station");
    Outcome out;
    out.state = state;
    auto& battery = out.state.battery;
    const double pv = pv_at(state.t);
    const double price = price_at(state.t);

    std::vector<double> served(n, 0.0);
    double pool = 0.0;
    double cost = 0.0;

    for (std::size_t i = 0; i < n; ++i) {
      const int a = actions[i];
      num::require(a >= 0 && a < 4, "EnergyEnv: invalid action index");
      switch (a) {
        case serve: {
          served[i] = std::min(state.demand[i], battery[i]);
          battery[i] -= served[i];
          break;
        }
        case charge_pv: {
          const double take = std::min(pv, cfg_.capacity - battery[i]);
          battery[i] += take;
          flows.pv_charged += take;
          break;
        }
        case share_pool: {
          served[i] = std::min(state.demand[i], battery[i]);
          const double donated = battery[i] - served[i];
          pool += donated;
          flows.pool_in += donated;
          battery[i] = 0.0;
          break;
        }
        case buy_unit: {
          const double bought = std::min(1.0, cfg_.capacity - battery[i]);
          battery[i] += bought;
          cost += price * bought;
          flows.purchased += bought;
          break;
        }
      }
    }

    // Pool resolution: unmet demand is granted pro-rata by request; leftover
    // energy returns to donors pro-rata by contribution.
    double requested = 0.0;
    for (std::size_t i = 0; i < n; ++i) requested += state.demand[i] - served[i];
    if (pool > 0.0 && requested > 0.0) {
      const double ratio = std::min(1.0, pool / requested);
      for (std::size_t i = 0; i < n; ++i) {
        const double grant = (state.demand[i] - served[i]) * ratio;
        served[i] += grant;
        flows.pool_out += grant;
      }
      pool -= requested * ratio;
    }
    if (pool > 0.0 && flows.pool_in > 0.0) {
      // Leftover pool energy returns to donors pro-rata by contribution;
      // donors always have headroom because their batteries were emptied.
      std::vector<double> donated(n, 0.0);
      double total_donated = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (actions[i] != share_pool) continue;
        donated[i] = state.battery[i] - std::min(state.demand[i], state.battery[i]);
        total_donated += donated[i];
      }
      if (total_donated > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
          if (donated[i] <= 0.0) continue;
          const double back = pool * donated[i] / total_donated;
          battery[i] = std::min(cfg_.capacity, battery[i] + back);
          flows.pool_out += back;
        }
      }
      pool = 0.0;
    }

    double shortfall = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      shortfall += state.demand[i] - served[i];
      flows.served += served[i];
    }
    flows.shortfall = shortfall;

    out.reward = -cost - cfg_.shortfall_penalty * shortfall;
    out.state.t = state.t + 1;
    out.state.demand = demand_at(state.episode_seed, out.state.t);
    out.done = out.state.t >= cfg_.horizon;
    out.obs = observe(out.state);
    return out;
  }

  comm::JointObservation observe(const State& state) const {
    comm::JointObservation obs;
    const double price = price_at(state.t);
    for (std::size_t i = 0; i < state.battery.size(); ++i)
      obs.push_back({state.battery[i], price, state.demand[i]});
    return obs;
  }

  // Demand is a pure function of (demand seed, episode seed, station, step),
  // so step needs no hidden stream state.
  std::vector<double> demand_at(std::uint64_t episode_seed, int t) const {
    std::vector<double> demand(static_cast<std::size_t>(cfg_.stations));
    for (std::size_t i = 0; i < demand.size(); ++i) {
      const std::uint64_t h = num::splitmix64(
          cfg_.demand_seed ^ num::splitmix64(episode_seed ^ num::splitmix64(
              (static_cast<std::uint64_t>(t) << 20) + i)));
      const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
      demand[i] = u * cfg_.demand_max;
    }
    return demand;
  }

 private:
  Config cfg_;
};

}  // namespace platoon::env
