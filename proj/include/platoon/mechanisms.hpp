#pragma once

// Classical single-item auction rules and the audit harness that measures
// expected revenue, misreport regret and individual-rationality violations
// for any mechanism under a valuation sampler.

#include <cstdint>
#include <functional>
#include <optional>
#include <thread>
#include <vector>

#include "platoon/numeric.hpp"
#include "platoon/rng.hpp"
#include "platoon/sampler.hpp"

namespace platoon::mech {

struct SaleResult {
  std::optional<int> winner;     // empty means no sale
  std::vector<double> payments;  // one per bidder, losers pay 0
};

using Mechanism = std::function<SaleResult(const std::vector<double>&)>;

namespace detail {

inline std::size_t highest_bidder(const std::vector<double>& bids) {
  num::require(!bids.empty(), "mechanism: empty bid profile");
  num::require_finite(bids, "mechanism bids");
  return num::argmax_first(bids);
}

// Fan a sample count out over fixed per-thread chunks, each with its own
// substream, and reduce partial results in chunk order.
template <class Partial, class Body>
std::vector<Partial> chunked(std::size_t samples, int threads,
                             std::uint64_t seed, const Body& body) {
  num::require(threads >= 1, "audit: threads must be >= 1");
  const std::size_t n_chunks =
      std::min<std::size_t>(static_cast<std::size_t>(threads), std::max<std::size_t>(samples, 1));
  std::vector<Partial> partials(n_chunks);
  auto run = [&](std::size_t c) {
    const std::size_t lo = samples * c / n_chunks;
    const std::size_t hi = samples * (c + 1) / n_chunks;
    num::Rng rng = num::Rng::substream(seed, c);
    body(partials[c], rng, hi - lo);
  };
  if (n_chunks == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_chunks);
    for (std::size_t c = 0; c < n_chunks; ++c) pool.emplace_back(run, c);
    for (auto& t : pool) t.join();
  }
  return partials;
}

}  // namespace detail

// Highest bid wins and pays its own bid; ties go to the lowest index.
inline Mechanism first_price() {
  return [](const std::vector<double>& bids) {
    const std::size_t w = detail::highest_bidder(bids);
    SaleResult r{static_cast<int>(w), std::vector<double>(bids.size(), 0.0)};
    r.payments[w] = bids[w];
    return r;
  };
}

// Highest bid wins and pays the second-highest bid; a lone bidder pays 0.
inline Mechanism second_price() {
  return [](const std::vector<double>& bids) {
    const std::size_t w = detail::highest_bidder(bids);
    double second = 0.0;
    bool seen = false;
    for (std::size_t j = 0; j < bids.size(); ++j) {
      if (j == w) continue;
      if (!seen || bids[j] > second) second = bids[j];
      seen = true;
    }
    SaleResult r{static_cast<int>(w), std::vector<double>(bids.size(), 0.0)};
    r.payments[w] = seen ? second : 0.0;
    return r;
  };
}

// Sells to the highest virtual valuation when it is nonnegative; the winner
// pays the inverse transform of the larger of zero and the second-highest
// virtual valuation.
inline Mechanism analytic_myerson(std::function<double(double)> virtual_value,
                                  std::function<double(double)> inverse_virtual) {
  return [virt = std::move(virtual_value), inv = std::move(inverse_virtual)](
             const std::vector<double>& bids) {
    const std::size_t n = bids.size();
    num::require(n >= 1, "analytic_myerson: empty bid profile");
    num::require_finite(bids, "analytic_myerson bids");
    std::vector<double> phi(n);
    for (std::size_t i = 0; i < n; ++i) phi[i] = virt(bids[i]);
    const std::size_t w = num::argmax_first(phi);
    SaleResult r{std::nullopt, std::vector<double>(n, 0.0)};
    if (phi[w] < 0.0) return r;  // reserve not met
    double second = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != w) second = std::max(second, phi[j]);
    r.winner = static_cast<int>(w);
    r.payments[w] = inv(second);
    return r;
  };
}

// Preset for i.i.d. uniform[0,1] values: virtual value 2v - 1, reserve 1/2.
inline Mechanism myerson_uniform01() {
  return analytic_myerson([](double v) { return 2.0 * v - 1.0; },
                          [](double y) { return (y + 1.0) / 2.0; });
}

struct RevenueEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t samples = 0;
};

// Mean total payment over seeded i.i.d. profiles. Welford accumulation keeps
// the variance exact (zero) for constant revenues.
inline RevenueEstimate monte_carlo_revenue(const Mechanism& mechanism,
                                           const auction::ValuationSampler& sampler,
                                           std::size_t samples, int threads = 1) {
  num::require(samples >= 1, "monte_carlo_revenue: need samples >= 1");
  struct Partial {
    std::size_t count = 0;
    double mean = 0.0, m2 = 0.0;
  };
  auto partials = detail::chunked<Partial>(
      samples, threads, sampler.seed(),
      [&](Partial& acc, num::Rng& rng, std::size_t count) {
        for (std::size_t s = 0; s < count; ++s) {
          const auto bids = sampler.sample_profile(rng);
          const auto sale = mechanism(bids);
          double rev = 0.0;
          for (double p : sale.payments) rev += p;
          ++acc.count;
          const double delta = rev - acc.mean;
          acc.mean += delta / static_cast<double>(acc.count);
          acc.m2 += delta * (rev - acc.mean);
        }
      });
  Partial total;
  for (const auto& p : partials) {
    if (p.count == 0) continue;
    const double delta = p.mean - total.mean;
    const auto combined = total.count + p.count;
    total.mean += delta * static_cast<double>(p.count) / static_cast<double>(combined);
    total.m2 += p.m2 + delta * delta * static_cast<double>(total.count) *
                           static_cast<double>(p.count) / static_cast<double>(combined);
    total.count = combined;
  }
  const double n = static_cast<double>(samples);
  double se = 0.0;
  if (samples > 1) se = std::sqrt(std::max(0.0, total.m2 / (n - 1.0)) / n);
  return {total.mean, se, samples};
}

// Maximum expected gain from misreporting, for bidder 0, over a uniform grid
// of truthful values and misreports spanning the sampler support. Utilities
// are estimated with common opponent samples: one mechanism call per
// (opponent draw, report) pair yields E[alloc] and E[pay] per report, from
// which regret(v, m) = (E[alloc(m)] v - E[pay(m)]) - (E[alloc(v)] v - E[pay(v)]).
inline double ic_regret(const Mechanism& mechanism,
                        const auction::ValuationSampler& sampler,
                        int grid_points, std::size_t opponent_samples,
                        int threads = 1) {
  num::require(grid_points >= 2, "ic_regret: need a grid of at least 2 points");
  num::require(opponent_samples >= 1, "ic_regret: need opponent samples");
  const int n = sampler.bidders();
  const double lo = sampler.lo(), hi = sampler.hi();
  std::vector<double> grid(static_cast<std::size_t>(grid_points));
  for (int g = 0; g < grid_points; ++g)
    grid[static_cast<std::size_t>(g)] =
        lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_points - 1);

  struct Partial {
    std::vector<double> alloc, pay;
  };
  auto partials = detail::chunked<Partial>(
      opponent_samples, threads, num::splitmix64(sampler.seed() ^ 0x1c5e9u),
      [&](Partial& acc, num::Rng& rng, std::size_t count) {
        acc.alloc.assign(grid.size(), 0.0);
        acc.pay.assign(grid.size(), 0.0);
        std::vector<double> bids(static_cast<std::size_t>(n));
        for (std::size_t s = 0; s < count; ++s) {
          for (int j = 1; j < n; ++j)
            bids[static_cast<std::size_t>(j)] = sampler.dist(j).sample(rng);
          for (std::size_t g = 0; g < grid.size(); ++g) {
            bids[0] = grid[g];
            const auto sale = mechanism(bids);
            if (sale.winner && *sale.winner == 0) acc.alloc[g] += 1.0;
            acc.pay[g] += sale.payments[0];
          }
        }
      });
  std::vector<double> alloc(grid.size(), 0.0), pay(grid.size(), 0.0);
  for (const auto& p : partials)
    for (std::size_t g = 0; g < grid.size(); ++g) {
      alloc[g] += p.alloc[g];
      pay[g] += p.pay[g];
    }
  const double inv_n = 1.0 / static_cast<double>(opponent_samples);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    alloc[g] *= inv_n;
    pay[g] *= inv_n;
  }

  double worst = 0.0;
  for (std::size_t t = 0; t < grid.size(); ++t) {
    const double v = grid[t];
    const double truthful = alloc[t] * v - pay[t];
    for (std::size_t m = 0; m < grid.size(); ++m) {
      const double gain = (alloc[m] * v - pay[m]) - truthful;
      worst = std::max(worst, gain);
    }
  }
  return worst;
}

// Fraction of truthful profiles in which some bidder ends with negative
// utility. The tolerance absorbs inverse-transform round-off.
inline double ir_violation(const Mechanism& mechanism,
                           const auction::ValuationSampler& sampler,
                           std::size_t samples, int threads = 1,
                           double tolerance = 1e-9) {
  num::require(samples >= 1, "ir_violation: need samples >= 1");
  struct Partial {
    std::size_t bad = 0;
  };
  auto partials = detail::chunked<Partial>(
      samples, threads, num::splitmix64(sampler.seed() ^ 0x1fb2du),
      [&](Partial& acc, num::Rng& rng, std::size_t count) {
        for (std::size_t s = 0; s < count; ++s) {
          const auto bids = sampler.sample_profile(rng);
          const auto sale = mechanism(bids);
          for (std::size_t i = 0; i < bids.size(); ++i) {
            const double owns =
                (sale.winner && *sale.winner == static_cast<int>(i)) ? bids[i] : 0.0;
            if (owns - sale.payments[i] < -tolerance) {
              ++acc.bad;
              break;
            }
          }
        }
      });
  std::size_t bad = 0;
  for (const auto& p : partials) bad += p.bad;
  return static_cast<double>(bad) / static_cast<double>(samples);
}

struct AuditReport {
  double revenue = 0.0;
  double standard_error = 0.0;
  double ic_regret = 0.0;
  double ir_rate = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

inline AuditReport audit(const Mechanism& mechanism,
                         const auction::ValuationSampler& sampler,
                         std::size_t samples, int grid_points,
                         std::size_t opponent_samples, int threads = 1) {
  const auto rev = monte_carlo_revenue(mechanism, sampler, samples, threads);
  AuditReport report;
  report.revenue = rev.mean;
  report.standard_error = rev.standard_error;
  report.ic_regret = ic_regret(mechanism, sampler, grid_points, opponent_samples, threads);
  report.ir_rate = ir_violation(mechanism, sampler, samples, threads);
  report.samples = samples;
  report.seed = sampler.seed();
  return report;
}

}  // namespace platoon::mech
