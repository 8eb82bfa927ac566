#pragma once

// Valuation profile sampling for auction training and Monte Carlo audits.

#include <cstdint>
#include <string>
#include <vector>

#include "platoon/numeric.hpp"
#include "platoon/rng.hpp"

namespace platoon::auction {

struct ValuationDist {
  enum class Kind { uniform, exponential };

  Kind kind = Kind::uniform;
  double a = 0.0, b = 1.0;       // uniform support
  double rate = 1.0, cap = 1.0;  // exponential truncated to [0, cap]

  static ValuationDist make_uniform(double a, double b) {
    num::require(a >= 0.0 && b >= a, "ValuationDist: need 0 <= a <= b");
    return {Kind::uniform, a, b, 1.0, 1.0};
  }
  static ValuationDist make_exponential(double rate, double cap) {
    num::require(rate > 0.0 && cap > 0.0, "ValuationDist: need rate, cap > 0");
    return {Kind::exponential, 0.0, 1.0, rate, cap};
  }

  double lo() const { return kind == Kind::uniform ? a : 0.0; }
  double hi() const { return kind == Kind::uniform ? b : cap; }

  double sample(num::Rng& rng) const {
    return kind == Kind::uniform ? rng.uniform(a, b)
                                 : rng.truncated_exponential(rate, cap);
  }
};

// N-bidder profile source. One shared distribution (i.i.d. bidders) or one
// distribution per bidder; the seed pins the default sampling stream.
class ValuationSampler {
 public:
  ValuationSampler(ValuationDist shared, int bidders, std::uint64_t seed)
      : dists_{shared}, bidders_(bidders), seed_(seed) {
    num::require(bidders >= 1, "ValuationSampler: need at least one bidder");
  }

  ValuationSampler(std::vector<ValuationDist> per_bidder, std::uint64_t seed)
      : dists_(std::move(per_bidder)),
        bidders_(static_cast<int>(dists_.size())),
        seed_(seed) {
    num::require(!dists_.empty(), "ValuationSampler: need at least one bidder");
  }

  int bidders() const { return bidders_; }
  std::uint64_t seed() const { return seed_; }
  bool iid() const { return dists_.size() == 1; }

  const ValuationDist& dist(int bidder) const {
    return dists_.size() == 1 ? dists_[0] : dists_[static_cast<std::size_t>(bidder)];
  }

  std::vector<double> sample_profile(num::Rng& rng) const {
    std::vector<double> bids(static_cast<std::size_t>(bidders_));
    for (int i = 0; i < bidders_; ++i) bids[static_cast<std::size_t>(i)] = dist(i).sample(rng);
    return bids;
  }

  // Support envelope across bidders, used for misreport grids.
  double lo() const {
    double m = dists_[0].lo();
    for (const auto& d : dists_) m = std::min(m, d.lo());
    return m;
  }
  double hi() const {
    double m = dists_[0].hi();
    for (const auto& d : dists_) m = std::max(m, d.hi());
    return m;
  }

 private:
  std::vector<ValuationDist> dists_;  // size 1 (shared) or bidders
  int bidders_;
  std::uint64_t seed_;
};

}  // namespace platoon::auction
