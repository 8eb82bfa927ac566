#pragma once

// Named parameter storage with paired gradient slots, the plain SGD stepper
// and a central-difference gradient probe. Iteration order is insertion
// order, which keeps training runs reproducible for a fixed seed.

#include <cstddef>
#include <deque>
#include <functional>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "platoon/numeric.hpp"

namespace platoon::num {

struct Param {
  std::vector<std::size_t> shape;
  Vector value;
  Vector grad;  // same length as value, zero-initialised

  std::size_t size() const { return value.size(); }
};

class ParamStore {
 public:
  Param& add(std::string name, std::vector<std::size_t> shape, Vector init) {
    require(!contains(name), "ParamStore: duplicate parameter " + name);
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    require(n == init.size(), "ParamStore: shape does not match values");
    items_.emplace_back(std::move(name),
                        Param{std::move(shape), std::move(init), Vector(n, 0.0)});
    return items_.back().second;
  }

  bool contains(std::string_view name) const {
    for (const auto& [n, p] : items_)
      if (n == name) return true;
    return false;
  }

  Param& at(std::string_view name) {
    for (auto& [n, p] : items_)
      if (n == name) return p;
    throw std::invalid_argument("ParamStore: unknown parameter " +
                                std::string(name));
  }
  const Param& at(std::string_view name) const {
    return const_cast<ParamStore*>(this)->at(name);
  }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  std::size_t count() const { return items_.size(); }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& [name, p] : items_) n += p.size();
    return n;
  }

  void zero_grads() {
    for (auto& [name, p] : items_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
  }

 private:
  std::deque<std::pair<std::string, Param>> items_;  // deque: references stay valid as parameters are added
};

// p <- p - lr * grad for every parameter, then gradients are zeroed.
// A non-finite gradient aborts before any parameter is touched.
inline void sgd_step(ParamStore& store, double lr) {
  require(std::isfinite(lr) && lr >= 0.0, "sgd_step: bad learning rate");
  for (const auto& [name, p] : store) {
    if (!all_finite(p.grad))
      throw numeric_error("sgd_step: non-finite gradient in '" + name + "'");
  }
  for (auto& [name, p] : store) {
    for (std::size_t i = 0; i < p.size(); ++i) p.value[i] -= lr * p.grad[i];
    std::fill(p.grad.begin(), p.grad.end(), 0.0);
  }
}

// Central differences (f(p+eps) - f(p-eps)) / (2 eps), element by element.
// f is evaluated with the store temporarily mutated; values are restored
// exactly afterwards.
inline std::vector<std::pair<std::string, Vector>> finite_diff_grad(
    const std::function<double()>& f, ParamStore& store, double eps = 1e-5) {
  require(std::isfinite(eps) && eps > 0.0, "finite_diff_grad: eps must be > 0");
  std::vector<std::pair<std::string, Vector>> out;
  for (auto& [name, p] : store) {
    Vector g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + eps;
      const double hi = f();
      p.value[i] = saved - eps;
      const double lo = f();
      p.value[i] = saved;
      g[i] = (hi - lo) / (2.0 * eps);
    }
    out.emplace_back(name, std::move(g));
  }
  return out;
}

}  // namespace platoon::num
