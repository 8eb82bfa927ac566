#pragma once

// Dense double-precision building blocks shared by the auction and policy
// networks: dimension-checked affine maps, the usual activations, a
// temperature softmax and grouped min/max reductions with deterministic
// tie-breaking.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace platoon::num {

using Vector = std::vector<double>;

// Thrown when a computation produces or receives non-finite values.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

inline bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(),
                     [](double x) { return std::isfinite(x); });
}

inline void require_finite(std::span<const double> xs, const std::string& ctx) {
  if (!all_finite(xs)) throw numeric_error(ctx + ": non-finite value");
}

// Row-major dense matrix with explicit dimensions.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, Vector values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    require(data_.size() == rows_ * cols_, "Matrix: value count mismatch");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  Vector& values() { return data_; }
  const Vector& values() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

// W x + b with strict dimension checks.
inline Vector affine_eval(const Matrix& W, const Vector& x, const Vector& b) {
  require(W.cols() == x.size(), "affine_eval: W.cols != len(x)");
  require(W.rows() == b.size(), "affine_eval: W.rows != len(b)");
  Vector y(b);
  for (std::size_t r = 0; r < W.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < W.cols(); ++c) acc += W(r, c) * x[c];
    y[r] += acc;
  }
  return y;
}

enum class Activation { relu, tanh, sigmoid };

inline double apply_activation(Activation kind, double x) {
  switch (kind) {
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::tanh:
      return std::tanh(x);
    case Activation::sigmoid:
      return 1.0 / (1.0 + std::exp(-x));
  }
  throw std::invalid_argument("apply_activation: unknown kind");
}

inline Vector apply_activation(Activation kind, const Vector& x) {
  Vector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = apply_activation(kind, x[i]);
  return y;
}

// Derivative at the pre-activation value. ReLU takes slope 0 at exactly 0.
inline double activation_slope(Activation kind, double pre) {
  switch (kind) {
    case Activation::relu:
      return pre > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
      double t = std::tanh(pre);
      return 1.0 - t * t;
    }
    case Activation::sigmoid: {
      double s = 1.0 / (1.0 + std::exp(-pre));
      return s * (1.0 - s);
    }
  }
  throw std::invalid_argument("activation_slope: unknown kind");
}

// softmax(k x) with max subtraction; output sums to 1 for any finite input.
inline Vector softmax_temp(const Vector& x, double k) {
  require(!x.empty(), "softmax_temp: empty input");
  require(std::isfinite(k) && k > 0.0, "softmax_temp: temperature must be > 0");
  require_finite(x, "softmax_temp");
  double m = *std::max_element(x.begin(), x.end());
  Vector y(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(k * (x[i] - m));
    z += y[i];
  }
  for (double& v : y) v /= z;
  return y;
}

struct GroupedPiece {
  double value = 0.0;
  std::size_t group = 0;  // attaining group (first on ties)
  std::size_t unit = 0;   // attaining unit within the group
};

// max over groups of (min over units of w x + theta). w and theta are K x J.
// Ties resolve to the first attaining index, so the subgradient is
// deterministic.
inline GroupedPiece group_max_of_min(double x, const Matrix& w,
                                     const Matrix& theta) {
  require(w.rows() >= 1 && w.cols() >= 1, "group_max_of_min: empty group");
  require(w.rows() == theta.rows() && w.cols() == theta.cols(),
          "group_max_of_min: coefficient shape mismatch");
  GroupedPiece best;
  for (std::size_t k = 0; k < w.rows(); ++k) {
    double inner = w(k, 0) * x + theta(k, 0);
    std::size_t inner_j = 0;
    for (std::size_t j = 1; j < w.cols(); ++j) {
      double v = w(k, j) * x + theta(k, j);
      if (v < inner) {
        inner = v;
        inner_j = j;
      }
    }
    if (k == 0 || inner > best.value) {
      best = {inner, k, inner_j};
    }
  }
  return best;
}

inline std::size_t argmax_first(std::span<const double> xs) {
  require(!xs.empty(), "argmax_first: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] > xs[best]) best = i;
  return best;
}

}  // namespace platoon::num
