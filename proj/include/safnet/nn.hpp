#pragma once

// Minimal dense layers with hand-written reverse mode. Weights live on the
// heap (row-major); activations use fixed-size Eigen vectors so a per-point
// forward/backward pass does not allocate.

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "safnet/random.hpp"

namespace safnet::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
template <int N>
using VecN = Eigen::Matrix<double, N, 1>;
// Small dynamic vectors (class logits) with inline storage.
inline constexpr int kMaxClasses = 32;
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxClasses, 1>;

struct Linear {
  Matrix weight;  // out x in
  Vector bias;    // out

  Linear() = default;
  Linear(int out, int in) : weight(Matrix::Zero(out, in)), bias(Vector::Zero(out)) {}

  int out_dim() const { return static_cast<int>(weight.rows()); }
  int in_dim() const { return static_cast<int>(weight.cols()); }

  // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim()));
    for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = rng.uniform(-bound, bound);
    for (Eigen::Index i = 0; i < bias.size(); ++i) bias[i] = rng.uniform(-bound, bound);
  }

  void set_zero() {
    weight.setZero();
    bias.setZero();
  }

  template <class In, class Out>
  void forward(const In& x, Out& y) const {
    y.noalias() = weight * x;
    y += bias;
  }

  // Accumulates parameter gradients into `grad` for upstream gradient gy.
  template <class In, class G>
  void accumulate(const In& x, const G& gy, Linear& grad) const {
    grad.weight.noalias() += gy * x.transpose();
    grad.bias += gy;
  }

  template <class G, class Out>
  void input_grad(const G& gy, Out& gx) const {
    gx.noalias() = weight.transpose() * gy;
  }

  template <class F>
  void visit(std::string_view name, F&& f, bool trainable = true) {
    f(std::string(name) + ".weight", weight.data(), static_cast<std::size_t>(weight.size()), trainable);
    f(std::string(name) + ".bias", bias.data(), static_cast<std::size_t>(bias.size()), trainable);
  }
};

template <class V>
auto relu(const V& v) {
  return v.cwiseMax(0.0);
}

// gy masked by the positive part of the pre-activation.
template <class Pre, class G>
auto relu_grad(const Pre& pre, const G& gy) {
  return (pre.array() > 0.0).select(gy, 0.0);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log-sum-exp cross-entropy over the first `classes` logits; writes
// softmax(logits) - onehot(label) scaled by `scale` into grad (zero beyond
// `classes`).
template <class L, class G>
double cross_entropy(const L& logits, int classes, int label, double scale, G* grad) {
  double mx = logits[0];
  for (int c = 1; c < classes; ++c) mx = std::max(mx, logits[c]);
  double sum = 0.0;
  for (int c = 0; c < classes; ++c) sum += std::exp(logits[c] - mx);
  const double lse = mx + std::log(sum);
  if (grad) {
    grad->setZero(logits.size());
    for (int c = 0; c < classes; ++c) (*grad)[c] = scale * std::exp(logits[c] - lse);
    (*grad)[label] -= scale;
  }
  return lse - logits[label];
}

}  // namespace safnet::nn
