#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "riskctl/errors.hpp"
#include "riskctl/rng.hpp"

namespace riskctl {

// Fully connected ReLU network with a linear output layer. Batches are stored
// column-wise: an input batch is (input_dim x batch).
template <class Scalar>
class MLP {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::vector<Mat> W;  // layer l maps sizes[l] -> sizes[l+1]
  std::vector<Vec> b;

  MLP() = default;

  // Zero parameters with the given layer widths, input first.
  explicit MLP(const std::vector<int>& sizes) {
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      W.push_back(Mat::Zero(sizes[l + 1], sizes[l]));
      b.push_back(Vec::Zero(sizes[l + 1]));
    }
  }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  static MLP init(const std::vector<int>& sizes, Rng& rng) {
    MLP net(sizes);
    for (std::size_t l = 0; l < net.W.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
      for (Eigen::Index j = 0; j < net.W[l].cols(); ++j)
        for (Eigen::Index i = 0; i < net.W[l].rows(); ++i) net.W[l](i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
      for (Eigen::Index i = 0; i < net.b[l].size(); ++i) net.b[l](i) = static_cast<Scalar>(rng.uniform(-bound, bound));
    }
    return net;
  }

  int num_layers() const { return static_cast<int>(W.size()); }
  int input_dim() const { return static_cast<int>(W.front().cols()); }
  int output_dim() const { return static_cast<int>(W.back().rows()); }
  std::vector<int> sizes() const {
    std::vector<int> s{input_dim()};
    for (const auto& w : W) s.push_back(static_cast<int>(w.rows()));
    return s;
  }

  // Post-activation of every hidden layer plus the input, for backprop.
  struct Tape {
    std::vector<Mat> h;
  };

  Mat forward(const Mat& X, Tape* tape = nullptr) const {
    const int L = num_layers();
    if (tape) {
      tape->h.resize(L);
      tape->h[0] = X;
    }
    Mat h = X;
    for (int l = 0; l < L; ++l) {
      Mat z(W[l].rows(), h.cols());
      z.noalias() = W[l] * h;
      z.colwise() += b[l];
      if (l + 1 < L) {
        h = z.cwiseMax(Scalar(0));
        if (tape) tape->h[l + 1] = h;
      } else {
        h = std::move(z);
      }
    }
    return h;
  }

  // Backpropagates dY through the taped forward pass. Parameter gradients are
  // added into grad when non-null; the input gradient is returned when
  // want_input is set (an empty matrix otherwise).
  Mat backward(const Tape& tape, const Mat& dY, MLP* grad, bool want_input) const {
    const int L = num_layers();
    Mat g = dY;
    for (int l = L - 1; l >= 0; --l) {
      if (grad) {
        grad->W[l].noalias() += g * tape.h[l].transpose();
        grad->b[l] += g.rowwise().sum();
      }
      if (l == 0 && !want_input) return Mat();
      Mat d(W[l].cols(), g.cols());
      d.noalias() = W[l].transpose() * g;
      if (l > 0) d = d.cwiseProduct((tape.h[l].array() > Scalar(0)).template cast<Scalar>().matrix());
      g = std::move(d);
    }
    return g;
  }

  void set_zero() {
    for (auto& w : W) w.setZero();
    for (auto& v : b) v.setZero();
  }

  MLP zeros_like() const {
    MLP z = *this;
    z.set_zero();
    return z;
  }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
    return n;
  }

  // Layer by layer: W column-major, then b.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(num_params());
    for (std::size_t l = 0; l < W.size(); ++l) {
      for (Eigen::Index i = 0; i < W[l].size(); ++i) out.push_back(static_cast<double>(W[l].data()[i]));
      for (Eigen::Index i = 0; i < b[l].size(); ++i) out.push_back(static_cast<double>(b[l].data()[i]));
    }
    return out;
  }

  void unflatten(std::span<const double> p) {
    if (p.size() != num_params()) throw InvalidModel("parameter vector has the wrong length");
    std::size_t k = 0;
    for (std::size_t l = 0; l < W.size(); ++l) {
      for (Eigen::Index i = 0; i < W[l].size(); ++i) W[l].data()[i] = static_cast<Scalar>(p[k++]);
      for (Eigen::Index i = 0; i < b[l].size(); ++i) b[l].data()[i] = static_cast<Scalar>(p[k++]);
    }
  }

  template <class Other>
  MLP<Other> cast() const {
    MLP<Other> out;
    for (std::size_t l = 0; l < W.size(); ++l) {
      out.W.push_back(W[l].template cast<Other>());
      out.b.push_back(b[l].template cast<Other>());
    }
    return out;
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < W.size(); ++l)
      if (!W[l].allFinite() || !b[l].allFinite()) return false;
    return true;
  }

  // this <- (1 - tau) this + tau src
  void polyak(const MLP& src, Scalar tau) {
    for (std::size_t l = 0; l < W.size(); ++l) {
      W[l] = (Scalar(1) - tau) * W[l] + tau * src.W[l];
      b[l] = (Scalar(1) - tau) * b[l] + tau * src.b[l];
    }
  }
};

template <class Scalar>
class Adam {
 public:
  Adam() = default;
  Adam(const MLP<Scalar>& like, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(like.zeros_like()), v_(like.zeros_like()) {}

  void step(MLP<Scalar>& params, const MLP<Scalar>& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    const auto b1 = static_cast<Scalar>(beta1_);
    const auto b2 = static_cast<Scalar>(beta2_);
    const auto step = static_cast<Scalar>(lr_ / c1);
    const auto inv_sqrt_c2 = static_cast<Scalar>(1.0 / std::sqrt(c2));
    const auto eps = static_cast<Scalar>(eps_);
    auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
      p.array() -= step * m.array() / (v.array().sqrt() * inv_sqrt_c2 + eps);
    };
    for (std::size_t l = 0; l < params.W.size(); ++l) {
      update(params.W[l], m_.W[l], v_.W[l], grad.W[l]);
      update(params.b[l], m_.b[l], v_.b[l], grad.b[l]);
    }
  }

  long steps() const { return t_; }
  const MLP<Scalar>& first_moment() const { return m_; }
  const MLP<Scalar>& second_moment() const { return v_; }
  void restore(long t, MLP<Scalar> m, MLP<Scalar> v) {
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  MLP<Scalar> m_;
  MLP<Scalar> v_;
};

}  // namespace riskctl
