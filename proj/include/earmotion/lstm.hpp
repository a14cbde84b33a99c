#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#include "earmotion/error.hpp"
#include "earmotion/rng.hpp"

// Stacked LSTM with a logistic read-out, templated on the scalar so the same
// recurrence serves float training and double-precision gradient checks.
namespace earmotion::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

struct NetShape {
  int input_dim = 0;
  int hidden = 0;
  int layers = 0;
};

/// Gate blocks are stacked in the order input, forget, cell, output.
template <typename S>
struct LstmLayer {
  Mat<S> w_in;   // 4H x in
  Mat<S> w_rec;  // 4H x H
  Vec<S> bias;   // 4H
};

template <typename S>
struct LstmParams {
  std::vector<LstmLayer<S>> layers;
  Vec<S> fc_weight;  // H
  S fc_bias = 0;

  static LstmParams zeros(const NetShape& shape) {
    LstmParams p;
    for (int l = 0; l < shape.layers; ++l) {
      const int in = l == 0 ? shape.input_dim : shape.hidden;
      p.layers.push_back({Mat<S>::Zero(4 * shape.hidden, in), Mat<S>::Zero(4 * shape.hidden, shape.hidden),
                          Vec<S>::Zero(4 * shape.hidden)});
    }
    p.fc_weight = Vec<S>::Zero(shape.hidden);
    p.fc_bias = 0;
    return p;
  }

  NetShape shape() const {
    if (layers.empty()) return {};
    return {static_cast<int>(layers.front().w_in.cols()), static_cast<int>(fc_weight.size()),
            static_cast<int>(layers.size())};
  }

  /// Every parameter tensor as a flat span, in serialization order.
  std::vector<std::span<S>> tensors() {
    std::vector<std::span<S>> out;
    for (auto& l : layers) {
      out.emplace_back(l.w_in.data(), static_cast<std::size_t>(l.w_in.size()));
      out.emplace_back(l.w_rec.data(), static_cast<std::size_t>(l.w_rec.size()));
      out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
    out.emplace_back(fc_weight.data(), static_cast<std::size_t>(fc_weight.size()));
    out.emplace_back(&fc_bias, 1);
    return out;
  }

  std::vector<std::span<const S>> tensors() const {
    std::vector<std::span<const S>> out;
    for (auto s : const_cast<LstmParams*>(this)->tensors()) out.emplace_back(s.data(), s.size());
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto s : tensors()) n += s.size();
    return n;
  }

  void set_zero() {
    for (auto s : tensors()) std::fill(s.begin(), s.end(), S(0));
  }

  template <typename T>
  LstmParams<T> cast() const {
    LstmParams<T> p;
    for (const auto& l : layers) p.layers.push_back({l.w_in.template cast<T>(), l.w_rec.template cast<T>(), l.bias.template cast<T>()});
    p.fc_weight = fc_weight.template cast<T>();
    p.fc_bias = static_cast<T>(fc_bias);
    return p;
  }

  bool all_finite() const {
    for (auto s : tensors())
      for (S v : s)
        if (!std::isfinite(v)) return false;
    return true;
  }
};

/// Uniform weights in +-1/sqrt(H), zero biases except forget-gate bias 1.
template <typename S>
LstmParams<S> init_params(const NetShape& shape, Rng& rng) {
  LstmParams<S> p = LstmParams<S>::zeros(shape);
  const double bound = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
  auto fill = [&](auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(rng.uniform(-bound, bound));
  };
  for (auto& l : p.layers) {
    fill(l.w_in);
    fill(l.w_rec);
    l.bias.segment(shape.hidden, shape.hidden).setConstant(S(1));
  }
  fill(p.fc_weight);
  return p;
}

/// Inverted-dropout masks for the outputs of every layer but the last:
/// each entry is 0 or 1/(1-p).
template <typename S>
struct DropoutMasks {
  std::vector<Mat<S>> masks;  // (layers - 1) x [H x T]

  static DropoutMasks draw(const NetShape& shape, Eigen::Index steps, double p, Rng& rng) {
    DropoutMasks d;
    const S keep = static_cast<S>(1.0 / (1.0 - p));
    for (int l = 0; l + 1 < shape.layers; ++l) {
      Mat<S> m(shape.hidden, steps);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.bernoulli(p) ? S(0) : keep;
      d.masks.push_back(std::move(m));
    }
    return d;
  }
};

template <typename S>
struct LayerCache {
  Mat<S> input;  // in x T, after dropout
  Mat<S> gates;  // 4H x T, activated
  Mat<S> cell;   // H x T
  Mat<S> tanh_cell;
  Mat<S> hidden;  // H x T
};

template <typename S>
struct ForwardCache {
  std::vector<LayerCache<S>> layers;
  S logit = 0;
  S probability = 0;
};

template <typename S>
S logistic(S z) {
  return z >= 0 ? S(1) / (S(1) + std::exp(-z)) : std::exp(z) / (S(1) + std::exp(z));
}

inline constexpr double kProbabilityEps = 1e-7;

/// Binary cross-entropy with the probability clamped to [eps, 1 - eps].
template <typename S>
S bce(S p, int y) {
  const S eps = static_cast<S>(kProbabilityEps);
  const S q = std::clamp(p, eps, S(1) - eps);
  return y == 1 ? -std::log(q) : -std::log(S(1) - q);
}

/// P(movement) for a D x T input. Dropout is applied iff `masks` is given.
template <typename S, typename Derived>
S forward(const Eigen::MatrixBase<Derived>& input, const LstmParams<S>& params,
          const std::type_identity_t<DropoutMasks<S>>* masks, std::type_identity_t<ForwardCache<S>>* cache) {
  const NetShape shape = params.shape();
  const Eigen::Index steps = input.cols();
  if (input.rows() != shape.input_dim)
    fail(Errc::dimension_mismatch, "input has " + std::to_string(input.rows()) + " features, network expects " +
                                       std::to_string(shape.input_dim));
  require(steps >= 1, "sequence must have at least one step");
  const int H = shape.hidden;

  if (cache) cache->layers.resize(params.layers.size());
  Mat<S> x = input.template cast<S>();
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Mat<S> pre = layer.w_in * x;
    pre.colwise() += layer.bias;
    Mat<S> cell(H, steps), tanh_cell(H, steps), hidden(H, steps);
    Vec<S> h = Vec<S>::Zero(H), c = Vec<S>::Zero(H);
    for (Eigen::Index t = 0; t < steps; ++t) {
      auto a = pre.col(t);
      if (t > 0) a.noalias() += layer.w_rec * h;
      for (int k = 0; k < H; ++k) {
        a(k) = logistic(a(k));
        a(H + k) = logistic(a(H + k));
        a(2 * H + k) = std::tanh(a(2 * H + k));
        a(3 * H + k) = logistic(a(3 * H + k));
      }
      c = a.segment(H, H).cwiseProduct(c) + a.segment(0, H).cwiseProduct(a.segment(2 * H, H));
      const Vec<S> tc = c.array().tanh();
      h = a.segment(3 * H, H).cwiseProduct(tc);
      cell.col(t) = c;
      tanh_cell.col(t) = tc;
      hidden.col(t) = h;
    }
    Mat<S> next = hidden;
    if (masks && l + 1 < params.layers.size()) next = next.cwiseProduct(masks->masks[l]);
    if (cache) {
      auto& lc = cache->layers[l];
      lc.input = std::move(x);
      lc.gates = std::move(pre);
      lc.cell = std::move(cell);
      lc.tanh_cell = std::move(tanh_cell);
      lc.hidden = std::move(hidden);
    }
    x = std::move(next);
  }
  const S logit = params.fc_weight.dot(x.col(steps - 1)) + params.fc_bias;
  const S p = logistic(logit);
  if (cache) {
    cache->logit = logit;
    cache->probability = p;
  }
  return p;
}

/// Backpropagation through time of bce(forward(...), y). Gradients are
/// added into `grads`; the loss is returned.
template <typename S>
S backward(const ForwardCache<S>& cache, const LstmParams<S>& params,
           const std::type_identity_t<DropoutMasks<S>>* masks, int y,
           LstmParams<S>& grads) {
  const NetShape shape = params.shape();
  const int H = shape.hidden;
  const Eigen::Index steps = cache.layers.front().hidden.cols();
  const S p = cache.probability;
  const S eps = static_cast<S>(kProbabilityEps);
  // d bce / d logit is p - y inside the clamp range and 0 where the clamp is active.
  const S dz = (p < eps || p > S(1) - eps) ? S(0) : p - static_cast<S>(y);

  const auto& top = cache.layers.back();
  grads.fc_weight.noalias() += dz * top.hidden.col(steps - 1);
  grads.fc_bias += dz;

  Mat<S> d_hidden = Mat<S>::Zero(H, steps);
  d_hidden.col(steps - 1) = dz * params.fc_weight;

  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const auto& layer = params.layers[li];
    const auto& lc = cache.layers[li];
    auto& g = grads.layers[li];
    Mat<S> d_pre(4 * H, steps);
    Vec<S> dh_next = Vec<S>::Zero(H), dc_next = Vec<S>::Zero(H);
    for (Eigen::Index t = steps; t-- > 0;) {
      const auto gates = lc.gates.col(t);
      const Vec<S> dh = d_hidden.col(t) + dh_next;
      const auto i = gates.segment(0, H).array();
      const auto f = gates.segment(H, H).array();
      const auto gg = gates.segment(2 * H, H).array();
      const auto o = gates.segment(3 * H, H).array();
      const auto tc = lc.tanh_cell.col(t).array();
      const Vec<S> dc = dc_next.array() + dh.array() * o * (S(1) - tc * tc);
      const Vec<S> c_prev = t > 0 ? Vec<S>(lc.cell.col(t - 1)) : Vec<S>::Zero(H);
      d_pre.col(t).segment(0, H) = dc.array() * gg * i * (S(1) - i);
      d_pre.col(t).segment(H, H) = dc.array() * c_prev.array() * f * (S(1) - f);
      d_pre.col(t).segment(2 * H, H) = dc.array() * i * (S(1) - gg * gg);
      d_pre.col(t).segment(3 * H, H) = dh.array() * tc * o * (S(1) - o);
      dc_next = dc.array() * f;
      dh_next.noalias() = layer.w_rec.transpose() * d_pre.col(t);
    }
    g.w_in.noalias() += d_pre * lc.input.transpose();
    if (steps > 1) g.w_rec.noalias() += d_pre.rightCols(steps - 1) * lc.hidden.leftCols(steps - 1).transpose();
    g.bias += d_pre.rowwise().sum();
    if (li > 0) {
      d_hidden.noalias() = layer.w_in.transpose() * d_pre;
      if (masks) d_hidden = d_hidden.cwiseProduct(masks->masks[li - 1]);
    }
  }
  return bce(p, y);
}

}  // namespace earmotion::nn
