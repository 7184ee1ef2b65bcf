#pragma once

// Small differentiable classifiers with hand-written backprop: multinomial
// logistic regression, a one-hidden-layer ReLU MLP and a tiny conv net
// (3x3 valid conv, ReLU, global average pool, dense head). Templated on the
// scalar so the same code runs in float for simulation and in double for
// finite-difference checks.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gradestc/error.hpp"
#include "gradestc/linalg.hpp"
#include "gradestc/rng.hpp"

namespace gradestc::flsim {

enum class ModelKind { LogReg, Mlp, TinyConv };

struct ModelSpec {
  ModelKind kind = ModelKind::LogReg;
  std::size_t features = 0;
  std::size_t hidden = 0;       // mlp
  std::size_t classes = 0;
  std::size_t in_channels = 0;  // tinyconv; features = in_channels * side * side
  std::size_t kernels = 0;      // tinyconv output channels
  std::uint64_t init_seed = 0;

  void validate() const;
  std::size_t conv_side() const;
};

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense weights are [out][in] row-major. The conv kernel has shape
/// (W, H, D, C) = (3, 3, in_channels, kernels), stored row-major over that tuple.
template <typename Scalar>
struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  Vec<Scalar> values;
};

template <typename Scalar>
using ParamValues = std::vector<Vec<Scalar>>;

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

inline constexpr std::size_t kConvWidth = 3;

inline void ModelSpec::validate() const {
  const bool ok = features > 0 && classes > 0 &&
                  (kind != ModelKind::Mlp || hidden > 0) &&
                  (kind != ModelKind::TinyConv || (in_channels > 0 && kernels > 0));
  if (!ok) throw Error(ErrorCode::BadConfig, "model dimensions must be positive");
  if (kind == ModelKind::TinyConv) {
    const auto side = conv_side();
    if (side * side * in_channels != features || side < kConvWidth) {
      throw Error(ErrorCode::BadConfig, "tinyconv needs features = in_channels * side^2, side >= 3");
    }
  }
}

inline std::size_t ModelSpec::conv_side() const {
  if (in_channels == 0) return 0;
  return static_cast<std::size_t>(
      std::lround(std::sqrt(static_cast<double>(features) / static_cast<double>(in_channels))));
}

template <typename Scalar>
class Model {
 public:
  using Mat = RowMat<Scalar>;

  explicit Model(const ModelSpec& spec) : spec_(spec) {
    spec_.validate();
    switch (spec_.kind) {
      case ModelKind::LogReg:
        add("fc.weight", {spec_.classes, spec_.features}, spec_.features);
        add("fc.bias", {spec_.classes}, spec_.features);
        break;
      case ModelKind::Mlp:
        add("fc1.weight", {spec_.hidden, spec_.features}, spec_.features);
        add("fc1.bias", {spec_.hidden}, spec_.features);
        add("fc2.weight", {spec_.classes, spec_.hidden}, spec_.hidden);
        add("fc2.bias", {spec_.classes}, spec_.hidden);
        break;
      case ModelKind::TinyConv: {
        const auto fan_in = kConvWidth * kConvWidth * spec_.in_channels;
        add("conv.weight", {kConvWidth, kConvWidth, spec_.in_channels, spec_.kernels}, fan_in);
        add("conv.bias", {spec_.kernels}, fan_in);
        add("fc.weight", {spec_.classes, spec_.kernels}, spec_.kernels);
        add("fc.bias", {spec_.classes}, spec_.kernels);
        break;
      }
    }
    initialize();
  }

  const ModelSpec& spec() const { return spec_; }
  std::vector<Parameter<Scalar>>& params() { return params_; }
  const std::vector<Parameter<Scalar>>& params() const { return params_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.values.size());
    return n;
  }

  ParamValues<Scalar> values() const {
    ParamValues<Scalar> out;
    for (const auto& p : params_) out.push_back(p.values);
    return out;
  }

  void set_values(const ParamValues<Scalar>& vs) {
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i].values = vs[i];
  }

  /// Mean softmax cross-entropy over the batch. When `grads` is non-null it is
  /// resized and filled with d(loss)/d(param) in parameter order.
  Scalar loss_and_grad(const Eigen::Ref<const Mat>& x, std::span<const int> labels,
                       ParamValues<Scalar>* grads) const {
    switch (spec_.kind) {
      case ModelKind::LogReg: return logreg(x, labels, grads);
      case ModelKind::Mlp: return mlp(x, labels, grads);
      case ModelKind::TinyConv: return tinyconv(x, labels, grads);
    }
    return Scalar(0);
  }

  Mat logits(const Eigen::Ref<const Mat>& x) const {
    switch (spec_.kind) {
      case ModelKind::LogReg: return dense(x, 0);
      case ModelKind::Mlp: return dense(dense(x, 0).cwiseMax(Scalar(0)), 2);
      case ModelKind::TinyConv: {
        Mat pooled(x.rows(), static_cast<Eigen::Index>(spec_.kernels));
        for (Eigen::Index s = 0; s < x.rows(); ++s) pooled.row(s) = conv_forward(x.row(s)).pooled;
        return dense(pooled, 2);
      }
    }
    return Mat();
  }

  EvalResult evaluate(const Eigen::Ref<const Mat>& x, std::span<const int> labels) const {
    if (x.rows() == 0) return {};
    const Mat z = logits(x);
    double loss = 0.0;
    std::size_t correct = 0;
    for (Eigen::Index s = 0; s < z.rows(); ++s) {
      Eigen::Index arg = 0;
      z.row(s).maxCoeff(&arg);
      if (arg == labels[static_cast<std::size_t>(s)]) ++correct;
      const Scalar mx = z.row(s).maxCoeff();
      const Scalar lse = mx + std::log((z.row(s).array() - mx).exp().sum());
      loss += static_cast<double>(lse - z(s, labels[static_cast<std::size_t>(s)]));
    }
    const auto n = static_cast<double>(z.rows());
    return {loss / n, static_cast<double>(correct) / n};
  }

 private:
  void add(std::string name, std::vector<std::size_t> shape, std::size_t fan_in) {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    params_.push_back({std::move(name), std::move(shape), Vec<Scalar>::Zero(static_cast<Eigen::Index>(n))});
    fan_in_.push_back(fan_in);
  }

  void initialize() {
    Engine engine(spec_.init_seed);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in_[i]));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index j = 0; j < params_[i].values.size(); ++j) {
        params_[i].values[j] = static_cast<Scalar>(u(engine));
      }
    }
  }

  Eigen::Map<const Mat> weight(std::size_t idx) const {
    const auto& p = params_[idx];
    return {p.values.data(), static_cast<Eigen::Index>(p.shape[0]),
            static_cast<Eigen::Index>(p.shape[1])};
  }

  // x * W^T + b for the dense layer whose weight sits at params_[idx].
  Mat dense(const Eigen::Ref<const Mat>& x, std::size_t idx) const {
    Mat z = x * weight(idx).transpose();
    z.rowwise() += params_[idx + 1].values.transpose();
    return z;
  }

  // Softmax cross-entropy; returns mean loss and writes dL/dz into dz.
  static Scalar softmax_xent(const Mat& z, std::span<const int> labels, Mat& dz) {
    const auto batch = z.rows();
    dz.resize(z.rows(), z.cols());
    Scalar loss(0);
    for (Eigen::Index s = 0; s < batch; ++s) {
      const Scalar mx = z.row(s).maxCoeff();
      auto e = (z.row(s).array() - mx).exp();
      const Scalar sum = e.sum();
      const int y = labels[static_cast<std::size_t>(s)];
      if (y < 0 || y >= z.cols()) throw Error(ErrorCode::InvalidArgument, "label out of range");
      loss += mx + std::log(sum) - z(s, y);
      dz.row(s) = e / sum;
      dz(s, y) -= Scalar(1);
    }
    const Scalar inv = Scalar(1) / static_cast<Scalar>(batch);
    dz *= inv;
    return loss * inv;
  }

  void dense_backward(const Mat& x, const Mat& dz, std::size_t idx, ParamValues<Scalar>& g) const {
    Eigen::Map<Mat>(g[idx].data(), dz.cols(), x.cols()) = dz.transpose() * x;
    g[idx + 1] = dz.colwise().sum().transpose();
  }

  ParamValues<Scalar> zero_grads() const {
    ParamValues<Scalar> g;
    for (const auto& p : params_) g.push_back(Vec<Scalar>::Zero(p.values.size()));
    return g;
  }

  Scalar logreg(const Eigen::Ref<const Mat>& x, std::span<const int> y, ParamValues<Scalar>* grads) const {
    const Mat z = dense(x, 0);
    Mat dz;
    const Scalar loss = softmax_xent(z, y, dz);
    if (grads) {
      *grads = zero_grads();
      dense_backward(x, dz, 0, *grads);
    }
    return loss;
  }

  Scalar mlp(const Eigen::Ref<const Mat>& x, std::span<const int> y, ParamValues<Scalar>* grads) const {
    const Mat z1 = dense(x, 0);
    const Mat h = z1.cwiseMax(Scalar(0));
    const Mat z2 = dense(h, 2);
    Mat dz2;
    const Scalar loss = softmax_xent(z2, y, dz2);
    if (grads) {
      *grads = zero_grads();
      dense_backward(h, dz2, 2, *grads);
      Mat dh = dz2 * weight(2);
      const Mat dz1 = (z1.array() > Scalar(0)).select(dh, Scalar(0));
      dense_backward(x, dz1, 0, *grads);
    }
    return loss;
  }

  struct ConvCache {
    Mat patches;  // positions x (W*H*D), column (w*H + h)*D + d
    Mat pre;      // positions x C, before ReLU
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> pooled;
  };

  ConvCache conv_forward(const Eigen::Ref<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>& sample) const {
    const auto side = static_cast<Eigen::Index>(spec_.conv_side());
    const auto depth = static_cast<Eigen::Index>(spec_.in_channels);
    const auto out_side = side - static_cast<Eigen::Index>(kConvWidth) + 1;
    const auto kw = static_cast<Eigen::Index>(kConvWidth);
    ConvCache c;
    c.patches.resize(out_side * out_side, kw * kw * depth);
    for (Eigen::Index oy = 0; oy < out_side; ++oy)
      for (Eigen::Index ox = 0; ox < out_side; ++ox)
        for (Eigen::Index w = 0; w < kw; ++w)
          for (Eigen::Index h = 0; h < kw; ++h)
            for (Eigen::Index d = 0; d < depth; ++d)
              c.patches(oy * out_side + ox, (w * kw + h) * depth + d) =
                  sample(d * side * side + (oy + h) * side + (ox + w));

    const auto& k = params_[0];
    Eigen::Map<const Mat> kernel(k.values.data(), kw * kw * depth, static_cast<Eigen::Index>(spec_.kernels));
    c.pre = c.patches * kernel;
    c.pre.rowwise() += params_[1].values.transpose();
    c.pooled = c.pre.cwiseMax(Scalar(0)).colwise().mean();
    return c;
  }

  Scalar tinyconv(const Eigen::Ref<const Mat>& x, std::span<const int> y, ParamValues<Scalar>* grads) const {
    const auto batch = x.rows();
    const auto channels = static_cast<Eigen::Index>(spec_.kernels);
    std::vector<ConvCache> caches;
    caches.reserve(static_cast<std::size_t>(batch));
    Mat pooled(batch, channels);
    for (Eigen::Index s = 0; s < batch; ++s) {
      caches.push_back(conv_forward(x.row(s)));
      pooled.row(s) = caches.back().pooled;
    }
    const Mat z = dense(pooled, 2);
    Mat dz;
    const Scalar loss = softmax_xent(z, y, dz);
    if (grads) {
      *grads = zero_grads();
      dense_backward(pooled, dz, 2, *grads);
      const Mat dpooled = dz * weight(2);
      Eigen::Map<Mat> dk((*grads)[0].data(), caches[0].patches.cols(), channels);
      for (Eigen::Index s = 0; s < batch; ++s) {
        const auto& c = caches[static_cast<std::size_t>(s)];
        const Scalar inv = Scalar(1) / static_cast<Scalar>(c.pre.rows());
        Mat dpre = (c.pre.array() > Scalar(0)).select(
            (dpooled.row(s) * inv).replicate(c.pre.rows(), 1), Scalar(0));
        dk += c.patches.transpose() * dpre;
        (*grads)[1] += dpre.colwise().sum().transpose();
      }
    }
    return loss;
  }

  ModelSpec spec_;
  std::vector<Parameter<Scalar>> params_;
  std::vector<std::size_t> fan_in_;
};

}  // namespace gradestc::flsim
