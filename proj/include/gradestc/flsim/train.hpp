#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "gradestc/flsim/data.hpp"
#include "gradestc/flsim/model.hpp"

namespace gradestc::flsim {

struct LocalTrainOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
};

/// Plain minibatch SGD on one client's data starting from the model's current
/// weights. Returns the pseudo-gradient (w_pre - w_post) / lr per parameter and
/// leaves the model at w_pre.
template <typename Scalar>
ParamValues<Scalar> local_train(Model<Scalar>& model, const RowMat<Scalar>& x,
                                const std::vector<int>& y, const LocalTrainOptions& opts) {
  if (opts.batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch_size must be positive");
  if (!(opts.learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be > 0");
  const ParamValues<Scalar> w_pre = model.values();
  const auto lr = static_cast<Scalar>(opts.learning_rate);
  const std::size_t n = y.size();

  std::vector<std::size_t> order(n);
  RowMat<Scalar> bx;
  std::vector<int> by;
  ParamValues<Scalar> grads;
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Engine engine(derive_seed(opts.seed, {epoch}));
    std::shuffle(order.begin(), order.end(), engine);
    for (std::size_t start = 0; start < n; start += opts.batch_size) {
      const std::size_t count = std::min(opts.batch_size, n - start);
      bx.resize(static_cast<Eigen::Index>(count), x.cols());
      by.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        bx.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[start + i]));
        by[i] = y[order[start + i]];
      }
      const Scalar loss = model.loss_and_grad(bx, by, &grads);
      if (!std::isfinite(static_cast<double>(loss))) {
        model.set_values(w_pre);
        throw Error(ErrorCode::DivergenceDetected, "local loss became non-finite");
      }
      auto& params = model.params();
      for (std::size_t p = 0; p < params.size(); ++p) params[p].values -= lr * grads[p];
    }
  }

  ParamValues<Scalar> pseudo(w_pre.size());
  const auto& params = model.params();
  for (std::size_t p = 0; p < params.size(); ++p) pseudo[p] = (w_pre[p] - params[p].values) / lr;
  model.set_values(w_pre);
  return pseudo;
}

}  // namespace gradestc::flsim
