#pragma once

// Shared test helpers: random inputs and independent reference
// implementations used as oracles.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "gradestc/compressor.hpp"
#include "gradestc/flsim/data.hpp"
#include "gradestc/flsim/model.hpp"
#include "gradestc/linalg.hpp"
#include "gradestc/rng.hpp"

namespace testing_support {

using gradestc::Matrix;
using gradestc::Vector;

inline Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix a(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = n(rng);
  return a;
}

inline Matrix orthonormal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(rows, cols, rng));
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

/// rows x cols matrix of exact rank r with singular values spread over [1, 10].
inline Matrix rank_r(Eigen::Index rows, Eigen::Index cols, Eigen::Index r, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(1.0, 10.0);
  Vector s(r);
  for (Eigen::Index i = 0; i < r; ++i) s[i] = u(rng);
  return orthonormal(rows, r, rng) * s.asDiagonal() * orthonormal(cols, r, rng).transpose();
}

/// Slowly drifting low-rank-plus-noise gradient stream in segment space.
class DriftingStream {
 public:
  DriftingStream(Eigen::Index l, Eigen::Index m, Eigen::Index rank, double drift, double noise,
                 std::uint64_t seed)
      : rng_(seed), drift_(drift), noise_(noise) {
    u_ = orthonormal(l, rank, rng_);
    v_ = gaussian(rank, m, rng_);
  }

  Matrix next() {
    u_ += drift_ * gaussian(u_.rows(), u_.cols(), rng_);
    v_ += drift_ * gaussian(v_.rows(), v_.cols(), rng_);
    return u_ * v_ + noise_ * gaussian(u_.rows(), v_.cols(), rng_);
  }

 private:
  std::mt19937_64 rng_;
  double drift_;
  double noise_;
  Matrix u_;
  Matrix v_;
};

/// Brute-force survivor selection: stack incumbent and candidate scores, sort
/// all rows by (score desc, incumbent first, lower index) and keep k. Returns
/// the 1-based incumbent slots that fall out.
inline std::vector<std::uint32_t> brute_force_replaced(const Vector& a_scores,
                                                       const Vector& e_scores, Eigen::Index k) {
  struct Row {
    double score;
    bool incumbent;
    Eigen::Index index;
  };
  std::vector<Row> rows;
  for (Eigen::Index i = 0; i < a_scores.size(); ++i) rows.push_back({a_scores[i], true, i});
  for (Eigen::Index i = 0; i < e_scores.size(); ++i) rows.push_back({e_scores[i], false, i});
  std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.incumbent != y.incumbent) return x.incumbent;
    return x.index < y.index;
  });
  std::vector<bool> kept(static_cast<std::size_t>(a_scores.size()), false);
  for (Eigen::Index i = 0; i < k && i < static_cast<Eigen::Index>(rows.size()); ++i)
    if (rows[i].incumbent) kept[rows[i].index] = true;
  std::vector<std::uint32_t> out;
  for (Eigen::Index i = 0; i < a_scores.size(); ++i)
    if (!kept[i]) out.push_back(static_cast<std::uint32_t>(i + 1));
  return out;
}

/// Dirichlet(alpha * 1_n) as independent Gamma(alpha, 1) draws normalized to
/// sum 1, consuming the engine in component order through one distribution
/// object (libstdc++'s gamma keeps a cached normal between calls).
inline std::vector<double> reference_dirichlet(std::size_t n, double alpha, gradestc::Engine& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> g(n);
  double sum = 0.0;
  for (auto& x : g) sum += (x = gamma(rng));
  for (auto& x : g) x /= sum;
  return g;
}

/// Plain FedAvg written independently of the simulator: every client runs
/// minibatch SGD from the global weights, the server averages the weight
/// deltas (expressed as delta / lr) and steps by lr. Sub-seeds follow the
/// documented scheme (train seed = derive_seed(seed, {3, round, client}),
/// epoch shuffle seed = derive_seed(train seed, {epoch})).
struct FedAvgReference {
  gradestc::flsim::Model<float> model;
  std::vector<gradestc::flsim::Dataset> clients;
  std::uint64_t seed;
  std::size_t epochs;
  std::size_t batch;
  float lr;
  std::uint64_t round = 0;

  using Params = gradestc::flsim::ParamValues<float>;

  Params sgd(const gradestc::flsim::Dataset& d, std::uint64_t train_seed) {
    const Params start = model.values();
    auto& params = model.params();
    std::vector<std::size_t> order(d.size());
    Params grads;
    for (std::size_t e = 0; e < epochs; ++e) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      gradestc::Engine eng(gradestc::derive_seed(train_seed, {e}));
      std::shuffle(order.begin(), order.end(), eng);
      for (std::size_t s = 0; s < order.size(); s += batch) {
        const std::size_t cnt = std::min(batch, order.size() - s);
        gradestc::flsim::RowMat<float> bx(static_cast<Eigen::Index>(cnt), d.x.cols());
        std::vector<int> by(cnt);
        for (std::size_t i = 0; i < cnt; ++i) {
          bx.row(static_cast<Eigen::Index>(i)) = d.x.row(static_cast<Eigen::Index>(order[s + i]));
          by[i] = d.y[order[s + i]];
        }
        model.loss_and_grad(bx, by, &grads);
        for (std::size_t p = 0; p < params.size(); ++p) params[p].values -= lr * grads[p];
      }
    }
    Params delta(start.size());
    for (std::size_t p = 0; p < start.size(); ++p) delta[p] = (start[p] - params[p].values) / lr;
    model.set_values(start);
    return delta;
  }

  void step() {
    ++round;
    Params sum;
    for (const auto& p : model.params()) sum.push_back(gradestc::Vec<float>::Zero(p.values.size()));
    for (std::size_t c = 0; c < clients.size(); ++c) {
      const auto delta = sgd(clients[c], gradestc::derive_seed(seed, {3, round, c}));
      for (std::size_t p = 0; p < sum.size(); ++p) sum[p] += delta[p];
    }
    const auto n = static_cast<float>(clients.size());
    auto& params = model.params();
    for (std::size_t p = 0; p < sum.size(); ++p) {
      const gradestc::Vec<float> avg = sum[p] / n;
      params[p].values -= lr * avg;
    }
  }

  /// Flattened global weights.
  std::vector<float> weights() const {
    std::vector<float> out;
    for (const auto& p : model.params()) out.insert(out.end(), p.values.data(), p.values.data() + p.values.size());
    return out;
  }
};

inline std::vector<float> flat_weights(const gradestc::flsim::Model<float>& m) {
  std::vector<float> out;
  for (const auto& p : m.params()) out.insert(out.end(), p.values.data(), p.values.data() + p.values.size());
  return out;
}

}  // namespace testing_support
