#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gradestc/flsim/model.hpp"

namespace gradestc::flsim {

struct Dataset {
  RowMat<float> x;        // samples x features
  std::vector<int> y;     // labels in [0, classes)
  std::size_t classes = 0;

  std::size_t size() const { return y.size(); }
  /// Rows of x / entries of y at `indices`, in order.
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

struct GaussianMixtureSpec {
  std::size_t classes = 4;
  std::size_t features = 32;
  std::size_t clusters_per_class = 1;
  std::size_t train_samples = 2000;
  std::size_t test_samples = 1000;
  double separation = 1.0;  // std-dev of cluster centres per coordinate
  double noise = 1.0;       // std-dev of samples around their centre
  std::uint64_t seed = 0;
};

struct TrainTest {
  Dataset train;
  Dataset test;
};

/// Each class owns `clusters_per_class` Gaussian blobs with random centres;
/// labels are drawn uniformly. Train and test come from the same mixture.
TrainTest make_gaussian_mixture(const GaussianMixtureSpec& spec);

/// CSV with one sample per line: label first, then features.
Dataset load_csv(const std::string& path);

/// IDX image + label file pair (the MNIST distribution format). Pixel bytes
/// are scaled to [0, 1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

enum class PartitionKind { Iid, Dirichlet };

struct PartitionSpec {
  PartitionKind kind = PartitionKind::Iid;
  double alpha = 0.5;  // Dirichlet concentration
};

/// iid: shuffled equal split (remainder spread over the first clients).
/// dirichlet: for each class, proportions ~ Dir(alpha * 1_N) and the class's
/// shuffled samples are cut at floor(cumsum(p) * n_c). If a client ends up
/// empty the whole draw is repeated (up to 100 attempts), then empty clients
/// take one sample each from the largest client.
std::vector<std::vector<std::size_t>> partition_dataset(const Dataset& data, std::size_t clients,
                                                        const PartitionSpec& spec,
                                                        std::uint64_t seed);

/// Symmetric Dirichlet(alpha * 1_n) draw via normalized Gamma variates.
std::vector<double> sample_dirichlet(std::size_t n, double alpha, Engine& engine);

inline constexpr int kMaxDirichletRetries = 100;

}  // namespace gradestc::flsim
