#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "gradestc/flsim/data.hpp"
#include "support.hpp"

using namespace gradestc;
using namespace gradestc::flsim;

namespace {

Dataset labelled(std::vector<int> labels, std::size_t classes) {
  Dataset d;
  d.classes = classes;
  d.y = std::move(labels);
  d.x = RowMat<float>::Zero(static_cast<Eigen::Index>(d.y.size()), 2);
  for (std::size_t i = 0; i < d.y.size(); ++i) d.x(static_cast<Eigen::Index>(i), 0) = static_cast<float>(i);
  return d;
}

void expect_disjoint_cover(const std::vector<std::vector<std::size_t>>& parts, std::size_t n) {
  std::vector<std::size_t> all;
  for (const auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(n);
  std::iota(expected.begin(), expected.end(), std::size_t{0});
  EXPECT_EQ(all, expected);
}

}  // namespace

TEST(Partition, IidEqualSplit) {
  const auto d = labelled(std::vector<int>(100, 0), 1);
  const auto parts = partition_dataset(d, 10, {PartitionKind::Iid, 0}, 3);
  for (const auto& p : parts) EXPECT_EQ(p.size(), 10u);
  expect_disjoint_cover(parts, 100);
}

TEST(Partition, IidRemainderGoesToFirstClients) {
  const auto d = labelled(std::vector<int>(23, 0), 1);
  const auto parts = partition_dataset(d, 5, {PartitionKind::Iid, 0}, 3);
  EXPECT_EQ(parts[0].size(), 5u);
  EXPECT_EQ(parts[2].size(), 5u);
  EXPECT_EQ(parts[3].size(), 4u);
  expect_disjoint_cover(parts, 23);
}

TEST(Partition, TooFewSamples) {
  try {
    partition_dataset(labelled({0, 1}, 2), 3, {}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewSamples);
  }
}

TEST(Partition, DirichletMatchesReferenceSampler) {
  // 2 classes, 2 clients, alpha = 0.1.
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) labels.push_back(i % 3 == 0 ? 1 : 0);
  const auto d = labelled(labels, 2);
  const std::uint64_t seed = 42;
  const auto parts = partition_dataset(d, 2, {PartitionKind::Dirichlet, 0.1}, seed);

  // Replay attempt by attempt with the reference sampler.
  std::vector<std::vector<std::size_t>> expected;
  for (int attempt = 0; attempt < kMaxDirichletRetries; ++attempt) {
    expected.assign(2, {});
    Engine engine(derive_seed(seed, {1, static_cast<std::uint64_t>(attempt)}));
    for (int cls = 0; cls < 2; ++cls) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == cls) idx.push_back(i);
      std::shuffle(idx.begin(), idx.end(), engine);
      const auto props = testing_support::reference_dirichlet(2, 0.1, engine);
      const auto cut = std::min(idx.size(), static_cast<std::size_t>(props[0] * static_cast<double>(idx.size())));
      expected[0].insert(expected[0].end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
      expected[1].insert(expected[1].end(), idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
    }
    if (!expected[0].empty() && !expected[1].empty()) break;
  }
  for (auto& p : expected) std::sort(p.begin(), p.end());
  EXPECT_EQ(parts, expected);
}

TEST(Partition, DirichletEveryClientNonEmpty) {
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) labels.push_back(i % 4);
  const auto d = labelled(labels, 4);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto parts = partition_dataset(d, 20, {PartitionKind::Dirichlet, 0.05}, seed);
    for (const auto& p : parts) EXPECT_FALSE(p.empty());
    expect_disjoint_cover(parts, 40);
  }
}

TEST(Partition, DirichletSkewGrowsAsAlphaShrinks) {
  GaussianMixtureSpec spec;
  spec.train_samples = 4000;
  const auto data = make_gaussian_mixture(spec).train;
  auto skew = [&](double alpha) {
    const auto parts = partition_dataset(data, 10, {PartitionKind::Dirichlet, alpha}, 1);
    double total = 0;
    for (const auto& p : parts) {
      std::vector<double> counts(data.classes, 0);
      for (auto i : p) counts[static_cast<std::size_t>(data.y[i])] += 1;
      total += *std::max_element(counts.begin(), counts.end()) / static_cast<double>(p.size());
    }
    return total / 10;
  };
  EXPECT_GT(skew(0.1), skew(0.5));
  EXPECT_GT(skew(0.5), skew(100.0));
}

TEST(Dirichlet, MomentsMatchTheory) {
  Engine engine(5);
  const std::size_t n = 4;
  const double alpha = 0.5;
  const int draws = 20000;
  std::vector<double> mean(n, 0), sq(n, 0);
  for (int t = 0; t < draws; ++t) {
    const auto p = sample_dirichlet(n, alpha, engine);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    for (std::size_t i = 0; i < n; ++i) {
      mean[i] += p[i] / draws;
      sq[i] += p[i] * p[i] / draws;
    }
  }
  const double m = 1.0 / n;
  const double var = m * (1 - m) / (n * alpha + 1);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(mean[i], m, 0.01);
    EXPECT_NEAR(sq[i] - mean[i] * mean[i], var, 0.01);
  }
}

TEST(GaussianMixture, ShapesAndDeterminism) {
  GaussianMixtureSpec spec;
  spec.train_samples = 300;
  spec.test_samples = 100;
  spec.clusters_per_class = 2;
  spec.seed = 9;
  const auto a = make_gaussian_mixture(spec);
  const auto b = make_gaussian_mixture(spec);
  EXPECT_EQ(a.train.x.rows(), 300);
  EXPECT_EQ(a.train.x.cols(), 32);
  EXPECT_EQ(a.test.size(), 100u);
  EXPECT_EQ(a.train.x, b.train.x);
  EXPECT_EQ(a.train.y, b.train.y);
  std::set<int> seen(a.train.y.begin(), a.train.y.end());
  EXPECT_EQ(seen.size(), 4u);
}

TEST(Loaders, CsvAndIdx) {
  const auto dir = std::filesystem::temp_directory_path() / "gradestc_loader_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "d.csv");
    os << "label,a,b\n1,0.5,2\n0,-1,3\n";
  }
  const auto csv = load_csv((dir / "d.csv").string());
  EXPECT_EQ(csv.y, (std::vector<int>{1, 0}));
  EXPECT_FLOAT_EQ(csv.x(1, 0), -1.0f);
  EXPECT_EQ(csv.classes, 2u);

  auto be32 = [](std::ofstream& os, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  {
    std::ofstream img(dir / "img", std::ios::binary), lab(dir / "lab", std::ios::binary);
    be32(img, 0x00000803);
    be32(img, 2);
    be32(img, 2);
    be32(img, 2);
    for (int i = 0; i < 8; ++i) img.put(static_cast<char>(i * 30));
    be32(lab, 0x00000801);
    be32(lab, 2);
    lab.put(3);
    lab.put(1);
  }
  const auto idx = load_idx((dir / "img").string(), (dir / "lab").string());
  EXPECT_EQ(idx.x.rows(), 2);
  EXPECT_EQ(idx.x.cols(), 4);
  EXPECT_FLOAT_EQ(idx.x(1, 0), 120.0f / 255.0f);
  EXPECT_EQ(idx.y, (std::vector<int>{3, 1}));
  std::filesystem::remove_all(dir);
}
