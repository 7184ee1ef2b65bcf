#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradestc/flsim/codecs.hpp"

using namespace gradestc;
using namespace gradestc::flsim;

TEST(TopK, KeepsLargestMagnitudes) {
  const std::vector<float> g{3, -5, 1};
  const auto p = topk_compress(g, 2.0 / 3.0);
  EXPECT_EQ(p.indices, (std::vector<std::uint32_t>{0, 1}));
  EXPECT_EQ(p.values, (std::vector<float>{3, -5}));
  EXPECT_EQ(topk_decompress(p), (std::vector<float>{3, -5, 0}));
}

TEST(TopK, FractionOneIsIdentity) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> val;
  std::vector<float> g(37);
  for (auto& v : g) v = val(rng);
  EXPECT_EQ(topk_decompress(topk_compress(g, 1.0)), g);
}

TEST(TopK, ElementAccounting) {
  std::vector<float> g(2048, 1.0f);
  const auto p = topk_compress(g, 0.1);
  EXPECT_EQ(p.values.size(), 205u);  // ceil(204.8)
  EXPECT_EQ(element_counts(p).total(), 2u * 205u);
  EXPECT_EQ(topk_compress(std::vector<float>(10, 1.0f), 0.1).values.size(), 1u);
}

TEST(TopK, TiesPreferLowerIndex) {
  const auto p = topk_compress(std::vector<float>{1, -1, 1, 1}, 0.5);
  EXPECT_EQ(p.indices, (std::vector<std::uint32_t>{0, 1}));
}

TEST(TopK, EncodeRoundTrip) {
  std::mt19937_64 rng(2);
  std::normal_distribution<float> val;
  std::vector<float> g(100);
  for (auto& v : g) v = val(rng);
  const auto p = topk_compress(g, 0.17);
  const auto bytes = encode(p);
  EXPECT_EQ(bytes.size(), 8 + 8 * p.values.size());
  EXPECT_EQ(decode_sparse(bytes), p);
  EXPECT_THROW(decode_sparse(std::span<const std::uint8_t>(bytes.data(), bytes.size() - 1)), Error);
  EXPECT_THROW(topk_compress(g, 0.0), Error);
}

TEST(Quant, ErrorWithinHalfStep) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> val;
  std::vector<float> g(500);
  for (auto& v : g) v = val(rng);
  for (int bits : {2, 4, 8, 12, 16}) {
    const auto p = quant_compress(g, bits);
    const auto back = quant_decompress(p);
    const double step = quant_step(p);
    for (std::size_t i = 0; i < g.size(); ++i)
      EXPECT_LE(std::abs(back[i] - g[i]), step / 2 * (1 + 1e-6) + 1e-7) << bits;
  }
}

TEST(Quant, ConstantTensorExact) {
  const std::vector<float> g(9, -0.75f);
  for (int bits : {1, 2, 8}) EXPECT_EQ(quant_decompress(quant_compress(g, bits)), g);
  EXPECT_EQ(quant_decompress(quant_compress(std::vector<float>(5, 0.0f), 8)), std::vector<float>(5, 0.0f));
}

TEST(Quant, ThirtyTwoBitsIsExact) {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> val;
  std::vector<float> g(33);
  for (auto& v : g) v = val(rng);
  const auto p = quant_compress(g, 32);
  EXPECT_EQ(quant_decompress(p), g);
  EXPECT_EQ(element_counts(p).total(), 33u);
}

TEST(Quant, EightBitsIsQuarterSize) {
  const std::vector<float> g(1024, 0.5f);
  const auto p = quant_compress(g, 8);
  EXPECT_EQ(p.packed.size(), 1024u);
  EXPECT_EQ(element_counts(p).total(), 1024u / 4 + 1);
  const auto bytes = encode(p);
  EXPECT_EQ(bytes.size(), 9u + 1024u);
  EXPECT_EQ(decode_quant(bytes), p);
}

TEST(Quant, RejectsBadBits) {
  EXPECT_THROW(quant_compress(std::vector<float>{1}, 0), Error);
  EXPECT_THROW(quant_compress(std::vector<float>{1}, 17), Error);
}
