#pragma once

// Baseline uplink codecs compared against GradESTC: magnitude top-k
// sparsification and per-layer symmetric uniform quantization.

#include <cstdint>
#include <span>
#include <vector>

#include "gradestc/wire.hpp"

namespace gradestc::flsim {

struct SparsePayload {
  std::uint32_t n = 0;
  std::vector<std::uint32_t> indices;  // ascending
  std::vector<float> values;

  bool operator==(const SparsePayload&) const = default;
};

/// Keeps the ceil(fraction * n) entries of largest magnitude (lower index wins ties).
SparsePayload topk_compress(std::span<const float> g, double fraction);
std::vector<float> topk_decompress(const SparsePayload& p);
std::vector<std::uint8_t> encode(const SparsePayload& p);
SparsePayload decode_sparse(std::span<const std::uint8_t> bytes);
/// Two elements (value, index) per kept entry.
ElementCounts element_counts(const SparsePayload& p);

struct QuantPayload {
  std::uint32_t n = 0;
  std::uint8_t bits = 8;
  float max_abs = 0.0f;              // the per-layer scale
  std::vector<std::uint8_t> packed;  // ceil(n * bits / 8) bytes, LSB first

  bool operator==(const QuantPayload&) const = default;
};

/// Symmetric uniform quantization onto L = 2^(bits-1) - 1 levels per sign
/// (step = max_abs / L, error <= step / 2). bits = 1 sends sign * max_abs.
/// bits = 32 is the unquantized passthrough.
QuantPayload quant_compress(std::span<const float> g, int bits);
std::vector<float> quant_decompress(const QuantPayload& p);
/// Quantization step for a payload (0 for bits = 32).
double quant_step(const QuantPayload& p);
std::vector<std::uint8_t> encode(const QuantPayload& p);
QuantPayload decode_quant(std::span<const std::uint8_t> bytes);
/// ceil(n * bits / 32) packed words plus one scale.
ElementCounts element_counts(const QuantPayload& p);

}  // namespace gradestc::flsim
