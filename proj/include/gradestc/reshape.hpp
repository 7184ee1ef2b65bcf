#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gradestc/linalg.hpp"

namespace gradestc {

/// One layer's gradient. For 4-D tensors `shape` is (W, H, D, C) and `values`
/// are stored row-major over that tuple (C varies fastest).
struct GradientTensor {
  std::string layer_name;
  std::vector<std::size_t> shape;
  std::vector<float> values;

  std::size_t size() const { return values.size(); }
};

std::size_t element_count(std::span<const std::size_t> shape);

/// Throws ShapeMismatch / NonFinite when the tensor is malformed.
void validate(const GradientTensor& t);

struct SegmentSpec {
  std::size_t n = 0;    // original element count
  std::size_t l = 1;    // segment length (rows)
  std::size_t m = 1;    // columns, ceil(n / l)
  std::size_t pad = 0;  // trailing zeros in the last column

  static SegmentSpec make(std::size_t n, std::size_t l);
};

/// WHDC flattening: width fastest, then height, depth, channel. Tensors that
/// are not 4-D are returned in their natural row-major order.
std::vector<float> flatten_whdc(const GradientTensor& t);

/// Inverse of flatten_whdc for the given shape.
GradientTensor unflatten_whdc(std::span<const float> flat, std::vector<std::size_t> shape,
                              std::string layer_name = {});

struct Segmented {
  Matrix g;
  SegmentSpec spec;
};

/// Column j holds elements [j*l, (j+1)*l) of g; the tail is zero padded.
Segmented segment(std::span<const float> g, std::size_t l);
Segmented segment(std::span<const double> g, std::size_t l);

/// Drops padding, undoes the WHDC flattening and rounds to 32-bit.
GradientTensor restore(const Matrix& g_hat, const SegmentSpec& spec,
                       const std::vector<std::size_t>& shape, std::string layer_name = {});

/// Default segment length for a layer: the largest structural boundary that is
/// not above ceil(sqrt(n)). For dense [out][in] weights the boundaries are
/// divisors and multiples of the input width; for (W,H,D,C) kernels they are
/// multiples of W*H and divisors of W*H*D. Falls back to ceil(sqrt(n)).
std::size_t default_segment_length(std::span<const std::size_t> shape);

}  // namespace gradestc
