#include "gradestc/reshape.hpp"

#include <cmath>
#include <numeric>

namespace gradestc {

std::size_t element_count(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

void validate(const GradientTensor& t) {
  for (auto s : t.shape) {
    if (s == 0) throw Error(ErrorCode::ShapeMismatch, t.layer_name + ": zero-sized dimension");
  }
  if (element_count(t.shape) != t.values.size()) {
    throw Error(ErrorCode::ShapeMismatch, t.layer_name + ": values length does not match shape");
  }
  for (float v : t.values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, t.layer_name + ": non-finite value");
  }
}

SegmentSpec SegmentSpec::make(std::size_t n, std::size_t l) {
  if (l == 0) throw Error(ErrorCode::InvalidArgument, "segment length must be positive");
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "cannot segment an empty vector");
  SegmentSpec spec;
  spec.n = n;
  spec.l = l;
  spec.m = (n + l - 1) / l;
  spec.pad = spec.l * spec.m - n;
  return spec;
}

namespace {

// Index in the WHDC-flattened vector of the element stored at row-major
// position (w, h, d, c).
struct Whdc {
  std::size_t w, h, d, c;

  std::size_t flat(std::size_t iw, std::size_t ih, std::size_t id, std::size_t ic) const {
    return iw + w * (ih + h * (id + d * ic));
  }
  std::size_t stored(std::size_t iw, std::size_t ih, std::size_t id, std::size_t ic) const {
    return ((iw * h + ih) * d + id) * c + ic;
  }
};

template <typename Fn>
void for_each_whdc(const Whdc& dims, Fn&& fn) {
  for (std::size_t ic = 0; ic < dims.c; ++ic)
    for (std::size_t id = 0; id < dims.d; ++id)
      for (std::size_t ih = 0; ih < dims.h; ++ih)
        for (std::size_t iw = 0; iw < dims.w; ++iw)
          fn(dims.flat(iw, ih, id, ic), dims.stored(iw, ih, id, ic));
}

}  // namespace

std::vector<float> flatten_whdc(const GradientTensor& t) {
  validate(t);
  if (t.shape.size() != 4) return t.values;
  const Whdc dims{t.shape[0], t.shape[1], t.shape[2], t.shape[3]};
  std::vector<float> out(t.values.size());
  for_each_whdc(dims, [&](std::size_t f, std::size_t s) { out[f] = t.values[s]; });
  return out;
}

GradientTensor unflatten_whdc(std::span<const float> flat, std::vector<std::size_t> shape,
                              std::string layer_name) {
  if (element_count(shape) != flat.size()) {
    throw Error(ErrorCode::ShapeMismatch, layer_name + ": flat length does not match shape");
  }
  GradientTensor t{std::move(layer_name), std::move(shape), {}};
  if (t.shape.size() != 4) {
    t.values.assign(flat.begin(), flat.end());
    return t;
  }
  const Whdc dims{t.shape[0], t.shape[1], t.shape[2], t.shape[3]};
  t.values.resize(flat.size());
  for_each_whdc(dims, [&](std::size_t f, std::size_t s) { t.values[s] = flat[f]; });
  return t;
}

namespace {

template <typename T>
Segmented segment_impl(std::span<const T> g, std::size_t l) {
  Segmented out{Matrix::Zero(0, 0), SegmentSpec::make(g.size(), l)};
  const auto& spec = out.spec;
  out.g = Matrix::Zero(static_cast<Eigen::Index>(spec.l), static_cast<Eigen::Index>(spec.m));
  // Column-major storage means the matrix data is exactly g followed by the pad.
  for (std::size_t i = 0; i < g.size(); ++i) out.g.data()[i] = static_cast<double>(g[i]);
  return out;
}

}  // namespace

Segmented segment(std::span<const float> g, std::size_t l) { return segment_impl(g, l); }
Segmented segment(std::span<const double> g, std::size_t l) { return segment_impl(g, l); }

GradientTensor restore(const Matrix& g_hat, const SegmentSpec& spec,
                       const std::vector<std::size_t>& shape, std::string layer_name) {
  if (static_cast<std::size_t>(g_hat.rows()) != spec.l ||
      static_cast<std::size_t>(g_hat.cols()) != spec.m) {
    throw Error(ErrorCode::ShapeMismatch, layer_name + ": reconstructed matrix has wrong dims");
  }
  if (element_count(shape) != spec.n) {
    throw Error(ErrorCode::ShapeMismatch, layer_name + ": shape does not match segment spec");
  }
  std::vector<float> flat(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) flat[i] = static_cast<float>(g_hat.data()[i]);
  return unflatten_whdc(flat, shape, std::move(layer_name));
}

namespace {

std::size_t largest_boundary(std::size_t unit, std::size_t total, std::size_t limit) {
  std::size_t best = 0;
  // Divisors of the unit.
  for (std::size_t div = 1; div <= unit; ++div) {
    if (unit % div == 0 && div <= limit) best = std::max(best, div);
  }
  // Multiples of the unit that still divide the tensor into whole units.
  for (std::size_t mult = unit; mult <= limit && mult <= total; mult += unit) {
    if (total % mult == 0) best = std::max(best, mult);
  }
  return best;
}

}  // namespace

std::size_t default_segment_length(std::span<const std::size_t> shape) {
  const std::size_t n = element_count(shape);
  const auto root = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  std::size_t best = 0;
  if (shape.size() == 2) {
    best = largest_boundary(shape[1], n, root);
  } else if (shape.size() == 4) {
    best = largest_boundary(shape[0] * shape[1], n, root);
  }
  return best > 1 ? best : std::max<std::size_t>(root, 1);
}

}  // namespace gradestc
