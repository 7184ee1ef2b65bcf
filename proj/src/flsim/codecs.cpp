#include "gradestc/flsim/codecs.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace gradestc::flsim {

namespace {

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get32(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (in.size() < pos + 4) throw Error(ErrorCode::MalformedPayload, "truncated payload");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

std::int64_t levels_per_sign(int bits) { return bits == 1 ? 1 : (std::int64_t{1} << (bits - 1)) - 1; }

std::size_t packed_bytes(std::uint32_t n, int bits) {
  return bits == 32 ? std::size_t{n} * 4 : (std::size_t{n} * static_cast<std::size_t>(bits) + 7) / 8;
}

}  // namespace

SparsePayload topk_compress(std::span<const float> g, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw Error(ErrorCode::InvalidArgument, "top-k fraction must be in (0, 1]");
  }
  const std::size_t n = g.size();
  const auto keep = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9)));
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), std::uint32_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      const float ma = std::abs(g[a]), mb = std::abs(g[b]);
                      return ma != mb ? ma > mb : a < b;
                    });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  SparsePayload p;
  p.n = static_cast<std::uint32_t>(n);
  p.indices = order;
  for (auto i : order) p.values.push_back(g[i]);
  return p;
}

std::vector<float> topk_decompress(const SparsePayload& p) {
  std::vector<float> out(p.n, 0.0f);
  for (std::size_t i = 0; i < p.indices.size(); ++i) {
    if (p.indices[i] >= p.n) throw Error(ErrorCode::IndexOutOfRange, "sparse index out of range");
    out[p.indices[i]] = p.values[i];
  }
  return out;
}

std::vector<std::uint8_t> encode(const SparsePayload& p) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + 8 * p.indices.size());
  put32(out, p.n);
  put32(out, static_cast<std::uint32_t>(p.indices.size()));
  for (auto i : p.indices) put32(out, i);
  for (float v : p.values) put32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

SparsePayload decode_sparse(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  SparsePayload p;
  p.n = get32(bytes, pos);
  const auto count = get32(bytes, pos);
  if (bytes.size() != 8 + std::size_t{count} * 8) throw Error(ErrorCode::MalformedPayload, "bad sparse length");
  for (std::uint32_t i = 0; i < count; ++i) p.indices.push_back(get32(bytes, pos));
  for (std::uint32_t i = 0; i < count; ++i) p.values.push_back(std::bit_cast<float>(get32(bytes, pos)));
  return p;
}

ElementCounts element_counts(const SparsePayload& p) {
  ElementCounts c;
  c.coeff = p.values.size();
  c.index = p.indices.size();
  return c;
}

QuantPayload quant_compress(std::span<const float> g, int bits) {
  if (bits != 32 && (bits < 1 || bits > 16)) {
    throw Error(ErrorCode::InvalidArgument, "quantization bits must be in [1, 16] or 32");
  }
  QuantPayload p;
  p.n = static_cast<std::uint32_t>(g.size());
  p.bits = static_cast<std::uint8_t>(bits);
  p.packed.assign(packed_bytes(p.n, bits), 0);
  if (bits == 32) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto w = std::bit_cast<std::uint32_t>(g[i]);
      for (int b = 0; b < 4; ++b) p.packed[4 * i + b] = static_cast<std::uint8_t>(w >> (8 * b));
    }
    return p;
  }

  float max_abs = 0.0f;
  for (float v : g) max_abs = std::max(max_abs, std::abs(v));
  p.max_abs = max_abs;
  const std::int64_t levels = levels_per_sign(bits);

  for (std::size_t i = 0; i < g.size(); ++i) {
    std::uint64_t code = 0;
    if (bits == 1) {
      code = g[i] >= 0.0f ? 1 : 0;
    } else if (max_abs > 0.0f) {
      const double scaled = static_cast<double>(g[i]) * static_cast<double>(levels) / max_abs;
      const auto q = std::clamp<std::int64_t>(std::llround(scaled), -levels, levels);
      code = static_cast<std::uint64_t>(q + levels);
    } else {
      code = static_cast<std::uint64_t>(levels);
    }
    const std::size_t bit0 = i * static_cast<std::size_t>(bits);
    for (int b = 0; b < bits; ++b) {
      if ((code >> b) & 1u) p.packed[(bit0 + b) / 8] |= static_cast<std::uint8_t>(1u << ((bit0 + b) % 8));
    }
  }
  return p;
}

std::vector<float> quant_decompress(const QuantPayload& p) {
  const int bits = p.bits;
  if (p.packed.size() != packed_bytes(p.n, bits)) throw Error(ErrorCode::MalformedPayload, "bad packed size");
  std::vector<float> out(p.n);
  if (bits == 32) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::uint32_t w = 0;
      for (int b = 0; b < 4; ++b) w |= static_cast<std::uint32_t>(p.packed[4 * i + b]) << (8 * b);
      out[i] = std::bit_cast<float>(w);
    }
    return out;
  }
  const std::int64_t levels = levels_per_sign(bits);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t code = 0;
    const std::size_t bit0 = i * static_cast<std::size_t>(bits);
    for (int b = 0; b < bits; ++b) {
      if ((p.packed[(bit0 + b) / 8] >> ((bit0 + b) % 8)) & 1u) code |= std::uint64_t{1} << b;
    }
    if (bits == 1) {
      out[i] = code ? p.max_abs : -p.max_abs;
    } else {
      const auto q = static_cast<std::int64_t>(code) - levels;
      out[i] = static_cast<float>(static_cast<double>(q) * static_cast<double>(p.max_abs) /
                                  static_cast<double>(levels));
    }
  }
  return out;
}

double quant_step(const QuantPayload& p) {
  if (p.bits == 32) return 0.0;
  if (p.bits == 1) return 2.0 * p.max_abs;
  return static_cast<double>(p.max_abs) / static_cast<double>(levels_per_sign(p.bits));
}

std::vector<std::uint8_t> encode(const QuantPayload& p) {
  std::vector<std::uint8_t> out;
  out.reserve(9 + p.packed.size());
  put32(out, p.n);
  out.push_back(p.bits);
  put32(out, std::bit_cast<std::uint32_t>(p.max_abs));
  out.insert(out.end(), p.packed.begin(), p.packed.end());
  return out;
}

QuantPayload decode_quant(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  QuantPayload p;
  p.n = get32(bytes, pos);
  if (bytes.size() < 9) throw Error(ErrorCode::MalformedPayload, "truncated quant payload");
  p.bits = bytes[pos++];
  p.max_abs = std::bit_cast<float>(get32(bytes, pos));
  if (bytes.size() - pos != packed_bytes(p.n, p.bits)) throw Error(ErrorCode::MalformedPayload, "bad quant length");
  p.packed.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return p;
}

ElementCounts element_counts(const QuantPayload& p) {
  ElementCounts c;
  if (p.bits == 32) {
    c.raw = p.n;
    return c;
  }
  c.coeff = (std::uint64_t{p.n} * p.bits + 31) / 32 + 1;
  return c;
}

}  // namespace gradestc::flsim
