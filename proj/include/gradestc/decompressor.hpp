#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gradestc/reshape.hpp"
#include "gradestc/wire.hpp"

namespace gradestc {

/// Server-side copy of one client's basis for one layer.
struct MirrorState {
  Matrix m_basis;  // l x k; holds f32-representable values only
  SegmentSpec spec;
  std::vector<std::size_t> layer_shape;
  std::string layer_name;
  bool initialized = false;
  std::uint64_t next_seq = 0;
  bool check_orthonormality = false;  // debug: verify M after every payload

  MirrorState(std::string name, std::vector<std::size_t> shape, std::size_t l);
};

/// Applies the replacements in `payload`, reconstructs M*A and restores the
/// layer tensor. Payloads for one stream must arrive in sequence order.
GradientTensor decompress(MirrorState& state, const UplinkPayload& payload);

}  // namespace gradestc
