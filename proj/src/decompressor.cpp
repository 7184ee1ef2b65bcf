#include "gradestc/decompressor.hpp"

#include <algorithm>

namespace gradestc {

MirrorState::MirrorState(std::string name, std::vector<std::size_t> shape, std::size_t l)
    : spec(SegmentSpec::make(element_count(shape), l)),
      layer_shape(std::move(shape)),
      layer_name(std::move(name)) {}

namespace {

bool is_full_replacement(const UplinkPayload& p) {
  if (p.replace_indices.size() != p.k) return false;
  for (std::uint32_t i = 0; i < p.k; ++i) {
    if (p.replace_indices[i] != i + 1) return false;
  }
  return true;
}

}  // namespace

GradientTensor decompress(MirrorState& state, const UplinkPayload& payload) {
  payload.validate();
  if (payload.seq != state.next_seq) {
    throw Error(ErrorCode::SequenceMismatch,
                state.layer_name + ": expected seq " + std::to_string(state.next_seq) + ", got " +
                    std::to_string(payload.seq));
  }
  if (payload.l != state.spec.l || payload.m != state.spec.m) {
    throw Error(ErrorCode::LengthMismatch, state.layer_name + ": payload l/m do not match layer");
  }

  if (!state.initialized) {
    if (!is_full_replacement(payload)) {
      const bool silent = std::all_of(payload.coefficients.begin(), payload.coefficients.end(),
                                      [](float v) { return v == 0.0f; });
      if (!payload.replace_indices.empty() || !silent) {
        throw Error(ErrorCode::UninitializedStream,
                    state.layer_name + ": coefficients before the first full basis");
      }
      ++state.next_seq;
      return restore(Matrix::Zero(state.spec.l, state.spec.m), state.spec, state.layer_shape,
                     state.layer_name);
    }
    state.m_basis = Matrix::Zero(payload.l, payload.k);
  } else if (payload.k != state.m_basis.cols()) {
    throw Error(ErrorCode::LengthMismatch, state.layer_name + ": payload k changed mid-stream");
  }

  std::uint32_t previous = 0;
  for (std::size_t i = 0; i < payload.replace_indices.size(); ++i) {
    const auto idx = payload.replace_indices[i];
    if (idx < 1 || idx > payload.k || idx <= previous) {
      throw Error(ErrorCode::IndexOutOfRange,
                  state.layer_name + ": bad replacement index " + std::to_string(idx));
    }
    previous = idx;
    for (std::uint32_t r = 0; r < payload.l; ++r) {
      state.m_basis(r, idx - 1) = static_cast<double>(payload.new_vectors[i * payload.l + r]);
    }
  }
  state.initialized = true;
  ++state.next_seq;

  if (state.check_orthonormality && orthonormality_defect(state.m_basis) > 1e-5) {
    throw Error(ErrorCode::MalformedPayload, state.layer_name + ": mirror basis lost orthonormality");
  }

  const Matrix g_hat = reconstruct(state.m_basis, coefficient_matrix(payload));
  return restore(g_hat, state.spec, state.layer_shape, state.layer_name);
}

}  // namespace gradestc
