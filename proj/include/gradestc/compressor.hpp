#pragma once

// Client-side GradESTC compressor. One BasisState per (client, layer) stream.
//
// First call: the basis M is the top-k left singular vectors of the segmented
// gradient G and every column is shipped. Later calls: A = M^T G, candidate
// directions come from the SVD of the fitting error E = G - M A, and rows of
// [A; A^e] compete on squared norm. Candidates that make the top k replace the
// incumbents that drop out; only those columns go on the wire.

#include <cstdint>
#include <string>
#include <vector>

#include "gradestc/linalg.hpp"

namespace gradestc {

enum class AblationMode {
  Full,        // incremental replacement with dynamic d
  FirstOnly,   // basis frozen after the first call
  ReplaceAll,  // fresh top-k SVD every call, all k columns shipped
  FixedD,      // incremental replacement with d pinned to k
};

/// ||E|| at or below this fraction of ||G|| is roundoff from forming G - M A
/// and yields no candidates.
inline constexpr double kResidualFloor = 1e-12;

const char* to_string(AblationMode mode);
AblationMode parse_ablation_mode(const std::string& name);

struct CompressorOptions {
  Eigen::Index k = 8;
  Eigen::Index l = 1;
  double alpha = 1.3;
  double beta = 1.0;
  Eigen::Index oversample = 8;
  int power_iters = 2;
  std::uint64_t seed = 0;
  AblationMode mode = AblationMode::Full;
};

struct BasisState {
  Matrix m_basis;     // l x k, orthonormal columns, compute precision
  Matrix wire_basis;  // m_basis rounded through f32 column by column; mirrors the server
  Eigen::Index k = 0;
  Eigen::Index l = 0;
  Eigen::Index d = 0;  // candidate count for the next call
  double alpha = 1.3;
  double beta = 1.0;
  Eigen::Index oversample = 8;
  int power_iters = 2;
  std::uint64_t seed = 0;
  AblationMode mode = AblationMode::Full;
  bool initialized = false;
  std::uint64_t round_counter = 0;

  explicit BasisState(const CompressorOptions& opts);
};

struct CompressResult {
  std::vector<std::uint32_t> replace_indices;  // P, 1-based, strictly increasing
  Matrix new_vectors;                          // l x |P|, column i replaces replace_indices[i]
  Matrix coefficients;                         // k x m, post-replacement
  Eigen::Index d_used = 0;                     // candidate directions probed this call
  bool no_signal = false;                      // G was identically zero

  Eigen::Index d_replaced() const { return static_cast<Eigen::Index>(replace_indices.size()); }
};

/// First-call path. Throws RankTooLarge when k > min(l, m).
CompressResult init_basis(BasisState& state, const Matrix& g);

/// Compresses one segmented gradient and advances the state.
CompressResult compress(BasisState& state, const Matrix& g);

/// Switches ablation variant. Only legal before the first compress call.
void set_ablation_mode(BasisState& state, AblationMode mode);

/// M*A as the server will see it: both factors rounded through f32.
Matrix wire_reconstruction(const BasisState& state, const CompressResult& result);

/// Next candidate count: clamp(round_half_up(alpha * d_r + beta), 1, k).
Eigen::Index next_candidate_count(double alpha, double beta, Eigen::Index d_replaced,
                                  Eigen::Index k);

/// Survivor selection over contribution scores. The first `incumbents` scores
/// belong to existing basis columns, the rest to candidates. Equal scores
/// prefer incumbents, then lower index. Returns (P, selected candidate
/// positions), both 0-based and ascending.
struct Selection {
  std::vector<Eigen::Index> dropped_incumbents;
  std::vector<Eigen::Index> kept_candidates;
};
Selection select_top_k(const Vector& scores, Eigen::Index incumbents, Eigen::Index k);

}  // namespace gradestc
