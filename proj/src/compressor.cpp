#include "gradestc/compressor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gradestc {

namespace {

void check_input(const BasisState& state, const Matrix& g) {
  if (g.rows() != state.l) {
    throw Error(ErrorCode::DimensionMismatch, "gradient matrix has " + std::to_string(g.rows()) +
                                                  " rows, state expects l = " +
                                                  std::to_string(state.l));
  }
  if (g.cols() < 1) throw Error(ErrorCode::DimensionMismatch, "gradient matrix has no columns");
  if (!g.allFinite()) throw Error(ErrorCode::NonFinite, "gradient contains NaN/Inf");
}

CompressResult no_signal_result(const BasisState& state, const Matrix& g) {
  CompressResult r;
  r.new_vectors = Matrix(state.l, 0);
  r.coefficients = Matrix::Zero(state.k, g.cols());
  r.no_signal = true;
  return r;
}

std::uint64_t call_seed(const BasisState& state) {
  return derive_seed(state.seed, {state.round_counter});
}

// Projects candidates off span(M) and off each other (two Gram-Schmidt
// passes), dropping any that collapse. Returns the cleaned l x d' block.
Matrix orthogonalize_candidates(const Matrix& basis, const Matrix& raw) {
  Matrix out(raw.rows(), raw.cols());
  Eigen::Index kept = 0;
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    Vector v = raw.col(j);
    for (int pass = 0; pass < 2; ++pass) {
      v -= basis * (basis.transpose() * v);
      if (kept > 0) v -= out.leftCols(kept) * (out.leftCols(kept).transpose() * v);
    }
    const double norm = v.norm();
    if (norm < 0.5) continue;
    out.col(kept++) = v / norm;
  }
  out.conservativeResize(Eigen::NoChange, kept);
  Matrix unused(0, kept);
  canonicalize_signs(out, unused);
  return out;
}

void store_column(BasisState& state, Eigen::Index col, const Eigen::Ref<const Vector>& v) {
  state.m_basis.col(col) = v;
  state.wire_basis.col(col) = round_to_f32(v);
}

}  // namespace

const char* to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::Full: return "full";
    case AblationMode::FirstOnly: return "first_only";
    case AblationMode::ReplaceAll: return "replace_all";
    case AblationMode::FixedD: return "fixed_d";
  }
  return "full";
}

AblationMode parse_ablation_mode(const std::string& name) {
  if (name == "full") return AblationMode::Full;
  if (name == "first_only") return AblationMode::FirstOnly;
  if (name == "replace_all") return AblationMode::ReplaceAll;
  if (name == "fixed_d") return AblationMode::FixedD;
  throw Error(ErrorCode::InvalidArgument, "unknown ablation mode '" + name + "'");
}

BasisState::BasisState(const CompressorOptions& opts)
    : k(opts.k),
      l(opts.l),
      d(opts.k),
      alpha(opts.alpha),
      beta(opts.beta),
      oversample(opts.oversample),
      power_iters(opts.power_iters),
      seed(opts.seed),
      mode(opts.mode) {
  if (k < 1 || l < 1 || k > l) {
    throw Error(ErrorCode::RankTooLarge, "need 1 <= k <= l, got k = " + std::to_string(k) +
                                             ", l = " + std::to_string(l));
  }
}

Eigen::Index next_candidate_count(double alpha, double beta, Eigen::Index d_replaced,
                                  Eigen::Index k) {
  const double target = std::floor(alpha * static_cast<double>(d_replaced) + beta + 0.5);
  const double clamped = std::clamp(target, 1.0, static_cast<double>(k));
  return static_cast<Eigen::Index>(clamped);
}

Selection select_top_k(const Vector& scores, Eigen::Index incumbents, Eigen::Index k) {
  const Eigen::Index total = scores.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    const bool a_old = a < incumbents;
    const bool b_old = b < incumbents;
    if (a_old != b_old) return a_old;
    return a < b;
  });

  std::vector<bool> survives(static_cast<std::size_t>(total), false);
  for (Eigen::Index i = 0; i < std::min(k, total); ++i) survives[order[i]] = true;

  Selection sel;
  for (Eigen::Index i = 0; i < total; ++i) {
    if (i < incumbents && !survives[i]) sel.dropped_incumbents.push_back(i);
    if (i >= incumbents && survives[i]) sel.kept_candidates.push_back(i - incumbents);
  }
  return sel;
}

CompressResult init_basis(BasisState& state, const Matrix& g) {
  check_input(state, g);
  if (state.k > std::min(g.rows(), g.cols())) {
    throw Error(ErrorCode::RankTooLarge, "k = " + std::to_string(state.k) +
                                             " exceeds min(l, m) = " +
                                             std::to_string(std::min(g.rows(), g.cols())));
  }
  if (g.norm() == 0.0) {
    auto r = no_signal_result(state, g);
    ++state.round_counter;
    return r;
  }

  const auto svd = randomized_svd(g, state.k, state.oversample, state.power_iters,
                                  call_seed(state));
  state.m_basis = svd.u;
  state.wire_basis = round_to_f32(svd.u);
  state.d = state.k;
  state.initialized = true;

  CompressResult r;
  r.replace_indices.resize(static_cast<std::size_t>(state.k));
  std::iota(r.replace_indices.begin(), r.replace_indices.end(), std::uint32_t{1});
  r.new_vectors = state.m_basis;
  r.coefficients = svd.sigma.asDiagonal() * svd.vt;
  r.d_used = state.k;
  ++state.round_counter;
  return r;
}

CompressResult compress(BasisState& state, const Matrix& g) {
  if (!state.initialized || state.mode == AblationMode::ReplaceAll) return init_basis(state, g);
  check_input(state, g);

  const double g_norm = g.norm();
  if (g_norm == 0.0) {
    auto r = no_signal_result(state, g);
    ++state.round_counter;
    return r;
  }

  CompressResult r;
  Matrix a = state.m_basis.transpose() * g;

  if (state.mode == AblationMode::FirstOnly) {
    r.new_vectors = Matrix(state.l, 0);
    r.coefficients = std::move(a);
    r.d_used = 0;
    ++state.round_counter;
    return r;
  }

  const Eigen::Index d = state.mode == AblationMode::FixedD ? state.k : state.d;
  const Matrix e = g - state.m_basis * a;

  Matrix candidates(state.l, 0);
  if (e.norm() > kResidualFloor * g_norm) {
    const Eigen::Index probe = std::min({d, e.rows(), e.cols()});
    const auto svd = randomized_svd(e, probe, state.oversample, state.power_iters,
                                    call_seed(state));
    candidates = orthogonalize_candidates(state.m_basis, svd.u.leftCols(svd.nonzero_count()));
  }
  const Matrix a_err = candidates.transpose() * g;

  Vector scores(state.k + candidates.cols());
  scores.head(state.k) = a.rowwise().squaredNorm();
  scores.tail(candidates.cols()) = a_err.rowwise().squaredNorm();
  const Selection sel = select_top_k(scores, state.k, state.k);

  const auto replaced = static_cast<Eigen::Index>(sel.dropped_incumbents.size());
  r.new_vectors.resize(state.l, replaced);
  for (Eigen::Index i = 0; i < replaced; ++i) {
    const Eigen::Index slot = sel.dropped_incumbents[static_cast<std::size_t>(i)];
    const Eigen::Index cand = sel.kept_candidates[static_cast<std::size_t>(i)];
    store_column(state, slot, candidates.col(cand));
    a.row(slot) = a_err.row(cand);
    r.new_vectors.col(i) = candidates.col(cand);
    r.replace_indices.push_back(static_cast<std::uint32_t>(slot + 1));
  }
  r.coefficients = std::move(a);
  r.d_used = d;

  state.d = state.mode == AblationMode::FixedD
                ? state.k
                : next_candidate_count(state.alpha, state.beta, replaced, state.k);
  ++state.round_counter;
  return r;
}

void set_ablation_mode(BasisState& state, AblationMode mode) {
  if (state.initialized || state.round_counter > 0) {
    throw Error(ErrorCode::ModeChangeAfterStart, "ablation mode must be set before training");
  }
  state.mode = mode;
  if (mode == AblationMode::FixedD) state.d = state.k;
}

Matrix wire_reconstruction(const BasisState& state, const CompressResult& result) {
  if (!state.initialized) return Matrix::Zero(state.l, result.coefficients.cols());
  return reconstruct(state.wire_basis, round_to_f32(result.coefficients));
}

}  // namespace gradestc
