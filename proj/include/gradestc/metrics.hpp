#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gradestc/linalg.hpp"

namespace gradestc {

/// Bounded per-(client, layer) history of flattened pseudo-gradients.
class GradientTrace {
 public:
  struct Entry {
    std::uint64_t round;
    std::vector<float> values;
  };
  using Key = std::pair<std::uint32_t, std::string>;

  explicit GradientTrace(std::size_t window = 64) : window_(window) {}

  /// Rounds must be strictly increasing per stream; the oldest entry is
  /// evicted once the window is full.
  void append(std::uint32_t client, const std::string& layer, std::uint64_t round,
              std::vector<float> values);

  const std::deque<Entry>& stream(std::uint32_t client, const std::string& layer) const;
  const std::vector<float>* find(std::uint32_t client, const std::string& layer,
                                 std::uint64_t round) const;
  std::vector<Key> keys() const;
  std::size_t window() const { return window_; }

  /// One CSV per stream: `<dir>/client<c>__<layer>.csv`, rows "round,v0,v1,...".
  void save(const std::string& dir) const;
  static GradientTrace load(const std::string& dir, std::size_t window = 1 << 20);

 private:
  std::size_t window_;
  std::map<Key, std::deque<Entry>> streams_;
};

struct Cosine {
  double value = 0.0;
  bool zero_vector = false;
};

/// cos(a, b); a zero operand yields 0 with the flag set.
Cosine cosine_similarity(std::span<const float> a, std::span<const float> b);

/// rows = traced rounds (ascending), one column per anchor round.
struct Heatmap {
  std::string layer;
  std::vector<std::uint64_t> rounds;
  std::vector<std::uint64_t> anchors;
  Matrix similarity;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> zero_pairs;

  void write_csv(std::ostream& os) const;
};

/// Per layer of one client's trace. Throws InvalidArgument when an anchor
/// round is missing from the trace.
std::vector<Heatmap> cosine_heatmap(const GradientTrace& trace, std::uint32_t client,
                                    std::span<const std::uint64_t> anchors);

/// ||M^T G|| / ||G||, defined as 1 for G = 0.
double subspace_concentration(const Matrix& g, const Matrix& m_basis);

struct ErrorCorrelation {
  double mean_err = 0.0;     // (1/N) sum ||e_i||^2
  double avg_err = 0.0;      // ||(1/N) sum e_i||^2
  double tau_hat = 0.0;      // max_{i != j} <e_i, e_j>
  double expansion = 0.0;    // (1/N^2)(sum ||e_i||^2 + sum_{i != j} <e_i, e_j>)
  double identity_gap = 0.0; // |avg_err - expansion| / max(avg_err, mean_err, tiny)
};

/// Sample estimates for one round; requires at least two clients.
ErrorCorrelation error_correlation(const std::vector<Vector>& errors);

/// One layer's error statistics for one round.
struct ErrorStats {
  std::uint64_t round = 0;
  std::string layer;
  std::size_t clients = 0;
  double mean_err_sq = 0.0;
  double avg_err_sq = 0.0;
  double mean_chi_sq = 0.0;
  double min_chi_sq = 1.0;
  double tau_hat = 0.0;
  double rho_sq_hat = 0.0;
  double max_identity_gap = 0.0;  // worst |  ||e||^2 - (1 - chi^2)||G||^2 | / ||G||^2
  double expansion_gap = 0.0;     // ErrorCorrelation::identity_gap
};

std::string to_json(const std::vector<ErrorStats>& stats);

/// Mean cosine similarity within [first, last]: lag-1 pairs vs pairs at least
/// far_lag rounds apart.
struct TemporalCorrelation {
  double adjacent_mean = 0.0;
  double distant_mean = 0.0;
  std::size_t adjacent_pairs = 0;
  std::size_t distant_pairs = 0;
};

TemporalCorrelation temporal_correlation(const GradientTrace& trace, std::uint32_t client,
                                         const std::string& layer, std::uint64_t first,
                                         std::uint64_t last, std::uint64_t far_lag);

}  // namespace gradestc
