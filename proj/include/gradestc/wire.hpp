#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gradestc/compressor.hpp"
#include "gradestc/reshape.hpp"

namespace gradestc {

inline constexpr std::uint16_t kWireVersion = 1;
/// magic(4) version(2) stream(8) seq(8) k(4) l(4) m(4) |P|(4)
inline constexpr std::size_t kHeaderBytes = 38;
/// u64 length prefix of the raw block, counted as header.
inline constexpr std::size_t kRawLengthBytes = 8;

/// Folds (client, layer) into the 64-bit stream id carried on the wire.
std::uint64_t stream_key(std::uint32_t client, const std::string& layer);

/// Transmitted triple (P, new vectors, A) plus an optional uncompressed block.
/// All floats are IEEE binary32.
struct UplinkPayload {
  std::uint64_t stream = 0;
  std::uint64_t seq = 0;
  std::uint32_t k = 0;
  std::uint32_t l = 0;
  std::uint32_t m = 0;
  std::vector<std::uint32_t> replace_indices;  // 1-based
  std::vector<float> new_vectors;              // |P| vectors of l floats, back to back
  std::vector<float> coefficients;             // k x m, row-major
  std::vector<float> raw_params;

  bool operator==(const UplinkPayload&) const = default;

  std::size_t replaced() const { return replace_indices.size(); }
  /// Throws MalformedPayload if field sizes disagree with k, l, m.
  void validate() const;
};

UplinkPayload make_payload(std::uint64_t stream, std::uint64_t seq, const CompressResult& result);
UplinkPayload make_raw_payload(std::uint64_t stream, std::uint64_t seq, std::span<const float> raw);

/// Coefficients as a double matrix (k x m).
Matrix coefficient_matrix(const UplinkPayload& p);

std::size_t encoded_size(const UplinkPayload& p);
std::vector<std::uint8_t> encode(const UplinkPayload& p);
UplinkPayload decode(std::span<const std::uint8_t> bytes);

struct ElementCounts {
  std::uint64_t coeff = 0;
  std::uint64_t basis = 0;
  std::uint64_t index = 0;
  std::uint64_t raw = 0;

  std::uint64_t total() const { return coeff + basis + index + raw; }
};

/// Element counts actually transmitted: k*m + |P|*l + |P| (+ raw).
ElementCounts element_counts(const UplinkPayload& p);

/// Nominal cost k*m + |P|*l + k (+ raw), which charges k index slots.
std::uint64_t nominal_cost(const UplinkPayload& p);

struct LedgerRecord {
  std::uint64_t round = 0;
  std::uint32_t client = 0;
  std::string layer;
  ElementCounts elements;
  std::uint64_t nominal_elements = 0;
  std::uint64_t bytes = 0;
};

/// Per-(round, client, layer) uplink accounting.
class CommLedger {
 public:
  void record(std::uint64_t round, std::uint32_t client, const std::string& layer,
              const UplinkPayload& payload);
  /// Non-GradESTC codecs: explicit element and byte counts.
  void record(std::uint64_t round, std::uint32_t client, const std::string& layer,
              const ElementCounts& elements, std::uint64_t bytes);

  const std::vector<LedgerRecord>& records() const { return records_; }
  const ElementCounts& totals() const { return totals_; }
  std::uint64_t total_bytes() const { return total_bytes_; }
  std::uint64_t total_nominal_elements() const { return total_nominal_; }

  std::uint64_t bytes_for_round(std::uint64_t round) const;
  std::uint64_t bytes_for_layer(const std::string& layer) const;

  void write_csv(std::ostream& os) const;

 private:
  void append(LedgerRecord rec);

  std::vector<LedgerRecord> records_;
  ElementCounts totals_;
  std::uint64_t total_bytes_ = 0;
  std::uint64_t total_nominal_ = 0;
};

}  // namespace gradestc
