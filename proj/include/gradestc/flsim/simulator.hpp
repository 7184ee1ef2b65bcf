#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gradestc/compressor.hpp"
#include "gradestc/decompressor.hpp"
#include "gradestc/flsim/config.hpp"
#include "gradestc/flsim/data.hpp"
#include "gradestc/flsim/model.hpp"
#include "gradestc/metrics.hpp"
#include "gradestc/wire.hpp"

namespace gradestc::flsim {

struct LayerInfo {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t n = 0;
  CodecSpec codec;
  std::size_t l = 0;  // GradESTC only
  std::size_t m = 0;
  std::size_t k = 0;

  bool compressed() const { return !std::holds_alternative<NoneCodec>(codec); }
};

struct RoundReport {
  std::uint64_t round = 0;
  double accuracy = 0.0;
  double loss = 0.0;
  std::vector<std::uint32_t> participants;
  std::uint64_t uplink_bytes = 0;
  std::uint64_t cum_bytes = 0;
  std::uint64_t compressed_bytes = 0;           // measured, layers with a codec other than none
  std::uint64_t compressed_baseline_bytes = 0;  // 4 n per participant on the same layers
  std::uint64_t sum_d = 0;                      // candidate directions probed this round

  bool operator==(const RoundReport&) const = default;
};

struct Summary {
  std::size_t rounds = 0;
  double best_accuracy = 0.0;
  double final_accuracy = 0.0;
  double accuracy_threshold = 0.0;
  std::optional<std::uint64_t> bytes_at_threshold;
  std::uint64_t total_bytes = 0;
  std::uint64_t compressed_bytes = 0;
  std::uint64_t compressed_baseline_bytes = 0;
  std::uint64_t nominal_cost_elements = 0;
  std::uint64_t sum_d = 0;
};

nlohmann::json to_json(const Summary& s, const std::vector<LayerInfo>& layers);

TrainTest load_datasets(const DatasetSpec& spec);

class Simulator {
 public:
  explicit Simulator(SimConfig cfg);
  Simulator(SimConfig cfg, TrainTest data);

  /// Runs the next global round (1-based).
  RoundReport run_round();
  /// Runs the remaining rounds up to cfg.rounds.
  const std::vector<RoundReport>& run();

  std::vector<std::uint32_t> select_clients(std::uint64_t round) const;

  const SimConfig& config() const { return cfg_; }
  const Model<float>& model() const { return model_; }
  const std::vector<LayerInfo>& layers() const { return layers_; }
  const std::vector<std::vector<std::size_t>>& partition() const { return partition_; }
  const TrainTest& data() const { return data_; }
  const CommLedger& ledger() const { return ledger_; }
  const GradientTrace& trace() const { return trace_; }
  const std::vector<ErrorStats>& error_stats() const { return error_stats_; }
  const std::vector<RoundReport>& reports() const { return reports_; }
  /// Client-side compressor state, empty before the stream's first payload.
  const std::optional<BasisState>& basis_state(std::uint32_t client, std::size_t layer) const;
  const MirrorState& mirror_state(std::uint32_t client, std::size_t layer) const;
  Summary summary() const;

 private:
  struct Stream {
    std::optional<BasisState> basis;
    std::optional<MirrorState> mirror;
    std::uint64_t seq = 0;
  };

  struct Uplinked {
    std::vector<float> reconstruction;
    std::uint64_t bytes = 0;
    std::uint64_t d_used = 0;
    Vector error;  // exact fitting error in segment space (GradESTC only)
    double g_sq = 0.0;
    double chi_sq = 1.0;
  };

  void setup();
  Uplinked uplink(std::uint64_t round, std::uint32_t client, std::size_t layer,
                  const Vec<float>& pseudo);

  SimConfig cfg_;
  TrainTest data_;
  Model<float> model_;
  std::vector<LayerInfo> layers_;
  std::vector<std::vector<std::size_t>> partition_;
  std::vector<Dataset> client_data_;
  std::vector<std::vector<Stream>> streams_;  // [client][layer]
  CommLedger ledger_;
  GradientTrace trace_;
  std::vector<ErrorStats> error_stats_;
  std::vector<RoundReport> reports_;
  std::uint64_t cum_bytes_ = 0;
};

}  // namespace gradestc::flsim
