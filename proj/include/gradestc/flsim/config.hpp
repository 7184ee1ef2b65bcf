#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "gradestc/compressor.hpp"
#include "gradestc/flsim/data.hpp"
#include "gradestc/flsim/model.hpp"

namespace gradestc::flsim {

struct NoneCodec {};

struct GradestcCodec {
  std::size_t k = 8;
  std::size_t l = 0;  // 0 = default_segment_length(shape)
  double alpha = 1.3;
  double beta = 1.0;
  AblationMode mode = AblationMode::Full;
};

struct TopkCodec {
  double fraction = 0.1;
};

struct QuantCodec {
  int bits = 8;
};

using CodecSpec = std::variant<NoneCodec, GradestcCodec, TopkCodec, QuantCodec>;

std::string codec_name(const CodecSpec& codec);

enum class DatasetKind { GaussianMixture, Csv, Idx };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::GaussianMixture;
  GaussianMixtureSpec mixture;
  std::string train_path;         // csv / idx images
  std::string test_path;
  std::string train_labels_path;  // idx only
  std::string test_labels_path;
};

struct TraceSpec {
  bool enabled = false;
  std::uint32_t client = 0;
  std::size_t window = 64;
};

struct SimConfig {
  std::size_t n_clients = 10;
  double participation_fraction = 1.0;
  std::size_t rounds = 100;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  PartitionSpec partition;
  DatasetSpec dataset;
  ModelSpec model;
  /// Layer name -> codec. The key "default" applies to every layer not listed.
  std::map<std::string, CodecSpec> compressors;
  bool sample_weighting = false;  // weight clients by sample count instead of 1/N
  double accuracy_threshold = 0.0;
  bool error_stats = true;
  TraceSpec trace;
};

SimConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const SimConfig& cfg);
SimConfig load_config(const std::string& path);

/// Expands "default" and checks that every layer has exactly one codec and no
/// unknown layer names appear. Throws BadConfig.
std::map<std::string, CodecSpec> resolve_assignment(const SimConfig& cfg,
                                                    const std::vector<std::string>& layers);

}  // namespace gradestc::flsim
