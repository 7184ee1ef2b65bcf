#include "gradestc/flsim/config.hpp"

#include <fstream>

namespace gradestc::flsim {

using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

CodecSpec codec_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "none") return NoneCodec{};
  if (kind == "gradestc") {
    GradestcCodec c;
    c.k = get_or<std::size_t>(j, "k", c.k);
    c.l = get_or<std::size_t>(j, "l", c.l);
    c.alpha = get_or<double>(j, "alpha", c.alpha);
    c.beta = get_or<double>(j, "beta", c.beta);
    c.mode = parse_ablation_mode(get_or<std::string>(j, "mode", "full"));
    return c;
  }
  if (kind == "topk") {
    TopkCodec c;
    c.fraction = get_or<double>(j, "fraction", c.fraction);
    return c;
  }
  if (kind == "quant") {
    QuantCodec c;
    c.bits = get_or<int>(j, "bits", c.bits);
    return c;
  }
  throw Error(ErrorCode::BadConfig, "unknown codec kind '" + kind + "'");
}

json codec_to_json(const CodecSpec& codec) {
  return std::visit(
      [](const auto& c) -> json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, NoneCodec>) {
          return {{"kind", "none"}};
        } else if constexpr (std::is_same_v<T, GradestcCodec>) {
          return {{"kind", "gradestc"}, {"k", c.k}, {"l", c.l}, {"alpha", c.alpha},
                  {"beta", c.beta}, {"mode", to_string(c.mode)}};
        } else if constexpr (std::is_same_v<T, TopkCodec>) {
          return {{"kind", "topk"}, {"fraction", c.fraction}};
        } else {
          return {{"kind", "quant"}, {"bits", c.bits}};
        }
      },
      codec);
}

ModelSpec model_from_json(const json& j) {
  ModelSpec m;
  const auto variant = j.at("variant").get<std::string>();
  if (variant == "logreg") {
    m.kind = ModelKind::LogReg;
  } else if (variant == "mlp") {
    m.kind = ModelKind::Mlp;
  } else if (variant == "tinyconv") {
    m.kind = ModelKind::TinyConv;
  } else {
    throw Error(ErrorCode::BadConfig, "unknown model variant '" + variant + "'");
  }
  m.features = get_or<std::size_t>(j, "features", 0);
  m.hidden = get_or<std::size_t>(j, "hidden", 0);
  m.classes = get_or<std::size_t>(j, "classes", 0);
  m.in_channels = get_or<std::size_t>(j, "in_channels", 0);
  m.kernels = get_or<std::size_t>(j, "kernels", 0);
  m.init_seed = get_or<std::uint64_t>(j, "init_seed", 0);
  m.validate();
  return m;
}

json model_to_json(const ModelSpec& m) {
  static const char* names[] = {"logreg", "mlp", "tinyconv"};
  return {{"variant", names[static_cast<int>(m.kind)]}, {"features", m.features},
          {"hidden", m.hidden}, {"classes", m.classes}, {"in_channels", m.in_channels},
          {"kernels", m.kernels}, {"init_seed", m.init_seed}};
}

DatasetSpec dataset_from_json(const json& j) {
  DatasetSpec d;
  const auto kind = get_or<std::string>(j, "kind", "gaussian_mixture");
  if (kind == "gaussian_mixture") {
    d.kind = DatasetKind::GaussianMixture;
    auto& g = d.mixture;
    g.classes = get_or<std::size_t>(j, "classes", g.classes);
    g.features = get_or<std::size_t>(j, "features", g.features);
    g.clusters_per_class = get_or<std::size_t>(j, "clusters_per_class", g.clusters_per_class);
    g.train_samples = get_or<std::size_t>(j, "train_samples", g.train_samples);
    g.test_samples = get_or<std::size_t>(j, "test_samples", g.test_samples);
    g.separation = get_or<double>(j, "separation", g.separation);
    g.noise = get_or<double>(j, "noise", g.noise);
    g.seed = get_or<std::uint64_t>(j, "seed", g.seed);
  } else if (kind == "csv") {
    d.kind = DatasetKind::Csv;
    d.train_path = j.at("train").get<std::string>();
    d.test_path = j.at("test").get<std::string>();
  } else if (kind == "idx") {
    d.kind = DatasetKind::Idx;
    d.train_path = j.at("train_images").get<std::string>();
    d.train_labels_path = j.at("train_labels").get<std::string>();
    d.test_path = j.at("test_images").get<std::string>();
    d.test_labels_path = j.at("test_labels").get<std::string>();
  } else {
    throw Error(ErrorCode::BadConfig, "unknown dataset kind '" + kind + "'");
  }
  return d;
}

json dataset_to_json(const DatasetSpec& d) {
  switch (d.kind) {
    case DatasetKind::GaussianMixture: {
      const auto& g = d.mixture;
      return {{"kind", "gaussian_mixture"}, {"classes", g.classes}, {"features", g.features},
              {"clusters_per_class", g.clusters_per_class}, {"train_samples", g.train_samples},
              {"test_samples", g.test_samples}, {"separation", g.separation},
              {"noise", g.noise}, {"seed", g.seed}};
    }
    case DatasetKind::Csv:
      return {{"kind", "csv"}, {"train", d.train_path}, {"test", d.test_path}};
    case DatasetKind::Idx:
      return {{"kind", "idx"}, {"train_images", d.train_path}, {"train_labels", d.train_labels_path},
              {"test_images", d.test_path}, {"test_labels", d.test_labels_path}};
  }
  return {};
}

}  // namespace

std::string codec_name(const CodecSpec& codec) {
  return codec_to_json(codec).at("kind").get<std::string>();
}

SimConfig config_from_json(const json& j) {
  try {
    SimConfig c;
    c.n_clients = get_or<std::size_t>(j, "n_clients", c.n_clients);
    c.participation_fraction = get_or<double>(j, "participation_fraction", c.participation_fraction);
    c.rounds = get_or<std::size_t>(j, "rounds", c.rounds);
    c.local_epochs = get_or<std::size_t>(j, "local_epochs", c.local_epochs);
    c.batch_size = get_or<std::size_t>(j, "batch_size", c.batch_size);
    c.learning_rate = get_or<double>(j, "learning_rate", c.learning_rate);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    c.sample_weighting = get_or<std::string>(j, "weighting", "uniform") == "samples";
    c.accuracy_threshold = get_or<double>(j, "accuracy_threshold", c.accuracy_threshold);
    c.error_stats = get_or<bool>(j, "error_stats", c.error_stats);

    if (j.contains("partition")) {
      const auto& p = j.at("partition");
      const auto kind = p.at("kind").get<std::string>();
      if (kind == "iid") {
        c.partition.kind = PartitionKind::Iid;
      } else if (kind == "dirichlet") {
        c.partition.kind = PartitionKind::Dirichlet;
        c.partition.alpha = p.at("alpha").get<double>();
        if (!(c.partition.alpha > 0.0)) throw Error(ErrorCode::BadConfig, "dirichlet alpha must be > 0");
      } else {
        throw Error(ErrorCode::BadConfig, "unknown partition kind '" + kind + "'");
      }
    }
    if (j.contains("dataset")) c.dataset = dataset_from_json(j.at("dataset"));
    c.model = model_from_json(j.at("model"));
    if (j.contains("compressors")) {
      for (const auto& [layer, spec] : j.at("compressors").items()) {
        c.compressors[layer] = codec_from_json(spec);
      }
    }
    if (j.contains("trace")) {
      const auto& t = j.at("trace");
      c.trace.enabled = get_or<bool>(t, "enabled", true);
      c.trace.client = get_or<std::uint32_t>(t, "client", 0);
      c.trace.window = get_or<std::size_t>(t, "window", c.trace.window);
    }

    if (c.n_clients == 0 || c.rounds == 0 || c.batch_size == 0 || c.local_epochs == 0) {
      throw Error(ErrorCode::BadConfig, "n_clients, rounds, batch_size, local_epochs must be >= 1");
    }
    if (!(c.participation_fraction > 0.0) || c.participation_fraction > 1.0) {
      throw Error(ErrorCode::BadConfig, "participation_fraction must be in (0, 1]");
    }
    if (!(c.learning_rate > 0.0)) throw Error(ErrorCode::BadConfig, "learning_rate must be > 0");
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadConfig, e.what());
  }
}

json config_to_json(const SimConfig& c) {
  json comps = json::object();
  for (const auto& [layer, codec] : c.compressors) comps[layer] = codec_to_json(codec);
  json partition = c.partition.kind == PartitionKind::Iid
                       ? json{{"kind", "iid"}}
                       : json{{"kind", "dirichlet"}, {"alpha", c.partition.alpha}};
  return {{"n_clients", c.n_clients},
          {"participation_fraction", c.participation_fraction},
          {"rounds", c.rounds},
          {"local_epochs", c.local_epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"weighting", c.sample_weighting ? "samples" : "uniform"},
          {"accuracy_threshold", c.accuracy_threshold},
          {"error_stats", c.error_stats},
          {"partition", partition},
          {"dataset", dataset_to_json(c.dataset)},
          {"model", model_to_json(c.model)},
          {"compressors", comps},
          {"trace", {{"enabled", c.trace.enabled}, {"client", c.trace.client}, {"window", c.trace.window}}}};
}

SimConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open config " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadConfig, path + ": " + e.what());
  }
  return config_from_json(j);
}

std::map<std::string, CodecSpec> resolve_assignment(const SimConfig& cfg,
                                                    const std::vector<std::string>& layers) {
  std::map<std::string, CodecSpec> out;
  const auto fallback = cfg.compressors.find("default");
  for (const auto& [name, codec] : cfg.compressors) {
    if (name == "default") continue;
    if (std::find(layers.begin(), layers.end(), name) == layers.end()) {
      throw Error(ErrorCode::BadConfig, "compressor assigned to unknown layer '" + name + "'");
    }
  }
  for (const auto& layer : layers) {
    if (auto it = cfg.compressors.find(layer); it != cfg.compressors.end()) {
      out[layer] = it->second;
    } else if (fallback != cfg.compressors.end()) {
      out[layer] = fallback->second;
    } else {
      throw Error(ErrorCode::BadConfig, "layer '" + layer + "' has no compressor assignment");
    }
  }
  return out;
}

}  // namespace gradestc::flsim
