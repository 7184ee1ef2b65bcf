// gradestc: run federated simulations, ablations, baselines and trace analysis.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gradestc/flsim/simulator.hpp"
#include "gradestc/metrics.hpp"

namespace fs = std::filesystem;
using namespace gradestc;
using namespace gradestc::flsim;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return os;
}

void write_outputs(const Simulator& sim, const fs::path& dir) {
  fs::create_directories(dir);
  {
    auto os = open_out(dir / "rounds.csv");
    os << "round,accuracy,loss,uplink_bytes,cum_bytes\n";
    char buf[64];
    for (const auto& r : sim.reports()) {
      std::snprintf(buf, sizeof buf, "%.6f,%.6f", r.accuracy, r.loss);
      os << r.round << ',' << buf << ',' << r.uplink_bytes << ',' << r.cum_bytes << '\n';
    }
  }
  {
    auto os = open_out(dir / "ledger.csv");
    sim.ledger().write_csv(os);
  }
  open_out(dir / "summary.json") << to_json(sim.summary(), sim.layers()).dump(2) << '\n';
  if (sim.config().error_stats) open_out(dir / "error_stats.json") << to_json(sim.error_stats()) << '\n';
  if (sim.config().trace.enabled) sim.trace().save((dir / "trace").string());
  open_out(dir / "config.json") << config_to_json(sim.config()).dump(2) << '\n';
}

void print_row(const std::string& label, const Simulator& sim) {
  const auto s = sim.summary();
  std::printf("%-14s final_acc=%.4f best_acc=%.4f uplink_bytes=%llu compressed_bytes=%llu "
              "ratio=%.4f sum_d=%llu\n",
              label.c_str(), s.final_accuracy, s.best_accuracy,
              static_cast<unsigned long long>(s.total_bytes),
              static_cast<unsigned long long>(s.compressed_bytes),
              s.compressed_baseline_bytes
                  ? static_cast<double>(s.compressed_bytes) / static_cast<double>(s.compressed_baseline_bytes)
                  : 1.0,
              static_cast<unsigned long long>(s.sum_d));
}

Simulator run_one(const SimConfig& cfg, const TrainTest& data) {
  Simulator sim(cfg, data);
  sim.run();
  return sim;
}

/// Replaces the codec of every layer that is compressed in `cfg`.
SimConfig with_codec(const SimConfig& cfg, const std::vector<std::string>& layer_names,
                     const CodecSpec& codec) {
  const auto assignment = resolve_assignment(cfg, layer_names);
  SimConfig out = cfg;
  out.compressors.clear();
  for (const auto& [layer, current] : assignment) {
    out.compressors[layer] = std::holds_alternative<NoneCodec>(current) ? current : codec;
  }
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GradESTC gradient compression and federated simulation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;

  auto* run = app.add_subcommand("run", "Run one simulation");
  run->add_option("--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory")->required();

  std::string modes = "full,first_only,replace_all,fixed_d";
  auto* ablate = app.add_subcommand("ablate", "Compare GradESTC ablation variants");
  ablate->add_option("--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  ablate->add_option("--modes", modes, "Comma-separated modes")->capture_default_str();
  ablate->add_option("--out", out_dir, "Output directory (one subdirectory per mode)");

  double topk_fraction = 0.1;
  int quant_bits = 8;
  auto* baselines = app.add_subcommand("baselines", "Compare against FedAvg, top-k and quantization");
  baselines->add_option("--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  baselines->add_option("--topk-fraction", topk_fraction)->capture_default_str();
  baselines->add_option("--quant-bits", quant_bits)->capture_default_str();
  baselines->add_option("--out", out_dir, "Output directory (one subdirectory per codec)");

  std::string trace_dir;
  std::string anchors_arg = "5,10,15,20,25,30";
  std::uint32_t client = 0;
  auto* analyze = app.add_subcommand("analyze", "Cosine-similarity heatmaps from a saved trace");
  analyze->add_option("--trace", trace_dir, "Trace directory")->required()->check(CLI::ExistingDirectory);
  analyze->add_option("--anchors", anchors_arg, "Comma-separated anchor rounds")->capture_default_str();
  analyze->add_option("--client", client)->capture_default_str();
  analyze->add_option("--out", out_dir, "Output directory (default: the trace directory)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      Simulator sim(load_config(config_path));
      for (std::size_t r = 0; r < sim.config().rounds; ++r) {
        const auto rep = sim.run_round();
        std::printf("round %llu acc=%.4f loss=%.4f bytes=%llu\n",
                    static_cast<unsigned long long>(rep.round), rep.accuracy, rep.loss,
                    static_cast<unsigned long long>(rep.uplink_bytes));
      }
      write_outputs(sim, out_dir);
      print_row("run", sim);
    } else if (*ablate) {
      const auto base = load_config(config_path);
      const auto data = load_datasets(base.dataset);
      for (const auto& name : split(modes)) {
        const auto mode = parse_ablation_mode(name);
        SimConfig cfg = base;
        for (auto& [layer, codec] : cfg.compressors) {
          if (auto* g = std::get_if<GradestcCodec>(&codec)) g->mode = mode;
        }
        const auto sim = run_one(cfg, data);
        print_row(name, sim);
        if (!out_dir.empty()) write_outputs(sim, fs::path(out_dir) / name);
      }
    } else if (*baselines) {
      const auto base = load_config(config_path);
      const auto data = load_datasets(base.dataset);
      std::vector<std::string> names;
      const Model<float> model(base.model);
      for (const auto& p : model.params()) names.push_back(p.name);
      const std::vector<std::pair<std::string, SimConfig>> variants = {
          {"fedavg", with_codec(base, names, NoneCodec{})},
          {"gradestc", base},
          {"topk", with_codec(base, names, TopkCodec{topk_fraction})},
          {"quant", with_codec(base, names, QuantCodec{quant_bits})},
      };
      for (const auto& [label, cfg] : variants) {
        const auto sim = run_one(cfg, data);
        print_row(label, sim);
        if (!out_dir.empty()) write_outputs(sim, fs::path(out_dir) / label);
      }
    } else if (*analyze) {
      const auto trace = GradientTrace::load(trace_dir);
      std::vector<std::uint64_t> anchors;
      for (const auto& a : split(anchors_arg)) anchors.push_back(std::stoull(a));
      const fs::path dest = out_dir.empty() ? fs::path(trace_dir) : fs::path(out_dir);
      fs::create_directories(dest);
      for (const auto& h : cosine_heatmap(trace, client, anchors)) {
        auto os = open_out(dest / ("heatmap__" + h.layer + ".csv"));
        h.write_csv(os);
        std::printf("%s: %zu rounds x %zu anchors\n", h.layer.c_str(), h.rounds.size(),
                    h.anchors.size());
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", to_string(e.code()), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
