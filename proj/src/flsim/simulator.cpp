#include "gradestc/flsim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gradestc/flsim/codecs.hpp"
#include "gradestc/flsim/train.hpp"

namespace gradestc::flsim {

namespace {

// Sub-seed domains under SimConfig::seed.
constexpr std::uint64_t kPartitionDomain = 1;
constexpr std::uint64_t kSelectionDomain = 2;
constexpr std::uint64_t kTrainDomain = 3;
constexpr std::uint64_t kCompressorDomain = 4;

std::span<const float> as_span(const Vec<float>& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

TrainTest load_datasets(const DatasetSpec& spec) {
  switch (spec.kind) {
    case DatasetKind::GaussianMixture: return make_gaussian_mixture(spec.mixture);
    case DatasetKind::Csv: return {load_csv(spec.train_path), load_csv(spec.test_path)};
    case DatasetKind::Idx:
      return {load_idx(spec.train_path, spec.train_labels_path),
              load_idx(spec.test_path, spec.test_labels_path)};
  }
  throw Error(ErrorCode::BadConfig, "unknown dataset kind");
}

nlohmann::json to_json(const Summary& s, const std::vector<LayerInfo>& layers) {
  nlohmann::json layer_arr = nlohmann::json::array();
  for (const auto& info : layers) {
    nlohmann::json entry = {{"name", info.name}, {"shape", info.shape}, {"n", info.n},
                            {"codec", codec_name(info.codec)}};
    if (std::holds_alternative<GradestcCodec>(info.codec)) {
      entry["k"] = info.k;
      entry["l"] = info.l;
      entry["m"] = info.m;
      entry["mode"] = to_string(std::get<GradestcCodec>(info.codec).mode);
    }
    layer_arr.push_back(entry);
  }
  return {{"rounds", s.rounds},
          {"best_accuracy", s.best_accuracy},
          {"final_accuracy", s.final_accuracy},
          {"accuracy_threshold", s.accuracy_threshold},
          {"bytes_at_threshold",
           s.bytes_at_threshold ? nlohmann::json(*s.bytes_at_threshold) : nlohmann::json(nullptr)},
          {"total_uplink_bytes", s.total_bytes},
          {"compressed_layer_bytes", s.compressed_bytes},
          {"compressed_layer_baseline_bytes", s.compressed_baseline_bytes},
          {"nominal_cost_elements", s.nominal_cost_elements},
          {"sum_d", s.sum_d},
          {"layers", layer_arr}};
}

Simulator::Simulator(SimConfig cfg) : Simulator(cfg, load_datasets(cfg.dataset)) {}

Simulator::Simulator(SimConfig cfg, TrainTest data)
    : cfg_(std::move(cfg)), data_(std::move(data)), model_(cfg_.model), trace_(cfg_.trace.window) {
  setup();
}

void Simulator::setup() {
  if (data_.train.x.cols() != static_cast<Eigen::Index>(cfg_.model.features)) {
    throw Error(ErrorCode::BadConfig, "dataset has " + std::to_string(data_.train.x.cols()) +
                                          " features, model expects " +
                                          std::to_string(cfg_.model.features));
  }
  std::vector<std::string> names;
  for (const auto& p : model_.params()) names.push_back(p.name);
  const auto assignment = resolve_assignment(cfg_, names);

  for (const auto& p : model_.params()) {
    LayerInfo info;
    info.name = p.name;
    info.shape = p.shape;
    info.n = static_cast<std::size_t>(p.values.size());
    info.codec = assignment.at(p.name);
    if (const auto* g = std::get_if<GradestcCodec>(&info.codec)) {
      info.l = g->l != 0 ? g->l : default_segment_length(info.shape);
      info.m = SegmentSpec::make(info.n, info.l).m;
      info.k = g->k;
      if (info.k < 1 || info.k > std::min(info.l, info.m)) {
        throw Error(ErrorCode::RankTooLarge,
                    "layer " + info.name + ": k = " + std::to_string(info.k) +
                        " must be in [1, min(l, m)] = [1, " +
                        std::to_string(std::min(info.l, info.m)) + "]");
      }
    } else if (const auto* t = std::get_if<TopkCodec>(&info.codec)) {
      if (!(t->fraction > 0.0) || t->fraction > 1.0) {
        throw Error(ErrorCode::BadConfig, "topk fraction must be in (0, 1]");
      }
    } else if (const auto* q = std::get_if<QuantCodec>(&info.codec)) {
      if (q->bits < 1 || (q->bits > 16 && q->bits != 32)) {
        throw Error(ErrorCode::BadConfig, "quant bits must be in [1, 16] or 32");
      }
    }
    layers_.push_back(std::move(info));
  }

  partition_ = partition_dataset(data_.train, cfg_.n_clients, cfg_.partition,
                                 derive_seed(cfg_.seed, {kPartitionDomain}));
  for (const auto& idx : partition_) client_data_.push_back(data_.train.subset(idx));

  streams_.resize(cfg_.n_clients);
  for (auto& per_client : streams_) per_client.resize(layers_.size());
}

std::vector<std::uint32_t> Simulator::select_clients(std::uint64_t round) const {
  const auto n = cfg_.n_clients;
  std::vector<std::uint32_t> all(n);
  std::iota(all.begin(), all.end(), std::uint32_t{0});
  const auto count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(cfg_.participation_fraction * static_cast<double>(n) - 1e-9)),
      1, n);
  if (count == n) return all;
  Engine engine(derive_seed(cfg_.seed, {kSelectionDomain, round}));
  std::shuffle(all.begin(), all.end(), engine);
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

Simulator::Uplinked Simulator::uplink(std::uint64_t round, std::uint32_t client, std::size_t layer,
                                      const Vec<float>& pseudo) {
  const LayerInfo& info = layers_[layer];
  Stream& stream = streams_[client][layer];
  const auto key = stream_key(client, info.name);
  const std::uint64_t seq = stream.seq++;
  Uplinked out;

  if (std::holds_alternative<NoneCodec>(info.codec)) {
    const auto payload = make_raw_payload(key, seq, as_span(pseudo));
    const auto bytes = encode(payload);
    ledger_.record(round, client, info.name, payload);
    out.reconstruction = decode(bytes).raw_params;
    out.bytes = bytes.size();
  } else if (const auto* g = std::get_if<GradestcCodec>(&info.codec)) {
    if (!stream.basis) {
      CompressorOptions opts;
      opts.k = static_cast<Eigen::Index>(info.k);
      opts.l = static_cast<Eigen::Index>(info.l);
      opts.alpha = g->alpha;
      opts.beta = g->beta;
      opts.mode = g->mode;
      opts.seed = derive_seed(cfg_.seed, {kCompressorDomain, client, layer});
      stream.basis.emplace(opts);
      stream.mirror.emplace(info.name, info.shape, info.l);
    }
    GradientTensor tensor{info.name, info.shape,
                          std::vector<float>(pseudo.data(), pseudo.data() + pseudo.size())};
    const auto seg = segment(flatten_whdc(tensor), info.l);
    const auto result = compress(*stream.basis, seg.g);

    const auto payload = make_payload(key, seq, result);
    const auto bytes = encode(payload);
    ledger_.record(round, client, info.name, payload);
    out.reconstruction = decompress(*stream.mirror, decode(bytes)).values;
    out.bytes = bytes.size();
    out.d_used = static_cast<std::uint64_t>(result.d_used);

    if (cfg_.error_stats) {
      const Matrix& basis = stream.basis->m_basis;
      Matrix e = seg.g;
      if (stream.basis->initialized) e -= basis * (basis.transpose() * seg.g);
      out.error = e.reshaped();
      out.g_sq = seg.g.squaredNorm();
      const double chi = stream.basis->initialized ? subspace_concentration(seg.g, basis) : 0.0;
      out.chi_sq = out.g_sq > 0.0 ? chi * chi : 1.0;
    }
  } else if (const auto* t = std::get_if<TopkCodec>(&info.codec)) {
    const auto payload = topk_compress(as_span(pseudo), t->fraction);
    const auto bytes = encode(payload);
    ledger_.record(round, client, info.name, element_counts(payload), bytes.size());
    out.reconstruction = topk_decompress(decode_sparse(bytes));
    out.bytes = bytes.size();
  } else {
    const auto& q = std::get<QuantCodec>(info.codec);
    const auto payload = quant_compress(as_span(pseudo), q.bits);
    const auto bytes = encode(payload);
    ledger_.record(round, client, info.name, element_counts(payload), bytes.size());
    out.reconstruction = quant_decompress(decode_quant(bytes));
    out.bytes = bytes.size();
  }
  return out;
}

RoundReport Simulator::run_round() {
  RoundReport report;
  report.round = reports_.size() + 1;
  report.participants = select_clients(report.round);
  const auto& participants = report.participants;
  const std::size_t n_layers = layers_.size();

  std::vector<Vec<float>> sum(n_layers);
  for (std::size_t p = 0; p < n_layers; ++p) sum[p] = Vec<float>::Zero(model_.params()[p].values.size());

  std::size_t total_samples = 0;
  for (auto c : participants) total_samples += client_data_[c].size();

  // Per layer, per participant: exact fitting errors for the statistics.
  std::vector<std::vector<Uplinked>> stats_input(n_layers);

  for (auto c : participants) {
    LocalTrainOptions opts;
    opts.epochs = cfg_.local_epochs;
    opts.batch_size = cfg_.batch_size;
    opts.learning_rate = cfg_.learning_rate;
    opts.seed = derive_seed(cfg_.seed, {kTrainDomain, report.round, c});
    const auto pseudo = local_train(model_, client_data_[c].x, client_data_[c].y, opts);

    if (cfg_.trace.enabled && c == cfg_.trace.client) {
      for (std::size_t p = 0; p < n_layers; ++p) {
        trace_.append(c, layers_[p].name, report.round,
                      std::vector<float>(pseudo[p].data(), pseudo[p].data() + pseudo[p].size()));
      }
    }

    const float weight = cfg_.sample_weighting
                             ? static_cast<float>(static_cast<double>(client_data_[c].size()) /
                                                  static_cast<double>(total_samples))
                             : 1.0f;
    for (std::size_t p = 0; p < n_layers; ++p) {
      auto up = uplink(report.round, c, p, pseudo[p]);
      report.uplink_bytes += up.bytes;
      if (layers_[p].compressed()) {
        report.compressed_bytes += up.bytes;
        report.compressed_baseline_bytes += 4 * layers_[p].n;
      }
      report.sum_d += up.d_used;
      const Eigen::Map<const Vec<float>> recon(up.reconstruction.data(),
                                               static_cast<Eigen::Index>(up.reconstruction.size()));
      if (cfg_.sample_weighting) {
        sum[p] += weight * recon;
      } else {
        sum[p] += recon;
      }
      if (cfg_.error_stats && std::holds_alternative<GradestcCodec>(layers_[p].codec)) {
        up.reconstruction.clear();
        stats_input[p].push_back(std::move(up));
      }
    }
  }

  const auto lr = static_cast<float>(cfg_.learning_rate);
  const auto count = static_cast<float>(participants.size());
  auto& params = model_.params();
  for (std::size_t p = 0; p < n_layers; ++p) {
    const Vec<float> avg = cfg_.sample_weighting ? sum[p] : Vec<float>(sum[p] / count);
    params[p].values -= lr * avg;
  }

  for (std::size_t p = 0; p < n_layers; ++p) {
    const auto& ups = stats_input[p];
    if (ups.empty()) continue;
    ErrorStats s;
    s.round = report.round;
    s.layer = layers_[p].name;
    s.clients = ups.size();
    double chi_sum = 0.0;
    std::vector<Vector> errors;
    for (const auto& up : ups) {
      chi_sum += up.chi_sq;
      s.min_chi_sq = std::min(s.min_chi_sq, up.chi_sq);
      s.rho_sq_hat = std::max(s.rho_sq_hat, up.g_sq);
      if (up.g_sq > 0.0) {
        const double gap = std::abs(up.error.squaredNorm() - (1.0 - up.chi_sq) * up.g_sq) / up.g_sq;
        s.max_identity_gap = std::max(s.max_identity_gap, gap);
      }
      errors.push_back(up.error);
    }
    s.mean_chi_sq = chi_sum / static_cast<double>(ups.size());
    if (errors.size() >= 2) {
      const auto corr = error_correlation(errors);
      s.mean_err_sq = corr.mean_err;
      s.avg_err_sq = corr.avg_err;
      s.tau_hat = corr.tau_hat;
      s.expansion_gap = corr.identity_gap;
    } else {
      s.mean_err_sq = s.avg_err_sq = errors.front().squaredNorm();
    }
    for (const auto& prev : error_stats_)
      if (prev.layer == s.layer) s.rho_sq_hat = std::max(s.rho_sq_hat, prev.rho_sq_hat);
    error_stats_.push_back(std::move(s));
  }

  const auto eval = model_.evaluate(data_.test.x, data_.test.y);
  report.accuracy = eval.accuracy;
  report.loss = eval.loss;
  cum_bytes_ += report.uplink_bytes;
  report.cum_bytes = cum_bytes_;
  reports_.push_back(report);
  return report;
}

const std::vector<RoundReport>& Simulator::run() {
  while (reports_.size() < cfg_.rounds) run_round();
  return reports_;
}

const std::optional<BasisState>& Simulator::basis_state(std::uint32_t client, std::size_t layer) const {
  return streams_.at(client).at(layer).basis;
}

const MirrorState& Simulator::mirror_state(std::uint32_t client, std::size_t layer) const {
  const auto& mirror = streams_.at(client).at(layer).mirror;
  if (!mirror) throw Error(ErrorCode::UninitializedStream, "stream has no mirror state");
  return *mirror;
}

Summary Simulator::summary() const {
  Summary s;
  s.rounds = reports_.size();
  s.accuracy_threshold = cfg_.accuracy_threshold;
  for (const auto& r : reports_) {
    s.best_accuracy = std::max(s.best_accuracy, r.accuracy);
    s.compressed_bytes += r.compressed_bytes;
    s.compressed_baseline_bytes += r.compressed_baseline_bytes;
    s.sum_d += r.sum_d;
    if (!s.bytes_at_threshold && cfg_.accuracy_threshold > 0.0 &&
        r.accuracy >= cfg_.accuracy_threshold) {
      s.bytes_at_threshold = r.cum_bytes;
    }
  }
  if (!reports_.empty()) s.final_accuracy = reports_.back().accuracy;
  s.total_bytes = ledger_.total_bytes();
  s.nominal_cost_elements = ledger_.total_nominal_elements();
  return s;
}

}  // namespace gradestc::flsim
