#include "gradestc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace gradestc {

namespace fs = std::filesystem;

void GradientTrace::append(std::uint32_t client, const std::string& layer, std::uint64_t round,
                           std::vector<float> values) {
  auto& q = streams_[{client, layer}];
  if (!q.empty() && q.back().round >= round) {
    throw Error(ErrorCode::InvalidArgument, "trace rounds must be strictly increasing");
  }
  q.push_back({round, std::move(values)});
  while (q.size() > window_) q.pop_front();
}

const std::deque<GradientTrace::Entry>& GradientTrace::stream(std::uint32_t client,
                                                              const std::string& layer) const {
  static const std::deque<Entry> empty;
  auto it = streams_.find({client, layer});
  return it == streams_.end() ? empty : it->second;
}

const std::vector<float>* GradientTrace::find(std::uint32_t client, const std::string& layer,
                                              std::uint64_t round) const {
  for (const auto& e : stream(client, layer))
    if (e.round == round) return &e.values;
  return nullptr;
}

std::vector<GradientTrace::Key> GradientTrace::keys() const {
  std::vector<Key> out;
  for (const auto& [k, _] : streams_) out.push_back(k);
  return out;
}

void GradientTrace::save(const std::string& dir) const {
  fs::create_directories(dir);
  for (const auto& [key, q] : streams_) {
    const auto path = fs::path(dir) / ("client" + std::to_string(key.first) + "__" + key.second + ".csv");
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
    os.precision(std::numeric_limits<float>::max_digits10);
    for (const auto& e : q) {
      os << e.round;
      for (float v : e.values) os << ',' << v;
      os << '\n';
    }
  }
}

GradientTrace GradientTrace::load(const std::string& dir, std::size_t window) {
  GradientTrace trace(window);
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "trace directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    const std::string stem = path.stem().string();
    const auto sep = stem.find("__");
    if (stem.rfind("client", 0) != 0 || sep == std::string::npos) continue;
    const auto client = static_cast<std::uint32_t>(std::stoul(stem.substr(6, sep - 6)));
    const std::string layer = stem.substr(sep + 2);
    std::ifstream is(path);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string cell;
      std::getline(ss, cell, ',');
      const auto round = std::stoull(cell);
      std::vector<float> values;
      while (std::getline(ss, cell, ',')) values.push_back(std::stof(cell));
      trace.append(client, layer, round, std::move(values));
    }
  }
  return trace;
}

Cosine cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "cosine of unequal lengths");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return {0.0, true};
  if (std::equal(a.begin(), a.end(), b.begin())) return {1.0, false};
  return {std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0), false};
}

void Heatmap::write_csv(std::ostream& os) const {
  os << "round";
  for (auto a : anchors) os << ",anchor_" << a;
  os << '\n';
  for (std::size_t r = 0; r < rounds.size(); ++r) {
    os << rounds[r];
    for (std::size_t c = 0; c < anchors.size(); ++c) {
      os << ',' << similarity(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    os << '\n';
  }
}

std::vector<Heatmap> cosine_heatmap(const GradientTrace& trace, std::uint32_t client,
                                    std::span<const std::uint64_t> anchors) {
  std::vector<Heatmap> maps;
  for (const auto& [c, layer] : trace.keys()) {
    if (c != client) continue;
    const auto& q = trace.stream(c, layer);
    Heatmap h;
    h.layer = layer;
    h.anchors.assign(anchors.begin(), anchors.end());
    for (const auto& e : q) h.rounds.push_back(e.round);
    h.similarity = Matrix::Zero(static_cast<Eigen::Index>(q.size()),
                                static_cast<Eigen::Index>(anchors.size()));
    for (std::size_t j = 0; j < anchors.size(); ++j) {
      const auto* anchor = trace.find(c, layer, anchors[j]);
      if (!anchor) {
        throw Error(ErrorCode::InvalidArgument,
                    "anchor round " + std::to_string(anchors[j]) + " not in trace for " + layer);
      }
      for (std::size_t i = 0; i < q.size(); ++i) {
        const auto cos = cosine_similarity(q[i].values, *anchor);
        h.similarity(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cos.value;
        if (cos.zero_vector) h.zero_pairs.emplace_back(q[i].round, anchors[j]);
      }
    }
    maps.push_back(std::move(h));
  }
  return maps;
}

double subspace_concentration(const Matrix& g, const Matrix& m_basis) {
  const double g_norm = g.norm();
  if (g_norm == 0.0) return 1.0;
  return std::min(1.0, (m_basis.transpose() * g).norm() / g_norm);
}

ErrorCorrelation error_correlation(const std::vector<Vector>& errors) {
  const std::size_t n = errors.size();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "error_correlation needs >= 2 clients");
  ErrorCorrelation out;
  Vector sum = Vector::Zero(errors[0].size());
  double own = 0.0, cross = 0.0;
  out.tau_hat = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i].size() != sum.size()) throw Error(ErrorCode::LengthMismatch, "error lengths differ");
    sum += errors[i];
    own += errors[i].squaredNorm();
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double ip = errors[i].dot(errors[j]);
      cross += ip;
      out.tau_hat = std::max(out.tau_hat, ip);
    }
  }
  const double nn = static_cast<double>(n);
  out.mean_err = own / nn;
  out.avg_err = (sum / nn).squaredNorm();
  out.expansion = (own + cross) / (nn * nn);
  const double scale = std::max({out.avg_err, out.mean_err, std::numeric_limits<double>::min()});
  out.identity_gap = std::abs(out.avg_err - out.expansion) / scale;
  return out;
}

std::string to_json(const std::vector<ErrorStats>& stats) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : stats) {
    arr.push_back({{"round", s.round},
                   {"layer", s.layer},
                   {"clients", s.clients},
                   {"mean_err_sq", s.mean_err_sq},
                   {"avg_err_sq", s.avg_err_sq},
                   {"mean_chi_sq", s.mean_chi_sq},
                   {"min_chi_sq", s.min_chi_sq},
                   {"tau_hat", s.tau_hat},
                   {"rho_sq_hat", s.rho_sq_hat},
                   {"max_identity_gap", s.max_identity_gap},
                   {"expansion_gap", s.expansion_gap}});
  }
  return arr.dump(2);
}

TemporalCorrelation temporal_correlation(const GradientTrace& trace, std::uint32_t client,
                                         const std::string& layer, std::uint64_t first,
                                         std::uint64_t last, std::uint64_t far_lag) {
  TemporalCorrelation out;
  std::vector<const GradientTrace::Entry*> in_range;
  for (const auto& e : trace.stream(client, layer))
    if (e.round >= first && e.round <= last) in_range.push_back(&e);

  double adj = 0.0, far = 0.0;
  for (std::size_t i = 0; i < in_range.size(); ++i) {
    for (std::size_t j = i + 1; j < in_range.size(); ++j) {
      const auto lag = in_range[j]->round - in_range[i]->round;
      if (lag != 1 && lag < far_lag) continue;
      const double c = cosine_similarity(in_range[i]->values, in_range[j]->values).value;
      if (lag == 1) {
        adj += c;
        ++out.adjacent_pairs;
      } else {
        far += c;
        ++out.distant_pairs;
      }
    }
  }
  if (out.adjacent_pairs) out.adjacent_mean = adj / static_cast<double>(out.adjacent_pairs);
  if (out.distant_pairs) out.distant_mean = far / static_cast<double>(out.distant_pairs);
  return out;
}

}  // namespace gradestc
