#include "gradestc/flsim/data.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace gradestc::flsim {

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.classes = classes;
  out.x.resize(static_cast<Eigen::Index>(indices.size()), x.cols());
  out.y.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(indices[i]));
    out.y.push_back(y[indices[i]]);
  }
  return out;
}

TrainTest make_gaussian_mixture(const GaussianMixtureSpec& spec) {
  if (spec.classes < 2 || spec.features < 1 || spec.clusters_per_class < 1) {
    throw Error(ErrorCode::BadConfig, "gaussian mixture needs >= 2 classes and >= 1 feature");
  }
  Engine engine(derive_seed(spec.seed, {0}));
  std::normal_distribution<double> normal(0.0, 1.0);

  const auto f = static_cast<Eigen::Index>(spec.features);
  const std::size_t blobs = spec.classes * spec.clusters_per_class;
  Matrix centres(static_cast<Eigen::Index>(blobs), f);
  for (Eigen::Index b = 0; b < centres.rows(); ++b)
    for (Eigen::Index j = 0; j < f; ++j) centres(b, j) = spec.separation * normal(engine);

  auto draw = [&](std::size_t n, std::uint64_t stream) {
    Engine eng(derive_seed(spec.seed, {stream}));
    std::uniform_int_distribution<std::size_t> pick(0, blobs - 1);
    Dataset d;
    d.classes = spec.classes;
    d.x.resize(static_cast<Eigen::Index>(n), f);
    d.y.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t blob = pick(eng);
      d.y[s] = static_cast<int>(blob % spec.classes);
      for (Eigen::Index j = 0; j < f; ++j) {
        d.x(static_cast<Eigen::Index>(s), j) =
            static_cast<float>(centres(static_cast<Eigen::Index>(blob), j) + spec.noise * normal(eng));
      }
    }
    return d;
  };
  return {draw(spec.train_samples, 1), draw(spec.test_samples, 2)};
}

Dataset load_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  std::vector<std::vector<float>> rows;
  std::vector<int> labels;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    int label = 0;
    try {
      label = std::stoi(cell);
    } catch (const std::exception&) {
      if (labels.empty() && rows.empty()) continue;  // header line
      throw Error(ErrorCode::Io, path + ": bad label '" + cell + "'");
    }
    std::vector<float> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stof(cell));
    if (!rows.empty() && row.size() != rows[0].size()) {
      throw Error(ErrorCode::Io, path + ": ragged rows");
    }
    rows.push_back(std::move(row));
    labels.push_back(label);
  }
  if (rows.empty()) throw Error(ErrorCode::Io, path + ": no samples");
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  d.y = std::move(labels);
  d.classes = static_cast<std::size_t>(*std::max_element(d.y.begin(), d.y.end()) + 1);
  return d;
}

namespace {

std::uint32_t read_be32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::Io, "truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

std::vector<unsigned char> read_idx(const std::string& path, std::vector<std::uint32_t>& dims) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  const auto magic = read_be32(is);
  if ((magic >> 8) != 0x08) throw Error(ErrorCode::Io, path + ": only unsigned-byte IDX supported");
  const auto rank = magic & 0xff;
  std::size_t total = 1;
  dims.clear();
  for (std::uint32_t i = 0; i < rank; ++i) {
    dims.push_back(read_be32(is));
    total *= dims.back();
  }
  std::vector<unsigned char> data(total);
  if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(total))) {
    throw Error(ErrorCode::Io, path + ": truncated IDX body");
  }
  return data;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::vector<std::uint32_t> idims, ldims;
  const auto pixels = read_idx(images_path, idims);
  const auto labels = read_idx(labels_path, ldims);
  if (idims.empty() || ldims.size() != 1 || idims[0] != ldims[0]) {
    throw Error(ErrorCode::Io, "IDX image/label counts disagree");
  }
  const std::size_t n = idims[0];
  const std::size_t f = n ? pixels.size() / n : 0;
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j)
      d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pixels[i * f + j] / 255.0f;
  d.y.assign(labels.begin(), labels.end());
  d.classes = static_cast<std::size_t>(*std::max_element(d.y.begin(), d.y.end()) + 1);
  return d;
}

std::vector<double> sample_dirichlet(std::size_t n, double alpha, Engine& engine) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "dirichlet alpha must be > 0");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> p(n);
  double sum = 0.0;
  for (auto& v : p) {
    v = gamma(engine);
    sum += v;
  }
  if (sum <= 0.0) {
    // Every draw underflowed (tiny alpha): put all mass on one uniformly chosen entry.
    std::fill(p.begin(), p.end(), 0.0);
    p[std::uniform_int_distribution<std::size_t>(0, n - 1)(engine)] = 1.0;
    return p;
  }
  for (auto& v : p) v /= sum;
  return p;
}

std::vector<std::vector<std::size_t>> partition_dataset(const Dataset& data, std::size_t clients,
                                                        const PartitionSpec& spec,
                                                        std::uint64_t seed) {
  if (clients == 0) throw Error(ErrorCode::InvalidArgument, "need at least one client");
  if (data.size() < clients) {
    throw Error(ErrorCode::TooFewSamples, std::to_string(data.size()) + " samples for " +
                                              std::to_string(clients) + " clients");
  }
  std::vector<std::vector<std::size_t>> parts(clients);

  if (spec.kind == PartitionKind::Iid) {
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Engine engine(derive_seed(seed, {0}));
    std::shuffle(idx.begin(), idx.end(), engine);
    const std::size_t base = idx.size() / clients;
    const std::size_t extra = idx.size() % clients;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < clients; ++c) {
      const std::size_t take = base + (c < extra ? 1 : 0);
      parts[c].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                      idx.begin() + static_cast<std::ptrdiff_t>(pos + take));
      pos += take;
      std::sort(parts[c].begin(), parts[c].end());
    }
    return parts;
  }

  if (!(spec.alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "dirichlet alpha must be > 0");
  std::vector<std::vector<std::size_t>> by_class(data.classes);
  for (std::size_t i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.y[i])].push_back(i);

  for (int attempt = 0; attempt < kMaxDirichletRetries; ++attempt) {
    for (auto& p : parts) p.clear();
    Engine engine(derive_seed(seed, {1, static_cast<std::uint64_t>(attempt)}));
    for (const auto& members : by_class) {
      std::vector<std::size_t> idx = members;
      std::shuffle(idx.begin(), idx.end(), engine);
      const auto props = sample_dirichlet(clients, spec.alpha, engine);
      double cum = 0.0;
      std::size_t start = 0;
      for (std::size_t c = 0; c < clients; ++c) {
        cum += props[c];
        std::size_t end = c + 1 == clients
                              ? idx.size()
                              : std::min(idx.size(), static_cast<std::size_t>(cum * static_cast<double>(idx.size())));
        end = std::max(end, start);
        parts[c].insert(parts[c].end(), idx.begin() + static_cast<std::ptrdiff_t>(start),
                        idx.begin() + static_cast<std::ptrdiff_t>(end));
        start = end;
      }
    }
    const bool all_nonempty =
        std::all_of(parts.begin(), parts.end(), [](const auto& p) { return !p.empty(); });
    if (all_nonempty) break;
    if (attempt + 1 < kMaxDirichletRetries) continue;
    for (auto& p : parts) {
      if (!p.empty()) continue;
      auto largest = std::max_element(parts.begin(), parts.end(),
                                      [](const auto& a, const auto& b) { return a.size() < b.size(); });
      p.push_back(largest->back());
      largest->pop_back();
    }
  }
  for (auto& p : parts) std::sort(p.begin(), p.end());
  return parts;
}

}  // namespace gradestc::flsim
