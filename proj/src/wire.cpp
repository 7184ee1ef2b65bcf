#include "gradestc/wire.hpp"

#include <bit>
#include <cstring>
#include <ostream>

namespace gradestc {

namespace {

constexpr std::uint8_t kMagic[4] = {'G', 'E', 'T', 'C'};

class Writer {
 public:
  explicit Writer(std::size_t reserve) { buf_.reserve(reserve); }

  template <typename T>
  void put(T v) {
    if constexpr (std::is_same_v<T, float>) {
      put(std::bit_cast<std::uint32_t>(v));
    } else {
      for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf_.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
      }
    }
  }

  template <typename T>
  void put_all(const std::vector<T>& vs) {
    for (const auto& v : vs) put(v);
  }

  void raw(const std::uint8_t* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }

  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if constexpr (std::is_same_v<T, float>) {
      return std::bit_cast<float>(get<std::uint32_t>());
    } else {
      need(sizeof(T));
      std::uint64_t v = 0;
      for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
      }
      pos_ += sizeof(T);
      return static_cast<T>(v);
    }
  }

  template <typename T>
  std::vector<T> get_n(std::uint64_t n) {
    need_elems(n, sizeof(T));
    std::vector<T> out(static_cast<std::size_t>(n));
    for (auto& v : out) v = get<T>();
    return out;
  }

  void expect(std::span<const std::uint8_t> tag) {
    need(tag.size());
    if (std::memcmp(bytes_.data() + pos_, tag.data(), tag.size()) != 0) {
      throw Error(ErrorCode::MalformedPayload, "bad magic");
    }
    pos_ += tag.size();
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::MalformedPayload, "truncated payload");
  }
  void need_elems(std::uint64_t n, std::size_t width) const {
    if (n > (bytes_.size() - pos_) / width) {
      throw Error(ErrorCode::MalformedPayload, "truncated payload");
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t stream_key(std::uint32_t client, const std::string& layer) {
  char id[4];
  for (int i = 0; i < 4; ++i) id[i] = static_cast<char>((client >> (8 * i)) & 0xff);
  return fnv1a64(layer.data(), layer.size(), fnv1a64(id, 4));
}

void UplinkPayload::validate() const {
  const auto p = replace_indices.size();
  if (new_vectors.size() != p * l) {
    throw Error(ErrorCode::MalformedPayload, "new_vectors size != |P| * l");
  }
  if (coefficients.size() != static_cast<std::size_t>(k) * m) {
    throw Error(ErrorCode::MalformedPayload, "coefficients size != k * m");
  }
  if (p > k) throw Error(ErrorCode::MalformedPayload, "more replacements than basis columns");
}

UplinkPayload make_payload(std::uint64_t stream, std::uint64_t seq, const CompressResult& result) {
  UplinkPayload p;
  p.stream = stream;
  p.seq = seq;
  p.k = static_cast<std::uint32_t>(result.coefficients.rows());
  p.l = static_cast<std::uint32_t>(result.new_vectors.rows());
  p.m = static_cast<std::uint32_t>(result.coefficients.cols());
  p.replace_indices = result.replace_indices;
  p.new_vectors.resize(static_cast<std::size_t>(result.new_vectors.size()));
  // Column-major storage: vectors are already back to back.
  for (Eigen::Index i = 0; i < result.new_vectors.size(); ++i) {
    p.new_vectors[static_cast<std::size_t>(i)] = static_cast<float>(result.new_vectors.data()[i]);
  }
  p.coefficients.reserve(static_cast<std::size_t>(result.coefficients.size()));
  for (Eigen::Index r = 0; r < result.coefficients.rows(); ++r)
    for (Eigen::Index c = 0; c < result.coefficients.cols(); ++c)
      p.coefficients.push_back(static_cast<float>(result.coefficients(r, c)));
  return p;
}

UplinkPayload make_raw_payload(std::uint64_t stream, std::uint64_t seq, std::span<const float> raw) {
  UplinkPayload p;
  p.stream = stream;
  p.seq = seq;
  p.raw_params.assign(raw.begin(), raw.end());
  return p;
}

Matrix coefficient_matrix(const UplinkPayload& p) {
  Matrix a(p.k, p.m);
  for (std::uint32_t r = 0; r < p.k; ++r)
    for (std::uint32_t c = 0; c < p.m; ++c)
      a(r, c) = static_cast<double>(p.coefficients[static_cast<std::size_t>(r) * p.m + c]);
  return a;
}

std::size_t encoded_size(const UplinkPayload& p) {
  return kHeaderBytes + 4 * p.replace_indices.size() + 4 * p.new_vectors.size() +
         4 * p.coefficients.size() + kRawLengthBytes + 4 * p.raw_params.size();
}

std::vector<std::uint8_t> encode(const UplinkPayload& p) {
  p.validate();
  Writer w(encoded_size(p));
  w.raw(kMagic, sizeof(kMagic));
  w.put(kWireVersion);
  w.put(p.stream);
  w.put(p.seq);
  w.put(p.k);
  w.put(p.l);
  w.put(p.m);
  w.put(static_cast<std::uint32_t>(p.replace_indices.size()));
  w.put_all(p.replace_indices);
  w.put_all(p.new_vectors);
  w.put_all(p.coefficients);
  w.put(static_cast<std::uint64_t>(p.raw_params.size()));
  w.put_all(p.raw_params);
  return w.take();
}

UplinkPayload decode(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect(kMagic);
  if (const auto version = r.get<std::uint16_t>(); version != kWireVersion) {
    throw Error(ErrorCode::MalformedPayload, "unsupported version " + std::to_string(version));
  }
  UplinkPayload p;
  p.stream = r.get<std::uint64_t>();
  p.seq = r.get<std::uint64_t>();
  p.k = r.get<std::uint32_t>();
  p.l = r.get<std::uint32_t>();
  p.m = r.get<std::uint32_t>();
  const auto replaced = r.get<std::uint32_t>();
  p.replace_indices = r.get_n<std::uint32_t>(replaced);
  p.new_vectors = r.get_n<float>(static_cast<std::uint64_t>(replaced) * p.l);
  p.coefficients = r.get_n<float>(static_cast<std::uint64_t>(p.k) * p.m);
  p.raw_params = r.get_n<float>(r.get<std::uint64_t>());
  if (!r.done()) throw Error(ErrorCode::MalformedPayload, "trailing bytes");
  p.validate();
  return p;
}

ElementCounts element_counts(const UplinkPayload& p) {
  ElementCounts c;
  c.coeff = p.coefficients.size();
  c.basis = p.new_vectors.size();
  c.index = p.replace_indices.size();
  c.raw = p.raw_params.size();
  return c;
}

std::uint64_t nominal_cost(const UplinkPayload& p) {
  return p.coefficients.size() + p.new_vectors.size() + p.k + p.raw_params.size();
}

void CommLedger::record(std::uint64_t round, std::uint32_t client, const std::string& layer,
                        const UplinkPayload& payload) {
  append({round, client, layer, element_counts(payload), nominal_cost(payload),
          encoded_size(payload)});
}

void CommLedger::record(std::uint64_t round, std::uint32_t client, const std::string& layer,
                        const ElementCounts& elements, std::uint64_t bytes) {
  append({round, client, layer, elements, elements.total(), bytes});
}

void CommLedger::append(LedgerRecord rec) {
  totals_.coeff += rec.elements.coeff;
  totals_.basis += rec.elements.basis;
  totals_.index += rec.elements.index;
  totals_.raw += rec.elements.raw;
  total_bytes_ += rec.bytes;
  total_nominal_ += rec.nominal_elements;
  records_.push_back(std::move(rec));
}

std::uint64_t CommLedger::bytes_for_round(std::uint64_t round) const {
  std::uint64_t sum = 0;
  for (const auto& r : records_)
    if (r.round == round) sum += r.bytes;
  return sum;
}

std::uint64_t CommLedger::bytes_for_layer(const std::string& layer) const {
  std::uint64_t sum = 0;
  for (const auto& r : records_)
    if (r.layer == layer) sum += r.bytes;
  return sum;
}

void CommLedger::write_csv(std::ostream& os) const {
  os << "round,client,layer,coeff_elems,basis_elems,index_elems,raw_elems,bytes\n";
  for (const auto& r : records_) {
    os << r.round << ',' << r.client << ',' << r.layer << ',' << r.elements.coeff << ','
       << r.elements.basis << ',' << r.elements.index << ',' << r.elements.raw << ',' << r.bytes
       << '\n';
  }
}

}  // namespace gradestc
