#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "gradestc/decompressor.hpp"
#include "gradestc/wire.hpp"
#include "support.hpp"

using namespace gradestc;

namespace {

std::vector<std::uint8_t> from_hex(const std::string& hex) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) out.push_back(static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  return out;
}

UplinkPayload tiny_payload() {
  UplinkPayload p;
  p.stream = stream_key(7, "fc1.weight");
  p.seq = 3;
  p.k = 2;
  p.l = 3;
  p.m = 2;
  p.replace_indices = {2};
  p.new_vectors = {1.0f, -0.5f, 0.25f};
  p.coefficients = {1, 2, 3, 4};
  return p;
}

UplinkPayload random_payload(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> dim(1, 9);
  std::normal_distribution<float> val;
  UplinkPayload p;
  p.stream = rng();
  p.seq = rng() % 1000;
  p.k = dim(rng);
  p.l = p.k + dim(rng);
  p.m = dim(rng);
  for (std::uint32_t i = 1; i <= p.k; ++i)
    if (rng() % 2) p.replace_indices.push_back(i);
  p.new_vectors.resize(p.replace_indices.size() * p.l);
  for (auto& v : p.new_vectors) v = val(rng);
  p.coefficients.resize(std::size_t{p.k} * p.m);
  for (auto& v : p.coefficients) v = val(rng);
  if (rng() % 3 == 0) {
    p.raw_params.resize(dim(rng));
    for (auto& v : p.raw_params) v = val(rng);
  }
  return p;
}

}  // namespace

TEST(StreamKey, FnvOverClientThenLayer) {
  EXPECT_EQ(stream_key(7, "fc1.weight"), 0x45b38c45e66b98a6ull);
  EXPECT_NE(stream_key(0, "a"), stream_key(1, "a"));
}

TEST(Encode, GoldenBytes) {
  const auto golden = from_hex(
      "474554430100a6986be6458cb3450300"
      "00000000000002000000030000000200"
      "000001000000020000000000803f0000"
      "00bf0000803e0000803f000000400000"
      "4040000080400000000000000000");
  EXPECT_EQ(encode(tiny_payload()), golden);
  EXPECT_EQ(decode(golden), tiny_payload());
}

TEST(Encode, EmptyReplacementSize) {
  UplinkPayload p;
  p.k = 2;
  p.l = 4;
  p.m = 3;
  p.coefficients.assign(6, 1.0f);
  EXPECT_EQ(encoded_size(p), kHeaderBytes + kRawLengthBytes + 24);
  EXPECT_EQ(encode(p).size(), encoded_size(p));
}

TEST(Encode, RoundTripRandom) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 300; ++t) {
    const auto p = random_payload(rng);
    const auto bytes = encode(p);
    EXPECT_EQ(bytes.size(), encoded_size(p));
    EXPECT_EQ(decode(bytes), p);
  }
}

TEST(Decode, RejectsMalformed) {
  auto bytes = encode(tiny_payload());
  auto expect_malformed = [](std::vector<std::uint8_t> b) {
    try {
      decode(b);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MalformedPayload);
    }
  };
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  expect_malformed(bad_magic);
  auto bad_version = bytes;
  bad_version[4] = 9;
  expect_malformed(bad_version);
  expect_malformed(std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 1));
  auto trailing = bytes;
  trailing.push_back(0);
  expect_malformed(trailing);
  expect_malformed({});
}

TEST(ElementCounts, CountExample) {
  UplinkPayload p;
  p.k = 8;
  p.l = 160;
  p.m = 10;
  p.replace_indices = {1, 5};
  p.new_vectors.assign(2 * 160, 0.0f);
  p.coefficients.assign(80, 0.0f);
  const auto c = element_counts(p);
  EXPECT_EQ(c.total(), 402u);
  EXPECT_EQ(nominal_cost(p), 80u + 320u + 8u);
  p.replace_indices.clear();
  p.new_vectors.clear();
  EXPECT_EQ(element_counts(p).total(), 80u);
}

TEST(CommLedger, BytesAndCsv) {
  CommLedger ledger;
  const auto p = tiny_payload();
  ledger.record(1, 7, "fc1.weight", p);
  ledger.record(2, 7, "fc1.weight", p);
  ElementCounts raw;
  raw.raw = 10;
  ledger.record(2, 3, "fc1.bias", raw, 40);
  EXPECT_EQ(ledger.total_bytes(), 2 * encoded_size(p) + 40);
  EXPECT_EQ(ledger.bytes_for_round(2), encoded_size(p) + 40);
  EXPECT_EQ(ledger.bytes_for_layer("fc1.bias"), 40u);
  EXPECT_EQ(ledger.totals().coeff, 8u);
  EXPECT_EQ(ledger.totals().basis, 6u);
  EXPECT_EQ(ledger.totals().index, 2u);
  EXPECT_EQ(ledger.totals().raw, 10u);
  // Bytes = 4 * elements + fixed header per payload.
  EXPECT_EQ(encoded_size(p), 4 * element_counts(p).total() + kHeaderBytes + kRawLengthBytes);
  std::ostringstream os;
  ledger.write_csv(os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
            "round,client,layer,coeff_elems,basis_elems,index_elems,raw_elems,bytes");
  EXPECT_NE(os.str().find("1,7,fc1.weight,4,3,1,0,78"), std::string::npos);
}

// ---- decompressor ----

namespace {

struct Pair {
  BasisState client;
  MirrorState server;
  SegmentSpec spec;
  std::vector<std::size_t> shape;
};

Pair make_pair(std::size_t rows, std::size_t cols, std::size_t l, Eigen::Index k) {
  CompressorOptions o;
  o.k = k;
  o.l = static_cast<Eigen::Index>(l);
  o.seed = 5;
  std::vector<std::size_t> shape{rows, cols};
  return {BasisState(o), MirrorState("w", shape, l), SegmentSpec::make(rows * cols, l), shape};
}

}  // namespace

TEST(Decompress, MirrorsClientBitExactly) {
  auto pr = make_pair(12, 10, 12, 4);
  testing_support::DriftingStream stream(12, 10, 6, 0.4, 0.05, 8);
  for (std::uint64_t seq = 0; seq < 25; ++seq) {
    const Matrix g = round_to_f32(stream.next());
    const auto r = compress(pr.client, g);
    const auto payload = decode(encode(make_payload(1, seq, r)));
    const auto out = decompress(pr.server, payload);
    EXPECT_EQ(pr.server.m_basis, pr.client.wire_basis);
    const auto local = restore(wire_reconstruction(pr.client, r), pr.spec, pr.shape);
    EXPECT_EQ(out.values, local.values);
    EXPECT_LE(orthonormality_defect(pr.server.m_basis), 1e-5);
  }
}

TEST(Decompress, InSpanPayloadIsExact) {
  auto pr = make_pair(8, 6, 8, 3);
  std::mt19937_64 rng(1);
  const Matrix g0 = testing_support::gaussian(8, 6, rng);
  decompress(pr.server, make_payload(1, 0, compress(pr.client, g0)));
  const Matrix g = pr.client.wire_basis * testing_support::gaussian(3, 6, rng);
  const auto r = compress(pr.client, g);
  ASSERT_TRUE(r.replace_indices.empty());
  const auto out = decompress(pr.server, make_payload(1, 1, r));
  const auto expect = restore(g, pr.spec, pr.shape);
  for (std::size_t i = 0; i < out.values.size(); ++i)
    EXPECT_NEAR(out.values[i], expect.values[i], 1e-5 * g.norm());
}

TEST(Decompress, ZeroCoefficientsGiveZeroTensor) {
  auto pr = make_pair(4, 4, 4, 2);
  std::mt19937_64 rng(2);
  decompress(pr.server, make_payload(1, 0, compress(pr.client, testing_support::gaussian(4, 4, rng))));
  UplinkPayload p;
  p.seq = 1;
  p.k = 2;
  p.l = 4;
  p.m = 4;
  p.coefficients.assign(8, 0.0f);
  const auto out = decompress(pr.server, p);
  for (float v : out.values) EXPECT_EQ(v, 0.0f);
}

TEST(Decompress, Errors) {
  auto pr = make_pair(4, 4, 4, 2);
  auto expect_code = [&](UplinkPayload p, ErrorCode code) {
    try {
      decompress(pr.server, p);
      FAIL() << to_string(code);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code);
    }
  };
  UplinkPayload p;
  p.k = 2;
  p.l = 4;
  p.m = 4;
  p.coefficients.assign(8, 1.0f);
  expect_code(p, ErrorCode::UninitializedStream);
  auto wrong_seq = p;
  wrong_seq.seq = 5;
  expect_code(wrong_seq, ErrorCode::SequenceMismatch);
  auto wrong_len = p;
  wrong_len.m = 3;
  wrong_len.coefficients.assign(6, 1.0f);
  expect_code(wrong_len, ErrorCode::LengthMismatch);

  std::mt19937_64 rng(3);
  decompress(pr.server, make_payload(1, 0, compress(pr.client, testing_support::gaussian(4, 4, rng))));
  auto bad_index = p;
  bad_index.seq = 1;
  bad_index.replace_indices = {3};
  bad_index.new_vectors.assign(4, 0.5f);
  expect_code(bad_index, ErrorCode::IndexOutOfRange);
  auto unsorted = bad_index;
  unsorted.replace_indices = {2, 1};
  unsorted.new_vectors.assign(8, 0.5f);
  expect_code(unsorted, ErrorCode::IndexOutOfRange);
}
