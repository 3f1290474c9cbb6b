#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedams/accounting.hpp"
#include "fedams/compressors.hpp"
#include "fedams/errors.hpp"
#include "fedams/rng.hpp"

using fedams::CompressedDelta;
using fedams::CompressorKind;
using fedams::CompressorSpec;
using fedams::ParamVector;

namespace {

CompressorSpec topk(double r) { return {CompressorKind::topk, r}; }
const CompressorSpec kSign{CompressorKind::scaled_sign, 1.0};
const CompressorSpec kIdentity{};

ParamVector random_vector(fedams::RandomStream& rng, std::size_t d) {
  ParamVector x(d);
  const double scale = std::pow(10.0, 6 * rng.uniform() - 3);
  for (auto& v : x) v = scale * rng.normal();
  return x;
}

}  // namespace

TEST(TopK, KeepsLargestMagnitude) {
  auto c = fedams::compress(topk(1.0 / 3), {3, -5, 2});
  const auto& t = std::get<fedams::wire::TopK>(c.payload());
  EXPECT_EQ(t.indices, (std::vector<std::uint32_t>{1}));
  EXPECT_EQ(t.values, (std::vector<double>{-5}));
  EXPECT_EQ(fedams::decode(c), (ParamVector{0, -5, 0}));
}

TEST(TopK, FullRatioIsLossless) {
  ParamVector x{0.1, -7, 3, 0, 2.5};
  EXPECT_EQ(fedams::decode(fedams::compress(topk(1.0), x)), x);
}

TEST(TopK, CountRule) {
  EXPECT_EQ(topk(0.25).topk_count(20), 5u);
  EXPECT_EQ(topk(0.01).topk_count(20), 1u);
  EXPECT_EQ(topk(1.0 / 64).topk_count(64), 1u);
}

TEST(TopK, TiesResolveToLowerIndex) {
  auto c = fedams::compress(topk(0.5), {1, -2, 2, 1});
  EXPECT_EQ(std::get<fedams::wire::TopK>(c.payload()).indices,
            (std::vector<std::uint32_t>{1, 2}));
  auto c2 = fedams::compress(topk(0.25), {2, 2, -2, 2});
  EXPECT_EQ(std::get<fedams::wire::TopK>(c2.payload()).indices, (std::vector<std::uint32_t>{0}));
}

TEST(TopK, ErrorIsSumOfDroppedSquares) {
  fedams::RandomStream rng(2, {fedams::StreamPurpose::diagnostics, 0, 0});
  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_vector(rng, 37);
    auto spec = topk(0.3);
    std::vector<double> sq;
    for (double v : x) sq.push_back(v * v);
    std::sort(sq.begin(), sq.end());
    double dropped = 0;
    for (std::size_t j = 0; j < 37 - spec.topk_count(37); ++j) dropped += sq[j];
    const double e = fedams::compression_error(spec, x);
    EXPECT_NEAR(e * e, dropped, 1e-12 * fedams::squared_norm(x));
  }
}

TEST(ScaledSign, DecodesToScaledSigns) {
  EXPECT_EQ(fedams::decode(fedams::compress(kSign, {1, -2, 3})), (ParamVector{2, -2, 2}));
  EXPECT_EQ(fedams::decode(fedams::compress(kSign, {0, 4, 0, -4})), (ParamVector{0, 2, 0, -2}));
}

TEST(ScaledSign, ErrorIdentity) {
  fedams::RandomStream rng(4, {fedams::StreamPurpose::diagnostics, 0, 0});
  for (int trial = 0; trial < 200; ++trial) {
    auto x = random_vector(rng, 1 + trial % 40);
    double brute = 0;
    auto dec = fedams::decode(fedams::compress(kSign, x));
    for (std::size_t j = 0; j < x.dim(); ++j) brute += (dec[j] - x[j]) * (dec[j] - x[j]);
    const auto n = fedams::norms(x);
    const double closed = n.l2 * n.l2 - n.l1 * n.l1 / double(x.dim());
    EXPECT_NEAR(brute, closed, 1e-9 * n.l2 * n.l2);
  }
}

TEST(Contraction, Factors) {
  EXPECT_DOUBLE_EQ(fedams::contraction_q(topk(0.25), ParamVector(4, 1.0)), std::sqrt(0.75));
  EXPECT_EQ(fedams::contraction_q(kIdentity, {1, 2}), 0.0);
  EXPECT_NEAR(fedams::contraction_q(kSign, {1, -2, 3}), std::sqrt(1.0 - 6.0 / 7.0), 1e-15);
  EXPECT_EQ(fedams::contraction_q(kSign, ParamVector(3)), 0.0);
}

TEST(Contraction, IdentityHasNoError) {
  EXPECT_EQ(fedams::compression_error(kIdentity, {1, -2, 3}), 0.0);
}

TEST(Contraction, BoundHoldsOnRandomVectors) {
  fedams::RandomStream rng(6, {fedams::StreamPurpose::diagnostics, 0, 0});
  for (std::size_t d : {1u, 2u, 17u, 256u}) {
    for (int trial = 0; trial < 100; ++trial) {
      auto x = random_vector(rng, d);
      for (const auto& spec : {topk(0.125), topk(0.5), kSign}) {
        const double q = fedams::contraction_q(spec, x);
        EXPECT_LE(fedams::compression_error(spec, x), q * fedams::l2_norm(x) + 1e-9);
      }
    }
  }
}

TEST(Decode, ExplicitPayloads) {
  EXPECT_EQ(fedams::decode(CompressedDelta(fedams::wire::Dense{{1, 2}})), (ParamVector{1, 2}));
  EXPECT_EQ(fedams::decode(CompressedDelta(fedams::wire::TopK{3, {1}, {-5}})),
            (ParamVector{0, -5, 0}));
  EXPECT_EQ(fedams::decode(CompressedDelta(fedams::wire::SignScaled{2, {1, -1, 1}})),
            (ParamVector{2, -2, 2}));
}

TEST(Decode, MalformedIndicesThrow) {
  EXPECT_THROW(fedams::decode(CompressedDelta(fedams::wire::TopK{3, {3}, {1}})),
               fedams::DimensionError);
  EXPECT_THROW(fedams::decode(CompressedDelta(fedams::wire::TopK{3, {1, 1}, {1, 2}})),
               fedams::DimensionError);
  EXPECT_THROW(fedams::decode(CompressedDelta(fedams::wire::TopK{3, {1}, {1, 2}})),
               fedams::DimensionError);
}

TEST(Serialize, GoldenBytes) {
  using Bytes = std::vector<std::uint8_t>;
  EXPECT_EQ(CompressedDelta(fedams::wire::Dense{{1, 2}}).serialize(),
            (Bytes{0x00, 0x02, 0, 0, 0, 0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0x40}));
  EXPECT_EQ(CompressedDelta(fedams::wire::TopK{3, {1}, {-5}}).serialize(),
            (Bytes{0x01, 0x03, 0, 0, 0, 0x01, 0, 0, 0, 0x01, 0, 0, 0, 0x00, 0x00, 0xA0, 0xC0}));
  EXPECT_EQ(CompressedDelta(fedams::wire::SignScaled{2, {1, -1, 1}}).serialize(),
            (Bytes{0x02, 0x03, 0, 0, 0, 0x00, 0x00, 0x00, 0x40, 0x19}));
}

TEST(Serialize, RoundTripForExactlyRepresentableValues) {
  std::vector<CompressedDelta> cases{
      CompressedDelta(fedams::wire::Dense{{0.5, -3, 1024}}),
      CompressedDelta(fedams::wire::TopK{10, {0, 4, 9}, {1.25, -2, 8}}),
      CompressedDelta(fedams::wire::SignScaled{0.75, {0, 1, -1, 1, 0, 0, -1, 1, 1}}),
      CompressedDelta(fedams::wire::TopK{5, {}, {}}),
  };
  for (const auto& c : cases) EXPECT_EQ(CompressedDelta::deserialize(c.serialize()), c);
}

TEST(Serialize, TruncatedInputThrows) {
  auto bytes = CompressedDelta(fedams::wire::TopK{3, {1}, {-5}}).serialize();
  bytes.pop_back();
  EXPECT_ANY_THROW(CompressedDelta::deserialize(bytes));
  EXPECT_ANY_THROW(CompressedDelta::deserialize(std::vector<std::uint8_t>{9, 1, 0, 0, 0}));
}

TEST(BitCost, MatchesCostModel) {
  fedams::CostModel cost;
  ParamVector x(64, 1.0);
  EXPECT_EQ(fedams::compress(kIdentity, x).bit_cost(), cost.dense_bits(64));
  EXPECT_EQ(fedams::compress(topk(1.0 / 64), x).bit_cost(), 64u);
  EXPECT_EQ(fedams::compress(kSign, x).bit_cost(), 32u + 64u);
}

TEST(Spec, InvalidRatio) {
  EXPECT_THROW(topk(0.0).validate(), fedams::ConfigError);
  EXPECT_THROW(topk(1.5).validate(), fedams::ConfigError);
  EXPECT_EQ(fedams::parse_compressor_kind("scaled_sign"), CompressorKind::scaled_sign);
  EXPECT_THROW(fedams::parse_compressor_kind("qsgd"), fedams::ConfigError);
}
