#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fedams/core.hpp"

namespace fedams {

enum class CompressorKind { identity, topk, scaled_sign };

std::string to_string(CompressorKind kind);
CompressorKind parse_compressor_kind(const std::string& name);

struct CompressorSpec {
  CompressorKind kind = CompressorKind::identity;
  double ratio = 1.0;  // topk only, in (0, 1]

  void validate() const;
  /// k = max(1, floor(ratio * d)) for topk.
  std::size_t topk_count(std::size_t d) const;
};

namespace wire {

struct Dense {
  std::vector<double> values;
  bool operator==(const Dense&) const = default;
};

struct TopK {
  std::uint32_t dim = 0;
  std::vector<std::uint32_t> indices;  // strictly increasing
  std::vector<double> values;
  bool operator==(const TopK&) const = default;
};

struct SignScaled {
  double scale = 0.0;  // |x|_1 / d
  std::vector<std::int8_t> signs;  // each in {-1, 0, +1}
  bool operator==(const SignScaled&) const = default;
};

}  // namespace wire

/// Wire representation of a compressed update.
class CompressedDelta {
 public:
  using Payload = std::variant<wire::Dense, wire::TopK, wire::SignScaled>;

  explicit CompressedDelta(Payload payload);

  const Payload& payload() const { return payload_; }
  std::size_t dim() const;
  CompressorKind kind() const;
  /// Uplink bits under the 32-bit float / 32-bit index cost model.
  std::uint64_t bit_cost() const;

  /// Little-endian: tag (u8), dim (u32), payload. Dense and TopK values and
  /// the sign scale are f32; TopK adds k (u32) then k u32 indices; signs are
  /// packed 2 bits each, low bits first (00 = 0, 01 = +1, 10 = -1).
  std::vector<std::uint8_t> serialize() const;
  static CompressedDelta deserialize(std::span<const std::uint8_t> bytes);

  bool operator==(const CompressedDelta&) const = default;

 private:
  Payload payload_;
};

CompressedDelta compress(const CompressorSpec& spec, const ParamVector& x);

/// Dense vector represented by c. Throws DimensionError on malformed indices.
ParamVector decode(const CompressedDelta& c);

/// Contraction factor q with |C(x) - x| <= q |x|. topk: sqrt(1 - k/d)
/// independent of x. scaled_sign: sqrt(1 - |x|_1^2 / (d |x|_2^2)), 0 for x = 0.
double contraction_q(const CompressorSpec& spec, const ParamVector& x);

/// |C(x) - x|_2
double compression_error(const CompressorSpec& spec, const ParamVector& x);

}  // namespace fedams
