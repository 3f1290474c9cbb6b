#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fedams {

struct CompressorSpec;

// 32-bit floats on the wire and 32-bit top-k indices.
struct CostModel {
  std::uint64_t float_bits = 32;
  std::uint64_t index_bits = 32;

  std::uint64_t dense_bits(std::size_t d) const { return float_bits * d; }
  std::uint64_t topk_bits(std::size_t k) const { return (float_bits + index_bits) * k; }
  /// One scale float plus one bit per coordinate.
  std::uint64_t scaled_sign_bits(std::size_t d) const { return float_bits + d; }
};

/// Client-to-server bits for one client in one round.
std::uint64_t per_round_uplink_bits(const CompressorSpec& compressor, std::size_t d);

/// Server-to-client broadcast bits per round (uncompressed model).
std::uint64_t per_round_downlink_bits(std::size_t d);

/// Closed-form totals over T rounds without a per-client multiplier:
///   identity:    32d * 2T (both directions)
///   scaled_sign: one-way (32 + d) T + 32d T, two-way (32 + d) 2T
///   topk:        one-way 32(2k + d) T,      two-way 32 * 2k * 2T
std::uint64_t table_mode_totals(const CompressorSpec& compressor, std::size_t d, std::uint64_t T,
                                bool two_way);

struct RoundTraffic {
  std::size_t participants = 0;
  std::uint64_t bits_per_client = 0;
};

/// Sum over rounds of participants * per-client uplink bits.
std::uint64_t cumulative_uplink(std::span<const RoundTraffic> rounds);

struct TableRow {
  std::string method;
  std::uint64_t uncompressed = 0;
  std::uint64_t one_way = 0;
  std::uint64_t two_way = 0;
};

/// Rows for scaled sign and top-k with r in {1/64, 1/128, 1/256}.
std::vector<TableRow> communication_table(std::size_t d, std::uint64_t T);

}  // namespace fedams
