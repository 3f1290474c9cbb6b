#include "fedams/accounting.hpp"

#include "fedams/compressors.hpp"

namespace fedams {

std::uint64_t per_round_uplink_bits(const CompressorSpec& compressor, std::size_t d) {
  const CostModel model;
  switch (compressor.kind) {
    case CompressorKind::identity: return model.dense_bits(d);
    case CompressorKind::topk: return model.topk_bits(compressor.topk_count(d));
    case CompressorKind::scaled_sign: return model.scaled_sign_bits(d);
  }
  return model.dense_bits(d);
}

std::uint64_t per_round_downlink_bits(std::size_t d) { return CostModel{}.dense_bits(d); }

std::uint64_t table_mode_totals(const CompressorSpec& compressor, std::size_t d, std::uint64_t T,
                                bool two_way) {
  const std::uint64_t up = per_round_uplink_bits(compressor, d);
  const std::uint64_t down = per_round_downlink_bits(d);
  if (compressor.kind == CompressorKind::identity) return (up + down) * T;
  // Two-way compresses the broadcast with the same operator.
  return two_way ? 2 * up * T : (up + down) * T;
}

std::uint64_t cumulative_uplink(std::span<const RoundTraffic> rounds) {
  std::uint64_t total = 0;
  for (const auto& r : rounds) total += r.participants * r.bits_per_client;
  return total;
}

std::vector<TableRow> communication_table(std::size_t d, std::uint64_t T) {
  const CompressorSpec dense{CompressorKind::identity, 1.0};
  const std::uint64_t uncompressed = table_mode_totals(dense, d, T, false);
  std::vector<TableRow> rows;
  auto add = [&](std::string name, CompressorSpec spec) {
    rows.push_back({std::move(name), uncompressed, table_mode_totals(spec, d, T, false),
                    table_mode_totals(spec, d, T, true)});
  };
  add("Scaled sign", {CompressorKind::scaled_sign, 1.0});
  add("Top-k r=1/64", {CompressorKind::topk, 1.0 / 64});
  add("Top-k r=1/128", {CompressorKind::topk, 1.0 / 128});
  add("Top-k r=1/256", {CompressorKind::topk, 1.0 / 256});
  return rows;
}

}  // namespace fedams
