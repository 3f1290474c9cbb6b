#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedams/config.hpp"
#include "fedams/errors.hpp"
#include "fedams/feedback.hpp"
#include "fedams/parallel.hpp"
#include "fedams/server_opt.hpp"

namespace fedams {

struct RoundRecord {
  std::size_t t = 0;  // rounds completed; metrics are for the model after round t
  double loss = 0.0;
  double grad_norm_sq = 0.0;
  std::vector<ClientId> participants;
  std::uint64_t round_uplink_bits = 0;
  std::uint64_t cum_uplink_bits = 0;
};

// Everything a round touched, handed to RunOptions::observer after the
// server update. Vectors are aligned with `participants`.
struct RoundTrace {
  std::size_t t = 0;  // 1-based round index
  const ParamVector& x_before;
  const ParamVector& x_after;
  std::span<const ClientId> participants;
  std::span<const ParamVector> raw_deltas;
  std::span<const ParamVector> transmitted;  // decoded; equals raw_deltas without error feedback
  const ParamVector& aggregated;
  const ServerOptState& server;
  const ClientErrorBank* bank;  // null without error feedback
};

struct RunOptions {
  ExecPolicy exec;
  std::function<void(const RoundTrace&)> observer;
};

struct RunResult {
  std::vector<RoundRecord> records;
  double initial_loss = 0.0;
  double initial_grad_norm_sq = 0.0;
  ParamVector initial_x;
  ParamVector final_x;
  std::optional<ServerOptState> server;
  std::uint64_t total_uplink_bits = 0;
  double wall_time_s = 0.0;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, std::vector<RoundRecord> records)
      : NumericalError(what), records_(std::move(records)) {}
  const std::vector<RoundRecord>& records() const { return records_; }

 private:
  std::vector<RoundRecord> records_;
};

/// Builds (or loads) the objective named by the config.
Objective make_objective(const ExperimentConfig& config);

/// Starting point x_1 for the config.
ParamVector initial_point(const ExperimentConfig& config, std::size_t dim);

/// T rounds of sample -> broadcast -> local SGD -> (error feedback) ->
/// aggregate -> server step. Deterministic given master_seed, independent of
/// exec.threads.
RunResult run(const ExperimentConfig& config, const RunOptions& options = {});
RunResult run(const ExperimentConfig& config, const Objective& objective,
              const RunOptions& options = {});

enum class SweepAxis { n, r, K, optimizer };

SweepAxis parse_sweep_axis(const std::string& name);
std::string to_string(SweepAxis axis);

struct SweepOptions {
  std::vector<std::uint64_t> seeds;  // empty: base master_seed only
  std::optional<double> loss_threshold;
  ExecPolicy exec;
};

struct RunSummary {
  std::uint64_t seed = 0;
  double final_loss = 0.0;
  double min_grad_norm_sq = 0.0;
  std::optional<std::size_t> rounds_to_threshold;
  std::uint64_t total_bits = 0;
};

struct SweepPoint {
  std::string value;
  std::vector<RunSummary> runs;
  double median_final_loss = 0.0;
  /// Median over seeds; a run that never reaches the threshold counts as
  /// rounds + 1. Absent without a threshold.
  std::optional<double> median_rounds_to_threshold;
  std::uint64_t median_total_bits = 0;
};

/// Applies one axis value ("5", "1/16", "fedavg", ...) to a copy of base.
ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, const std::string& value);

std::vector<SweepPoint> sweep(const ExperimentConfig& base, SweepAxis axis,
                              std::span<const std::string> values, const SweepOptions& options = {});

RunSummary summarize(const RunResult& result, std::uint64_t seed, std::optional<double> threshold);

/// CSV header: round,loss,grad_norm_sq,participants,round_bits,cum_bits
std::string records_to_csv(std::span<const RoundRecord> records);
void emit_csv(std::span<const RoundRecord> records, const std::filesystem::path& path);
nlohmann::json run_summary_json(const ExperimentConfig& config, const RunResult& result);
void emit_summary(const ExperimentConfig& config, const RunResult& result,
                  const std::filesystem::path& path);
nlohmann::json sweep_summary_json(SweepAxis axis, std::span<const SweepPoint> points);

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Fast invariant checks across all modules.
std::vector<SelftestResult> selftest(const ExecPolicy& exec = {});

}  // namespace fedams
