// Command-line front end: run, sweep, verify-tables, selftest, dump-data.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "fedams/accounting.hpp"
#include "fedams/errors.hpp"
#include "fedams/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitIo = 3;

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--seed", flags.seed, "Override master_seed");
  cmd->add_option("--threads", flags.threads, "Worker threads for client fan-out")->check(CLI::PositiveNumber);
  cmd->add_option("--out", flags.out, "Output path prefix (overrides output_path)");
}

fedams::ExperimentConfig load_with_flags(const std::string& path, const CommonFlags& flags) {
  auto cfg = fedams::load_config(path);
  if (flags.seed) cfg.set_master_seed(*flags.seed);
  if (flags.out) cfg.output_path = *flags.out;
  return cfg;
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_run(const std::string& config_path, const CommonFlags& flags) {
  const auto cfg = load_with_flags(config_path, flags);
  const std::string prefix = cfg.output_path;
  try {
    const auto result = fedams::run(cfg, {fedams::ExecPolicy{flags.threads}, {}});
    fedams::emit_csv(result.records, prefix + ".csv");
    fedams::emit_summary(cfg, result, prefix + ".summary.json");
    result.server->save(prefix + ".state.bin");
    const double final_loss = result.records.empty() ? result.initial_loss : result.records.back().loss;
    std::printf("rounds=%zu initial_loss=%.6g final_loss=%.6g uplink_bits=%llu -> %s.csv\n", cfg.rounds,
                result.initial_loss, final_loss, static_cast<unsigned long long>(result.total_uplink_bits),
                prefix.c_str());
    return kExitOk;
  } catch (const fedams::DivergenceError& e) {
    fedams::emit_csv(e.records(), prefix + ".csv");
    std::fprintf(stderr, "diverged: %s (partial records in %s.csv)\n", e.what(), prefix.c_str());
    return kExitDiverged;
  }
}

int cmd_sweep(const std::string& config_path, const CommonFlags& flags, const std::string& axis_name,
              const std::string& values_text, const std::string& seeds_text,
              std::optional<double> threshold) {
  const auto cfg = load_with_flags(config_path, flags);
  const auto axis = fedams::parse_sweep_axis(axis_name);
  const auto values = split_csv(values_text);
  if (values.empty()) throw fedams::ConfigError("--values must list at least one value");
  fedams::SweepOptions opts;
  opts.exec.threads = flags.threads;
  opts.loss_threshold = threshold;
  for (const auto& s : split_csv(seeds_text)) opts.seeds.push_back(std::stoull(s));
  const auto points = fedams::sweep(cfg, axis, values, opts);

  std::printf("%-12s %-16s %-18s %-14s\n", axis_name.c_str(), "median_loss", "median_rounds_to_thr",
              "median_bits");
  for (const auto& p : points) {
    const std::string rounds =
        p.median_rounds_to_threshold ? std::to_string(*p.median_rounds_to_threshold) : std::string("-");
    std::printf("%-12s %-16.6g %-18s %-14llu\n", p.value.c_str(), p.median_final_loss, rounds.c_str(),
                static_cast<unsigned long long>(p.median_total_bits));
  }
  const std::string path = cfg.output_path + "_sweep.json";
  std::ofstream out(path);
  out << fedams::sweep_summary_json(axis, points).dump(2) << "\n";
  if (!out) throw fedams::IoError("cannot write " + path);
  return kExitOk;
}

int cmd_verify_tables(std::size_t d, std::uint64_t T) {
  const auto start = std::chrono::steady_clock::now();
  const auto rows = fedams::communication_table(d, T);
  std::printf("Closed forms (T rounds, d coordinates, 32-bit floats and indices):\n");
  std::printf("  %-14s %-14s %-26s %-20s\n", "Method", "Uncompressed", "One-way", "Two-way");
  std::printf("  %-14s %-14s %-26s %-20s\n", "Scaled sign", "32d x 2T", "(32+d) x T + 32d x T", "(32+d) x 2T");
  std::printf("  %-14s %-14s %-26s %-20s\n\n", "Top-k", "32d x 2T", "32(2k+d) x T", "32 x 2k x 2T");

  // Published three-significant-digit values for d = 11,173,962 and T = 500.
  const double published[4][3] = {{3.58e11, 1.84e11, 1.12e10},
                                   {3.58e11, 1.84e11, 1.12e10},
                                   {3.58e11, 1.82e11, 5.59e9},
                                   {3.58e11, 1.80e11, 2.79e9}};
  const bool compare = d == 11173962 && T == 500;
  std::printf("Totals for d=%zu, T=%llu:\n", d, static_cast<unsigned long long>(T));
  std::printf("  %-14s %-12s %-12s %-12s\n", "Method", "Uncompressed", "One-way", "Two-way");
  bool ok = true;
  int cell = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double got[3] = {static_cast<double>(rows[r].uncompressed), static_cast<double>(rows[r].one_way),
                           static_cast<double>(rows[r].two_way)};
    std::printf("  %-14s %-12.3e %-12.3e %-12.3e\n", rows[r].method.c_str(), got[0], got[1], got[2]);
    if (!compare) continue;
    for (int c = 0; c < 3; ++c) {
      const double rel = std::abs(got[c] - published[r][c]) / published[r][c];
      ok = ok && rel < 0.01;
      ++cell;
    }
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (compare)
    std::printf("\n%s: %d cells within 1%% of the reference values (%.3f s)\n", ok ? "PASS" : "FAIL", cell,
                elapsed);
  return ok ? kExitOk : kExitConfig;
}

int cmd_selftest(int threads) {
  bool ok = true;
  for (const auto& r : fedams::selftest(fedams::ExecPolicy{threads})) {
    std::printf("[%s] %s%s%s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.empty() ? "" : ": ",
                r.detail.c_str());
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitDiverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated adaptive optimization simulator with compressed uplinks"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  std::string run_config;
  auto* run = app.add_subcommand("run", "Run one experiment from a JSON config");
  run->add_option("config", run_config, "Experiment config (JSON)")->required();
  add_common(run, run_flags);

  CommonFlags sweep_flags;
  std::string sweep_config, axis, values, seeds;
  std::optional<double> threshold;
  auto* sweep = app.add_subcommand("sweep", "Run one experiment per axis value");
  sweep->add_option("config", sweep_config, "Base experiment config (JSON)")->required();
  sweep->add_option("--axis", axis, "n, r, K or optimizer")->required();
  sweep->add_option("--values", values, "Comma-separated axis values")->required();
  sweep->add_option("--seeds", seeds, "Comma-separated master seeds (default: config seed)");
  sweep->add_option("--threshold", threshold, "Loss threshold for rounds-to-threshold");
  add_common(sweep, sweep_flags);

  std::size_t table_d = 11173962;
  std::uint64_t table_T = 500;
  auto* tables = app.add_subcommand("verify-tables", "Print communication-bit tables");
  tables->add_option("--d", table_d, "Model dimension");
  tables->add_option("--T", table_T, "Rounds");

  int selftest_threads = 1;
  auto* self = app.add_subcommand("selftest", "Run the built-in invariant checks");
  self->add_option("--threads", selftest_threads, "Worker threads")->check(CLI::PositiveNumber);

  std::string dump_config, dump_dir;
  auto* dump = app.add_subcommand("dump-data", "Write the generated client datasets as CSV");
  dump->add_option("config", dump_config, "Experiment config (JSON)")->required();
  dump->add_option("--out", dump_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_config, run_flags);
    if (*sweep) return cmd_sweep(sweep_config, sweep_flags, axis, values, seeds, threshold);
    if (*tables) return cmd_verify_tables(table_d, table_T);
    if (*self) return cmd_selftest(selftest_threads);
    if (*dump) {
      fedams::make_objective(fedams::load_config(dump_config)).dump_csv(dump_dir);
      return kExitOk;
    }
  } catch (const fedams::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const fedams::DimensionError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const fedams::NumericalError& e) {
    std::fprintf(stderr, "numerical divergence: %s\n", e.what());
    return kExitDiverged;
  } catch (const fedams::IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kExitIo;
  }
  return kExitOk;
}
