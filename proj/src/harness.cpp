#include "fedams/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fedams/accounting.hpp"
#include "fedams/client.hpp"
#include "fedams/errors.hpp"
#include "fedams/sampler.hpp"

namespace fedams {
namespace {

constexpr std::uint64_t kInitTag = 4;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_fraction(const std::string& text) {
  try {
    const auto slash = text.find('/');
    if (slash == std::string::npos) return std::stod(text);
    return std::stod(text.substr(0, slash)) / std::stod(text.substr(slash + 1));
  } catch (const std::exception&) {
    throw ConfigError("cannot parse ratio '" + text + "'");
  }
}

std::size_t parse_count(const std::string& text, const char* what) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(text, &pos);
    if (pos != text.size() || v < 1) throw std::invalid_argument(text);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError(std::string("cannot parse ") + what + " '" + text + "'");
  }
}

template <class T>
T median_of(std::vector<T> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

Objective make_objective(const ExperimentConfig& config) {
  if (config.data_dir) return Objective::load_csv(config.objective, *config.data_dir);
  return Objective::build(config.objective);
}

ParamVector initial_point(const ExperimentConfig& config, std::size_t dim) {
  ParamVector x(dim);
  if (config.init_scale > 0.0) {
    RandomStream rng(config.master_seed, {StreamPurpose::data, 0, kInitTag});
    for (auto& v : x) v = config.init_scale * rng.normal();
  }
  return x;
}

RunResult run(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const Objective objective = make_objective(config);
  return run(config, objective, options);
}

RunResult run(const ExperimentConfig& config, const Objective& objective, const RunOptions& options) {
  config.validate();
  ParticipationSpec participation = config.participation;
  if (config.data_dir) participation.m = objective.num_clients();
  if (participation.m != objective.num_clients())
    throw ConfigError("participation.m does not match the objective's client count");
  participation.validate();

  const auto start = std::chrono::steady_clock::now();
  const std::size_t d = objective.param_dim();
  const bool feedback = config.error_feedback;

  RunResult result;
  ParamVector x = initial_point(config, d);
  result.initial_x = x;
  result.initial_loss = objective.loss(x);
  result.initial_grad_norm_sq = squared_norm(objective.full_gradient(x));

  ServerOptState server(config.optimizer, d);
  std::optional<ClientErrorBank> bank;
  if (feedback) bank.emplace(objective.num_clients(), d);

  std::uint64_t cum_bits = 0;
  for (std::size_t t = 1; t <= config.rounds; ++t) {
    RandomStream sampler_rng = sampling_stream(config.master_seed, t);
    const std::vector<ClientId> participants = sample(participation, sampler_rng);

    std::vector<ParamVector> raw(participants.size());
    parallel_for(options.exec, participants.size(), [&](std::size_t n) {
      RandomStream rng(config.master_seed, {StreamPurpose::local_sgd, participants[n], t});
      raw[n] = local_sgd(objective, participants[n], x, config.local, rng);
    });

    std::vector<ParamVector> transmitted;
    std::uint64_t round_bits = 0;
    if (feedback) {
      std::map<ClientId, ParamVector> by_client;
      for (std::size_t n = 0; n < participants.size(); ++n) by_client.emplace(participants[n], raw[n]);
      const auto sent = bank->apply_round(participants, by_client, config.compressor, options.exec);
      transmitted.reserve(participants.size());
      for (ClientId id : participants) {
        const CompressedDelta& c = sent.at(id);
        round_bits += c.bit_cost();
        transmitted.push_back(decode(c));
      }
    } else {
      transmitted = raw;
      round_bits = participants.size() * per_round_uplink_bits(config.compressor, d);
    }
    cum_bits += round_bits;

    const ParamVector aggregated = aggregate(transmitted);
    ParamVector x_next;
    try {
      x_next = server.step(aggregated, x);
    } catch (const NumericalError& e) {
      throw DivergenceError(std::string(e.what()) + " at round " + std::to_string(t), result.records);
    }

    const bool record = t % config.eval_every == 0 || t == config.rounds;
    if (record || !all_finite(x_next)) {
      RoundRecord rec;
      rec.t = t;
      rec.loss = all_finite(x_next) ? objective.loss(x_next) : std::nan("");
      rec.grad_norm_sq = all_finite(x_next) ? squared_norm(objective.full_gradient(x_next)) : std::nan("");
      rec.participants = participants;
      rec.round_uplink_bits = round_bits;
      rec.cum_uplink_bits = cum_bits;
      result.records.push_back(std::move(rec));
      if (!std::isfinite(result.records.back().loss) || !std::isfinite(result.records.back().grad_norm_sq))
        throw DivergenceError("non-finite loss at round " + std::to_string(t), result.records);
    }

    if (options.observer) {
      const RoundTrace trace{t,           x,          x_next, participants, raw, transmitted,
                             aggregated, server, bank ? &*bank : nullptr};
      options.observer(trace);
    }
    x = std::move(x_next);
  }

  result.final_x = std::move(x);
  result.server.emplace(std::move(server));
  result.total_uplink_bits = cum_bits;
  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "n") return SweepAxis::n;
  if (name == "r") return SweepAxis::r;
  if (name == "K") return SweepAxis::K;
  if (name == "optimizer") return SweepAxis::optimizer;
  throw ConfigError("unknown sweep axis '" + name + "' (expected n, r, K or optimizer)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::n: return "n";
    case SweepAxis::r: return "r";
    case SweepAxis::K: return "K";
    case SweepAxis::optimizer: return "optimizer";
  }
  return "unknown";
}

ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, const std::string& value) {
  ExperimentConfig cfg = base;
  switch (axis) {
    case SweepAxis::n:
      cfg.participation.n = parse_count(value, "participant count");
      break;
    case SweepAxis::r:
      cfg.compressor.kind = CompressorKind::topk;
      cfg.compressor.ratio = parse_fraction(value);
      cfg.error_feedback = true;
      break;
    case SweepAxis::K:
      cfg.local.K = parse_count(value, "local step count");
      break;
    case SweepAxis::optimizer:
      cfg.optimizer.family = parse_optimizer_family(value);
      cfg.optimizer.epsilon = default_epsilon(cfg.optimizer.family);
      break;
  }
  cfg.validate();
  return cfg;
}

RunSummary summarize(const RunResult& result, std::uint64_t seed, std::optional<double> threshold) {
  RunSummary s;
  s.seed = seed;
  s.final_loss = result.records.empty() ? result.initial_loss : result.records.back().loss;
  s.min_grad_norm_sq = result.initial_grad_norm_sq;
  for (const auto& r : result.records) s.min_grad_norm_sq = std::min(s.min_grad_norm_sq, r.grad_norm_sq);
  s.total_bits = result.total_uplink_bits;
  if (threshold) {
    if (result.initial_loss <= *threshold) {
      s.rounds_to_threshold = 0;
    } else {
      for (const auto& r : result.records) {
        if (r.loss <= *threshold) {
          s.rounds_to_threshold = r.t;
          break;
        }
      }
    }
  }
  return s;
}

std::vector<SweepPoint> sweep(const ExperimentConfig& base, SweepAxis axis,
                              std::span<const std::string> values, const SweepOptions& options) {
  std::vector<std::uint64_t> seeds = options.seeds;
  if (seeds.empty()) seeds.push_back(base.master_seed);

  std::vector<SweepPoint> points;
  for (const auto& value : values) {
    const ExperimentConfig cfg_value = apply_axis(base, axis, value);
    SweepPoint point;
    point.value = value;
    for (std::uint64_t seed : seeds) {
      ExperimentConfig cfg = cfg_value;
      cfg.set_master_seed(seed);
      const RunResult res = run(cfg, RunOptions{options.exec, {}});
      point.runs.push_back(summarize(res, seed, options.loss_threshold));
    }
    std::vector<double> losses;
    std::vector<std::uint64_t> bits;
    std::vector<double> hits;
    for (const auto& r : point.runs) {
      losses.push_back(r.final_loss);
      bits.push_back(r.total_bits);
      hits.push_back(static_cast<double>(r.rounds_to_threshold.value_or(cfg_value.rounds + 1)));
    }
    point.median_final_loss = median_of(losses);
    point.median_total_bits = median_of(bits);
    if (options.loss_threshold) point.median_rounds_to_threshold = median_of(hits);
    points.push_back(std::move(point));
  }
  return points;
}

std::string records_to_csv(std::span<const RoundRecord> records) {
  std::ostringstream out;
  out << "round,loss,grad_norm_sq,participants,round_bits,cum_bits\n";
  for (const auto& r : records) {
    out << r.t << ',' << format_double(r.loss) << ',' << format_double(r.grad_norm_sq) << ',';
    for (std::size_t n = 0; n < r.participants.size(); ++n) {
      if (n > 0) out << ';';
      out << r.participants[n];
    }
    out << ',' << r.round_uplink_bits << ',' << r.cum_uplink_bits << '\n';
  }
  return out.str();
}

void emit_csv(std::span<const RoundRecord> records, const std::filesystem::path& path) {
  write_text(path, records_to_csv(records));
}

nlohmann::json run_summary_json(const ExperimentConfig& config, const RunResult& result) {
  const RunSummary s = summarize(result, config.master_seed, std::nullopt);
  nlohmann::json doc;
  doc["config"] = to_json(config);
  doc["initial_loss"] = result.initial_loss;
  doc["final_loss"] = s.final_loss;
  doc["min_grad_norm_sq"] = s.min_grad_norm_sq;
  doc["total_bits"] = result.total_uplink_bits;
  doc["rounds_recorded"] = result.records.size();
  doc["wall_time_s"] = result.wall_time_s;
  return doc;
}

void emit_summary(const ExperimentConfig& config, const RunResult& result,
                  const std::filesystem::path& path) {
  write_text(path, run_summary_json(config, result).dump(2) + "\n");
}

nlohmann::json sweep_summary_json(SweepAxis axis, std::span<const SweepPoint> points) {
  nlohmann::json doc;
  doc["axis"] = to_string(axis);
  doc["points"] = nlohmann::json::array();
  for (const auto& p : points) {
    nlohmann::json jp;
    jp["value"] = p.value;
    jp["median_final_loss"] = p.median_final_loss;
    jp["median_total_bits"] = p.median_total_bits;
    jp["median_rounds_to_threshold"] =
        p.median_rounds_to_threshold ? nlohmann::json(*p.median_rounds_to_threshold) : nlohmann::json(nullptr);
    jp["runs"] = nlohmann::json::array();
    for (const auto& r : p.runs) {
      jp["runs"].push_back({{"seed", r.seed},
                            {"final_loss", r.final_loss},
                            {"min_grad_norm_sq", r.min_grad_norm_sq},
                            {"total_bits", r.total_bits},
                            {"rounds_to_threshold", r.rounds_to_threshold
                                                        ? nlohmann::json(*r.rounds_to_threshold)
                                                        : nlohmann::json(nullptr)}});
    }
    doc["points"].push_back(std::move(jp));
  }
  return doc;
}

}  // namespace fedams
