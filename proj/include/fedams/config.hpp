#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "fedams/client.hpp"
#include "fedams/compressors.hpp"
#include "fedams/objectives.hpp"
#include "fedams/sampler.hpp"
#include "fedams/server_opt.hpp"

namespace fedams {

struct ExperimentConfig {
  ObjectiveSpec objective;
  bool objective_seed_explicit = false;
  std::optional<std::filesystem::path> data_dir;  // load client CSVs instead of generating

  ServerHyperparams optimizer;
  LocalRunConfig local;
  ParticipationSpec participation;
  CompressorSpec compressor;
  /// Routes every update through the error bank. Defaults to true when the
  /// compressor is not identity.
  bool error_feedback = false;

  std::size_t rounds = 1;
  std::uint64_t master_seed = 0;
  std::size_t eval_every = 1;
  double init_scale = 0.0;  // x_1 ~ N(0, init_scale^2); zero vector by default
  std::string output_path = "fedams_run";

  /// Updates master_seed; the objective seed follows unless set explicitly.
  void set_master_seed(std::uint64_t seed);
  void validate() const;
};

/// Strict parse: unknown fields raise ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

}  // namespace fedams
