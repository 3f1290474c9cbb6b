#include "fedams/reference.hpp"

#include <algorithm>
#include <cmath>

#include "fedams/compressors.hpp"
#include "fedams/errors.hpp"
#include "fedams/harness.hpp"
#include "fedams/sampler.hpp"

namespace fedams::reference {

std::vector<ParamVector> trajectory(const ExperimentConfig& config, const Objective& objective) {
  config.validate();
  const std::size_t d = objective.param_dim();
  const std::size_t m = objective.num_clients();
  const auto& opt = config.optimizer;
  if (opt.family != OptimizerFamily::fedams && opt.family != OptimizerFamily::fedavg)
    throw ConfigError("reference::trajectory covers fedavg and fedams only");

  ParticipationSpec participation = config.participation;
  participation.m = m;

  std::vector<double> mom(d, 0.0), var(d, 0.0), var_max(d, 0.0);
  std::vector<std::vector<double>> err(m, std::vector<double>(d, 0.0));

  ParamVector x = initial_point(config, d);
  std::vector<ParamVector> path{x};

  for (std::size_t t = 1; t <= config.rounds; ++t) {
    RandomStream sampler_rng = sampling_stream(config.master_seed, t);
    const std::vector<ClientId> chosen = sample(participation, sampler_rng);

    std::vector<double> mean(d, 0.0);
    for (std::size_t n = 0; n < chosen.size(); ++n) {
      const ClientId i = chosen[n];
      RandomStream rng(config.master_seed, {StreamPurpose::local_sgd, i, t});
      ParamVector local = x;
      for (std::size_t k = 0; k < config.local.K; ++k) {
        const ParamVector g = objective.stochastic_gradient(i, local, config.local.batch, rng);
        for (std::size_t j = 0; j < d; ++j) local[j] -= config.local.eta_l * g[j];
      }
      ParamVector upload(d);
      for (std::size_t j = 0; j < d; ++j) upload[j] = local[j] - x[j];

      if (config.error_feedback) {
        ParamVector corrected(d);
        for (std::size_t j = 0; j < d; ++j) corrected[j] = upload[j] + err[i][j];
        const ParamVector sent = decode(compress(config.compressor, corrected));
        for (std::size_t j = 0; j < d; ++j) err[i][j] = corrected[j] - sent[j];
        upload = sent;
      }

      const double w = 1.0 / static_cast<double>(n + 1);
      for (std::size_t j = 0; j < d; ++j) mean[j] = n == 0 ? upload[j] : mean[j] + (upload[j] - mean[j]) * w;
    }

    ParamVector next(d);
    for (std::size_t j = 0; j < d; ++j) {
      if (opt.family == OptimizerFamily::fedavg) {
        next[j] = x[j] + opt.eta * mean[j];
        continue;
      }
      mom[j] = opt.beta1 * mom[j] + (1.0 - opt.beta1) * mean[j];
      var[j] = opt.beta2 * var[j] + (1.0 - opt.beta2) * (mean[j] * mean[j]);
      var_max[j] = std::max({var_max[j], var[j], opt.epsilon});
      next[j] = x[j] + opt.eta * mom[j] / std::sqrt(var_max[j]);
    }
    x = std::move(next);
    path.push_back(x);
  }
  return path;
}

}  // namespace fedams::reference
