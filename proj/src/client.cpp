#include "fedams/client.hpp"

#include <cmath>

#include "fedams/errors.hpp"

namespace fedams {

void LocalRunConfig::validate() const {
  if (K < 1) throw ConfigError("local.K must be >= 1");
  if (!(eta_l > 0.0) || !std::isfinite(eta_l)) throw ConfigError("local.eta_l must be > 0");
  if (batch < 1) throw ConfigError("local.batch must be >= 1");
}

ParamVector local_sgd(const Objective& obj, ClientId client, const ParamVector& x_global,
                      const LocalRunConfig& cfg, RandomStream& rng) {
  cfg.validate();
  ParamVector x = x_global;
  for (std::size_t k = 0; k < cfg.K; ++k) {
    const ParamVector g = obj.stochastic_gradient(client, x, cfg.batch, rng);
    for (std::size_t j = 0; j < x.dim(); ++j) x[j] -= cfg.eta_l * g[j];
  }
  return x - x_global;
}

bool delta_norm_check(const ParamVector& delta, const LocalRunConfig& cfg, double G) {
  return l2_norm(delta) <= cfg.eta_l * static_cast<double>(cfg.K) * G + 1e-9;
}

}  // namespace fedams
