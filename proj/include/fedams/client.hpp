#pragma once

#include <cstddef>

#include "fedams/core.hpp"
#include "fedams/objectives.hpp"
#include "fedams/rng.hpp"

namespace fedams {

struct LocalRunConfig {
  std::size_t K = 1;       // local steps
  double eta_l = 0.01;     // local learning rate
  std::size_t batch = 1;   // rows per stochastic gradient, drawn with replacement

  void validate() const;
};

/// K steps of local SGD from x_global; returns x_K - x_global.
ParamVector local_sgd(const Objective& obj, ClientId client, const ParamVector& x_global,
                      const LocalRunConfig& cfg, RandomStream& rng);

/// |delta| <= eta_l K G (+1e-9): the bound for K steps with gradients clipped to G.
bool delta_norm_check(const ParamVector& delta, const LocalRunConfig& cfg, double G);

}  // namespace fedams
