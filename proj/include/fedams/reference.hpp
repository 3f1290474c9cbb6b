#pragma once

#include <vector>

#include "fedams/config.hpp"
#include "fedams/core.hpp"
#include "fedams/objectives.hpp"

namespace fedams::reference {

// Single-threaded transcription of the FedAMS / FedCAMS round loop with the
// optimizer moments and error memories held in plain local arrays. Shares
// only the objective, sampler and compressor primitives with the harness and
// exists so tests and benchmarks can compare the parallel path against it.
//
// Returns x_1 .. x_{T+1}.
std::vector<ParamVector> trajectory(const ExperimentConfig& config, const Objective& objective);

}  // namespace fedams::reference
