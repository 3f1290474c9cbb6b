#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedams/core.hpp"
#include "fedams/objectives.hpp"
#include "fedams/rng.hpp"

namespace fedams {

struct ParticipationSpec {
  std::size_t m = 1;  // total clients
  std::size_t n = 1;  // participants per round

  void validate() const;
  bool full() const { return n == m; }
};

/// Uniform n-subset of {0..m-1} without replacement (partial Fisher-Yates),
/// returned sorted.
std::vector<ClientId> sample(const ParticipationSpec& spec, RandomStream& rng);

/// Stream for round t. Sampling for a run is a pure function of (seed, t).
RandomStream sampling_stream(std::uint64_t master_seed, std::uint64_t round);

/// |mean over `draws` sampled subsets of the subset average - full average|.
double participation_unbiasedness_check(std::span<const ParamVector> deltas,
                                        const ParticipationSpec& spec, std::size_t draws,
                                        std::uint64_t seed);

}  // namespace fedams
