#include "fedams/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "fedams/errors.hpp"
#include "fedams/server_opt.hpp"

namespace fedams {

void ParticipationSpec::validate() const {
  if (m < 1) throw ConfigError("participation.m must be >= 1");
  if (n < 1 || n > m)
    throw ConfigError("participation.n must be in [1, m] (n=" + std::to_string(n) +
                      ", m=" + std::to_string(m) + ")");
}

std::vector<ClientId> sample(const ParticipationSpec& spec, RandomStream& rng) {
  spec.validate();
  std::vector<ClientId> ids(spec.m);
  std::iota(ids.begin(), ids.end(), ClientId{0});
  if (spec.full()) return ids;
  for (std::size_t k = 0; k < spec.n; ++k) {
    const std::size_t pick = k + rng.uniform_below(spec.m - k);
    std::swap(ids[k], ids[pick]);
  }
  ids.resize(spec.n);
  std::sort(ids.begin(), ids.end());
  return ids;
}

RandomStream sampling_stream(std::uint64_t master_seed, std::uint64_t round) {
  return RandomStream(master_seed, {StreamPurpose::sampling, 0, round});
}

double participation_unbiasedness_check(std::span<const ParamVector> deltas,
                                        const ParticipationSpec& spec, std::size_t draws,
                                        std::uint64_t seed) {
  spec.validate();
  if (draws < 1) throw ConfigError("participation_unbiasedness_check: draws must be >= 1");
  if (deltas.size() != spec.m)
    throw ConfigError("participation_unbiasedness_check: need one delta per client");
  const ParamVector full = aggregate(deltas);
  // Running mean of (subset average - full average).
  ParamVector bias(full.dim());
  std::vector<ParamVector> chosen;
  chosen.reserve(spec.n);
  for (std::size_t t = 0; t < draws; ++t) {
    RandomStream rng = sampling_stream(seed, t);
    chosen.clear();
    for (ClientId i : sample(spec, rng)) chosen.push_back(deltas[i]);
    const ParamVector dev = aggregate(chosen) - full;
    const double w = 1.0 / static_cast<double>(t + 1);
    for (std::size_t j = 0; j < bias.dim(); ++j) bias[j] += (dev[j] - bias[j]) * w;
  }
  return l2_norm(bias);
}

}  // namespace fedams
