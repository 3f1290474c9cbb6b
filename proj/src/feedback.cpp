#include "fedams/feedback.hpp"

#include <optional>
#include <string>

#include "fedams/errors.hpp"

namespace fedams {

EfResult ef_step(const CompressorSpec& spec, const ParamVector& delta, const ParamVector& error) {
  require_same_dim(delta, error, "ef_step");
  const ParamVector corrected = delta + error;
  CompressedDelta transmitted = compress(spec, corrected);
  ParamVector next = corrected - decode(transmitted);
  return {std::move(transmitted), std::move(next)};
}

ClientErrorBank::ClientErrorBank(std::size_t num_clients, std::size_t dim)
    : errors_(num_clients, ParamVector(dim)), dim_(dim) {}

const ParamVector& ClientErrorBank::error(ClientId i) const {
  if (i >= errors_.size()) throw ConfigError("error bank: client id out of range");
  return errors_[i];
}

ParamVector ClientErrorBank::mean_error() const {
  ParamVector acc(dim_);
  for (const auto& e : errors_)
    for (std::size_t j = 0; j < dim_; ++j) acc[j] += e[j];
  return (1.0 / static_cast<double>(errors_.size())) * acc;
}

std::map<ClientId, CompressedDelta> ClientErrorBank::apply_round(
    std::span<const ClientId> participants, const std::map<ClientId, ParamVector>& deltas,
    const CompressorSpec& spec, const ExecPolicy& policy) {
  if (deltas.size() != participants.size())
    throw ConfigError("apply_round: deltas must cover exactly the participants");
  std::vector<const ParamVector*> inputs(participants.size());
  for (std::size_t n = 0; n < participants.size(); ++n) {
    const ClientId id = participants[n];
    if (n > 0 && id <= participants[n - 1])
      throw ConfigError("apply_round: participants must be sorted and distinct");
    if (id >= errors_.size())
      throw ConfigError("apply_round: participant " + std::to_string(id) + " out of range");
    auto it = deltas.find(id);
    if (it == deltas.end())
      throw ConfigError("apply_round: participant " + std::to_string(id) + " has no delta");
    require_same_dim(it->second, errors_[id], "apply_round");
    inputs[n] = &it->second;
  }

  std::vector<std::optional<EfResult>> results(participants.size());
  parallel_for(policy, participants.size(), [&](std::size_t n) {
    results[n].emplace(ef_step(spec, *inputs[n], errors_[participants[n]]));
  });

  std::map<ClientId, CompressedDelta> out;
  for (std::size_t n = 0; n < participants.size(); ++n) {
    errors_[participants[n]] = std::move(results[n]->next_error);
    out.emplace(participants[n], std::move(results[n]->transmitted));
  }
  ++round_;
  return out;
}

}  // namespace fedams
