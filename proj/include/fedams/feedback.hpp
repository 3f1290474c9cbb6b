#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "fedams/compressors.hpp"
#include "fedams/core.hpp"
#include "fedams/objectives.hpp"
#include "fedams/parallel.hpp"

namespace fedams {

struct EfResult {
  CompressedDelta transmitted;
  ParamVector next_error;
};

/// transmitted = C(delta + e); next_error = delta + e - decode(transmitted).
EfResult ef_step(const CompressorSpec& spec, const ParamVector& delta, const ParamVector& error);

/// Error-feedback memory e^i for every client. Entries start at zero and only
/// change in rounds where the client participates.
class ClientErrorBank {
 public:
  ClientErrorBank(std::size_t num_clients, std::size_t dim);

  std::size_t num_clients() const { return errors_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t round() const { return round_; }
  const ParamVector& error(ClientId i) const;
  /// (1/m) sum_i e^i
  ParamVector mean_error() const;

  /// Runs ef_step for each participant and leaves everyone else untouched.
  /// `deltas` must have exactly the participants as keys.
  std::map<ClientId, CompressedDelta> apply_round(std::span<const ClientId> participants,
                                                  const std::map<ClientId, ParamVector>& deltas,
                                                  const CompressorSpec& spec,
                                                  const ExecPolicy& policy = {});

 private:
  std::vector<ParamVector> errors_;
  std::size_t dim_;
  std::size_t round_ = 0;
};

}  // namespace fedams
