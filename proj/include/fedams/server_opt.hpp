#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fedams/core.hpp"

namespace fedams {

enum class OptimizerFamily : std::uint8_t { fedavg = 0, fedadam = 1, fedamsgrad = 2, fedams = 3, fedyogi = 4 };

std::string to_string(OptimizerFamily family);
OptimizerFamily parse_optimizer_family(const std::string& name);

/// 1e-3 for fedams, 1e-1 for the additive-epsilon families.
double default_epsilon(OptimizerFamily family);

struct ServerHyperparams {
  OptimizerFamily family = OptimizerFamily::fedams;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-3;
  double eta = 1.0;

  void validate() const;
};

/// Arithmetic mean of the deltas. Throws ConfigError on an empty list.
ParamVector aggregate(std::span<const ParamVector> deltas);

/// Global optimizer state. No bias correction for any family.
///   fedavg:     x += eta * delta
///   fedadam:    x += eta * m / (sqrt(v) + eps)
///   fedamsgrad: v_hat = max(v_hat, v);      x += eta * m / (sqrt(v_hat) + eps)
///   fedams:     v_hat = max(v_hat, v, eps); x += eta * m / sqrt(v_hat)
///   fedyogi:    v -= (1 - beta2) delta^2 sign(v - delta^2); x += eta * m / (sqrt(v) + eps)
class ServerOptState {
 public:
  ServerOptState(ServerHyperparams params, std::size_t dim);

  const ServerHyperparams& params() const { return params_; }
  std::size_t dim() const { return m_.dim(); }
  std::uint64_t round() const { return t_; }
  const ParamVector& momentum() const { return m_; }
  const ParamVector& variance() const { return v_; }
  const ParamVector& max_variance() const { return v_hat_; }

  /// Returns x_{t+1}. Throws NumericalError for non-finite delta.
  ParamVector step(const ParamVector& delta, const ParamVector& x);

  /// Smallest coordinate of v_hat (>= eps for fedams).
  double denominator_floor() const;

  /// Header: family (u8), t (u64), beta1, beta2, eps, eta (f64), dim (u64);
  /// then m, v, v_hat as f64 arrays. Little-endian.
  std::vector<std::uint8_t> serialize() const;
  static ServerOptState deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static ServerOptState load(const std::filesystem::path& path);

  bool operator==(const ServerOptState&) const = default;

 private:
  ServerHyperparams params_;
  ParamVector m_;
  ParamVector v_;
  ParamVector v_hat_;
  std::uint64_t t_ = 0;
};

inline bool operator==(const ServerHyperparams& a, const ServerHyperparams& b) {
  return a.family == b.family && a.beta1 == b.beta1 && a.beta2 == b.beta2 &&
         a.epsilon == b.epsilon && a.eta == b.eta;
}

}  // namespace fedams
