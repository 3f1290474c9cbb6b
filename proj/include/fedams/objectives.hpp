#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedams/core.hpp"
#include "fedams/rng.hpp"

namespace fedams {

using ClientId = std::size_t;  // 0-based

enum class ObjectiveKind { quadratic, logistic, mlp };

std::string to_string(ObjectiveKind kind);
ObjectiveKind parse_objective_kind(const std::string& name);

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::quadratic;
  std::size_t dim = 10;          // feature dimension; equals parameter dimension except for mlp
  std::size_t num_clients = 10;
  double heterogeneity = 0.0;    // scale of per-client offsets (drives sigma_g)
  double noise = 0.0;            // total std of additive gradient noise (drives sigma_l)
  std::size_t samples_per_client = 100;
  std::optional<double> clip_threshold;  // G; stochastic gradients are clipped to this l2 norm
  std::uint64_t seed = 0;
  std::size_t hidden = 16;       // mlp only, at most 64
  double l2 = 1e-3;              // ridge term for logistic and mlp

  void validate() const;
};

// Row-major features (samples x features) and one target per row.
struct ClientDataset {
  ClientId id = 0;
  std::size_t features = 0;
  std::vector<double> design;
  std::vector<double> targets;

  std::size_t samples() const { return targets.size(); }
  const double* row(std::size_t r) const { return design.data() + r * features; }
};

struct QuadraticOptimum {
  ParamVector minimizer;
  double min_value = 0.0;
};

struct VarianceEstimate {
  double sigma_l_sq = 0.0;
  double sigma_g_sq = 0.0;
};

/// Federated objective f(x) = (1/m) sum_i F_i(x) with per-client data.
///
/// quadratic: F_i(x) = 0.5 * |A x - b_i|^2 / s. All clients share one design
///   matrix A (Gaussian entries); b_i = A x_true + heterogeneity * delta_i with
///   delta_i a unit-variance per-sample offset. heterogeneity = 0 makes every
///   client identical.
/// logistic: binary cross-entropy with ridge term; per-client feature shift of
///   size heterogeneity.
/// mlp: one tanh hidden layer, sigmoid output, two-class synthetic data.
///
/// Immutable after construction; safe to read from many threads.
class Objective {
 public:
  static Objective build(const ObjectiveSpec& spec);
  /// Takes ownership of explicit datasets. spec.dim, num_clients and
  /// samples_per_client are overwritten from the data.
  static Objective from_datasets(ObjectiveSpec spec, std::vector<ClientDataset> datasets);

  const ObjectiveSpec& spec() const { return spec_; }
  std::size_t param_dim() const { return param_dim_; }
  std::size_t num_clients() const { return clients_.size(); }
  const ClientDataset& dataset(ClientId i) const;

  double client_loss(ClientId i, const ParamVector& x) const;
  ParamVector client_gradient(ClientId i, const ParamVector& x) const;

  double loss(const ParamVector& x) const;
  ParamVector full_gradient(const ParamVector& x) const;

  /// Mini-batch gradient over `batch` rows drawn with replacement, plus
  /// Gaussian noise of per-coordinate std noise/sqrt(d), then clipped to G
  /// when clipping is enabled. batch >= samples uses every row once.
  ParamVector stochastic_gradient(ClientId i, const ParamVector& x, std::size_t batch,
                                  RandomStream& rng) const;

  /// Closed-form minimizer for the quadratic kind; nullopt otherwise.
  std::optional<QuadraticOptimum> quadratic_optimum() const;

  VarianceEstimate measure_variances(const ParamVector& x, std::size_t draws, std::size_t batch,
                                     std::uint64_t seed) const;

  /// Writes client_<i>.csv per client: feature columns, then the target.
  void dump_csv(const std::filesystem::path& dir) const;
  static Objective load_csv(ObjectiveSpec spec, const std::filesystem::path& dir);

 private:
  Objective(ObjectiveSpec spec, std::vector<ClientDataset> clients);

  double row_loss(const ClientDataset& data, std::size_t r, const ParamVector& x) const;
  void add_row_gradient(const ClientDataset& data, std::size_t r, const ParamVector& x,
                        double weight, ParamVector& grad) const;
  double regularizer_value(const ParamVector& x) const;
  void add_regularizer_gradient(const ParamVector& x, ParamVector& grad) const;
  void check_client(ClientId i) const;
  void check_dim(const ParamVector& x) const;

  ObjectiveSpec spec_;
  std::vector<ClientDataset> clients_;
  std::size_t param_dim_ = 0;
};

/// Parameter count of the mlp objective for the given input and hidden sizes.
std::size_t mlp_param_dim(std::size_t features, std::size_t hidden);

}  // namespace fedams
