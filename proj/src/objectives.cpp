#include "fedams/objectives.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fedams/errors.hpp"

namespace fedams {
namespace {

constexpr std::uint64_t kDesignTag = 0;
constexpr std::uint64_t kTruthTag = 1;
constexpr std::uint64_t kLabelNoiseTag = 2;
constexpr std::uint64_t kOffsetTag = 3;

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> gaussian_vector(RandomStream& rng, std::size_t n) {
  std::vector<double> out(n);
  for (auto& v : out) v = rng.normal();
  return out;
}

std::vector<ClientDataset> make_quadratic(const ObjectiveSpec& spec) {
  const std::size_t s = spec.samples_per_client;
  const std::size_t d = spec.dim;
  RandomStream design_rng(spec.seed, {StreamPurpose::data, 0, kDesignTag});
  RandomStream truth_rng(spec.seed, {StreamPurpose::data, 0, kTruthTag});
  const std::vector<double> design = gaussian_vector(design_rng, s * d);
  const std::vector<double> x_true = gaussian_vector(truth_rng, d);

  std::vector<double> base(s, 0.0);
  for (std::size_t r = 0; r < s; ++r)
    for (std::size_t j = 0; j < d; ++j) base[r] += design[r * d + j] * x_true[j];

  std::vector<ClientDataset> clients(spec.num_clients);
  for (std::size_t i = 0; i < spec.num_clients; ++i) {
    RandomStream offset_rng(spec.seed, {StreamPurpose::data, i + 1, kOffsetTag});
    auto& c = clients[i];
    c.id = i;
    c.features = d;
    c.design = design;
    c.targets = base;
    for (std::size_t r = 0; r < s; ++r) c.targets[r] += spec.heterogeneity * offset_rng.normal();
  }
  return clients;
}

// Shared base features with a per-client covariate shift; labels come from
// `label_of` evaluated on the shifted row plus shared label noise.
template <class LabelFn>
std::vector<ClientDataset> make_classification(const ObjectiveSpec& spec, LabelFn label_of) {
  const std::size_t s = spec.samples_per_client;
  const std::size_t p = spec.dim;
  RandomStream design_rng(spec.seed, {StreamPurpose::data, 0, kDesignTag});
  RandomStream noise_rng(spec.seed, {StreamPurpose::data, 0, kLabelNoiseTag});
  const std::vector<double> base = gaussian_vector(design_rng, s * p);
  const std::vector<double> label_noise = gaussian_vector(noise_rng, s);

  std::vector<ClientDataset> clients(spec.num_clients);
  for (std::size_t i = 0; i < spec.num_clients; ++i) {
    RandomStream offset_rng(spec.seed, {StreamPurpose::data, i + 1, kOffsetTag});
    const std::vector<double> shift = gaussian_vector(offset_rng, p);
    auto& c = clients[i];
    c.id = i;
    c.features = p;
    c.design = base;
    c.targets.resize(s);
    for (std::size_t r = 0; r < s; ++r) {
      double* row = c.design.data() + r * p;
      for (std::size_t j = 0; j < p; ++j) row[j] += spec.heterogeneity * shift[j];
      c.targets[r] = label_of(row, p, label_noise[r]) ? 1.0 : 0.0;
    }
  }
  return clients;
}

std::vector<ClientDataset> make_datasets(const ObjectiveSpec& spec) {
  switch (spec.kind) {
    case ObjectiveKind::quadratic:
      return make_quadratic(spec);
    case ObjectiveKind::logistic: {
      RandomStream truth_rng(spec.seed, {StreamPurpose::data, 0, kTruthTag});
      const std::vector<double> w = gaussian_vector(truth_rng, spec.dim);
      return make_classification(spec, [&](const double* row, std::size_t p, double noise) {
        double z = 0.0;
        for (std::size_t j = 0; j < p; ++j) z += row[j] * w[j];
        return z + 0.5 * noise > 0.0;
      });
    }
    case ObjectiveKind::mlp:
      return make_classification(spec, [](const double* row, std::size_t p, double noise) {
        const double z = p >= 2 ? row[0] * row[1] : row[0];
        return z + 0.1 * noise > 0.0;
      });
  }
  throw ConfigError("unknown objective kind");
}

}  // namespace

std::string to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::quadratic: return "quadratic";
    case ObjectiveKind::logistic: return "logistic";
    case ObjectiveKind::mlp: return "mlp";
  }
  return "unknown";
}

ObjectiveKind parse_objective_kind(const std::string& name) {
  if (name == "quadratic") return ObjectiveKind::quadratic;
  if (name == "logistic") return ObjectiveKind::logistic;
  if (name == "mlp") return ObjectiveKind::mlp;
  throw ConfigError("unknown objective kind '" + name + "'");
}

std::size_t mlp_param_dim(std::size_t features, std::size_t hidden) {
  return hidden * (features + 2) + 1;
}

void ObjectiveSpec::validate() const {
  if (dim < 1) throw ConfigError("objective.dim must be >= 1");
  if (num_clients < 1) throw ConfigError("objective.num_clients must be >= 1");
  if (samples_per_client < 1) throw ConfigError("objective.samples_per_client must be >= 1");
  if (!(heterogeneity >= 0.0) || !std::isfinite(heterogeneity))
    throw ConfigError("objective.heterogeneity must be finite and >= 0");
  if (!(noise >= 0.0) || !std::isfinite(noise))
    throw ConfigError("objective.noise must be finite and >= 0");
  if (clip_threshold && !(*clip_threshold > 0.0))
    throw ConfigError("objective.clip_threshold must be > 0");
  if (kind == ObjectiveKind::mlp && (hidden < 1 || hidden > 64))
    throw ConfigError("objective.hidden must be in [1, 64]");
  if (!(l2 >= 0.0)) throw ConfigError("objective.l2 must be >= 0");
}

Objective::Objective(ObjectiveSpec spec, std::vector<ClientDataset> clients)
    : spec_(std::move(spec)), clients_(std::move(clients)) {
  param_dim_ = spec_.kind == ObjectiveKind::mlp ? mlp_param_dim(spec_.dim, spec_.hidden) : spec_.dim;
}

Objective Objective::build(const ObjectiveSpec& spec) {
  spec.validate();
  return Objective(spec, make_datasets(spec));
}

Objective Objective::from_datasets(ObjectiveSpec spec, std::vector<ClientDataset> datasets) {
  if (datasets.empty()) throw ConfigError("from_datasets: at least one client required");
  const std::size_t features = datasets.front().features;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    auto& c = datasets[i];
    if (c.features != features || c.features == 0)
      throw ConfigError("from_datasets: inconsistent feature count");
    if (c.samples() == 0 || c.design.size() != c.samples() * c.features)
      throw ConfigError("from_datasets: design size does not match targets");
    c.id = i;
  }
  spec.dim = features;
  spec.num_clients = datasets.size();
  spec.samples_per_client = datasets.front().samples();
  spec.validate();
  return Objective(std::move(spec), std::move(datasets));
}

const ClientDataset& Objective::dataset(ClientId i) const {
  check_client(i);
  return clients_[i];
}

void Objective::check_client(ClientId i) const {
  if (i >= clients_.size())
    throw ConfigError("unknown client id " + std::to_string(i) + " (have " +
                      std::to_string(clients_.size()) + ")");
}

void Objective::check_dim(const ParamVector& x) const {
  if (x.dim() != param_dim_)
    throw DimensionError("objective: expected dim " + std::to_string(param_dim_) + ", got " +
                         std::to_string(x.dim()));
}

double Objective::row_loss(const ClientDataset& data, std::size_t r, const ParamVector& x) const {
  const double* a = data.row(r);
  const std::size_t p = data.features;
  const double y = data.targets[r];
  switch (spec_.kind) {
    case ObjectiveKind::quadratic: {
      double z = -y;
      for (std::size_t j = 0; j < p; ++j) z += a[j] * x[j];
      return 0.5 * z * z;
    }
    case ObjectiveKind::logistic: {
      double z = 0.0;
      for (std::size_t j = 0; j < p; ++j) z += a[j] * x[j];
      return softplus(z) - y * z;
    }
    case ObjectiveKind::mlp: {
      const std::size_t h_units = spec_.hidden;
      const std::size_t b1 = h_units * p, w2 = b1 + h_units, b2 = w2 + h_units;
      double out = x[b2];
      for (std::size_t h = 0; h < h_units; ++h) {
        double u = x[b1 + h];
        for (std::size_t j = 0; j < p; ++j) u += x[h * p + j] * a[j];
        out += x[w2 + h] * std::tanh(u);
      }
      return softplus(out) - y * out;
    }
  }
  return 0.0;
}

void Objective::add_row_gradient(const ClientDataset& data, std::size_t r, const ParamVector& x,
                                 double weight, ParamVector& grad) const {
  const double* a = data.row(r);
  const std::size_t p = data.features;
  const double y = data.targets[r];
  switch (spec_.kind) {
    case ObjectiveKind::quadratic: {
      double z = -y;
      for (std::size_t j = 0; j < p; ++j) z += a[j] * x[j];
      for (std::size_t j = 0; j < p; ++j) grad[j] += weight * z * a[j];
      return;
    }
    case ObjectiveKind::logistic: {
      double z = 0.0;
      for (std::size_t j = 0; j < p; ++j) z += a[j] * x[j];
      const double g = sigmoid(z) - y;
      for (std::size_t j = 0; j < p; ++j) grad[j] += weight * g * a[j];
      return;
    }
    case ObjectiveKind::mlp: {
      const std::size_t h_units = spec_.hidden;
      const std::size_t b1 = h_units * p, w2 = b1 + h_units, b2 = w2 + h_units;
      std::vector<double> act(h_units);
      double out = x[b2];
      for (std::size_t h = 0; h < h_units; ++h) {
        double u = x[b1 + h];
        for (std::size_t j = 0; j < p; ++j) u += x[h * p + j] * a[j];
        act[h] = std::tanh(u);
        out += x[w2 + h] * act[h];
      }
      const double delta = weight * (sigmoid(out) - y);
      grad[b2] += delta;
      for (std::size_t h = 0; h < h_units; ++h) {
        grad[w2 + h] += delta * act[h];
        const double du = delta * x[w2 + h] * (1.0 - act[h] * act[h]);
        grad[b1 + h] += du;
        for (std::size_t j = 0; j < p; ++j) grad[h * p + j] += du * a[j];
      }
      return;
    }
  }
}

double Objective::regularizer_value(const ParamVector& x) const {
  return spec_.kind == ObjectiveKind::quadratic ? 0.0 : 0.5 * spec_.l2 * squared_norm(x);
}

void Objective::add_regularizer_gradient(const ParamVector& x, ParamVector& grad) const {
  if (spec_.kind == ObjectiveKind::quadratic || spec_.l2 == 0.0) return;
  for (std::size_t j = 0; j < x.dim(); ++j) grad[j] += spec_.l2 * x[j];
}

double Objective::client_loss(ClientId i, const ParamVector& x) const {
  check_client(i);
  check_dim(x);
  const auto& data = clients_[i];
  double acc = 0.0;
  for (std::size_t r = 0; r < data.samples(); ++r) acc += row_loss(data, r, x);
  return acc / static_cast<double>(data.samples()) + regularizer_value(x);
}

ParamVector Objective::client_gradient(ClientId i, const ParamVector& x) const {
  check_client(i);
  check_dim(x);
  const auto& data = clients_[i];
  ParamVector grad(param_dim_);
  const double w = 1.0 / static_cast<double>(data.samples());
  for (std::size_t r = 0; r < data.samples(); ++r) add_row_gradient(data, r, x, w, grad);
  add_regularizer_gradient(x, grad);
  return grad;
}

double Objective::loss(const ParamVector& x) const {
  double acc = 0.0;
  for (ClientId i = 0; i < clients_.size(); ++i) acc += client_loss(i, x);
  return acc / static_cast<double>(clients_.size());
}

ParamVector Objective::full_gradient(const ParamVector& x) const {
  ParamVector grad(param_dim_);
  for (ClientId i = 0; i < clients_.size(); ++i) {
    const ParamVector gi = client_gradient(i, x);
    for (std::size_t j = 0; j < param_dim_; ++j) grad[j] += gi[j];
  }
  const double inv_m = 1.0 / static_cast<double>(clients_.size());
  for (auto& g : grad) g *= inv_m;
  return grad;
}

ParamVector Objective::stochastic_gradient(ClientId i, const ParamVector& x, std::size_t batch,
                                           RandomStream& rng) const {
  check_client(i);
  check_dim(x);
  if (batch == 0) throw ConfigError("stochastic_gradient: batch must be >= 1");
  const auto& data = clients_[i];
  ParamVector grad(param_dim_);
  if (batch >= data.samples()) {
    grad = client_gradient(i, x);
  } else {
    const double w = 1.0 / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b)
      add_row_gradient(data, rng.uniform_below(data.samples()), x, w, grad);
    add_regularizer_gradient(x, grad);
  }
  if (spec_.noise > 0.0) {
    const double sd = spec_.noise / std::sqrt(static_cast<double>(param_dim_));
    for (auto& g : grad) g += sd * rng.normal();
  }
  if (spec_.clip_threshold) {
    const double norm = l2_norm(grad);
    if (norm > *spec_.clip_threshold) {
      const double s = *spec_.clip_threshold / norm;
      for (auto& g : grad) g *= s;
    }
  }
  return grad;
}

std::optional<QuadraticOptimum> Objective::quadratic_optimum() const {
  if (spec_.kind != ObjectiveKind::quadratic) return std::nullopt;
  const auto d = static_cast<Eigen::Index>(param_dim_);
  Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
  for (const auto& c : clients_) {
    const auto s = static_cast<Eigen::Index>(c.samples());
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(
        c.design.data(), s, d);
    Eigen::Map<const Eigen::VectorXd> b(c.targets.data(), s);
    const double w = 1.0 / static_cast<double>(c.samples());
    hessian.noalias() += w * (a.transpose() * a);
    rhs.noalias() += w * (a.transpose() * b);
  }
  const Eigen::VectorXd sol = hessian.ldlt().solve(rhs);
  QuadraticOptimum opt;
  opt.minimizer = ParamVector(std::vector<double>(sol.data(), sol.data() + d));
  opt.min_value = loss(opt.minimizer);
  return opt;
}

VarianceEstimate Objective::measure_variances(const ParamVector& x, std::size_t draws,
                                              std::size_t batch, std::uint64_t seed) const {
  if (draws < 1) throw ConfigError("measure_variances: draws must be >= 1");
  check_dim(x);
  const ParamVector global = full_gradient(x);
  VarianceEstimate est;
  for (ClientId i = 0; i < clients_.size(); ++i) {
    const ParamVector gi = client_gradient(i, x);
    est.sigma_g_sq += squared_norm(gi - global);
    RandomStream rng(seed, {StreamPurpose::diagnostics, i, 0});
    for (std::size_t k = 0; k < draws; ++k)
      est.sigma_l_sq += squared_norm(stochastic_gradient(i, x, batch, rng) - gi);
  }
  const auto m = static_cast<double>(clients_.size());
  est.sigma_g_sq /= m;
  est.sigma_l_sq /= m * static_cast<double>(draws);
  return est;
}

void Objective::dump_csv(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("dump_csv: cannot create " + dir.string() + ": " + ec.message());
  for (const auto& c : clients_) {
    const auto path = dir / ("client_" + std::to_string(c.id) + ".csv");
    std::ofstream out(path);
    if (!out) throw IoError("dump_csv: cannot open " + path.string());
    out << std::setprecision(17);
    for (std::size_t r = 0; r < c.samples(); ++r) {
      const double* row = c.row(r);
      for (std::size_t j = 0; j < c.features; ++j) out << row[j] << ',';
      out << c.targets[r] << '\n';
    }
    if (!out) throw IoError("dump_csv: write failed for " + path.string());
  }
}

Objective Objective::load_csv(ObjectiveSpec spec, const std::filesystem::path& dir) {
  std::vector<ClientDataset> clients;
  for (std::size_t i = 0;; ++i) {
    const auto path = dir / ("client_" + std::to_string(i) + ".csv");
    if (!std::filesystem::exists(path)) break;
    std::ifstream in(path);
    if (!in) throw IoError("load_csv: cannot open " + path.string());
    ClientDataset c;
    c.id = i;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<double> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        try {
          cells.push_back(std::stod(cell));
        } catch (const std::exception&) {
          throw IoError("load_csv: bad number '" + cell + "' in " + path.string());
        }
      }
      if (cells.size() < 2) throw IoError("load_csv: need at least one feature in " + path.string());
      if (c.features == 0) c.features = cells.size() - 1;
      if (cells.size() - 1 != c.features)
        throw IoError("load_csv: ragged row in " + path.string());
      c.design.insert(c.design.end(), cells.begin(), cells.end() - 1);
      c.targets.push_back(cells.back());
    }
    clients.push_back(std::move(c));
  }
  if (clients.empty()) throw IoError("load_csv: no client_<i>.csv files in " + dir.string());
  return from_datasets(std::move(spec), std::move(clients));
}

}  // namespace fedams
