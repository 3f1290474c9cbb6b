#include "fedams/server_opt.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include "fedams/errors.hpp"

namespace fedams {
namespace {

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}
void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * b);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw IoError("checkpoint: truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace

std::string to_string(OptimizerFamily family) {
  switch (family) {
    case OptimizerFamily::fedavg: return "fedavg";
    case OptimizerFamily::fedadam: return "fedadam";
    case OptimizerFamily::fedamsgrad: return "fedamsgrad";
    case OptimizerFamily::fedams: return "fedams";
    case OptimizerFamily::fedyogi: return "fedyogi";
  }
  return "unknown";
}

OptimizerFamily parse_optimizer_family(const std::string& name) {
  if (name == "fedavg") return OptimizerFamily::fedavg;
  if (name == "fedadam") return OptimizerFamily::fedadam;
  if (name == "fedamsgrad") return OptimizerFamily::fedamsgrad;
  if (name == "fedams") return OptimizerFamily::fedams;
  if (name == "fedyogi") return OptimizerFamily::fedyogi;
  throw ConfigError("unknown optimizer family '" + name + "'");
}

double default_epsilon(OptimizerFamily family) {
  return family == OptimizerFamily::fedams ? 1e-3 : 1e-1;
}

void ServerHyperparams::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("optimizer.beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("optimizer.beta2 must be in [0, 1)");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("optimizer.epsilon must be > 0");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("optimizer.eta must be > 0");
}

ParamVector aggregate(std::span<const ParamVector> deltas) {
  if (deltas.empty()) throw ConfigError("aggregate: no participants this round");
  // Running mean: exact when all inputs are equal.
  ParamVector acc = deltas.front();
  for (std::size_t k = 1; k < deltas.size(); ++k) {
    require_same_dim(acc, deltas[k], "aggregate");
    const double w = 1.0 / static_cast<double>(k + 1);
    for (std::size_t j = 0; j < acc.dim(); ++j) acc[j] += (deltas[k][j] - acc[j]) * w;
  }
  return acc;
}

ServerOptState::ServerOptState(ServerHyperparams params, std::size_t dim)
    : params_(params), m_(dim), v_(dim), v_hat_(dim) {
  params_.validate();
}

ParamVector ServerOptState::step(const ParamVector& delta, const ParamVector& x) {
  require_same_dim(delta, x, "server_step");
  require_same_dim(delta, m_, "server_step");
  if (!all_finite(delta)) throw NumericalError("server_step: non-finite aggregated delta");

  const auto& p = params_;
  ParamVector next(x.dim());
  if (p.family == OptimizerFamily::fedavg) {
    for (std::size_t j = 0; j < x.dim(); ++j) next[j] = x[j] + p.eta * delta[j];
    ++t_;
    return next;
  }

  for (std::size_t j = 0; j < x.dim(); ++j) {
    const double g = delta[j];
    const double g2 = g * g;
    m_[j] = p.beta1 * m_[j] + (1.0 - p.beta1) * g;
    double denom = 0.0;
    switch (p.family) {
      case OptimizerFamily::fedadam:
        v_[j] = p.beta2 * v_[j] + (1.0 - p.beta2) * g2;
        denom = std::sqrt(v_[j]) + p.epsilon;
        break;
      case OptimizerFamily::fedamsgrad:
        v_[j] = p.beta2 * v_[j] + (1.0 - p.beta2) * g2;
        v_hat_[j] = std::max(v_hat_[j], v_[j]);
        denom = std::sqrt(v_hat_[j]) + p.epsilon;
        break;
      case OptimizerFamily::fedams:
        v_[j] = p.beta2 * v_[j] + (1.0 - p.beta2) * g2;
        v_hat_[j] = std::max({v_hat_[j], v_[j], p.epsilon});
        denom = std::sqrt(v_hat_[j]);
        break;
      case OptimizerFamily::fedyogi:
        v_[j] = v_[j] - (1.0 - p.beta2) * g2 * sign(v_[j] - g2);
        denom = std::sqrt(v_[j]) + p.epsilon;
        break;
      case OptimizerFamily::fedavg:
        break;
    }
    next[j] = x[j] + p.eta * m_[j] / denom;
  }
  ++t_;
  return next;
}

double ServerOptState::denominator_floor() const {
  if (params_.family != OptimizerFamily::fedams && params_.family != OptimizerFamily::fedamsgrad)
    throw ConfigError("denominator_floor: only defined for the max-variance families");
  if (t_ == 0) throw ConfigError("denominator_floor: no server step taken yet");
  return *std::min_element(v_hat_.begin(), v_hat_.end());
}

std::vector<std::uint8_t> ServerOptState::serialize() const {
  std::vector<std::uint8_t> out;
  out.push_back(static_cast<std::uint8_t>(params_.family));
  put_u64(out, t_);
  put_f64(out, params_.beta1);
  put_f64(out, params_.beta2);
  put_f64(out, params_.epsilon);
  put_f64(out, params_.eta);
  put_u64(out, dim());
  for (const ParamVector* vec : {&m_, &v_, &v_hat_})
    for (double v : *vec) put_f64(out, v);
  return out;
}

ServerOptState ServerOptState::deserialize(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const std::uint8_t tag = in.u8();
  if (tag > static_cast<std::uint8_t>(OptimizerFamily::fedyogi))
    throw IoError("checkpoint: unknown optimizer family tag");
  ServerHyperparams params;
  params.family = static_cast<OptimizerFamily>(tag);
  const std::uint64_t t = in.u64();
  params.beta1 = in.f64();
  params.beta2 = in.f64();
  params.epsilon = in.f64();
  params.eta = in.f64();
  const std::uint64_t dim = in.u64();
  if (dim > bytes.size()) throw IoError("checkpoint: implausible dimension");
  ServerOptState state(params, dim);
  state.t_ = t;
  for (ParamVector* vec : {&state.m_, &state.v_, &state.v_hat_})
    for (auto& v : *vec) v = in.f64();
  if (!in.done()) throw IoError("checkpoint: trailing bytes");
  return state;
}

void ServerOptState::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("checkpoint: write failed for " + path.string());
}

ServerOptState ServerOptState::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace fedams
