#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>

#include "fedams/accounting.hpp"
#include "fedams/harness.hpp"
#include "fedams/reference.hpp"
#include "fedams/sampler.hpp"

namespace fedams {
namespace {

ExperimentConfig small_quadratic(std::size_t rounds) {
  ExperimentConfig cfg;
  cfg.objective.kind = ObjectiveKind::quadratic;
  cfg.objective.dim = 16;
  cfg.objective.num_clients = 8;
  cfg.objective.heterogeneity = 0.5;
  cfg.objective.samples_per_client = 40;
  cfg.participation = {8, 3};
  cfg.local = {3, 0.05, 8};
  cfg.optimizer = {OptimizerFamily::fedams, 0.9, 0.99, 1e-3, 1.0};
  cfg.rounds = rounds;
  cfg.set_master_seed(7);
  return cfg;
}

std::string str(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

SelftestResult check_contraction() {
  RandomStream rng(11, {StreamPurpose::diagnostics, 0, 0});
  double worst = -1e300;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 1 + rng.uniform_below(64);
    ParamVector x(d);
    const double scale = std::pow(10.0, 4.0 * rng.uniform() - 2.0);
    for (auto& v : x) v = scale * rng.normal();
    for (const CompressorSpec spec : {CompressorSpec{CompressorKind::topk, 0.25},
                                      CompressorSpec{CompressorKind::scaled_sign, 1.0}}) {
      const double slack = compression_error(spec, x) - contraction_q(spec, x) * l2_norm(x);
      worst = std::max(worst, slack);
    }
  }
  return {"compressor contraction", worst <= 1e-9, "max slack " + str(worst)};
}

SelftestResult check_tables() {
  const double published[4][3] = {{3.58e11, 1.84e11, 1.12e10},
                                   {3.58e11, 1.84e11, 1.12e10},
                                   {3.58e11, 1.82e11, 5.59e9},
                                   {3.58e11, 1.80e11, 2.79e9}};
  const auto rows = communication_table(11173962, 500);
  double worst = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double got[3] = {static_cast<double>(rows[r].uncompressed),
                           static_cast<double>(rows[r].one_way), static_cast<double>(rows[r].two_way)};
    for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(got[c] - published[r][c]) / published[r][c]);
  }
  return {"communication tables", worst < 0.01, "max relative error " + str(worst)};
}

SelftestResult check_sampler() {
  const ParticipationSpec spec{10, 3};
  std::vector<std::size_t> counts(10, 0);
  const std::size_t draws = 20000;
  for (std::size_t t = 0; t < draws; ++t) {
    RandomStream rng = sampling_stream(3, t);
    for (ClientId i : sample(spec, rng)) ++counts[i];
  }
  const double se = std::sqrt(0.3 * 0.7 / draws);
  double worst = 0.0;
  for (auto c : counts) worst = std::max(worst, std::abs(c / static_cast<double>(draws) - 0.3) / se);
  return {"sampler inclusion frequency", worst <= 4.0, "max z " + str(worst)};
}

SelftestResult check_identity_feedback(const ExecPolicy& exec) {
  ExperimentConfig plain = small_quadratic(40);
  ExperimentConfig ef = plain;
  ef.error_feedback = true;
  const Objective obj = make_objective(plain);
  const RunResult a = run(plain, obj, {exec, {}});
  const RunResult b = run(ef, obj, {exec, {}});
  return {"error feedback with identity compressor reduces to plain updates", a.final_x == b.final_x, ""};
}

SelftestResult check_telescoping(const ExecPolicy& exec) {
  ExperimentConfig cfg = small_quadratic(60);
  cfg.compressor = {CompressorKind::topk, 0.125};
  cfg.error_feedback = true;
  const Objective obj = make_objective(cfg);
  const std::size_t d = obj.param_dim();
  std::vector<ParamVector> raw_sum(obj.num_clients(), ParamVector(d));
  std::vector<ParamVector> sent_sum(obj.num_clients(), ParamVector(d));
  std::optional<ClientErrorBank> final_bank;
  RunOptions opts{exec, [&](const RoundTrace& tr) {
                    for (std::size_t n = 0; n < tr.participants.size(); ++n) {
                      const ClientId id = tr.participants[n];
                      raw_sum[id] = raw_sum[id] + tr.raw_deltas[n];
                      sent_sum[id] = sent_sum[id] + tr.transmitted[n];
                    }
                    final_bank = *tr.bank;
                  }};
  run(cfg, obj, opts);
  double worst = 0.0;
  for (ClientId id = 0; id < obj.num_clients(); ++id) {
    const ParamVector lhs = sent_sum[id] + final_bank->error(id);
    const double scale = std::max(l2_norm(raw_sum[id]), 1e-12);
    worst = std::max(worst, l2_norm(lhs - raw_sum[id]) / scale);
  }
  return {"error feedback telescoping", worst <= 1e-6, "max relative gap " + str(worst)};
}

SelftestResult check_reference(const ExecPolicy& exec) {
  ExperimentConfig cfg = small_quadratic(30);
  cfg.compressor = {CompressorKind::scaled_sign, 1.0};
  cfg.error_feedback = true;
  const Objective obj = make_objective(cfg);
  const auto path = reference::trajectory(cfg, obj);
  const RunResult res = run(cfg, obj, {exec, {}});
  return {"parallel round loop matches serial reference", path.back() == res.final_x, ""};
}

SelftestResult check_max_variance() {
  ServerOptState state({OptimizerFamily::fedams, 0.9, 0.99, 1e-3, 1.0}, 4);
  RandomStream rng(5, {StreamPurpose::diagnostics, 1, 0});
  ParamVector x(4), prev(4);
  bool ok = true;
  for (int t = 0; t < 200; ++t) {
    ParamVector delta(4);
    for (auto& v : delta) v = (t % 50 < 5 ? 1.0 : 1e-3) * rng.normal();
    x = state.step(delta, x);
    for (std::size_t j = 0; j < 4; ++j) {
      ok = ok && state.max_variance()[j] >= prev[j] && state.max_variance()[j] >= 1e-3;
    }
    prev = state.max_variance();
  }
  return {"max-stabilized variance is monotone and floored", ok, ""};
}

}  // namespace

std::vector<SelftestResult> selftest(const ExecPolicy& exec) {
  std::vector<SelftestResult> out;
  out.push_back(check_contraction());
  out.push_back(check_tables());
  out.push_back(check_sampler());
  out.push_back(check_max_variance());
  out.push_back(check_identity_feedback(exec));
  out.push_back(check_telescoping(exec));
  out.push_back(check_reference(exec));
  return out;
}

}  // namespace fedams
