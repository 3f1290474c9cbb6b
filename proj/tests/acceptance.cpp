// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fedams/accounting.hpp"
#include "fedams/compressors.hpp"
#include "fedams/config.hpp"
#include "fedams/harness.hpp"
#include "fedams/sampler.hpp"

using namespace fedams;
using nlohmann::json;

namespace {

struct Outcome {
  bool passed = true;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double time_limit_s;
  std::function<Outcome()> body;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

ExperimentConfig quadratic_config(std::size_t d, std::size_t m, std::size_t n, double h,
                                  std::size_t samples, std::size_t batch, std::size_t K,
                                  std::size_t rounds, std::uint64_t seed) {
  ExperimentConfig c;
  c.objective.kind = ObjectiveKind::quadratic;
  c.objective.dim = d;
  c.objective.num_clients = m;
  c.objective.heterogeneity = h;
  c.objective.samples_per_client = samples;
  c.local = {K, 0.05, batch};
  c.participation = {m, n};
  c.optimizer = {OptimizerFamily::fedams, 0.9, 0.99, 1e-3, 1.0};
  c.rounds = rounds;
  c.set_master_seed(seed);
  return c;
}

void use_topk(ExperimentConfig& c, double r) {
  c.compressor = {CompressorKind::topk, r};
  c.error_feedback = true;
}

// 1. Communication tables at the ResNet-18 size.
Outcome bit_tables() {
  const auto rows = communication_table(11173962, 500);
  const double uncompressed = 3.58e11;
  const double one_way[] = {1.84e11, 1.84e11, 1.82e11, 1.80e11};
  const double two_way[] = {1.12e10, 1.12e10, 5.59e9, 2.79e9};
  double worst = 0;
  auto rel = [](double got, double want) { return std::abs(got - want) / want; };
  for (std::size_t i = 0; i < rows.size() && i < 4; ++i) {
    worst = std::max(worst, rel(double(rows[i].uncompressed), uncompressed));
    worst = std::max(worst, rel(double(rows[i].one_way), one_way[i]));
    worst = std::max(worst, rel(double(rows[i].two_way), two_way[i]));
  }
  return {rows.size() == 4 && worst <= 0.01, "max rel err " + fmt("%.2e", worst)};
}

// 2. Contraction inequality and the scaled-sign error identity.
Outcome contraction_suite() {
  RandomStream rng(2024, {StreamPurpose::diagnostics, 2, 0});
  const std::size_t dims[] = {1, 2, 17, 1024};
  const double ratios[] = {1.0 / 2, 1.0 / 4, 1.0 / 8, 1.0 / 64};
  std::size_t violations = 0, checked = 0;
  double worst_identity = 0;
  for (int v = 0; v < 10000; ++v) {
    const std::size_t d = dims[v % 4];
    // Six decades of scale. Scaled sign meets the bound with equality, so
    // much larger norms would put rounding above the absolute 1e-9 slack.
    const double scale = std::pow(10.0, 6 * rng.uniform() - 3);
    ParamVector x(d);
    for (auto& xi : x) xi = scale * rng.normal();
    const double nx = l2_norm(x);
    for (const CompressorSpec& spec :
         {CompressorSpec{CompressorKind::topk, ratios[(v / 4) % 4]},
          CompressorSpec{CompressorKind::scaled_sign, 1.0}}) {
      ++checked;
      if (compression_error(spec, x) > contraction_q(spec, x) * nx + 1e-9) ++violations;
    }
    const auto n = norms(x);
    const double err = compression_error({CompressorKind::scaled_sign, 1.0}, x);
    const double closed = n.l2 * n.l2 - n.l1 * n.l1 / double(d);
    const double denom = std::max(n.l2 * n.l2, 1e-300);
    worst_identity = std::max(worst_identity, std::abs(err * err - closed) / denom);
  }
  return {violations == 0 && worst_identity <= 1e-9,
          std::to_string(checked) + " checks, " + std::to_string(violations) +
              " violations, sign identity rel err " + fmt("%.1e", worst_identity)};
}

std::vector<ParamVector> iterates(const ExperimentConfig& cfg) {
  std::vector<ParamVector> xs;
  RunOptions opts;
  opts.observer = [&](const RoundTrace& tr) { xs.push_back(tr.x_after); };
  run(cfg, opts);
  return xs;
}

// 3. Identity compressor with error feedback reproduces FedAMS exactly.
Outcome identity_oracle() {
  auto plain = quadratic_config(50, 20, 20, 1.0, 60, 6, 5, 200, 3);
  plain.objective.noise = 0.1;
  auto ef = plain;
  ef.error_feedback = true;
  const auto a = iterates(plain), b = iterates(ef);
  std::size_t mismatched = 0;
  for (std::size_t t = 0; t < a.size(); ++t) mismatched += !(t < b.size() && a[t] == b[t]);
  return {a.size() == 200 && b.size() == 200 && mismatched == 0,
          std::to_string(mismatched) + " of " + std::to_string(a.size()) + " iterates differ"};
}

// 4. Error-feedback telescoping and stale errors.
Outcome telescoping() {
  auto cfg = quadratic_config(40, 20, 5, 1.0, 40, 4, 5, 200, 4);
  cfg.objective.noise = 0.2;
  use_topk(cfg, 1.0 / 8);
  const std::size_t m = 20, d = 40;
  std::vector<ParamVector> raw_sum(m, ParamVector(d)), sent_sum(m, ParamVector(d));
  std::vector<ParamVector> prev_error(m, ParamVector(d));
  std::size_t stale_violations = 0;
  double worst = 0;
  RunOptions opts;
  opts.observer = [&](const RoundTrace& tr) {
    std::vector<bool> active(m, false);
    for (std::size_t k = 0; k < tr.participants.size(); ++k) {
      const ClientId i = tr.participants[k];
      active[i] = true;
      raw_sum[i] = raw_sum[i] + tr.raw_deltas[k];
      sent_sum[i] = sent_sum[i] + tr.transmitted[k];
    }
    for (ClientId i = 0; i < m; ++i) {
      if (!active[i] && !(tr.bank->error(i) == prev_error[i])) ++stale_violations;
      prev_error[i] = tr.bank->error(i);
      // sum of transmitted + current error == sum of raw deltas, every round
      const double scale = std::max(1.0, l2_norm(raw_sum[i]));
      worst = std::max(worst, l2_norm(sent_sum[i] + tr.bank->error(i) - raw_sum[i]) / scale);
    }
  };
  run(cfg, opts);
  return {worst <= 1e-6 && stale_violations == 0,
          "telescoping rel err " + fmt("%.1e", worst) + ", stale violations " +
              std::to_string(stale_violations)};
}

// 5. Norm bounds under G = 1 clipping.
Outcome norm_bounds() {
  const double G = 1.0, eta_l = 0.05;
  const std::size_t K = 5;
  const double q2 = 0.75;
  const double base = eta_l * K * G;
  const double e_bound = 4 * q2 / ((1 - q2) * (1 - q2)) * base * base;
  const double hat_bound = 4 * std::pow(1 + q2, 3) / ((1 - q2) * (1 - q2)) * base * base;
  const double slack = 1e-9;

  auto cfg = quadratic_config(20, 10, 5, 3.0, 40, 2, K, 500, 5);
  cfg.objective.noise = 1.0;
  cfg.objective.clip_threshold = G;
  cfg.init_scale = 3.0;

  std::size_t v_delta = 0, v_m = 0, v_e = 0, v_hat = 0;
  double max_delta = 0, max_m = 0, max_e2 = 0, max_hat2 = 0;
  RunOptions plain;
  plain.observer = [&](const RoundTrace& tr) {
    for (const auto& dlt : tr.raw_deltas) {
      max_delta = std::max(max_delta, l2_norm(dlt));
      v_delta += l2_norm(dlt) > base + slack;
    }
    const double nm = l2_norm(tr.server.momentum());
    max_m = std::max(max_m, nm);
    v_m += nm > base + slack;
  };
  run(cfg, plain);

  use_topk(cfg, 0.25);
  RunOptions compressed;
  compressed.observer = [&](const RoundTrace& tr) {
    for (const auto& dlt : tr.raw_deltas) v_delta += l2_norm(dlt) > base + slack;
    for (ClientId i = 0; i < tr.bank->num_clients(); ++i) {
      const double e2 = squared_norm(tr.bank->error(i));
      max_e2 = std::max(max_e2, e2);
      v_e += e2 > e_bound + slack;
    }
    for (const auto& hat : tr.transmitted) {
      const double h2 = squared_norm(hat);
      max_hat2 = std::max(max_hat2, h2);
      v_hat += h2 > hat_bound + slack;
    }
    v_hat += squared_norm(tr.aggregated) > hat_bound + slack;
  };
  run(cfg, compressed);

  const std::size_t total = v_delta + v_m + v_e + v_hat;
  return {total == 0, "violations delta/m/e/hat " + std::to_string(v_delta) + "/" +
                          std::to_string(v_m) + "/" + std::to_string(v_e) + "/" +
                          std::to_string(v_hat) + "; max |delta| " + fmt("%.3f", max_delta) +
                          " |m| " + fmt("%.3f", max_m) + " |e|^2 " + fmt("%.3f", max_e2) + " (<= " +
                          fmt("%.3f", e_bound) + ") |hat|^2 " + fmt("%.3f", max_hat2) + " (<= " +
                          fmt("%.3f", hat_bound) + ")"};
}

// 6. Sampler inclusion, pair and unbiasedness statistics.
Outcome sampling_statistics() {
  const ParticipationSpec spec{10, 3};
  const std::size_t rounds = 100000;
  std::vector<double> inclusion(10, 0.0);
  double pair = 0;
  for (std::size_t t = 0; t < rounds; ++t) {
    auto rng = sampling_stream(6, t);
    auto s = sample(spec, rng);
    for (ClientId i : s) inclusion[i] += 1;
    pair += std::binary_search(s.begin(), s.end(), 0) && std::binary_search(s.begin(), s.end(), 1);
  }
  const double n = double(rounds);
  const double se_incl = std::sqrt(0.3 * 0.7 / n);
  double worst_z = 0;
  for (double c : inclusion) worst_z = std::max(worst_z, std::abs(c / n - 0.3) / se_incl);
  const double p2 = 1.0 / 15;
  const double pair_z = std::abs(pair / n - p2) / std::sqrt(p2 * (1 - p2) / n);

  std::vector<ParamVector> unit;
  for (std::size_t i = 0; i < 10; ++i) {
    ParamVector e(10);
    e[i] = 1;
    unit.push_back(e);
  }
  const double dev = participation_unbiasedness_check(unit, spec, rounds, 6);
  return {worst_z <= 4 && pair_z <= 4 && dev < 0.01,
          "inclusion max |z| " + fmt("%.2f", worst_z) + ", pair |z| " + fmt("%.2f", pair_z) +
              ", unbiasedness dev " + fmt("%.4f", dev)};
}

// Plain gradient descent at the local learning rate for the same number of
// gradient evaluations per client (K per round).
double gd_oracle_grad_sq(const ExperimentConfig& cfg, const Objective& obj) {
  ParamVector x = initial_point(cfg, obj.param_dim());
  const std::size_t steps = cfg.local.K * cfg.rounds;
  for (std::size_t s = 0; s < steps; ++s) x = axpy(-cfg.local.eta_l, obj.full_gradient(x), x);
  return squared_norm(obj.full_gradient(x));
}

ExperimentConfig convergence_config() {
  return quadratic_config(20, 10, 10, 0.3, 40, 40, 5, 300, 1);
}

// 7. Convergence against a gradient-descent oracle, and FedCAMS vs FedAMS.
Outcome convergence() {
  const auto cfg = convergence_config();
  const auto obj = make_objective(cfg);
  const auto ams = run(cfg, obj);
  const double gd = gd_oracle_grad_sq(cfg, obj);
  const double g_ams = ams.records.back().grad_norm_sq;
  const double reduction = ams.initial_loss / ams.records.back().loss;

  auto cams_cfg = cfg;
  use_topk(cams_cfg, 0.25);
  const auto cams = run(cams_cfg, obj);
  const double ratio = cams.records.back().loss / ams.records.back().loss;

  const bool ok_grad = g_ams <= 10 * gd;
  const bool ok_loss = reduction >= 100;
  const bool ok_cams = ratio <= 2;
  return {ok_grad && ok_loss && ok_cams,
          std::string(ok_grad ? "" : "[grad FAIL] ") + "FedAMS |grad|^2 " + fmt("%.2e", g_ams) +
              " vs GD " + fmt("%.2e", gd) + "; " + (ok_loss ? "" : "[loss FAIL] ") +
              "loss reduction " + fmt("%.1f", reduction) + "x; " + (ok_cams ? "" : "[FedCAMS FAIL] ") +
              "FedCAMS/FedAMS final loss " + fmt("%.3g", cams.records.back().loss) + "/" +
              fmt("%.3g", ams.records.back().loss) + " = " + fmt("%.3g", ratio)};
}

ExperimentConfig participation_config() {
  auto c = quadratic_config(20, 100, 10, 1.0, 40, 4, 5, 300, 1);
  return c;
}

// 8. More participants per round reach the threshold no later.
Outcome participation_trend() {
  const auto base = participation_config();
  const auto obj = make_objective(base);
  const auto opt = obj.quadratic_optimum();
  const double f0 = obj.loss(initial_point(base, obj.param_dim()));
  // 95% of the initial excess loss removed.
  const double threshold = opt->min_value + 0.05 * (f0 - opt->min_value);
  SweepOptions opts;
  opts.seeds = {1, 2, 3, 4, 5};
  opts.loss_threshold = threshold;
  std::vector<std::string> values{"5", "10", "20"};
  auto points = sweep(base, SweepAxis::n, values, opts);
  bool monotone = true;
  std::string detail = "threshold " + fmt("%.4g", threshold) + "; median rounds";
  for (std::size_t k = 0; k < points.size(); ++k) {
    detail += " n=" + points[k].value + ":" + fmt("%.0f", *points[k].median_rounds_to_threshold);
    if (k > 0 && *points[k].median_rounds_to_threshold > *points[k - 1].median_rounds_to_threshold)
      monotone = false;
  }
  return {monotone, detail};
}

// 9. Byte-identical CSV on repeat and across thread counts.
Outcome determinism() {
  std::vector<ExperimentConfig> cfgs;
  cfgs.push_back(convergence_config());
  auto cams = convergence_config();
  use_topk(cams, 0.25);
  cfgs.push_back(cams);
  auto tele = quadratic_config(40, 20, 5, 1.0, 40, 4, 5, 200, 4);
  tele.objective.noise = 0.2;
  use_topk(tele, 1.0 / 8);
  cfgs.push_back(tele);
  auto sign = participation_config();
  sign.compressor = {CompressorKind::scaled_sign, 1.0};
  sign.error_feedback = true;
  cfgs.push_back(sign);
  cfgs.push_back(participation_config());

  std::size_t mismatches = 0;
  for (const auto& c : cfgs) {
    const std::string a = records_to_csv(run(c, {{1}, {}}).records);
    const std::string b = records_to_csv(run(c, {{1}, {}}).records);
    const std::string p = records_to_csv(run(c, {{8}, {}}).records);
    mismatches += (a != b) + (a != p);
  }
  return {mismatches == 0, std::to_string(cfgs.size()) + " configs x {repeat, 8 threads}, " +
                               std::to_string(mismatches) + " mismatches"};
}

// 10. FedAvg step equals averaging the local models.
Outcome fedavg_equivalence() {
  auto cfg = quadratic_config(30, 20, 5, 1.0, 40, 4, 5, 100, 10);
  cfg.objective.noise = 0.3;
  cfg.optimizer = {OptimizerFamily::fedavg, 0.9, 0.99, 0.1, 1.0};
  double worst = 0;
  std::size_t rounds = 0;
  RunOptions opts;
  opts.observer = [&](const RoundTrace& tr) {
    ++rounds;
    ParamVector avg(tr.x_before.dim());
    for (const auto& dlt : tr.raw_deltas) avg = avg + (tr.x_before + dlt);
    avg = (1.0 / double(tr.raw_deltas.size())) * avg;
    worst = std::max(worst, norms(tr.x_after - avg).linf);
  };
  run(cfg, opts);
  return {rounds == 100 && worst <= 1e-12, "max |x_next - mean local model| " + fmt("%.2e", worst)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "bit-table reproduction", 1, bit_tables},
      {2, "compressor contraction suite", 10, contraction_suite},
      {3, "identity-compressor oracle", 30, identity_oracle},
      {4, "error-feedback telescoping", 30, telescoping},
      {5, "norm bounds under clipping", 60, norm_bounds},
      {6, "sampling statistics", 30, sampling_statistics},
      {7, "convergence", 60, convergence},
      {8, "participation trend", 300, participation_trend},
      {9, "determinism", 300, determinism},
      {10, "FedAvg equivalence", 30, fedavg_equivalence},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.body();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.time_limit_s;
    const bool ok = out.passed && in_time;
    failures += !ok;
    std::printf("%s criterion %2d %-30s %s; %.2fs (limit %.0fs)%s\n", ok ? "PASS" : "FAIL", c.id,
                c.name, out.detail.c_str(), secs, c.time_limit_s, in_time ? "" : " TIMEOUT");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
