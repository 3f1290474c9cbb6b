#include "fedams/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

#include "fedams/errors.hpp"

namespace fedams {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    if (!keys.count(key)) throw ConfigError(where + ": unknown field '" + key + "'");
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::size_t read_count(const json& obj, const char* key, std::size_t fallback,
                       const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_number_integer() || it->get<long long>() < 0)
    throw ConfigError(where + "." + key + ": expected a non-negative integer");
  return it->get<std::size_t>();
}

}  // namespace

void ExperimentConfig::set_master_seed(std::uint64_t seed) {
  master_seed = seed;
  if (!objective_seed_explicit) objective.seed = seed;
}

void ExperimentConfig::validate() const {
  objective.validate();
  optimizer.validate();
  local.validate();
  participation.validate();
  compressor.validate();
  if (participation.m != objective.num_clients && !data_dir)
    throw ConfigError("participation.m must equal objective.num_clients");
  if (compressor.kind != CompressorKind::identity && optimizer.family != OptimizerFamily::fedams)
    throw ConfigError("compressed updates require optimizer.family = fedams (FedCAMS)");
  if (error_feedback && optimizer.family != OptimizerFamily::fedams)
    throw ConfigError("error_feedback requires optimizer.family = fedams (FedCAMS)");
  if (compressor.kind != CompressorKind::identity && !error_feedback)
    throw ConfigError("compressed updates require error_feedback = true");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (!(init_scale >= 0.0)) throw ConfigError("init_scale must be >= 0");
}

ExperimentConfig parse_config(const json& doc) {
  reject_unknown(doc, "config",
                 {"objective", "optimizer", "local", "participation", "compressor", "error_feedback",
                  "rounds", "master_seed", "eval_every", "output_path", "init_scale", "data_dir"});
  ExperimentConfig cfg;
  read(doc, "master_seed", cfg.master_seed, "config");

  if (auto it = doc.find("objective"); it != doc.end()) {
    const json& o = *it;
    reject_unknown(o, "objective",
                   {"kind", "dim", "num_clients", "heterogeneity", "noise", "samples_per_client",
                    "clip_threshold", "seed", "hidden", "l2"});
    auto& spec = cfg.objective;
    std::string kind = "quadratic";
    read(o, "kind", kind, "objective");
    spec.kind = parse_objective_kind(kind);
    spec.dim = read_count(o, "dim", spec.dim, "objective");
    spec.num_clients = read_count(o, "num_clients", spec.num_clients, "objective");
    spec.samples_per_client = read_count(o, "samples_per_client", spec.samples_per_client, "objective");
    spec.hidden = read_count(o, "hidden", spec.hidden, "objective");
    read(o, "heterogeneity", spec.heterogeneity, "objective");
    read(o, "noise", spec.noise, "objective");
    read(o, "l2", spec.l2, "objective");
    if (auto c = o.find("clip_threshold"); c != o.end() && !c->is_null()) {
      double g = 0.0;
      read(o, "clip_threshold", g, "objective");
      spec.clip_threshold = g;
    }
    if (auto s = o.find("seed"); s != o.end() && !s->is_null()) {
      read(o, "seed", spec.seed, "objective");
      cfg.objective_seed_explicit = true;
    }
  }
  if (!cfg.objective_seed_explicit) cfg.objective.seed = cfg.master_seed;

  bool epsilon_given = false;
  if (auto it = doc.find("optimizer"); it != doc.end()) {
    const json& o = *it;
    reject_unknown(o, "optimizer", {"family", "beta1", "beta2", "epsilon", "eta"});
    std::string family = "fedams";
    read(o, "family", family, "optimizer");
    cfg.optimizer.family = parse_optimizer_family(family);
    read(o, "beta1", cfg.optimizer.beta1, "optimizer");
    read(o, "beta2", cfg.optimizer.beta2, "optimizer");
    read(o, "eta", cfg.optimizer.eta, "optimizer");
    epsilon_given = o.contains("epsilon") && !o["epsilon"].is_null();
    read(o, "epsilon", cfg.optimizer.epsilon, "optimizer");
  }
  if (!epsilon_given) cfg.optimizer.epsilon = default_epsilon(cfg.optimizer.family);

  if (auto it = doc.find("local"); it != doc.end()) {
    const json& o = *it;
    reject_unknown(o, "local", {"K", "eta_l", "batch"});
    cfg.local.K = read_count(o, "K", cfg.local.K, "local");
    cfg.local.batch = read_count(o, "batch", cfg.local.batch, "local");
    read(o, "eta_l", cfg.local.eta_l, "local");
  }

  cfg.participation.m = cfg.objective.num_clients;
  cfg.participation.n = cfg.objective.num_clients;
  if (auto it = doc.find("participation"); it != doc.end()) {
    const json& o = *it;
    reject_unknown(o, "participation", {"m", "n"});
    cfg.participation.m = read_count(o, "m", cfg.participation.m, "participation");
    cfg.participation.n = read_count(o, "n", cfg.participation.m, "participation");
  }

  if (auto it = doc.find("compressor"); it != doc.end()) {
    const json& o = *it;
    reject_unknown(o, "compressor", {"kind", "ratio"});
    std::string kind = "identity";
    read(o, "kind", kind, "compressor");
    cfg.compressor.kind = parse_compressor_kind(kind);
    read(o, "ratio", cfg.compressor.ratio, "compressor");
  }
  cfg.error_feedback = cfg.compressor.kind != CompressorKind::identity;
  read(doc, "error_feedback", cfg.error_feedback, "config");

  cfg.rounds = read_count(doc, "rounds", cfg.rounds, "config");
  cfg.eval_every = read_count(doc, "eval_every", cfg.eval_every, "config");
  read(doc, "init_scale", cfg.init_scale, "config");
  read(doc, "output_path", cfg.output_path, "config");
  if (auto it = doc.find("data_dir"); it != doc.end() && !it->is_null())
    cfg.data_dir = it->get<std::string>();

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

json to_json(const ExperimentConfig& c) {
  json doc;
  json objective = {{"kind", to_string(c.objective.kind)},
                    {"dim", c.objective.dim},
                    {"num_clients", c.objective.num_clients},
                    {"heterogeneity", c.objective.heterogeneity},
                    {"noise", c.objective.noise},
                    {"samples_per_client", c.objective.samples_per_client},
                    {"seed", c.objective.seed},
                    {"hidden", c.objective.hidden},
                    {"l2", c.objective.l2}};
  objective["clip_threshold"] = c.objective.clip_threshold ? json(*c.objective.clip_threshold) : json(nullptr);
  doc["objective"] = objective;
  doc["optimizer"] = {{"family", to_string(c.optimizer.family)},
                      {"beta1", c.optimizer.beta1},
                      {"beta2", c.optimizer.beta2},
                      {"epsilon", c.optimizer.epsilon},
                      {"eta", c.optimizer.eta}};
  doc["local"] = {{"K", c.local.K}, {"eta_l", c.local.eta_l}, {"batch", c.local.batch}};
  doc["participation"] = {{"m", c.participation.m}, {"n", c.participation.n}};
  doc["compressor"] = {{"kind", to_string(c.compressor.kind)}, {"ratio", c.compressor.ratio}};
  doc["error_feedback"] = c.error_feedback;
  doc["rounds"] = c.rounds;
  doc["master_seed"] = c.master_seed;
  doc["eval_every"] = c.eval_every;
  doc["init_scale"] = c.init_scale;
  doc["output_path"] = c.output_path;
  if (c.data_dir) doc["data_dir"] = c.data_dir->string();
  return doc;
}

}  // namespace fedams
