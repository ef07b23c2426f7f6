#include "scda/cli_config.hpp"

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "scda/error.hpp"

namespace scda {

namespace {

using nlohmann::ordered_json;

void require_known_keys(const ordered_json& obj, const char* section,
                        std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known)
      throw ParseError(std::string("config: unknown key '") + item.key() +
                       "' in " + section);
  }
}

template <typename T>
void read_field(const ordered_json& obj, const char* section, const char* key,
                T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: bad value for ") + section + "." +
                     key + ": " + e.what());
  }
}

ordered_json train_to_json(const TrainConfig& t) {
  ordered_json j;
  j["lr"] = t.lr;
  j["momentum"] = t.momentum;
  j["weight_decay"] = t.weight_decay;
  j["batch_size"] = t.batch_size;
  j["pretrain_epochs"] = t.pretrain_epochs;
  j["inner_epochs"] = t.inner_epochs;
  j["outer_epochs"] = t.outer_epochs;
  j["k_max"] = t.k_max;
  j["pca_dim"] = t.pca_dim;
  j["restarts"] = t.restarts;
  j["grl_lambda"] = t.grl_lambda;
  j["kneedle_sensitivity"] = t.kneedle_sensitivity;
  j["hidden_dims"] = t.hidden_dims;
  j["feature_dim"] = t.feature_dim;
  j["seed"] = t.seed;
  j["ablation"] = ablation_name(t.ablation_mode);
  j["k_gt"] = t.k_gt;
  return j;
}

void train_from_json(const ordered_json& j, TrainConfig& t) {
  require_known_keys(j, "train",
                     {"lr", "momentum", "weight_decay", "batch_size",
                      "pretrain_epochs", "inner_epochs", "outer_epochs",
                      "k_max", "pca_dim", "restarts", "grl_lambda",
                      "kneedle_sensitivity", "hidden_dims", "feature_dim",
                      "seed", "ablation", "k_gt"});
  read_field(j, "train", "lr", t.lr);
  read_field(j, "train", "momentum", t.momentum);
  read_field(j, "train", "weight_decay", t.weight_decay);
  read_field(j, "train", "batch_size", t.batch_size);
  read_field(j, "train", "pretrain_epochs", t.pretrain_epochs);
  read_field(j, "train", "inner_epochs", t.inner_epochs);
  read_field(j, "train", "outer_epochs", t.outer_epochs);
  read_field(j, "train", "k_max", t.k_max);
  read_field(j, "train", "pca_dim", t.pca_dim);
  read_field(j, "train", "restarts", t.restarts);
  read_field(j, "train", "grl_lambda", t.grl_lambda);
  read_field(j, "train", "kneedle_sensitivity", t.kneedle_sensitivity);
  read_field(j, "train", "hidden_dims", t.hidden_dims);
  read_field(j, "train", "feature_dim", t.feature_dim);
  read_field(j, "train", "seed", t.seed);
  std::string mode = ablation_name(t.ablation_mode);
  read_field(j, "train", "ablation", mode);
  try {
    t.ablation_mode = ablation_from_name(mode);
  } catch (const ContractViolation& e) {
    throw ParseError(std::string("config: train.ablation: ") + e.what());
  }
  read_field(j, "train", "k_gt", t.k_gt);
}

ordered_json bench_to_json(const ShiftSpec& b) {
  ordered_json j;
  j["num_known"] = b.num_known;
  j["num_implicit"] = b.num_implicit;
  j["dim"] = b.dim;
  j["sigma"] = b.sigma;
  j["center_range"] = b.center_range;
  j["min_separation_sigmas"] = b.min_separation_sigmas;
  j["center_dim"] = b.center_dim;
  j["rotation_angle"] = b.rotation_angle;
  j["translation"] = b.translation;
  j["shift_scale"] = b.shift_scale;
  j["source_per_class"] = b.source_per_class;
  j["target_per_class"] = b.target_per_class;
  j["imbalance_ratio"] = b.imbalance_ratio;
  return j;
}

void bench_from_json(const ordered_json& j, ShiftSpec& b) {
  require_known_keys(j, "bench",
                     {"num_known", "num_implicit", "dim", "sigma",
                      "center_range", "min_separation_sigmas", "center_dim",
                      "rotation_angle", "translation", "shift_scale",
                      "source_per_class", "target_per_class",
                      "imbalance_ratio"});
  read_field(j, "bench", "num_known", b.num_known);
  read_field(j, "bench", "num_implicit", b.num_implicit);
  read_field(j, "bench", "dim", b.dim);
  read_field(j, "bench", "sigma", b.sigma);
  read_field(j, "bench", "center_range", b.center_range);
  read_field(j, "bench", "min_separation_sigmas", b.min_separation_sigmas);
  read_field(j, "bench", "center_dim", b.center_dim);
  read_field(j, "bench", "rotation_angle", b.rotation_angle);
  read_field(j, "bench", "translation", b.translation);
  read_field(j, "bench", "shift_scale", b.shift_scale);
  read_field(j, "bench", "source_per_class", b.source_per_class);
  read_field(j, "bench", "target_per_class", b.target_per_class);
  read_field(j, "bench", "imbalance_ratio", b.imbalance_ratio);
}

}  // namespace

nlohmann::ordered_json config_to_json(const CliConfig& cfg) {
  ordered_json doc;
  doc["train"] = train_to_json(cfg.train);
  doc["bench"] = bench_to_json(cfg.bench);
  ordered_json paths;
  paths["out_dir"] = cfg.paths.out_dir;
  paths["source_csv"] = cfg.paths.source_csv;
  paths["target_csv"] = cfg.paths.target_csv;
  doc["paths"] = std::move(paths);
  ordered_json ablate;
  ablate["modes"] = cfg.ablate.modes;
  ablate["num_seeds"] = cfg.ablate.num_seeds;
  doc["ablate"] = std::move(ablate);
  return doc;
}

CliConfig config_from_json(const nlohmann::ordered_json& doc) {
  if (!doc.is_object()) throw ParseError("config: root must be an object");
  require_known_keys(doc, "the root", {"train", "bench", "paths", "ablate"});
  CliConfig cfg;
  if (const auto it = doc.find("train"); it != doc.end()) {
    if (!it->is_object()) throw ParseError("config: train must be an object");
    train_from_json(*it, cfg.train);
  }
  if (const auto it = doc.find("bench"); it != doc.end()) {
    if (!it->is_object()) throw ParseError("config: bench must be an object");
    bench_from_json(*it, cfg.bench);
  }
  if (const auto it = doc.find("paths"); it != doc.end()) {
    if (!it->is_object()) throw ParseError("config: paths must be an object");
    require_known_keys(*it, "paths", {"out_dir", "source_csv", "target_csv"});
    read_field(*it, "paths", "out_dir", cfg.paths.out_dir);
    read_field(*it, "paths", "source_csv", cfg.paths.source_csv);
    read_field(*it, "paths", "target_csv", cfg.paths.target_csv);
  }
  if (const auto it = doc.find("ablate"); it != doc.end()) {
    if (!it->is_object()) throw ParseError("config: ablate must be an object");
    require_known_keys(*it, "ablate", {"modes", "num_seeds"});
    read_field(*it, "ablate", "modes", cfg.ablate.modes);
    read_field(*it, "ablate", "num_seeds", cfg.ablate.num_seeds);
  }
  return cfg;
}

CliConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  ordered_json doc;
  try {
    doc = ordered_json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config: " + path + ": " + e.what());
  }
  return config_from_json(doc);
}

void save_config(const std::string& path, const CliConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << config_to_json(cfg).dump(2) << "\n";
  if (!out.flush()) throw IoError("write failed: " + path);
}

std::string config_hash(const CliConfig& cfg) {
  CliConfig keyed = cfg;
  keyed.train.seed = 0;
  ordered_json doc;
  doc["train"] = train_to_json(keyed.train);
  doc["bench"] = bench_to_json(keyed.bench);
  const std::string bytes = doc.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void validate_cli_config(const CliConfig& cfg) {
  validate_config(cfg.train);
  validate_shift_spec(cfg.bench);
  if (cfg.paths.out_dir.empty())
    throw ContractViolation("config: paths.out_dir must not be empty");
  if (cfg.paths.source_csv.empty() != cfg.paths.target_csv.empty())
    throw ContractViolation(
        "config: paths.source_csv and paths.target_csv must be set together");
  if (cfg.ablate.num_seeds < 1)
    throw ContractViolation("config: ablate.num_seeds >= 1");
  if (cfg.ablate.modes.empty())
    throw ContractViolation("config: ablate.modes must not be empty");
  for (const std::string& name : cfg.ablate.modes) ablation_from_name(name);
}

}  // namespace scda
