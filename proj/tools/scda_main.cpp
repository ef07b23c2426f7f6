#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "scda/ablation.hpp"
#include "scda/adapter.hpp"
#include "scda/cli_config.hpp"
#include "scda/data.hpp"
#include "scda/error.hpp"
#include "scda/eval.hpp"
#include "scda/net.hpp"
#include "scda/pca.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace scda;

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out.flush()) throw IoError("write failed: " + path.string());
}

void print_artifacts(const ordered_json& artifacts) {
  std::cout << artifacts.dump() << "\n";
}

// Binds one flag per config key to a staging copy; resolve() layers
// defaults, then the --config file, then every flag that was given.
class ConfigFlags {
 public:
  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path_,
                    "JSON configuration file (flags take precedence)");

    add(cmd, "--lr", staging_.train.lr, "learning rate",
        [](CliConfig& d, const CliConfig& s) { d.train.lr = s.train.lr; });
    add(cmd, "--momentum", staging_.train.momentum, "SGD momentum",
        [](CliConfig& d, const CliConfig& s) {
          d.train.momentum = s.train.momentum;
        });
    add(cmd, "--weight-decay", staging_.train.weight_decay, "L2 penalty",
        [](CliConfig& d, const CliConfig& s) {
          d.train.weight_decay = s.train.weight_decay;
        });
    add(cmd, "--batch-size", staging_.train.batch_size, "mini-batch rows",
        [](CliConfig& d, const CliConfig& s) {
          d.train.batch_size = s.train.batch_size;
        });
    add(cmd, "--pretrain-epochs", staging_.train.pretrain_epochs,
        "adversarial pre-training epochs",
        [](CliConfig& d, const CliConfig& s) {
          d.train.pretrain_epochs = s.train.pretrain_epochs;
        });
    add(cmd, "--inner-epochs", staging_.train.inner_epochs,
        "training epochs inside each outer epoch",
        [](CliConfig& d, const CliConfig& s) {
          d.train.inner_epochs = s.train.inner_epochs;
        });
    add(cmd, "--outer-epochs", staging_.train.outer_epochs,
        "discovery/training rounds",
        [](CliConfig& d, const CliConfig& s) {
          d.train.outer_epochs = s.train.outer_epochs;
        });
    add(cmd, "--k-max", staging_.train.k_max,
        "largest implicit-class count swept",
        [](CliConfig& d, const CliConfig& s) { d.train.k_max = s.train.k_max; });
    add(cmd, "--pca-dim", staging_.train.pca_dim,
        "PCA width for discovery (clamped to feature-dim)",
        [](CliConfig& d, const CliConfig& s) {
          d.train.pca_dim = s.train.pca_dim;
        });
    add(cmd, "--restarts", staging_.train.restarts, "k-means restarts",
        [](CliConfig& d, const CliConfig& s) {
          d.train.restarts = s.train.restarts;
        });
    add(cmd, "--grl-lambda", staging_.train.grl_lambda,
        "gradient-reversal strength",
        [](CliConfig& d, const CliConfig& s) {
          d.train.grl_lambda = s.train.grl_lambda;
        });
    add(cmd, "--kneedle-sensitivity", staging_.train.kneedle_sensitivity,
        "elbow detection threshold",
        [](CliConfig& d, const CliConfig& s) {
          d.train.kneedle_sensitivity = s.train.kneedle_sensitivity;
        });
    add(cmd, "--hidden-dims", staging_.train.hidden_dims,
        "feature extractor hidden widths (comma-separated)",
        [](CliConfig& d, const CliConfig& s) {
          d.train.hidden_dims = s.train.hidden_dims;
        })
        ->delimiter(',');
    add(cmd, "--feature-dim", staging_.train.feature_dim,
        "feature extractor output width",
        [](CliConfig& d, const CliConfig& s) {
          d.train.feature_dim = s.train.feature_dim;
        });
    add(cmd, "--seed", staging_.train.seed, "root random seed",
        [](CliConfig& d, const CliConfig& s) { d.train.seed = s.train.seed; });
    add(cmd, "--ablation", ablation_,
        "training variant: full, pretrain_only, k_fixed_1, k_star_no_iters, "
        "k_gt_no_iters, k_gt_iters",
        [](CliConfig& d, const CliConfig& s) {
          d.train.ablation_mode = s.train.ablation_mode;
        });
    add(cmd, "--k-gt", staging_.train.k_gt,
        "oracle implicit-class count for the k_gt_* modes",
        [](CliConfig& d, const CliConfig& s) { d.train.k_gt = s.train.k_gt; });

    add(cmd, "--num-known", staging_.bench.num_known,
        "known classes in the benchmark",
        [](CliConfig& d, const CliConfig& s) {
          d.bench.num_known = s.bench.num_known;
        });
    add(cmd, "--num-implicit", staging_.bench.num_implicit,
        "implicit (target-only) classes",
        [](CliConfig& d, const CliConfig& s) {
          d.bench.num_implicit = s.bench.num_implicit;
        });
    add(cmd, "--dim", staging_.bench.dim, "feature dimension",
        [](CliConfig& d, const CliConfig& s) { d.bench.dim = s.bench.dim; });
    add(cmd, "--sigma", staging_.bench.sigma, "class blob spread",
        [](CliConfig& d, const CliConfig& s) { d.bench.sigma = s.bench.sigma; });
    add(cmd, "--center-range", staging_.bench.center_range,
        "class centers drawn from [-range, range]",
        [](CliConfig& d, const CliConfig& s) {
          d.bench.center_range = s.bench.center_range;
        });
    add(cmd, "--min-separation", staging_.bench.min_separation_sigmas,
        "minimum center distance in sigmas",
        [](CliConfig& d, const CliConfig& s) {
          d.bench.min_separation_sigmas = s.bench.min_separation_sigmas;
        });
    add(cmd, "--center-dim", staging_.bench.center_dim,
        "confine centers to the first N coordinates (0 = all)",
        [](CliConfig& d, const CliConfig& s) {
          d.bench.center_dim = s.bench.center_dim;
        });
    add(cmd, "--rotation-angle", staging_.bench.rotation_angle,
        "domain shift rotation per coordinate plane",
        [](CliConfig& d, const CliConfig& s) {
          d.bench.rotation_angle = s.bench.rotation_angle;
        });
    add(cmd, "--translation", staging_.bench.translation,
        "domain shift offset (comma-separated; 1 value broadcasts)",
        [](CliConfig& d, const CliConfig& s) {
          d.bench.translation = s.bench.translation;
        })
        ->delimiter(',');
    add(cmd, "--shift-scale", staging_.bench.shift_scale,
        "domain shift scale factor",
        [](CliConfig& d, const CliConfig& s) {
          d.bench.shift_scale = s.bench.shift_scale;
        });
    add(cmd, "--source-per-class", staging_.bench.source_per_class,
        "source samples per class",
        [](CliConfig& d, const CliConfig& s) {
          d.bench.source_per_class = s.bench.source_per_class;
        });
    add(cmd, "--target-per-class", staging_.bench.target_per_class,
        "target samples per class",
        [](CliConfig& d, const CliConfig& s) {
          d.bench.target_per_class = s.bench.target_per_class;
        });
    add(cmd, "--imbalance-ratio", staging_.bench.imbalance_ratio,
        "shrink a quarter of the classes to this fraction",
        [](CliConfig& d, const CliConfig& s) {
          d.bench.imbalance_ratio = s.bench.imbalance_ratio;
        });

    add(cmd, "--out-dir", staging_.paths.out_dir, "artifact directory",
        [](CliConfig& d, const CliConfig& s) {
          d.paths.out_dir = s.paths.out_dir;
        });
    add(cmd, "--source-csv", staging_.paths.source_csv,
        "source dataset file (with --target-csv, replaces the generator)",
        [](CliConfig& d, const CliConfig& s) {
          d.paths.source_csv = s.paths.source_csv;
        });
    add(cmd, "--target-csv", staging_.paths.target_csv,
        "target dataset file",
        [](CliConfig& d, const CliConfig& s) {
          d.paths.target_csv = s.paths.target_csv;
        });

    add(cmd, "--modes", staging_.ablate.modes,
        "ablation modes to sweep (comma-separated)",
        [](CliConfig& d, const CliConfig& s) {
          d.ablate.modes = s.ablate.modes;
        })
        ->delimiter(',');
    add(cmd, "--num-seeds", staging_.ablate.num_seeds,
        "seeds per mode, starting at --seed",
        [](CliConfig& d, const CliConfig& s) {
          d.ablate.num_seeds = s.ablate.num_seeds;
        });
  }

  CliConfig resolve() const {
    CliConfig out;
    if (!config_path_.empty()) out = load_config(config_path_);
    CliConfig staged = staging_;
    try {
      staged.train.ablation_mode = ablation_from_name(ablation_);
    } catch (const ContractViolation& e) {
      throw ParseError(std::string("--ablation: ") + e.what());
    }
    for (const auto& [option, apply] : appliers_)
      if (option->count() > 0) apply(out, staged);
    return out;
  }

 private:
  template <typename Field>
  CLI::Option* add(CLI::App* cmd, const char* name, Field& field,
                   const char* desc,
                   std::function<void(CliConfig&, const CliConfig&)> apply) {
    CLI::Option* option =
        cmd->add_option(name, field, desc)->capture_default_str();
    appliers_.emplace_back(option, std::move(apply));
    return option;
  }

  CliConfig staging_;
  std::string ablation_ = "full";
  std::string config_path_;
  std::vector<std::pair<CLI::Option*,
                        std::function<void(CliConfig&, const CliConfig&)>>>
      appliers_;
};

std::string pretrain_csv(const std::vector<double>& objective) {
  std::string out = "epoch,objective_c\n";
  for (std::size_t i = 0; i < objective.size(); ++i)
    out += std::to_string(i + 1) + ',' + fmt_double(objective[i]) + '\n';
  return out;
}

std::string adapt_csv(const std::vector<OuterEpochLog>& log) {
  std::string out = "epoch,objective,l_s,l_t,l_tcc\n";
  for (const OuterEpochLog& e : log) {
    out += std::to_string(e.epoch);
    out += ',' + fmt_double(e.mean_objective);
    out += ',' + fmt_double(e.mean_l_s);
    out += ',' + fmt_double(e.mean_l_t);
    out += ',' + fmt_double(e.mean_l_tcc);
    out += '\n';
  }
  return out;
}

std::string k_trajectory_csv(const std::vector<OuterEpochLog>& log) {
  std::string out = "epoch,k_star,k_ca,k_elbow,estimated,aborted\n";
  for (const OuterEpochLog& e : log) {
    out += std::to_string(e.epoch);
    out += ',' + std::to_string(e.k_star);
    out += ',' + std::to_string(e.k_ca);
    out += ',' + std::to_string(e.k_elbow);
    out += ',' + std::to_string(e.estimated ? 1 : 0);
    out += ',' + std::to_string(e.discovery_aborted ? 1 : 0);
    out += '\n';
  }
  return out;
}

std::string scatter_csv(const Mlp& f, const SoftmaxClassifier& c,
                        const LabeledSet& source, const TargetSet& target) {
  const Matrix src_feat = forward(f, c, source.features).features;
  const Matrix tgt_feat = forward(f, c, target.features()).features;
  const PcaTransform pca = fit_pca(vstack(src_feat, tgt_feat), 2);
  const Matrix src2 = apply_pca(pca, src_feat);
  const Matrix tgt2 = apply_pca(pca, tgt_feat);
  const std::vector<int>& gt = eval::detail::ground_truth(target);

  std::string out = "domain,class,pseudo,x,y\n";
  for (int i = 0; i < src2.rows(); ++i) {
    out += "source," + std::to_string(source.labels[static_cast<std::size_t>(i)]);
    out += ",-1";
    out += ',' + fmt_double(src2.at(i, 0)) + ',' +
           fmt_double(src2.rows() && src2.cols() > 1 ? src2.at(i, 1) : 0.0);
    out += '\n';
  }
  for (int i = 0; i < tgt2.rows(); ++i) {
    const int cls = gt.empty() ? -1 : gt[static_cast<std::size_t>(i)];
    out += "target," + std::to_string(cls);
    out += ',' + std::to_string(
                     target.pseudo_labels()[static_cast<std::size_t>(i)]);
    out += ',' + fmt_double(tgt2.at(i, 0)) + ',' +
           fmt_double(tgt2.cols() > 1 ? tgt2.at(i, 1) : 0.0);
    out += '\n';
  }
  return out;
}

ordered_json epoch_line(const OuterEpochLog& log) {
  ordered_json j;
  j["phase"] = "adapt";
  j["epoch"] = log.epoch;
  j["k_star"] = log.k_star;
  j["k_ca"] = log.k_ca;
  j["k_elbow"] = log.k_elbow;
  j["estimated"] = log.estimated;
  j["aborted"] = log.discovery_aborted;
  j["mean_l_s"] = log.mean_l_s;
  j["mean_l_t"] = log.mean_l_t;
  j["mean_l_tcc"] = log.mean_l_tcc;
  j["mean_objective"] = log.mean_objective;
  if (log.evaluated) {
    j["os"] = log.os;
    j["os_star"] = log.os_star;
  }
  return j;
}

int cmd_generate(const CliConfig& cfg) {
  validate_cli_config(cfg);
  Rng rng(cfg.train.seed);
  GeneratedPair pair = generate(cfg.bench, rng);

  fs::path source_path = cfg.paths.source_csv.empty()
                             ? fs::path(cfg.paths.out_dir) / "source.csv"
                             : fs::path(cfg.paths.source_csv);
  fs::path target_path = cfg.paths.target_csv.empty()
                             ? fs::path(cfg.paths.out_dir) / "target.csv"
                             : fs::path(cfg.paths.target_csv);
  for (const fs::path& p : {source_path, target_path})
    if (p.has_parent_path()) fs::create_directories(p.parent_path());

  save_csv(source_path.string(), pair.source);
  save_csv(target_path.string(), pair.target);

  std::cout << "source: " << pair.source.features.rows() << " rows, "
            << pair.source.num_classes << " classes, dim "
            << pair.source.features.cols() << "\n";
  std::cout << "target: " << pair.target.size() << " rows, "
            << cfg.bench.num_known + cfg.bench.num_implicit
            << " classes, dim " << pair.target.dim() << "\n";

  ordered_json artifacts;
  artifacts["source_csv"] = source_path.string();
  artifacts["target_csv"] = target_path.string();
  print_artifacts(artifacts);
  return 0;
}

int cmd_run(const CliConfig& cfg, bool dry_run) {
  validate_cli_config(cfg);

  LabeledSet source;
  TargetSet target;
  if (!cfg.paths.source_csv.empty()) {
    source = load_labeled_csv(cfg.paths.source_csv);
    target = load_target_csv(cfg.paths.target_csv);
  } else {
    Rng rng(cfg.train.seed);
    GeneratedPair pair = generate(cfg.bench, rng);
    source = std::move(pair.source);
    target = std::move(pair.target);
  }
  if (source.features.cols() != target.dim())
    throw ShapeError("source and target dimensions differ");

  if (dry_run) {
    std::cout << "dry run: configuration and data are valid ("
              << source.features.rows() << " source rows, " << target.size()
              << " target rows)\n";
    print_artifacts(ordered_json::object());
    return 0;
  }

  const std::string hash = config_hash(cfg);
  const fs::path run_dir =
      fs::path(cfg.paths.out_dir) /
      ("run-" + hash + "-seed" + std::to_string(cfg.train.seed));
  fs::create_directories(run_dir / "checkpoints");

  std::ofstream epochs(run_dir / "epochs.jsonl", std::ios::binary);
  if (!epochs)
    throw IoError("cannot open for writing: " +
                  (run_dir / "epochs.jsonl").string());

  RunHooks hooks;
  hooks.on_pretrain_epoch = [&](int epoch, double objective_c) {
    ordered_json j;
    j["phase"] = "pretrain";
    j["epoch"] = epoch;
    j["objective_c"] = objective_c;
    epochs << j.dump() << "\n";
  };
  hooks.on_outer_epoch = [&](const OuterEpochLog& log, const Mlp& f,
                             const SoftmaxClassifier& c) {
    epochs << epoch_line(log).dump() << "\n";
    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%03d.json", log.epoch);
    save_checkpoint((run_dir / "checkpoints" / name).string(), f, c);
  };

  RunOutput out = run(cfg.train, source, target, &hooks);
  epochs.flush();
  if (!epochs) throw IoError("write failed: " + (run_dir / "epochs.jsonl").string());
  epochs.close();

  out.report.config_hash = hash;

  save_config((run_dir / "config.json").string(), cfg);
  save_report((run_dir / "report.json").string(), out.report);
  save_checkpoint((run_dir / "checkpoint.json").string(), out.state.f,
                  out.state.c);
  write_text(run_dir / "loss_pretrain.csv",
             pretrain_csv(out.state.pretrain_objective));
  write_text(run_dir / "loss_adapt.csv", adapt_csv(out.state.outer_log));
  write_text(run_dir / "k_trajectory.csv",
             k_trajectory_csv(out.state.outer_log));
  write_text(run_dir / "scatter.csv",
             scatter_csv(out.state.f, out.state.c, source, target));

  bool estimated = false;
  for (const OuterEpochLog& log : out.state.outer_log)
    if (log.estimated) estimated = true;
  if (estimated)
    write_sweep_csv((run_dir / "sweep.csv").string(),
                    out.state.latest_estimate);

  std::cout << "run " << hash << " seed " << cfg.train.seed << ": k_star "
            << out.state.k_star << ", " << out.state.outer_log.size()
            << " outer epochs\n";
  if (target.has_ground_truth()) {
    std::cout << "os " << out.report.os << ", os* " << out.report.os_star
              << ", k_gt " << out.report.k_gt << ", k_error "
              << out.report.k_error << "\n";
  }

  ordered_json artifacts;
  artifacts["run_dir"] = run_dir.string();
  artifacts["config"] = (run_dir / "config.json").string();
  artifacts["report"] = (run_dir / "report.json").string();
  artifacts["checkpoint"] = (run_dir / "checkpoint.json").string();
  artifacts["checkpoints_dir"] = (run_dir / "checkpoints").string();
  artifacts["epochs"] = (run_dir / "epochs.jsonl").string();
  artifacts["loss_pretrain_csv"] = (run_dir / "loss_pretrain.csv").string();
  artifacts["loss_adapt_csv"] = (run_dir / "loss_adapt.csv").string();
  artifacts["k_trajectory_csv"] = (run_dir / "k_trajectory.csv").string();
  artifacts["scatter_csv"] = (run_dir / "scatter.csv").string();
  if (estimated) artifacts["sweep_csv"] = (run_dir / "sweep.csv").string();
  print_artifacts(artifacts);
  return 0;
}

int cmd_ablate(const CliConfig& cfg) {
  validate_cli_config(cfg);

  std::vector<AblationMode> modes;
  for (const std::string& name : cfg.ablate.modes)
    modes.push_back(ablation_from_name(name));
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < cfg.ablate.num_seeds; ++i)
    seeds.push_back(cfg.train.seed + static_cast<std::uint64_t>(i));

  AblationTable table = ablation_suite(cfg.train, cfg.bench, modes, seeds);

  const std::string hash = config_hash(cfg);
  const fs::path dir =
      fs::path(cfg.paths.out_dir) /
      ("ablate-" + hash + "-seed" + std::to_string(cfg.train.seed));
  fs::create_directories(dir);
  save_config((dir / "config.json").string(), cfg);
  save_ablation((dir / "ablation.csv").string(),
                (dir / "ablation.json").string(), table);

  std::printf("%-16s %5s %8s %8s %8s %8s %8s %8s\n", "mode", "runs",
              "os", "os_sd", "os*", "os*_sd", "k_err", "k_err_sd");
  for (const AblationAggregate& row : table.rows) {
    std::printf("%-16s %5d %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f\n",
                ablation_name(row.mode), row.runs, row.os_mean, row.os_sd,
                row.os_star_mean, row.os_star_sd, row.k_error_mean,
                row.k_error_sd);
  }

  ordered_json artifacts;
  artifacts["ablate_dir"] = dir.string();
  artifacts["config"] = (dir / "config.json").string();
  artifacts["table_csv"] = (dir / "ablation.csv").string();
  artifacts["table_json"] = (dir / "ablation.json").string();
  print_artifacts(artifacts);
  return 0;
}

int cmd_report(const std::string& path) {
  MetricsReport rep = load_report(path);
  std::cout << "seed:        " << rep.seed << "\n";
  std::cout << "config_hash: "
            << (rep.config_hash.empty() ? "(none)" : rep.config_hash) << "\n";
  std::cout << "ablation:    " << rep.ablation << "\n";
  std::cout << "k_star:      " << rep.k_star << "\n";
  std::cout << "k_gt:        " << rep.k_gt << "\n";
  std::cout << "k_error:     " << rep.k_error << "\n";
  std::cout << "os:          " << rep.os << "\n";
  std::cout << "os*:         " << rep.os_star << "\n";
  std::cout << "per-class:  ";
  for (double v : rep.per_class_accuracy) std::cout << ' ' << v;
  std::cout << "\n";
  if (!rep.skipped_classes.empty()) {
    std::cout << "skipped:    ";
    for (int c : rep.skipped_classes) std::cout << ' ' << c;
    std::cout << "\n";
  }
  for (const auto& [n, distinct] : rep.correspondence)
    std::cout << "correspondence@" << n << ": " << distinct << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale open-set domain adaptation by implicit-class "
               "discovery"};
  app.require_subcommand(1);

  CLI::App* gen = app.add_subcommand("generate", "write benchmark CSVs");
  ConfigFlags gen_flags;
  gen_flags.attach(gen);

  CLI::App* runc = app.add_subcommand(
      "run", "pretrain, discover and adapt one configuration");
  ConfigFlags run_flags;
  run_flags.attach(runc);
  bool dry_run = false;
  runc->add_flag("--dry-run", dry_run,
                 "validate configuration and data, then exit");

  CLI::App* abl =
      app.add_subcommand("ablate", "run the mode/seed comparison suite");
  ConfigFlags abl_flags;
  abl_flags.attach(abl);

  CLI::App* rep = app.add_subcommand("report", "print a metrics report");
  std::string report_path;
  rep->add_option("path", report_path, "report.json to print")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_flags.resolve());
    if (runc->parsed()) return cmd_run(run_flags.resolve(), dry_run);
    if (abl->parsed()) return cmd_ablate(abl_flags.resolve());
    if (rep->parsed()) return cmd_report(report_path);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
