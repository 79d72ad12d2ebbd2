#include "itmainn/cli/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <functional>
#include <optional>
#include <thread>

#include "itmainn/cli/pipeline.hpp"
#include "itmainn/core/error.hpp"
#include "itmainn/core/io.hpp"
#include "itmainn/core/log.hpp"
#include "itmainn/core/random.hpp"
#include "itmainn/dataset/ingest.hpp"
#include "itmainn/model/registry.hpp"
#include "itmainn/service/config.hpp"
#include "itmainn/service/server.hpp"

namespace itmainn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names{"ingest", "augment",  "split",  "train", "gridsearch",
                                              "evaluate", "crossval", "export", "serve", "report"};
  return names;
}

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  bool dry_run = false;
  std::string log_level = "info";
};

// Flags shared by every subcommand that reads a run config.
struct RunFlags {
  std::string config;
  std::string dataset;
  std::vector<std::string> backbones;
  std::string variant;
  std::string weights_dir;
  std::string out;
  std::optional<int> max_epochs;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool model_flags) {
  cmd->add_option("--config", f.config, "Run config (JSON)")->required();
  cmd->add_option("--dataset", f.dataset, "Dataset root, overrides dataset.root");
  if (model_flags) {
    cmd->add_option("--backbone", f.backbones, "Backbone name(s), overrides backbones");
    cmd->add_option("--variant", f.variant, "base or tiny");
    cmd->add_option("--weights-dir", f.weights_dir, "Local pretrained weight cache");
    cmd->add_option("--max-epochs", f.max_epochs, "Overrides train.max_epochs");
  }
  cmd->add_option("--out", f.out, "Output directory");
}

RunConfig load_config(const RunFlags& f, const Globals& g, bool out_is_run_root) {
  auto cfg = load_run_config(f.config, [&](RunConfig& c) {
    if (!f.dataset.empty()) c.dataset.root = f.dataset;
    if (!f.backbones.empty()) c.backbones = f.backbones;
    if (!f.variant.empty()) c.variant = f.variant;
    if (!f.weights_dir.empty()) c.weights_dir = f.weights_dir;
    if (out_is_run_root && !f.out.empty()) c.output_dir = f.out;
    if (f.max_epochs) {
      if (!c.train) c.train = train::TrainConfig{};
      c.train->max_epochs = *f.max_epochs;
    }
    if (g.seed) c.seed = *g.seed;
  });
  cfg.check_references();
  return cfg;
}

bool print_plan(const Globals& g, const std::string& command, const RunConfig& cfg, std::ostream& out) {
  if (!g.dry_run) return false;
  out << "dry run: " << command << " (seed " << cfg.seed << ")\n";
  for (const auto& line : describe_plan(command, cfg)) out << "  " << line << "\n";
  return true;
}

void print_metrics(std::ostream& out, const std::string& label, const eval::MetricReport& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s accuracy %.4f precision %.4f recall %.4f f1 %.4f auc %.4f loss %.4f (n=%lld)",
                label.c_str(), m.accuracy, m.precision, m.recall, m.f1, m.auc, m.cross_entropy_loss,
                static_cast<long long>(m.n_samples));
  out << buf << "\n";
}

log::Level parse_log_level(const std::string& text) {
  if (text == "debug") return log::Level::kDebug;
  if (text == "info") return log::Level::kInfo;
  if (text == "warn") return log::Level::kWarn;
  if (text == "error") return log::Level::kError;
  if (text == "off") return log::Level::kOff;
  fail(ErrorKind::kInvalidArgument, "unknown log level '" + text + "'");
}

bool is_validation(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kConfigError:
    case ErrorKind::kUnknownSubcommand:
    case ErrorKind::kValidationError:
    case ErrorKind::kFractionOutOfRange:
    case ErrorKind::kKTooSmall:
    case ErrorKind::kUnknownBackbone:
    case ErrorKind::kTargetBelowOriginalCount:
    case ErrorKind::kNoTransformsEnabled:
    case ErrorKind::kCoordinateOutOfRange:
      return true;
    default:
      return false;
  }
}

// The first token that is neither an option nor a global option's value.
std::optional<std::string> first_command(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a == "--seed" || a == "--log-level") {
      ++i;
      continue;
    }
    if (!a.empty() && a[0] == '-') continue;
    return a;
  }
  return std::nullopt;
}

void run_serve(const std::string& config_file, std::optional<int> port, const Globals& g, std::ostream& out) {
  auto cfg = service::load_service_config(config_file.empty() ? std::nullopt
                                                              : std::optional<fs::path>(config_file));
  if (port) cfg.port = *port;
  if (g.dry_run) {
    auto shown = cfg.to_json();
    shown["api_token"] = "<set>";
    out << "dry run: serve\n" << shown.dump(2) << "\n";
    return;
  }
  // Block the signals before any thread starts so only the waiter sees them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  service::CaseService svc(service::open_service_parts(cfg));
  const int bound = svc.start();
  out << "serving on " << cfg.host << ":" << bound << "\n" << std::flush;
  std::atomic<bool> done{false};
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    if (!done) log::info("signal " + std::to_string(sig) + ", shutting down");
    svc.stop();
  });
  svc.wait();
  done = true;
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  pthread_sigmask(SIG_UNBLOCK, &set, nullptr);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monkeypox skin-lesion triage: dataset, training, evaluation and case service", "itmainn"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Run seed; every stage seed derives from it");
  app.add_flag("--dry-run", g.dry_run, "Validate and print the plan without writing anything");
  app.add_option("--log-level", g.log_level, "debug, info, warn, error or off");

  std::function<void()> action;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Scan a dataset tree into a manifest");
  std::string in_dataset, in_task = "binary", in_layout, in_out;
  bool in_augmented = false, in_skip = false;
  ingest->add_option("--dataset", in_dataset, "Dataset root")->required();
  ingest->add_option("--task", in_task, "binary or multiclass");
  ingest->add_option("--layout", in_layout, "Layout JSON (class folders)");
  ingest->add_flag("--include-augmented", in_augmented, "Include the shipped augmented images");
  ingest->add_flag("--skip-undecodable", in_skip, "Skip unreadable files with a warning");
  ingest->add_option("--out", in_out, "Write the manifest JSON here");
  ingest->callback([&] {
    action = [&] {
      const auto task = dataset::parse_task(in_task);
      const auto layout = in_layout.empty() ? dataset::default_layout(task)
                                            : dataset::DatasetLayout::from_json(load_json_file(in_layout));
      if (!fs::is_directory(in_dataset)) fail(ErrorKind::kConfigError, in_dataset + " is not a directory");
      if (g.dry_run) {
        out << "dry run: ingest " << in_dataset << " (" << layout.classes.size() << " classes)\n";
        return;
      }
      dataset::IngestOptions options;
      options.include_augmented = in_augmented;
      options.undecodable = in_skip ? dataset::UndecodablePolicy::kSkipWithWarning : dataset::UndecodablePolicy::kFail;
      const auto report = dataset::ingest_dataset(in_dataset, layout, options);
      const auto& m = report.manifest;
      const auto originals = m.counts(dataset::Origin::kOriginal);
      const auto augmented = m.counts(dataset::Origin::kAugmented);
      out << "class,original,augmented,total\n";
      for (std::size_t c = 0; c < m.num_classes(); ++c) {
        out << m.class_names()[c] << "," << originals[c] << "," << augmented[c] << "," << m.counts()[c] << "\n";
      }
      out << "total,,," << m.size() << "\n";
      if (!report.skipped.empty()) out << "skipped " << report.skipped.size() << " undecodable files\n";
      if (!in_out.empty()) m.save(in_out);
    };
  });

  // augment
  auto* augment = app.add_subcommand("augment", "Generate augmented training images");
  RunFlags aug_flags;
  std::string aug_split;
  add_run_flags(augment, aug_flags, false);
  augment->add_option("--split", aug_split, "split.json whose training ids are augmented");
  augment->callback([&] {
    action = [&] {
      const auto cfg = load_config(aug_flags, g, false);
      if (!cfg.augmentation) fail(ErrorKind::kConfigError, "run config /augmentation: required for augment");
      std::optional<dataset::SplitPlan> split;
      if (!aug_split.empty()) split = dataset::SplitPlan::from_json(load_json_file(aug_split));
      if (print_plan(g, "augment", cfg, out)) return;
      const fs::path dir = aug_flags.out.empty() ? cfg.output_dir / "augmented" : fs::path(aug_flags.out);
      const auto result = augment_dataset(cfg, split, dir);
      out << "augmented dataset in " << result.out_dir.string() << "\n";
      const auto augmented = result.manifest.counts(dataset::Origin::kAugmented);
      for (std::size_t c = 0; c < result.manifest.num_classes(); ++c) {
        out << result.manifest.class_names()[c] << " " << result.manifest.counts()[c] << " (" << augmented[c]
            << " generated)\n";
      }
    };
  });

  // split
  auto* split = app.add_subcommand("split", "Write the stratified split and k folds");
  RunFlags split_flags;
  add_run_flags(split, split_flags, false);
  split->callback([&] {
    action = [&] {
      const auto cfg = load_config(split_flags, g, false);
      if (print_plan(g, "split", cfg, out)) return;
      const auto manifest = load_manifest(cfg);
      const auto seeds = cfg.seeds();
      const auto plan = dataset::stratified_split(manifest, cfg.split.test_fraction, cfg.split.val_fraction,
                                                  seeds.split, cfg.split.rounding);
      const auto folds = dataset::make_folds(manifest, cfg.split.k, seeds.folds);
      const fs::path dir = split_flags.out.empty() ? cfg.output_dir : fs::path(split_flags.out);
      save_json_file(dir / kSplitFile, plan.to_json());
      save_json_file(dir / "folds.json", folds.to_json());
      out << "train " << plan.train_ids.size() << " val " << plan.val_ids.size() << " test " << plan.test_ids.size()
          << " -> " << (dir / kSplitFile).string() << "\n";
    };
  });

  // train, gridsearch, crossval
  RunFlags train_flags, grid_flags, cv_flags;
  auto add_training = [&](const std::string& name, const std::string& help, RunFlags& flags) {
    auto* cmd = app.add_subcommand(name, help);
    add_run_flags(cmd, flags, true);
    cmd->callback([&, name] {
      action = [&, name] {
        const auto cfg = load_config(flags, g, true);
        if (name == "gridsearch" && !cfg.grid) fail(ErrorKind::kConfigError, "run config /grid: required for gridsearch");
        if (print_plan(g, name, cfg, out)) return;
        for (const auto& b : cfg.backbones) {
          const auto result = name == "crossval" ? crossval_backbone(cfg, b) : train_backbone(cfg, b, name == "gridsearch");
          out << "run " << result.run_dir.string() << "\n";
          print_metrics(out, model::display_name(b), result.metrics);
        }
      };
    });
  };
  add_training("train", "Fine-tune backbones, evaluate on the test split, export bundles", train_flags);
  add_training("gridsearch", "Grid search then retrain the best configuration", grid_flags);
  add_training("crossval", "k-fold cross-validation", cv_flags);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a bundle on a dataset's test split");
  std::string ev_bundle, ev_dataset, ev_split, ev_layout, ev_out = ".", ev_rounding = "half_up", ev_averaging,
                                                          ev_loss = "cross_entropy";
  std::optional<std::uint64_t> ev_split_seed;
  double ev_test = 0.2, ev_val = 0.1, ev_threshold = 0.5;
  evaluate->add_option("--bundle", ev_bundle, "Bundle directory")->required();
  evaluate->add_option("--dataset", ev_dataset, "Dataset root")->required();
  auto* split_file = evaluate->add_option("--split", ev_split, "split.json to take test ids from");
  evaluate->add_option("--split-seed", ev_split_seed, "Recreate the stratified split with this seed")->excludes(split_file);
  evaluate->add_option("--test-fraction", ev_test, "Test fraction for --split-seed");
  evaluate->add_option("--val-fraction", ev_val, "Validation fraction for --split-seed");
  evaluate->add_option("--rounding", ev_rounding, "half_up, ceil or floor");
  evaluate->add_option("--layout", ev_layout, "Layout JSON (class folders)");
  evaluate->add_option("--threshold", ev_threshold, "Binary decision threshold");
  evaluate->add_option("--averaging", ev_averaging, "binary, weighted or macro");
  evaluate->add_option("--loss", ev_loss, "Loss column: cross_entropy or mse");
  evaluate->add_option("--out", ev_out, "Directory for report.csv, report.md and metrics.json");
  evaluate->callback([&] {
    action = [&] {
      if (!(ev_threshold > 0.0 && ev_threshold < 1.0)) fail(ErrorKind::kInvalidArgument, "--threshold must be in (0, 1)");
      const auto loss = eval::parse_loss_column(ev_loss);
      const auto bundle = model::read_bundle_manifest(ev_bundle);
      EvaluateOptions options;
      options.bundle = ev_bundle;
      options.dataset_root = ev_dataset;
      options.threshold = ev_threshold;
      if (!ev_averaging.empty()) options.averaging = eval::parse_averaging(ev_averaging);
      options.layout = ev_layout.empty() ? dataset::default_layout(bundle.task())
                                         : dataset::DatasetLayout::from_json(load_json_file(ev_layout));
      if (!fs::is_directory(ev_dataset)) fail(ErrorKind::kConfigError, ev_dataset + " is not a directory");
      const auto seed = ev_split_seed.value_or(StageSeeds::expand(g.seed.value_or(RunConfig{}.seed)).split);
      if (g.dry_run) {
        out << "dry run: evaluate " << bundle.backbone.name << " on " << ev_dataset << " test split "
            << (ev_split.empty() ? "seed " + std::to_string(seed) : ev_split) << "\n";
        return;
      }
      if (!ev_split.empty()) {
        options.split = dataset::SplitPlan::from_json(load_json_file(ev_split));
      } else {
        dataset::IngestOptions ingest;
        ingest.include_augmented = false;
        const auto manifest = dataset::ingest_dataset(ev_dataset, *options.layout, ingest).manifest;
        options.split = dataset::stratified_split(manifest, ev_test, ev_val, seed, dataset::parse_rounding(ev_rounding));
      }
      std::string backbone;
      const auto metrics = evaluate_bundle(options, &backbone);
      write_run_reports(ev_out, backbone, bundle.task(), metrics, loss, "evaluate");
      out << read_file_text(fs::path(ev_out) / "report.md");
    };
  });

  // export
  auto* exporter = app.add_subcommand("export", "Export a run's checkpoint as a deployment bundle");
  std::string ex_run, ex_out;
  exporter->add_option("--run", ex_run, "Run directory")->required();
  exporter->add_option("--out", ex_out, "Bundle directory (default <run>/bundle)");
  exporter->callback([&] {
    action = [&] {
      const fs::path dir = ex_out.empty() ? fs::path(ex_run) / kBundleDir : fs::path(ex_out);
      if (!fs::is_regular_file(fs::path(ex_run) / kModelFile)) {
        fail(ErrorKind::kConfigError, ex_run + " has no " + kModelFile);
      }
      if (g.dry_run) {
        out << "dry run: export " << ex_run << " -> " << dir.string() << "\n";
        return;
      }
      const auto manifest = export_run(ex_run, dir);
      out << "bundle " << dir.string() << " (" << manifest.backbone.name << ", " << manifest.class_names.size()
          << " classes)\n";
    };
  });

  // serve
  auto* serve = app.add_subcommand("serve", "Run the case service");
  std::string sv_config;
  std::optional<int> sv_port;
  serve->add_option("--config", sv_config, "Service config (JSON); ITMAINN_* variables override it");
  serve->add_option("--port", sv_port, "Listen port");
  serve->callback([&] { action = [&] { run_serve(sv_config, sv_port, g, out); }; });

  // report
  auto* report = app.add_subcommand("report", "Comparison table over the newest run of each backbone");
  std::string rp_runs = "runs", rp_format = "markdown", rp_loss = "cross_entropy", rp_out;
  report->add_option("--runs", rp_runs, "Runs directory");
  report->add_option("--format", rp_format, "csv or markdown");
  report->add_option("--loss", rp_loss, "Loss column: cross_entropy or mse");
  report->add_option("--out", rp_out, "Write the table here instead of stdout");
  report->callback([&] {
    action = [&] {
      const auto format = eval::parse_report_format(rp_format);
      const auto loss = eval::parse_loss_column(rp_loss);
      const auto rows = collect_reports(rp_runs);
      const auto text = eval::render_report(rows, format, loss);
      if (rp_out.empty() || g.dry_run) {
        out << text;
      } else {
        write_file(rp_out, text);
        out << rows.size() << " rows -> " << rp_out << "\n";
      }
    };
  });

  try {
    if (const auto cmd = first_command(args)) {
      const auto& names = subcommand_names();
      if (std::find(names.begin(), names.end(), *cmd) == names.end()) {
        fail(ErrorKind::kUnknownSubcommand, "'" + *cmd + "' (expected one of ingest, augment, split, train, "
                                            "gridsearch, evaluate, crossval, export, serve, report)");
      }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitValidation;
    }
    log::set_level(parse_log_level(g.log_level));
    if (action) action();
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_validation(e.kind()) ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace itmainn::cli
