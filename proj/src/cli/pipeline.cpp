#include "itmainn/cli/pipeline.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "itmainn/augment/augment.hpp"
#include "itmainn/core/error.hpp"
#include "itmainn/core/io.hpp"
#include "itmainn/core/log.hpp"
#include "itmainn/dataset/ingest.hpp"
#include "itmainn/model/bundle.hpp"
#include "itmainn/model/registry.hpp"
#include "itmainn/train/grid.hpp"
#include "itmainn/train/image_set.hpp"
#include "itmainn/train/run_dir.hpp"

namespace itmainn::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string run_name(const RunConfig& config, const std::string& backbone, const std::string& kind) {
  return (config.name.empty() ? "" : config.name + "-") + backbone + "-" + kind;
}

RunConfig single_backbone(const RunConfig& config, const std::string& backbone) {
  RunConfig c = config;
  c.backbones = {backbone};
  return c;
}

eval::Averaging averaging_for(const RunConfig& config, std::size_t n_classes) {
  return config.evaluation.averaging.value_or(eval::default_averaging(static_cast<int>(n_classes)));
}

void log_epoch(const std::string& who, const train::EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s epoch %d train_loss %.5f val_loss %.5f val_acc %.4f", who.c_str(), r.epoch,
                r.train_loss, r.val_loss, r.val_accuracy);
  log::info(buf);
}

json counts_json(const dataset::DatasetManifest& m) {
  json out = json::object();
  const auto originals = m.counts(dataset::Origin::kOriginal);
  const auto augmented = m.counts(dataset::Origin::kAugmented);
  for (std::size_t c = 0; c < m.num_classes(); ++c) {
    out[m.class_names()[c]] = {{"original", originals[c]}, {"augmented", augmented[c]}, {"total", m.counts()[c]}};
  }
  return out;
}

model::ClassifierModel build_for(const RunConfig& config, const model::BackboneSpec& spec, model::WeightProvider& weights,
                                 double dropout, const std::vector<std::string>& class_names) {
  return model::build_model(spec, model::HeadSpec::for_task(config.task, dropout), weights, config.seeds().model,
                            class_names);
}

}  // namespace

dataset::DatasetManifest load_manifest(const RunConfig& config) {
  dataset::IngestOptions options;
  options.include_augmented = config.dataset.include_shipped_augmented;
  options.undecodable =
      config.dataset.skip_undecodable ? dataset::UndecodablePolicy::kSkipWithWarning : dataset::UndecodablePolicy::kFail;
  auto report = dataset::ingest_dataset(config.dataset.root, config.layout(), options);
  const auto& m = report.manifest;
  std::ostringstream msg;
  msg << "ingested " << m.size() << " images from " << config.dataset.root.string();
  log::info(msg.str());
  return std::move(report.manifest);
}

std::unique_ptr<model::WeightProvider> weight_provider(const RunConfig& config) {
  if (config.weights_dir.empty()) {
    log::warn("no weights_dir configured; backbones start from seeded random initialisation");
    return std::make_unique<model::SeededInitProvider>();
  }
  return std::make_unique<model::LocalCacheProvider>(config.weights_dir);
}

StageResult train_backbone(const RunConfig& config, const std::string& backbone, bool use_grid) {
  const auto seeds = config.seeds();
  const auto manifest = load_manifest(config);
  const auto plan =
      dataset::stratified_split(manifest, config.split.test_fraction, config.split.val_fraction, seeds.split,
                                config.split.rounding);

  auto dir = train::RunDirectory::create(config.output_dir, run_name(config, backbone, use_grid ? "gridsearch" : "train"));
  log::info("run directory " + dir.path().string());
  dir.write_config(single_backbone(config, backbone).to_json());
  dir.write_json(kSplitFile, plan.to_json());

  auto working = manifest;
  if (const auto aug = config.augmentation_config()) {
    const auto extra = augment::augment_training_set(manifest, plan.train_ids, *aug, dir.path(), "augmented");
    working = manifest.with_images(extra);
    dir.write_json("augmented.json", counts_json(working));
    log::info("generated " + std::to_string(extra.size()) + " augmented training images");
  }

  const auto spec = model::registry_spec(backbone, config.variant);
  const auto& pre = spec.preprocess;
  train::FileImageSet train_set(dataset::training_pool(working, plan, true), pre, config.cache_images);
  train::FileImageSet val_set(working.select(plan.val_ids), pre, config.cache_images);
  train::FileImageSet test_set(working.select(plan.test_ids), pre, false);
  auto weights = weight_provider(config);

  auto tc = config.train_config();
  if (use_grid) {
    if (!config.grid) fail(ErrorKind::kConfigError, "run config /grid: required for gridsearch");
    const auto grid = config.grid_config();
    auto builder = [&](const train::TrainConfig& c) {
      return build_for(config, spec, *weights, c.dropout_rate, manifest.class_names());
    };
    auto result = train::grid_search(builder, grid, tc, train_set, val_set,
                                     [](std::size_t i, std::size_t n, const train::GridCandidate& c) {
                                       log::info("grid candidate " + std::to_string(i + 1) + "/" + std::to_string(n) +
                                                 " " + c.config.to_json().dump());
                                     });
    json candidates = json::array();
    for (const auto& c : result.candidates) {
      candidates.push_back({{"config", c.config.to_json()},
                            {"best_epoch", c.run.best_epoch},
                            {"best_val_loss", c.run.best_val_loss()},
                            {"val_metrics", c.val_metrics.to_json()}});
    }
    dir.write_json("grid.json", {{"selection_metric", train::to_string(grid.selection_metric)},
                                 {"best_index", result.best_index},
                                 {"candidates", candidates}});
    tc = result.best().config;
  }

  auto model = build_for(config, spec, *weights, tc.dropout_rate, manifest.class_names());
  const auto run = train::train(model, train_set, val_set.empty() ? nullptr : &val_set, tc,
                                [&](const train::EpochRecord& r) { log_epoch(backbone, r); });
  dir.write_epoch_log(run.epoch_log);
  dir.write_checkpoint(model);
  dir.write_json(kModelFile, {{"backbone", model.backbone_spec().to_json()},
                              {"head", model.head_spec().to_json()},
                              {"class_names", model.class_names()},
                              {"trained_epochs", model.trained_epochs()},
                              {"train_config", tc.to_json()},
                              {"best_epoch", run.best_epoch},
                              {"stopped_early", run.stopped_early},
                              {"wall_time_s", run.wall_time_s}});

  const auto batch = train::predict_set(model, test_set, 32, config.evaluation.threshold);
  const auto metrics = eval::evaluate(batch, model.num_classes(), averaging_for(config, manifest.num_classes()));
  write_run_reports(dir.path(), backbone, config.task, metrics, config.evaluation.loss_column,
                    use_grid ? "gridsearch" : "train");
  model::export_bundle(model, metrics, dir.path() / kBundleDir);
  return {dir.path(), backbone, metrics};
}

StageResult crossval_backbone(const RunConfig& config, const std::string& backbone) {
  const auto seeds = config.seeds();
  const auto manifest = load_manifest(config);
  auto dir = train::RunDirectory::create(config.output_dir, run_name(config, backbone, "crossval"));
  log::info("run directory " + dir.path().string());
  dir.write_config(single_backbone(config, backbone).to_json());
  if (config.augmentation) log::warn("cross-validation trains on originals; the augmentation section is not used");

  const auto spec = model::registry_spec(backbone, config.variant);
  auto weights = weight_provider(config);
  const auto tc = config.train_config();
  train::CrossValOptions options;
  options.k = config.split.k;
  options.val_fraction = config.split.val_fraction;
  options.seed = seeds.folds;
  options.rounding = config.split.rounding;
  options.include_augmented = config.dataset.include_shipped_augmented;
  options.cache_images = config.cache_images;
  options.threshold = config.evaluation.threshold;
  options.averaging = averaging_for(config, manifest.num_classes());
  const auto cv = train::cross_validate(
      manifest, spec.preprocess,
      [&](int) { return build_for(config, spec, *weights, tc.dropout_rate, manifest.class_names()); }, tc, options,
      [&](const train::FoldOutcome& f) {
        log::info(backbone + " fold " + std::to_string(f.fold) + " accuracy " + std::to_string(f.metrics.accuracy));
      });
  dir.write_json("folds.json", cv.to_json());
  write_run_reports(dir.path(), backbone, config.task, cv.mean, config.evaluation.loss_column, "crossval");
  return {dir.path(), backbone, cv.mean};
}

AugmentResult augment_dataset(const RunConfig& config, const std::optional<dataset::SplitPlan>& split,
                              const fs::path& out_dir) {
  const auto aug = config.augmentation_config();
  if (!aug) fail(ErrorKind::kConfigError, "run config /augmentation: required for augment");
  const auto manifest = load_manifest(config);
  std::vector<std::string> sources;
  if (split) {
    sources = split->train_ids;
  } else {
    for (const auto& image : manifest.images()) {
      if (image.origin == dataset::Origin::kOriginal) sources.push_back(image.id);
    }
  }
  const auto extra = augment::augment_training_set(manifest, sources, *aug, out_dir, "augmented");
  AugmentResult result{out_dir, manifest.with_images(extra)};
  result.manifest.save(out_dir / "manifest.json");
  save_json_file(out_dir / "counts.json", counts_json(result.manifest));
  save_json_file(out_dir / "augmentation.json", aug->to_json());
  return result;
}

eval::MetricReport evaluate_bundle(const EvaluateOptions& options, std::string* backbone) {
  const auto model = model::load_bundle(options.bundle);
  if (backbone) *backbone = model.backbone_spec().name;
  const auto layout = options.layout ? *options.layout : dataset::default_layout(model.task());
  dataset::IngestOptions ingest;
  ingest.include_augmented = false;
  const auto manifest = dataset::ingest_dataset(options.dataset_root, layout, ingest).manifest;
  if (manifest.class_names() != model.class_names()) {
    fail(ErrorKind::kIncompatibleHead, "dataset classes do not match the bundle's class list");
  }
  train::FileImageSet test_set(manifest.select(options.split.test_ids), model.backbone_spec().preprocess, false);
  const auto batch = train::predict_set(model, test_set, 32, options.threshold);
  const int n = model.num_classes();
  return eval::evaluate(batch, n, options.averaging.value_or(eval::default_averaging(n)));
}

void write_run_reports(const fs::path& dir, const std::string& backbone, dataset::Task task,
                       const eval::MetricReport& metrics, eval::LossColumn loss, const std::string& kind) {
  save_json_file(dir / kMetricsFile, {{"backbone", backbone},
                                      {"display_name", model::display_name(backbone)},
                                      {"task", dataset::to_string(task)},
                                      {"kind", kind},
                                      {"metrics", metrics.to_json()}});
  const std::vector<eval::NamedReport> rows{{model::display_name(backbone), metrics}};
  write_file(dir / "report.csv", eval::render_report(rows, eval::ReportFormat::kCsv, loss));
  write_file(dir / "report.md", eval::render_report(rows, eval::ReportFormat::kMarkdown, loss));
}

std::vector<eval::NamedReport> collect_reports(const fs::path& runs_dir) {
  if (!fs::is_directory(runs_dir)) fail(ErrorKind::kIoError, runs_dir.string() + " is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(runs_dir)) {
    if (entry.is_directory() && fs::is_regular_file(entry.path() / kMetricsFile)) dirs.push_back(entry.path());
  }
  // Run directory names start with a UTC timestamp, so name order is time order.
  std::sort(dirs.begin(), dirs.end());
  std::map<std::string, eval::MetricReport> latest;
  std::optional<std::string> task;
  for (const auto& d : dirs) {
    const auto doc = load_json_file(d / kMetricsFile);
    const auto t = doc.at("task").get<std::string>();
    if (task && *task != t) fail(ErrorKind::kInvalidArgument, runs_dir.string() + " mixes binary and multiclass runs");
    task = t;
    latest[doc.at("backbone").get<std::string>()] = eval::MetricReport::from_json(doc.at("metrics"));
  }
  std::vector<eval::NamedReport> rows;
  for (const auto& name : model::backbone_names()) {
    const auto it = latest.find(name);
    if (it != latest.end()) rows.emplace_back(model::display_name(name), it->second);
  }
  for (const auto& [name, report] : latest) {
    const auto& known = model::backbone_names();
    if (std::find(known.begin(), known.end(), name) == known.end()) rows.emplace_back(name, report);
  }
  if (rows.empty()) fail(ErrorKind::kEmptyReportSet, "no run with " + std::string(kMetricsFile) + " under " + runs_dir.string());
  return rows;
}

model::BundleManifest export_run(const fs::path& run_dir, const fs::path& out) {
  const auto spec = load_json_file(run_dir / kModelFile);
  const auto weights = read_file_bytes(run_dir / "checkpoint.pt");
  auto model = model::instantiate_model(model::BackboneSpec::from_json(spec.at("backbone")),
                                        model::HeadSpec::from_json(spec.at("head")),
                                        spec.at("class_names").get<std::vector<std::string>>(), weights);
  model.set_trained_epochs(spec.at("trained_epochs").get<int>());
  eval::MetricReport metrics;
  if (fs::is_regular_file(run_dir / kMetricsFile)) {
    metrics = eval::MetricReport::from_json(load_json_file(run_dir / kMetricsFile).at("metrics"));
  }
  return model::export_bundle(model, metrics, out);
}

std::vector<std::string> describe_plan(const std::string& command, const RunConfig& config) {
  std::vector<std::string> steps;
  const auto seeds = config.seeds();
  const auto layout = config.layout();
  steps.push_back("ingest " + config.dataset.root.string() + " (" + std::string(dataset::to_string(config.task)) +
                  ", " + std::to_string(layout.classes.size()) + " classes, shipped augmented images " +
                  (config.dataset.include_shipped_augmented ? "included" : "excluded") + ")");
  auto split_line = [&] {
    char buf[160];
    std::snprintf(buf, sizeof buf, "stratified split test %.3g val %.3g seed %llu", config.split.test_fraction,
                  config.split.val_fraction, static_cast<unsigned long long>(seeds.split));
    return std::string(buf);
  };
  auto aug_line = [&] {
    const auto aug = config.augmentation_config();
    if (!aug) return std::string("no augmentation");
    std::string targets;
    for (const auto& [cls, n] : aug->target_count_per_class) targets += " " + cls + "=" + std::to_string(n);
    return "augment to class targets" + targets + " seed " + std::to_string(aug->seed);
  };
  if (command == "split") {
    steps.push_back(split_line());
    steps.push_back("folds k=" + std::to_string(config.split.k) + " seed " + std::to_string(seeds.folds));
  } else if (command == "augment") {
    steps.push_back(aug_line());
  } else if (command == "train" || command == "gridsearch") {
    steps.push_back(split_line());
    steps.push_back(aug_line());
    for (const auto& b : config.backbones) {
      if (command == "gridsearch") {
        const auto grid = config.grid_config();
        steps.push_back("grid search " + b + " over " + std::to_string(grid.candidates(config.train_config()).size()) +
                        " of " + std::to_string(grid.product_size()) + " configurations by " +
                        std::string(train::to_string(grid.selection_metric)));
      }
      steps.push_back("train " + model::display_name(b) + " (" + config.variant + ") " +
                      (command == "gridsearch" ? "with the selected configuration" : config.train_config().to_json().dump()));
      steps.push_back("evaluate on the test split, export bundle");
    }
    steps.push_back("write run directories under " + config.output_dir.string());
  } else if (command == "crossval") {
    for (const auto& b : config.backbones) {
      steps.push_back(std::to_string(config.split.k) + "-fold cross-validation of " + model::display_name(b) +
                      " seed " + std::to_string(seeds.folds));
    }
    steps.push_back("write run directories under " + config.output_dir.string());
  }
  return steps;
}

}  // namespace itmainn::cli
