#include "itmainn/train/crossval.hpp"

#include "itmainn/core/error.hpp"
#include "itmainn/eval/report.hpp"

namespace itmainn::train {

nlohmann::json CrossValidation::to_json() const {
  nlohmann::json per_fold = nlohmann::json::array();
  for (const auto& f : folds) per_fold.push_back(eval::fold_report_json(f.fold, f.metrics));
  return {{"folds", per_fold}, {"mean", mean.to_json()}};
}

CrossValidation cross_validate(const dataset::DatasetManifest& manifest, const augment::PreprocessSpec& preprocess,
                               const FoldModelBuilder& builder, const TrainConfig& cfg,
                               const CrossValOptions& options, const FoldObserver& observer) {
  const auto plan = dataset::make_folds(manifest, options.k, options.seed);
  const int n_classes = static_cast<int>(manifest.num_classes());
  const auto averaging = options.averaging.value_or(eval::default_averaging(n_classes));
  CrossValidation result;
  std::vector<eval::MetricReport> reports;
  for (int fold = 0; fold < options.k; ++fold) {
    FoldOutcome outcome;
    outcome.fold = fold;
    outcome.plan = dataset::fold_split(manifest, plan, fold, options.val_fraction, options.seed, options.rounding);
    FileImageSet train_set(dataset::training_pool(manifest, outcome.plan, options.include_augmented), preprocess,
                           options.cache_images);
    FileImageSet val_set(manifest.select(outcome.plan.val_ids), preprocess, options.cache_images);
    FileImageSet test_set(manifest.select(outcome.plan.test_ids), preprocess);

    auto model = builder(fold);
    TrainConfig fold_cfg = cfg;
    if (val_set.empty()) fold_cfg.early_stopping = false;
    outcome.run = train(model, train_set, &val_set, fold_cfg);
    outcome.run.best_checkpoint.clear();
    outcome.metrics = eval::evaluate(predict_set(model, test_set, 32, options.threshold), n_classes, averaging);
    reports.push_back(outcome.metrics);
    if (observer) observer(outcome);
    result.folds.push_back(std::move(outcome));
  }
  result.mean = eval::mean_report(reports);
  return result;
}

}  // namespace itmainn::train
