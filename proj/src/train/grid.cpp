#include "itmainn/train/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "itmainn/core/error.hpp"
#include "itmainn/core/random.hpp"

namespace itmainn::train {

std::string_view to_string(SelectionMetric metric) {
  switch (metric) {
    case SelectionMetric::kF1: return "f1";
    case SelectionMetric::kAccuracy: return "accuracy";
    case SelectionMetric::kAuc: return "auc";
    case SelectionMetric::kPrecision: return "precision";
    case SelectionMetric::kRecall: return "recall";
  }
  return "f1";
}

SelectionMetric parse_selection_metric(std::string_view text) {
  for (auto m : {SelectionMetric::kF1, SelectionMetric::kAccuracy, SelectionMetric::kAuc, SelectionMetric::kPrecision,
                 SelectionMetric::kRecall}) {
    if (text == to_string(m)) return m;
  }
  fail(ErrorKind::kInvalidArgument, "unknown selection metric '" + std::string(text) + "'");
}

double metric_value(const eval::MetricReport& report, SelectionMetric metric) {
  switch (metric) {
    case SelectionMetric::kF1: return report.f1;
    case SelectionMetric::kAccuracy: return report.accuracy;
    case SelectionMetric::kAuc: return report.auc;
    case SelectionMetric::kPrecision: return report.precision;
    case SelectionMetric::kRecall: return report.recall;
  }
  return report.f1;
}

void HyperGrid::validate() const {
  if (learning_rates.empty() || batch_sizes.empty() || dropout_rates.empty() || weight_decays.empty() ||
      optimizers.empty()) {
    fail(ErrorKind::kInvalidArgument, "every hyperparameter list needs at least one candidate");
  }
}

std::size_t HyperGrid::product_size() const {
  return learning_rates.size() * batch_sizes.size() * dropout_rates.size() * weight_decays.size() * optimizers.size();
}

std::vector<TrainConfig> HyperGrid::enumerate(const TrainConfig& base) const {
  validate();
  std::vector<TrainConfig> out;
  out.reserve(product_size());
  for (double lr : learning_rates) {
    for (int bs : batch_sizes) {
      for (double dr : dropout_rates) {
        for (double wd : weight_decays) {
          for (auto opt : optimizers) {
            TrainConfig c = base;
            c.learning_rate = lr;
            c.batch_size = bs;
            c.dropout_rate = dr;
            c.weight_decay = wd;
            c.optimizer = opt;
            c.validate();
            out.push_back(c);
          }
        }
      }
    }
  }
  return out;
}

std::vector<TrainConfig> HyperGrid::candidates(const TrainConfig& base) const {
  auto all = enumerate(base);
  if (budget == 0 || budget >= all.size()) return all;
  std::vector<std::size_t> idx(all.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(budget_seed, "grid-budget"));
  rng.shuffle(std::span(idx));
  idx.resize(budget);
  std::sort(idx.begin(), idx.end());
  std::vector<TrainConfig> out;
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

nlohmann::json HyperGrid::to_json() const {
  std::vector<std::string> opts;
  for (auto o : optimizers) opts.emplace_back(to_string(o));
  return {{"learning_rate", learning_rates}, {"batch_size", batch_sizes},
          {"dropout_rate", dropout_rates},   {"weight_decay", weight_decays},
          {"optimizer", opts},               {"selection_metric", to_string(selection_metric)},
          {"budget", budget},                {"budget_seed", budget_seed}};
}

HyperGrid HyperGrid::from_json(const nlohmann::json& doc) {
  HyperGrid g;
  try {
    g.learning_rates = doc.value("learning_rate", g.learning_rates);
    g.batch_sizes = doc.value("batch_size", g.batch_sizes);
    g.dropout_rates = doc.value("dropout_rate", g.dropout_rates);
    g.weight_decays = doc.value("weight_decay", g.weight_decays);
    if (doc.contains("optimizer")) {
      g.optimizers.clear();
      for (const auto& o : doc.at("optimizer")) g.optimizers.push_back(parse_optimizer(o.get<std::string>()));
    }
    g.selection_metric = parse_selection_metric(doc.value("selection_metric", std::string("f1")));
    g.budget = doc.value("budget", std::size_t{0});
    g.budget_seed = doc.value("budget_seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfigError, std::string("malformed grid: ") + e.what());
  }
  g.validate();
  return g;
}

std::size_t select_best(const std::vector<GridCandidate>& candidates, SelectionMetric metric) {
  if (candidates.empty()) fail(ErrorKind::kInvalidArgument, "no grid candidates to select from");
  auto score = [&](const GridCandidate& c) {
    const double v = metric_value(c.val_metrics, metric);
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  };
  auto loss = [](const GridCandidate& c) {
    const double v = c.run.best_val_loss();
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double s = score(candidates[i]), bs = score(candidates[best]);
    if (s > bs || (s == bs && loss(candidates[i]) < loss(candidates[best]))) best = i;
  }
  return best;
}

GridResult grid_search(const ModelBuilder& builder, const HyperGrid& grid, const TrainConfig& base,
                       const ImageSet& train_set, const ImageSet& val_set, const CandidateObserver& observer) {
  const auto configs = grid.candidates(base);
  GridResult result;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& cfg = configs[i];
    try {
      auto model = builder(cfg);
      GridCandidate candidate;
      candidate.config = cfg;
      candidate.run = train(model, train_set, &val_set, cfg);
      candidate.val_metrics = eval::evaluate(predict_set(model, val_set), model.num_classes());
      candidate.run.best_checkpoint.clear();  // keep memory flat across the sweep
      if (observer) observer(i, configs.size(), candidate);
      result.candidates.push_back(std::move(candidate));
    } catch (const Error& e) {
      throw Error(e.kind(), "grid candidate " + std::to_string(i + 1) + "/" + std::to_string(configs.size()) + " " +
                                cfg.to_json().dump() + ": " + e.detail());
    }
  }
  result.best_index = select_best(result.candidates, grid.selection_metric);
  return result;
}

}  // namespace itmainn::train
