#include "itmainn/cli/run_config.hpp"

#include <algorithm>
#include <set>

#include "itmainn/core/error.hpp"
#include "itmainn/core/io.hpp"
#include "itmainn/core/random.hpp"
#include "itmainn/model/registry.hpp"

namespace itmainn::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::set<std::string> kTopKeys{"task",  "dataset", "augmentation", "backbones", "backbone", "variant",
                                     "weights_dir", "train", "grid", "split", "evaluation", "output_dir",
                                     "name", "seed", "cache_images"};
const std::set<std::string> kDatasetKeys{"root", "layout", "include_shipped_augmented", "skip_undecodable"};
const std::set<std::string> kSplitKeys{"test_fraction", "val_fraction", "rounding", "k"};
const std::set<std::string> kEvalKeys{"threshold", "averaging", "loss_column"};

std::string unescape_token(std::string token) {
  for (std::size_t p; (p = token.find("~1")) != std::string::npos;) token.replace(p, 2, "/");
  for (std::size_t p; (p = token.find("~0")) != std::string::npos;) token.replace(p, 2, "~");
  return token;
}

}  // namespace

std::string locate_pointer(const std::string& text, const std::string& pointer) {
  if (text.empty()) return "";
  std::size_t pos = 0;
  std::size_t found = std::string::npos;
  std::size_t start = 1;
  while (start <= pointer.size() && !pointer.empty()) {
    const auto end = pointer.find('/', start);
    const auto token = unescape_token(pointer.substr(start, end == std::string::npos ? std::string::npos : end - start));
    start = end == std::string::npos ? pointer.size() + 1 : end + 1;
    if (!token.empty() && std::all_of(token.begin(), token.end(), ::isdigit)) continue;
    const std::string quoted = json(token).dump();
    std::size_t at = pos;
    while ((at = text.find(quoted, at)) != std::string::npos) {
      auto after = text.find_first_not_of(" \t\r\n", at + quoted.size());
      if (after != std::string::npos && text[after] == ':') break;
      at += quoted.size();
    }
    if (at == std::string::npos) break;
    found = at;
    pos = at + quoted.size();
  }
  if (found == std::string::npos) return "";
  const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(found), '\n');
  const auto line_start = text.rfind('\n', found == 0 ? 0 : found - 1);
  const auto col = found - (line_start == std::string::npos || found == 0 ? 0 : line_start + 1) + 1;
  return std::to_string(line) + ":" + std::to_string(col);
}

StageSeeds StageSeeds::expand(std::uint64_t seed) {
  return {derive_seed(seed, "split"), derive_seed(seed, "folds"), derive_seed(seed, "augment"),
          derive_seed(seed, "model"), derive_seed(seed, "train"), derive_seed(seed, "grid")};
}

dataset::DatasetLayout RunConfig::layout() const {
  return dataset.layout ? *dataset.layout : dataset::default_layout(task);
}

train::TrainConfig RunConfig::train_config() const {
  auto cfg = train.value_or(train::TrainConfig{});
  cfg.seed = seeds().train;
  return cfg;
}

std::optional<augment::AugmentationConfig> RunConfig::augmentation_config() const {
  if (!augmentation) return std::nullopt;
  auto cfg = *augmentation;
  cfg.seed = seeds().augment;
  return cfg;
}

train::HyperGrid RunConfig::grid_config() const {
  auto g = grid.value_or(train::HyperGrid{});
  g.budget_seed = seeds().grid;
  return g;
}

void RunConfig::validate() const {
  auto bad = [](const std::string& key, const std::string& why) {
    fail(ErrorKind::kConfigError, "run config " + key + ": " + why);
  };
  if (dataset.root.empty()) bad("/dataset/root", "required");
  const auto lay = layout();
  if (lay.task != task) bad("/dataset/layout", "layout task differs from the run task");
  if (lay.classes.size() != dataset::expected_class_count(task)) {
    bad("/dataset/layout", "the " + std::string(dataset::to_string(task)) + " task needs " +
                               std::to_string(dataset::expected_class_count(task)) + " classes");
  }
  if (backbones.empty()) bad("/backbones", "at least one backbone");
  const auto& variants = model::variant_names();
  if (std::find(variants.begin(), variants.end(), variant) == variants.end()) bad("/variant", "unknown variant " + variant);
  std::set<std::string> seen;
  for (const auto& b : backbones) {
    try {
      model::registry_spec(b, variant);
    } catch (const Error& e) {
      bad("/backbones", e.detail());
    }
    if (!seen.insert(b).second) bad("/backbones", "duplicate " + b);
  }
  try {
    train_config().validate();
  } catch (const Error& e) {
    bad("/train", e.detail());
  }
  try {
    if (grid) grid->validate();
  } catch (const Error& e) {
    bad("/grid", e.detail());
  }
  if (!(split.test_fraction > 0.0 && split.test_fraction < 1.0)) bad("/split/test_fraction", "must be in (0, 1)");
  if (!(split.val_fraction >= 0.0 && split.val_fraction < 1.0)) bad("/split/val_fraction", "must be in [0, 1)");
  if (split.test_fraction + split.val_fraction >= 1.0) bad("/split", "test and validation leave no training data");
  if (split.k < 2) bad("/split/k", "must be >= 2");
  const auto tc = train_config();
  if (tc.early_stopping && split.val_fraction <= 0.0) {
    bad("/split/val_fraction", "early stopping needs a validation split");
  }
  if (!(evaluation.threshold >= 0.0 && evaluation.threshold <= 1.0)) bad("/evaluation/threshold", "must be in [0, 1]");
  if (augmentation) {
    try {
      augmentation->validate();
    } catch (const Error& e) {
      bad("/augmentation", e.detail());
    }
    for (const auto& [cls, target] : augmentation->target_count_per_class) {
      const bool known = std::any_of(lay.classes.begin(), lay.classes.end(),
                                     [&](const dataset::ClassFolder& f) { return f.class_name == cls; });
      if (!known) bad("/augmentation/target_count_per_class", "unknown class '" + cls + "'");
    }
  }
  if (output_dir.empty()) bad("/output_dir", "required");
}

void RunConfig::check_references() const {
  if (!fs::is_directory(dataset.root)) {
    fail(ErrorKind::kConfigError, "run config /dataset/root: " + dataset.root.string() + " is not a directory");
  }
  if (!weights_dir.empty() && !fs::is_directory(weights_dir)) {
    fail(ErrorKind::kConfigError, "run config /weights_dir: " + weights_dir.string() + " is not a directory");
  }
}

json RunConfig::to_json() const {
  json j{{"task", dataset::to_string(task)},
         {"dataset",
          {{"root", dataset.root.string()},
           {"include_shipped_augmented", dataset.include_shipped_augmented},
           {"skip_undecodable", dataset.skip_undecodable}}},
         {"backbones", backbones},
         {"variant", variant},
         {"weights_dir", weights_dir.string()},
         {"split",
          {{"test_fraction", split.test_fraction},
           {"val_fraction", split.val_fraction},
           {"rounding", dataset::to_string(split.rounding)},
           {"k", split.k}}},
         {"evaluation",
          {{"threshold", evaluation.threshold}, {"loss_column", eval::to_string(evaluation.loss_column)}}},
         {"output_dir", output_dir.string()},
         {"name", name},
         {"seed", seed},
         {"cache_images", cache_images}};
  if (dataset.layout) j["dataset"]["layout"] = dataset.layout->to_json();
  if (evaluation.averaging) j["evaluation"]["averaging"] = eval::to_string(*evaluation.averaging);
  if (augmentation) j["augmentation"] = augmentation->to_json();
  if (train) j["train"] = train->to_json();
  if (grid) j["grid"] = grid->to_json();
  return j;
}

RunConfig RunConfig::parse(const json& doc, const std::string& source, const std::string& text) {
  auto bad = [&](const std::string& pointer, const std::string& why) {
    const auto where = locate_pointer(text, pointer);
    fail(ErrorKind::kConfigError, source + (where.empty() ? "" : ":" + where) + ": " + pointer + ": " + why);
  };
  auto check_keys = [&](const json& obj, const std::set<std::string>& keys, const std::string& base) {
    if (!obj.is_object()) bad(base.empty() ? "/" : base, "expected an object");
    for (const auto& [k, _] : obj.items()) {
      if (!keys.count(k)) bad(base + "/" + k, "unknown key");
    }
  };
  // Parses one member, attributing any failure to its pointer.
  auto section = [&](const std::string& pointer, auto&& parse) {
    try {
      parse();
    } catch (const json::exception& e) {
      bad(pointer, e.what());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kConfigError && e.detail().rfind(source, 0) == 0) throw;
      bad(pointer, e.detail());
    }
  };

  check_keys(doc, kTopKeys, "");
  RunConfig c;
  section("/task", [&] {
    if (doc.contains("task")) c.task = dataset::parse_task(doc.at("task").get<std::string>());
  });
  const json ds = doc.value("dataset", json::object());
  check_keys(ds, kDatasetKeys, "/dataset");
  section("/dataset/root", [&] { c.dataset.root = ds.value("root", std::string()); });
  section("/dataset/layout", [&] {
    if (ds.contains("layout")) c.dataset.layout = dataset::DatasetLayout::from_json(ds.at("layout"));
  });
  section("/dataset/include_shipped_augmented", [&] {
    c.dataset.include_shipped_augmented = ds.value("include_shipped_augmented", false);
  });
  section("/dataset/skip_undecodable", [&] { c.dataset.skip_undecodable = ds.value("skip_undecodable", false); });
  section("/augmentation", [&] {
    if (doc.contains("augmentation")) c.augmentation = augment::AugmentationConfig::from_json(doc.at("augmentation"));
  });
  if (doc.contains("backbone") && doc.contains("backbones")) bad("/backbone", "give backbone or backbones, not both");
  section("/backbone", [&] {
    if (doc.contains("backbone")) c.backbones = {doc.at("backbone").get<std::string>()};
  });
  section("/backbones", [&] {
    if (doc.contains("backbones")) c.backbones = doc.at("backbones").get<std::vector<std::string>>();
  });
  section("/variant", [&] { c.variant = doc.value("variant", c.variant); });
  section("/weights_dir", [&] { c.weights_dir = doc.value("weights_dir", std::string()); });
  section("/train", [&] {
    if (doc.contains("train")) c.train = train::TrainConfig::from_json(doc.at("train"));
  });
  section("/grid", [&] {
    if (doc.contains("grid")) c.grid = train::HyperGrid::from_json(doc.at("grid"));
  });
  if (doc.contains("split")) {
    const auto& sp = doc.at("split");
    check_keys(sp, kSplitKeys, "/split");
    section("/split/test_fraction", [&] { c.split.test_fraction = sp.value("test_fraction", c.split.test_fraction); });
    section("/split/val_fraction", [&] { c.split.val_fraction = sp.value("val_fraction", c.split.val_fraction); });
    section("/split/rounding", [&] {
      if (sp.contains("rounding")) c.split.rounding = dataset::parse_rounding(sp.at("rounding").get<std::string>());
    });
    section("/split/k", [&] { c.split.k = sp.value("k", c.split.k); });
  }
  if (doc.contains("evaluation")) {
    const auto& ev = doc.at("evaluation");
    check_keys(ev, kEvalKeys, "/evaluation");
    section("/evaluation/threshold", [&] { c.evaluation.threshold = ev.value("threshold", c.evaluation.threshold); });
    section("/evaluation/averaging", [&] {
      if (ev.contains("averaging")) c.evaluation.averaging = eval::parse_averaging(ev.at("averaging").get<std::string>());
    });
    section("/evaluation/loss_column", [&] {
      if (ev.contains("loss_column")) {
        c.evaluation.loss_column = eval::parse_loss_column(ev.at("loss_column").get<std::string>());
      }
    });
  }
  section("/output_dir", [&] { c.output_dir = doc.value("output_dir", c.output_dir.string()); });
  section("/name", [&] { c.name = doc.value("name", std::string()); });
  section("/seed", [&] { c.seed = doc.value("seed", c.seed); });
  section("/cache_images", [&] { c.cache_images = doc.value("cache_images", false); });

  return c;
}

void RunConfig::validate_in(const std::string& source, const std::string& text) const {
  try {
    validate();
  } catch (const Error& e) {
    // validate() messages start with "run config <pointer>: ".
    const std::string prefix = "run config ";
    auto detail = e.detail();
    if (detail.rfind(prefix, 0) != 0) throw;
    detail = detail.substr(prefix.size());
    const auto colon = detail.find(": ");
    const auto pointer = detail.substr(0, colon);
    const auto where = locate_pointer(text, pointer);
    fail(ErrorKind::kConfigError,
         source + (where.empty() ? "" : ":" + where) + ": " + pointer + ": " + detail.substr(colon + 2));
  }
}

RunConfig RunConfig::from_json(const json& doc, const std::string& source, const std::string& text) {
  auto c = parse(doc, source, text);
  c.validate_in(source, text);
  return c;
}

RunConfig load_run_config(const fs::path& path, const std::function<void(RunConfig&)>& overrides) {
  const auto text = read_file_text(path);
  auto c = RunConfig::parse(load_json_file(path), path.string(), text);
  if (overrides) overrides(c);
  c.validate_in(path.string(), text);
  return c;
}

}  // namespace itmainn::cli
