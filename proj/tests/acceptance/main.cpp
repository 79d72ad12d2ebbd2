#include <CLI11.hpp>
#include <cstdarg>
#include <iostream>

#include "acceptance.hpp"
#include "itmainn/core/error.hpp"
#include "itmainn/core/log.hpp"

namespace itmainn::acceptance {

std::string fmt(const char* format, ...) {
  char buf[1024];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

namespace {

const std::vector<Criterion>& all_criteria() {
  static const std::vector<Criterion> list{
      {"metric_oracle", "1000 random batches match a brute-force recount to 1e-12, < 1 min", metric_oracle},
      {"auc_equivalence", "trapezoidal AUC equals the rank statistic to 1e-9 on 500 sets; hand case 0.70",
       auc_equivalence},
      {"split_fold_properties", "200 random manifests: stratification, fold partition, determinism, < 1 min",
       split_fold_properties},
      {"ingestion_counts", "MSLD 102/126 and MSLD-v2.0 284/75/55/66/161/114 originals", ingestion_counts},
      {"augmentation", "targets give 1148/1414, byte-exact reruns, no augmented images in val/test", augmentation},
      {"training_smoke", ">= 95% train accuracy within 20 epochs, < 5 min; head gradients to 1e-4", training_smoke},
      {"desk_scale", "MobileViT on MSLD >= 0.90, ResNetViT on MSLD-v2.0 >= 0.80 test accuracy", desk_scale},
      {"bundle_round_trip", "export, load, predict agree to 1e-6 on 50 held-out images", bundle_round_trip},
      {"service_contract", "scores, threshold, nearest centers, dashboard oracle, 100 concurrent submits",
       service_contract},
  };
  return list;
}

const char* label(Status s) {
  switch (s) {
    case Status::kPass: return "PASS";
    case Status::kFail: return "FAIL";
    case Status::kNotRun: return "NOT RUN";
  }
  return "?";
}

}  // namespace
}  // namespace itmainn::acceptance

int main(int argc, char** argv) {
  using namespace itmainn::acceptance;
  CLI::App app{"Acceptance criteria; one result line per criterion", "itmainn_acceptance"};
  std::vector<std::string> selected;
  bool list = false;
  app.add_option("--criterion", selected, "Run only these criteria");
  app.add_flag("--list", list, "List criteria and exit");
  CLI11_PARSE(app, argc, argv);
  itmainn::log::set_level(itmainn::log::Level::kWarn);

  if (list) {
    for (const auto& c : all_criteria()) std::cout << c.name << "  " << c.statement << "\n";
    return 0;
  }
  std::vector<const Criterion*> runs;
  for (const auto& name : selected) {
    auto it = std::find_if(all_criteria().begin(), all_criteria().end(), [&](const auto& c) { return c.name == name; });
    if (it == all_criteria().end()) {
      std::cerr << "unknown criterion '" << name << "' (see --list)\n";
      return 2;
    }
    runs.push_back(&*it);
  }
  if (selected.empty()) {
    for (const auto& c : all_criteria()) runs.push_back(&c);
  }

  int passed = 0, failed = 0, not_run = 0;
  for (const auto* c : runs) {
    Stopwatch clock;
    Outcome outcome;
    try {
      outcome = c->run();
    } catch (const std::exception& e) {
      outcome = {Status::kFail, std::string("threw ") + e.what()};
    }
    std::cout << label(outcome.status) << "  " << c->name << "  (" << fmt("%.1f s", clock.seconds()) << ")  "
              << outcome.detail << std::endl;
    (outcome.status == Status::kPass ? passed : outcome.status == Status::kFail ? failed : not_run)++;
  }
  std::cout << passed << " passed, " << failed << " failed, " << not_run << " not run\n";
  if (failed > 0) return 1;
  if (passed == 0 && not_run > 0) return 77;
  return 0;
}
