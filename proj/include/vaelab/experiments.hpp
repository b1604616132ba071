#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "vaelab/augment.hpp"
#include "vaelab/evaluation.hpp"
#include "vaelab/trainer.hpp"

namespace vaelab::inline VAELAB_NS {

struct MetricsSettings {
  std::size_t n_samples = 10000;
  std::size_t n_reps = 10;
  /// Classifier + reference stats cache; empty means <out_dir>/classifier_stats.vlb.
  std::filesystem::path classifier_cache;
  std::uint64_t classifier_seed = 1;
  std::size_t classifier_epochs = 3;
  double classifier_min_accuracy = 0.97;
};

/// Everything a command needs. Loaded from an optional JSON config, then
/// overridden by flags; the resolved form is echoed to <out_dir>/spec.json.
struct ExperimentSpec {
  std::filesystem::path data_dir;
  std::filesystem::path out_dir = "out";
  Architecture architecture = Architecture::kFc;
  double beta = 0.048;
  std::vector<double> betas = default_beta_grid();
  std::uint64_t seed = 1;
  std::size_t epochs = 5;
  /// Use only the first N training / test examples (0 = all). Training count must be a multiple of 50.
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
  std::size_t jobs = 1;
  AugmentConfig augment;
  MetricsSettings metrics;
  /// Model read by metrics and repeat; empty means <out_dir>/model.vlb.
  std::filesystem::path checkpoint;

  std::filesystem::path classifier_cache() const;
  std::filesystem::path checkpoint_path() const;
};

nlohmann::json to_json(const ExperimentSpec& spec);
/// Unknown keys and ill-typed values are ValidationErrors.
ExperimentSpec spec_from_json(const nlohmann::json& j, ExperimentSpec base = {});
ExperimentSpec load_spec_file(const std::filesystem::path& path, ExperimentSpec base = {});
/// ValidationError for anything a command could not run with.
void validate(const ExperimentSpec& spec);

/// Dataset from spec.data_dir with the configured prefix limits.
Dataset load_dataset(const ExperimentSpec& spec);
TrainConfig train_config(const ExperimentSpec& spec, const Dataset& data);
/// Loads the cache, or trains the classifier, fits the stats and writes the cache.
MetricsContext obtain_metrics_context(const ExperimentSpec& spec, const Dataset& data, std::ostream& log);

/// Directory name for one beta of a sweep, e.g. "beta_0.048".
std::string beta_dir_name(double beta);

int cmd_train(const ExperimentSpec& spec, std::ostream& log);
int cmd_sweep(const ExperimentSpec& spec, std::ostream& log);
int cmd_metrics(const ExperimentSpec& spec, std::ostream& log);
int cmd_repeat(const ExperimentSpec& spec, std::ostream& log);
int cmd_classifier_train(const ExperimentSpec& spec, std::ostream& log);

/// Full command-line entry point. Exit codes: 0 success, 2 usage error, 1 runtime error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vaelab::inline VAELAB_NS
