#include <cstdlib>
#include <ostream>

#include <CLI11.hpp>

#include "vaelab/error.hpp"
#include "vaelab/experiments.hpp"

namespace vaelab::inline VAELAB_NS {

namespace {

struct Flags {
  std::string config;
  std::string data_dir, out_dir, arch, checkpoint, classifier_cache;
  double beta = 0;
  std::vector<double> betas;
  std::uint64_t seed = 0;
  std::size_t epochs = 0, train_limit = 0, test_limit = 0, jobs = 0, n_samples = 0, n_reps = 0;
  bool augment = false;
  std::size_t gen_start_step = 0, n_augmented = 0;
  double p_sampled = 0;
};

// Options shared by every subcommand; `which` selects the extra ones.
enum Extra : unsigned { kTraining = 1, kSweep = 2, kMetrics = 4, kModel = 8 };

struct Registered {
  CLI::App* app;
  std::vector<std::pair<CLI::Option*, std::function<void(ExperimentSpec&)>>> overrides;
};

Registered add_command(CLI::App& root, const std::string& name, const std::string& help, unsigned which, Flags& f) {
  Registered r{root.add_subcommand(name, help), {}};
  CLI::App* app = r.app;
  auto over = [&](CLI::Option* opt, std::function<void(ExperimentSpec&)> apply) {
    r.overrides.emplace_back(opt, std::move(apply));
  };
  app->add_option("--config", f.config, "JSON config file; flags override its values")->check(CLI::ExistingFile);
  over(app->add_option("--data-dir", f.data_dir, "MNIST IDX directory (default $VAELAB_DATA_DIR)"),
       [&](ExperimentSpec& s) { s.data_dir = f.data_dir; });
  over(app->add_option("--out", f.out_dir, "output directory (default out)"),
       [&](ExperimentSpec& s) { s.out_dir = f.out_dir; });
  over(app->add_option("--seed", f.seed, "base seed"), [&](ExperimentSpec& s) { s.seed = f.seed; });
  over(app->add_option("--train-limit", f.train_limit, "use the first N training examples"),
       [&](ExperimentSpec& s) { s.train_limit = f.train_limit; });
  over(app->add_option("--test-limit", f.test_limit, "use the first N test examples"),
       [&](ExperimentSpec& s) { s.test_limit = f.test_limit; });
  over(app->add_option("--classifier-cache", f.classifier_cache, "classifier and reference stats file"),
       [&](ExperimentSpec& s) { s.metrics.classifier_cache = f.classifier_cache; });
  if (which & (kTraining | kSweep | kModel)) {
    over(app->add_option("--arch", f.arch, "fc or conv"),
         [&](ExperimentSpec& s) { s.architecture = parse_architecture(f.arch); });
  }
  if (which & kTraining) {
    over(app->add_option("--beta", f.beta, "KL weight"), [&](ExperimentSpec& s) { s.beta = f.beta; });
  }
  if (which & (kTraining | kSweep)) {
    over(app->add_option("--epochs", f.epochs, "training epochs"), [&](ExperimentSpec& s) { s.epochs = f.epochs; });
    over(app->add_flag("--augment", f.augment, "train on generated samples as well"),
         [&](ExperimentSpec& s) { s.augment.enabled = f.augment; });
    over(app->add_option("--gen-start-step", f.gen_start_step, "step whose batch seeds the generation pool"),
         [&](ExperimentSpec& s) { s.augment.gen_start_step = f.gen_start_step; });
    over(app->add_option("--p-sampled", f.p_sampled, "probability of refreshing a pool latent"),
         [&](ExperimentSpec& s) { s.augment.p_sampled = f.p_sampled; });
    over(app->add_option("--n-augmented", f.n_augmented, "generated examples per batch"),
         [&](ExperimentSpec& s) { s.augment.n_augmented = f.n_augmented; });
  }
  if (which & kSweep) {
    over(app->add_option("--betas", f.betas, "beta grid")->delimiter(','),
         [&](ExperimentSpec& s) { s.betas = f.betas; });
    over(app->add_option("--jobs", f.jobs, "concurrent runs"), [&](ExperimentSpec& s) { s.jobs = f.jobs; });
  }
  if (which & (kSweep | kMetrics)) {
    over(app->add_option("--samples", f.n_samples, "generated samples for FID and p-values"),
         [&](ExperimentSpec& s) { s.metrics.n_samples = f.n_samples; });
  }
  if (which & kMetrics) {
    over(app->add_option("--reps", f.n_reps, "encode-decode repetitions"),
         [&](ExperimentSpec& s) { s.metrics.n_reps = f.n_reps; });
  }
  if (which & kModel) {
    over(app->add_option("--checkpoint", f.checkpoint, "model file (default <out>/model.vlb)"),
         [&](ExperimentSpec& s) { s.checkpoint = f.checkpoint; });
  }
  return r;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train and evaluate beta-VAEs on MNIST"};
  app.require_subcommand(1);
  Flags f;
  using Command = int (*)(const ExperimentSpec&, std::ostream&);
  std::vector<std::pair<Registered, Command>> commands = {
      {add_command(app, "train", "train one model", kTraining, f), cmd_train},
      {add_command(app, "sweep", "train one model per beta and score them", kSweep, f), cmd_sweep},
      {add_command(app, "metrics", "FID and p-value summaries of a trained model", kMetrics | kModel, f), cmd_metrics},
      {add_command(app, "repeat", "p-values over repeated encode-decode", kMetrics | kModel, f), cmd_repeat},
      {add_command(app, "classifier-train", "train the metrics classifier and cache its statistics", 0, f),
       cmd_classifier_train},
  };
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  for (auto& [reg, cmd] : commands) {
    if (!reg.app->parsed()) continue;
    try {
      ExperimentSpec spec;
      if (const char* env = std::getenv("VAELAB_DATA_DIR")) spec.data_dir = env;
      if (!f.config.empty()) spec = load_spec_file(f.config, spec);
      for (auto& [opt, apply] : reg.overrides) {
        if (opt->count() > 0) apply(spec);
      }
      return cmd(spec, out);
    } catch (const ValidationError& e) {
      err << "error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return 1;
    }
  }
  return 2;
}

}  // namespace vaelab::inline VAELAB_NS
