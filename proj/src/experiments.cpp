#include "vaelab/experiments.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>

#include "vaelab/checkpoint.hpp"
#include "vaelab/error.hpp"
#include "vaelab/report.hpp"

namespace vaelab::inline VAELAB_NS {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kGridSamples = 100;
constexpr std::size_t kGridCols = 10;

template <typename T>
void read_key(const json& obj, const char* key, T& dst) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ValidationError("unknown config key '" + where + key + "'");
  }
}

Tensor grid_latents(std::uint64_t seed, std::size_t n) {
  Rng rng(seed, streams::kSampleGrid);
  return rng.normal_tensor({n, kLatentDim});
}

void write_epoch_grid(const VaeModel& model, std::uint64_t seed, std::size_t epoch, const fs::path& dir) {
  write_sample_grid(generate(model, grid_latents(seed, kGridSamples)), kGridCols,
                    dir / ("samples_epoch" + std::to_string(epoch) + ".pgm"));
}

void echo_spec(const ExperimentSpec& spec, const char* command) {
  json j = to_json(spec);
  j["command"] = command;
  write_text_file(spec.out_dir / "spec.json", j.dump(2) + "\n");
}

json summary_json(const SweepRun& run) {
  const SweepRow row = run.row();
  auto loss = [](const LossBreakdown& l) { return json{{"total", l.total}, {"recon", l.recon}, {"kl", l.kl}}; };
  return {{"beta", run.beta}, {"seed", run.seed}, {"fid", run.fid},
          {"train", loss(row.summary.train)}, {"test", loss(row.summary.test)}, {"gen", loss(row.summary.gen)}};
}

SweepRow row_from_json(const json& j) {
  auto loss = [](const json& l) {
    LossBreakdown b;
    b.total = l.at("total").get<double>();
    b.recon = l.at("recon").get<double>();
    b.kl = l.at("kl").get<double>();
    return b;
  };
  SweepRow r;
  r.beta = j.at("beta").get<double>();
  r.ok = true;
  r.fid = j.at("fid").get<double>();
  r.summary = {loss(j.at("train")), loss(j.at("test")), loss(j.at("gen"))};
  return r;
}

std::string pvalue_row(const std::string& population, std::size_t rep, const PValues& p) {
  const Summary c = summarize(p.conditional), u = summarize(p.unconditional);
  std::string line = population + "," + std::to_string(rep);
  for (double v : {c.mean, c.q1, c.median, c.q3, u.mean, u.q1, u.median, u.q3}) line += "," + format_number(v);
  return line + "\n";
}

}  // namespace

fs::path ExperimentSpec::classifier_cache() const {
  return metrics.classifier_cache.empty() ? out_dir / "classifier_stats.vlb" : metrics.classifier_cache;
}

fs::path ExperimentSpec::checkpoint_path() const { return checkpoint.empty() ? out_dir / "model.vlb" : checkpoint; }

json to_json(const ExperimentSpec& s) {
  return {
      {"data_dir", s.data_dir.string()},
      {"out_dir", s.out_dir.string()},
      {"arch", to_string(s.architecture)},
      {"beta", s.beta},
      {"betas", s.betas},
      {"seed", s.seed},
      {"epochs", s.epochs},
      {"train_limit", s.train_limit},
      {"test_limit", s.test_limit},
      {"jobs", s.jobs},
      {"checkpoint", s.checkpoint.string()},
      {"augment",
       {{"enabled", s.augment.enabled},
        {"gen_start_step", s.augment.gen_start_step},
        {"p_sampled", s.augment.p_sampled},
        {"n_augmented", s.augment.n_augmented}}},
      {"metrics",
       {{"n_samples", s.metrics.n_samples},
        {"n_reps", s.metrics.n_reps},
        {"classifier_cache", s.metrics.classifier_cache.string()},
        {"classifier_seed", s.metrics.classifier_seed},
        {"classifier_epochs", s.metrics.classifier_epochs},
        {"classifier_min_accuracy", s.metrics.classifier_min_accuracy}}},
  };
}

ExperimentSpec spec_from_json(const json& j, ExperimentSpec s) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  reject_unknown(j,
                 {"data_dir", "out_dir", "arch", "beta", "betas", "seed", "epochs", "train_limit", "test_limit", "jobs",
                  "checkpoint", "augment", "metrics"},
                 "");
  std::string str;
  if (j.contains("data_dir")) read_key(j, "data_dir", str), s.data_dir = str;
  if (j.contains("out_dir")) read_key(j, "out_dir", str), s.out_dir = str;
  if (j.contains("checkpoint")) read_key(j, "checkpoint", str), s.checkpoint = str;
  if (j.contains("arch")) read_key(j, "arch", str), s.architecture = parse_architecture(str);
  read_key(j, "beta", s.beta);
  read_key(j, "betas", s.betas);
  read_key(j, "seed", s.seed);
  read_key(j, "epochs", s.epochs);
  read_key(j, "train_limit", s.train_limit);
  read_key(j, "test_limit", s.test_limit);
  read_key(j, "jobs", s.jobs);
  if (j.contains("augment")) {
    const json& a = j.at("augment");
    if (!a.is_object()) throw ValidationError("config key 'augment' must be an object");
    reject_unknown(a, {"enabled", "gen_start_step", "p_sampled", "n_augmented"}, "augment.");
    read_key(a, "enabled", s.augment.enabled);
    read_key(a, "gen_start_step", s.augment.gen_start_step);
    read_key(a, "p_sampled", s.augment.p_sampled);
    read_key(a, "n_augmented", s.augment.n_augmented);
  }
  if (j.contains("metrics")) {
    const json& m = j.at("metrics");
    if (!m.is_object()) throw ValidationError("config key 'metrics' must be an object");
    reject_unknown(m,
                   {"n_samples", "n_reps", "classifier_cache", "classifier_seed", "classifier_epochs",
                    "classifier_min_accuracy"},
                   "metrics.");
    read_key(m, "n_samples", s.metrics.n_samples);
    read_key(m, "classifier_epochs", s.metrics.classifier_epochs);
    read_key(m, "classifier_min_accuracy", s.metrics.classifier_min_accuracy);
    read_key(m, "n_reps", s.metrics.n_reps);
    read_key(m, "classifier_seed", s.metrics.classifier_seed);
    if (m.contains("classifier_cache")) read_key(m, "classifier_cache", str), s.metrics.classifier_cache = str;
  }
  return s;
}

ExperimentSpec load_spec_file(const fs::path& path, ExperimentSpec base) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  try {
    return spec_from_json(json::parse(in), std::move(base));
  } catch (const json::parse_error& e) {
    throw ValidationError("config file " + path.string() + ": " + e.what());
  }
}

void validate(const ExperimentSpec& s) {
  if (!(s.beta > 0)) throw ValidationError("beta must be positive, got " + std::to_string(s.beta));
  if (s.betas.empty()) throw ValidationError("beta grid is empty");
  for (double b : s.betas) {
    if (!(b > 0)) throw ValidationError("beta grid values must be positive, got " + std::to_string(b));
  }
  if (s.epochs == 0) throw ValidationError("epochs must be positive");
  if (s.train_limit % 50 != 0) throw ValidationError("train_limit must be a multiple of the batch size 50");
  if (s.jobs == 0) throw ValidationError("jobs must be positive");
  if (s.metrics.classifier_epochs == 0) throw ValidationError("metrics.classifier_epochs must be positive");
  if (s.metrics.n_samples < 2) throw ValidationError("metrics.n_samples must be at least 2");
  if (s.augment.enabled) validate(s.augment);
}

Dataset load_dataset(const ExperimentSpec& spec) {
  if (spec.data_dir.empty()) throw ValidationError("no data directory: pass --data-dir or set VAELAB_DATA_DIR");
  Dataset d = load_mnist(spec.data_dir);
  if (spec.train_limit == 0 && spec.test_limit == 0) return d;
  return take_prefix(d, spec.train_limit ? spec.train_limit : d.train_count(),
                     spec.test_limit ? spec.test_limit : d.test_count());
}

TrainConfig train_config(const ExperimentSpec& spec, const Dataset& data) {
  TrainConfig c;
  c.beta = spec.beta;
  c.architecture = spec.architecture;
  c.epochs = spec.epochs;
  c.steps_per_epoch = data.train_count() / c.batch_size;
  if (c.steps_per_epoch % c.eval_every != 0) {
    throw ValidationError("training examples must come in multiples of " + std::to_string(c.batch_size * c.eval_every));
  }
  c.seed = spec.seed;
  c.augment = spec.augment;
  return c;
}

MetricsContext obtain_metrics_context(const ExperimentSpec& spec, const Dataset& data, std::ostream& log) {
  const fs::path cache = spec.classifier_cache();
  if (fs::exists(cache)) return load_metrics_context(cache);
  log << "training classifier (cache " << cache.string() << ")\n";
  ClassifierConfig cfg;
  cfg.seed = spec.metrics.classifier_seed;
  cfg.epochs = spec.metrics.classifier_epochs;
  cfg.min_accuracy = spec.metrics.classifier_min_accuracy;
  MetricsContext ctx = build_metrics_context(data, cfg);
  log << "classifier test accuracy " << format_number(ctx.classifier.test_accuracy) << "\n";
  if (cache.has_parent_path()) fs::create_directories(cache.parent_path());
  save_metrics_context(ctx, cache);
  // reload so that a fresh context and a cached one are bit-identical
  return load_metrics_context(cache);
}

std::string beta_dir_name(double beta) { return "beta_" + format_number(beta); }

int cmd_train(const ExperimentSpec& spec, std::ostream& log) {
  validate(spec);
  const Dataset data = load_dataset(spec);
  const TrainConfig cfg = train_config(spec, data);
  fs::create_directories(spec.out_dir);
  echo_spec(spec, "train");
  TrainHooks hooks;
  hooks.on_epoch = [&](std::size_t epoch, const VaeModel& m) {
    write_epoch_grid(m, spec.seed, epoch, spec.out_dir);
    log << "epoch " << epoch << "/" << cfg.epochs << "\n";
  };
  const TrainResult r = run_training(cfg, data, hooks);
  save_model(r.model, spec.out_dir / "model.vlb");
  write_history_csv(r.history, spec.out_dir / "history.csv");
  const RunSummary s = r.history.summary();
  log << "last epoch: train " << format_number(s.train.total) << " test " << format_number(s.test.total) << " generated "
      << format_number(s.gen.total) << " (kl/dim " << format_number(s.train.kl) << ")\n";
  return 0;
}

int cmd_sweep(const ExperimentSpec& spec, std::ostream& log) {
  validate(spec);
  const Dataset data = load_dataset(spec);
  const TrainConfig base = train_config(spec, data);
  fs::create_directories(spec.out_dir);
  echo_spec(spec, "sweep");
  const MetricsContext ctx = obtain_metrics_context(spec, data, log);

  auto dir_of = [&](double beta) { return spec.out_dir / beta_dir_name(beta); };
  SweepOptions opt;
  opt.jobs = spec.jobs;
  opt.skip = [&](double beta) { return fs::exists(dir_of(beta) / "summary.json"); };
  opt.fid = [&](const VaeModel& m) { return model_fid(ctx, m, spec.metrics.n_samples, spec.seed); };
  opt.hooks = [&](double beta) {
    TrainHooks h;
    h.on_epoch = [dir = dir_of(beta), &spec](std::size_t epoch, const VaeModel& m) {
      write_epoch_grid(m, spec.seed, epoch, dir);
    };
    return h;
  };
  opt.on_done = [&](const SweepRun& run) {
    const fs::path dir = dir_of(run.beta);
    if (run.skipped) {
      log << "beta " << format_number(run.beta) << ": already complete, skipped\n";
      return;
    }
    if (!run.ok) {
      log << "beta " << format_number(run.beta) << ": FAILED: " << run.error << "\n";
      return;
    }
    save_model(run.result->model, dir / "model.vlb");
    write_history_csv(run.result->history, dir / "history.csv");
    write_text_file(dir / "summary.json", summary_json(run).dump(2) + "\n");
    log << "beta " << format_number(run.beta) << ": test " << format_number(run.row().summary.test.total)
        << " generated " << format_number(run.row().summary.gen.total) << " fid " << format_number(run.fid) << "\n";
  };
  for (double b : spec.betas) fs::create_directories(dir_of(b));
  const auto runs = sweep(spec.betas, base, data, opt);

  std::vector<SweepRow> rows;
  Tensor montage;
  const Tensor z = grid_latents(spec.seed, kGridCols);
  std::size_t failed = 0;
  for (const auto& run : runs) {
    SweepRow row;
    Tensor samples({kGridCols, kPixels});
    if (run.skipped || (run.ok && fs::exists(dir_of(run.beta) / "summary.json"))) {
      std::ifstream in(dir_of(run.beta) / "summary.json");
      row = row_from_json(json::parse(in));
      samples = flatten_images(generate(load_model(dir_of(run.beta) / "model.vlb", spec.architecture), z));
    } else {
      row.beta = run.beta;
      row.ok = false;
      ++failed;
    }
    rows.push_back(row);
    montage = montage.size() == 0 ? samples : concat_rows(montage, samples);
  }
  write_sweep_csv(rows, spec.out_dir / "sweep.csv");
  write_sample_grid(montage, kGridCols, spec.out_dir / "montage.pgm");
  log << "sweep: " << rows.size() - failed << "/" << rows.size() << " runs complete\n";
  return failed == 0 ? 0 : 1;
}

int cmd_metrics(const ExperimentSpec& spec, std::ostream& log) {
  validate(spec);
  const VaeModel model = load_model(spec.checkpoint_path());
  const Dataset data = load_dataset(spec);
  fs::create_directories(spec.out_dir);
  echo_spec(spec, "metrics");
  const MetricsContext ctx = obtain_metrics_context(spec, data, log);
  const Tensor samples = prior_samples(model, spec.metrics.n_samples, spec.seed);
  const double fid = fid_of_images(ctx, samples);
  const PValues p = score_images(ctx, samples);
  const Summary c = summarize(p.conditional), u = summarize(p.unconditional);
  std::string csv = "quantity,value\nfid," + format_number(fid) + "\n";
  auto add = [&](const std::string& name, const Summary& s) {
    csv += name + "_mean," + format_number(s.mean) + "\n" + name + "_q1," + format_number(s.q1) + "\n" + name +
           "_median," + format_number(s.median) + "\n" + name + "_q3," + format_number(s.q3) + "\n";
  };
  add("conditional_p", c);
  add("unconditional_p", u);
  write_text_file(spec.out_dir / "metrics.csv", csv);
  log << csv;
  return 0;
}

int cmd_repeat(const ExperimentSpec& spec, std::ostream& log) {
  validate(spec);
  const VaeModel model = load_model(spec.checkpoint_path());
  const Dataset data = load_dataset(spec);
  fs::create_directories(spec.out_dir);
  echo_spec(spec, "repeat");
  const MetricsContext ctx = obtain_metrics_context(spec, data, log);
  const std::size_t n = spec.metrics.n_samples;
  if (n > data.train_count()) throw ValidationError("metrics.n_samples exceeds the training set");

  Tensor training({n, kPixels});
  Rng select(spec.seed, streams::kMetricsSelect);
  const auto order = select.permutation(data.train_count());
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(data.train_images.data().begin() + static_cast<std::ptrdiff_t>(order[i] * kPixels), kPixels,
                training.data().begin() + static_cast<std::ptrdiff_t>(i * kPixels));
  }
  std::string csv =
      "population,rep,cond_mean,cond_q1,cond_median,cond_q3,uncond_mean,uncond_q1,uncond_median,uncond_q3\n";
  const std::size_t shown = std::min<std::size_t>(kGridCols, n);
  for (const auto& [name, start] : {std::pair<std::string, Tensor>{"generated", prior_samples(model, n, spec.seed)},
                                    std::pair<std::string, Tensor>{"training", training}}) {
    Tensor grid;
    repeated_autoencode(model, start, spec.metrics.n_reps, [&](std::size_t k, const Tensor& x) {
      csv += pvalue_row(name, k, score_images(ctx, x));
      const Tensor head = flatten_images(x).rows(0, shown);
      grid = k == 0 ? head : concat_rows(grid, head);
    });
    write_sample_grid(grid, shown, spec.out_dir / ("repeat_" + name + ".pgm"));
  }
  write_text_file(spec.out_dir / "repeat.csv", csv);
  log << csv;
  return 0;
}

int cmd_classifier_train(const ExperimentSpec& spec, std::ostream& log) {
  validate(spec);
  const Dataset data = load_dataset(spec);
  fs::create_directories(spec.out_dir);
  const fs::path cache = spec.classifier_cache();
  if (fs::exists(cache)) fs::remove(cache);
  const MetricsContext ctx = obtain_metrics_context(spec, data, log);
  log << "wrote " << cache.string() << " (test accuracy " << format_number(ctx.classifier.test_accuracy) << ")\n";
  return 0;
}

}  // namespace vaelab::inline VAELAB_NS
