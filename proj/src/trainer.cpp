#include "vaelab/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "vaelab/error.hpp"

namespace vaelab::inline VAELAB_NS {

namespace {

void copy_rows(const Tensor& src, const std::vector<std::size_t>& idx, std::size_t begin, Tensor& dst) {
  const std::size_t n = dst.dim(0);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(src.data().begin() + static_cast<std::ptrdiff_t>(idx[begin + i] * kPixels), kPixels,
                dst.data().begin() + static_cast<std::ptrdiff_t>(i * kPixels));
  }
}

// Rows [start, start + n) of the test set, wrapping around its end.
Tensor test_batch(const Tensor& images, std::size_t start, std::size_t n) {
  const std::size_t total = images.dim(0);
  Tensor out({n, kPixels});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = (start + i) % total;
    std::copy_n(images.data().begin() + static_cast<std::ptrdiff_t>(r * kPixels), kPixels,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * kPixels));
  }
  return out;
}

}  // namespace

void validate(const TrainConfig& c) {
  if (!(c.beta > 0) || !std::isfinite(c.beta)) throw ValidationError("beta must be positive, got " + std::to_string(c.beta));
  if (c.epochs == 0 || c.batch_size == 0 || c.steps_per_epoch == 0 || c.eval_every == 0 || c.gen_eval_n == 0) {
    throw ValidationError("epochs, batch size, steps per epoch, eval cadence and gen_eval_n must be positive");
  }
  if (c.steps_per_epoch % c.eval_every != 0) {
    throw ValidationError("eval cadence " + std::to_string(c.eval_every) + " does not divide " +
                          std::to_string(c.steps_per_epoch) + " steps per epoch");
  }
  if (c.augment.enabled) validate(c.augment);
}

TrainResult run_training(const TrainConfig& config, const Dataset& data, const TrainHooks& hooks) {
  validate(config);
  const std::size_t bs = config.batch_size;
  if (data.train_count() != config.steps_per_epoch * bs) {
    throw IngestionError("training set holds " + std::to_string(data.train_count()) + " examples, the schedule needs " +
                         std::to_string(config.steps_per_epoch) + " x " + std::to_string(bs));
  }
  if (data.test_count() < bs) throw IngestionError("test set is smaller than one batch");

  Rng shuffle(config.seed, streams::kShuffle);
  Rng train_eps(config.seed, streams::kTrainEps);
  Rng test_eps(config.seed, streams::kTestEps);
  Rng gen_latent(config.seed, streams::kGenLatent);
  Rng gen_eps(config.seed, streams::kGenEps);
  Rng aug_rng(config.seed, streams::kAugment);

  TrainResult out{VaeModel::create(config.architecture, config.seed), {}};
  VaeModel& model = out.model;
  out.history.records_per_epoch = config.steps_per_epoch / config.eval_every;
  out.history.records.reserve(config.total_steps() / config.eval_every);
  AdamState adam = make_adam_state(model.params, config.adam);
  AugmentPool pool(config.augment.enabled ? config.augment : AugmentConfig{});

  Tensor batch({bs, kPixels});
  std::vector<std::size_t> order;
  std::size_t test_cursor = 0;
  for (std::size_t step = 0; step < config.total_steps(); ++step) {
    const std::size_t in_epoch = step % config.steps_per_epoch;
    if (in_epoch == 0) order = shuffle.permutation(data.train_count());
    copy_rows(data.train_images, order, in_epoch * bs, batch);

    const bool augmented = pool.active();
    const Tensor x = augmented ? pool.augment_batch(model, batch) : batch;
    const Tensor eps = train_eps.normal_tensor({x.dim(0), kLatentDim});
    Tape tape;
    BoundParams p(tape, model.params, true);
    const LossVars lv = vae_loss(p, model.architecture, tape.constant(x), tape.constant(eps), config.beta);
    const LossBreakdown train_loss = breakdown(lv, config.beta);
    const Tensor z = lv.z.value();
    adam_step(model.params, tape.backward(lv.total), adam);

    if (config.augment.enabled) {
      if (augmented) {
        pool.update(z.rows(0, bs), z.rows(bs, x.dim(0)), aug_rng);
      } else if (step == config.augment.gen_start_step) {
        pool.init(z);
      }
    }
    if (hooks.on_step) hooks.on_step({step, x, z, pool, train_loss});

    if ((step + 1) % config.eval_every == 0) {
      EvalRecord rec;
      rec.step = step + 1;
      rec.train = train_loss;
      const Tensor tb = test_batch(data.test_images, test_cursor, bs);
      test_cursor = (test_cursor + bs) % data.test_count();
      rec.test = vae_loss(model, tb, test_eps.normal_tensor({bs, kLatentDim}), config.beta);
      rec.gen = measure_generated_loss(model, config.beta, config.gen_eval_n, gen_latent, gen_eps);
      out.history.records.push_back(rec);
    }
    if (in_epoch + 1 == config.steps_per_epoch && hooks.on_epoch) hooks.on_epoch(step / config.steps_per_epoch + 1, model);
  }
  return out;
}

LossBreakdown measure_generated_loss(const VaeModel& model, double beta, std::size_t n, Rng& latent, Rng& eps) {
  const Tensor samples = generate(model, latent.normal_tensor({n, kLatentDim}));
  return vae_loss(model, samples, eps.normal_tensor({n, kLatentDim}), beta);
}

LossBreakdown measure_generated_loss(const VaeModel& model, double beta, std::size_t n, std::uint64_t seed) {
  Rng latent(seed, streams::kGenLatent), eps(seed, streams::kGenEps);
  return measure_generated_loss(model, beta, n, latent, eps);
}

std::vector<double> default_beta_grid() {
  return {4.8e-4, 1.6e-3, 4.8e-3, 1.6e-2, 4.8e-2, 0.16, 0.48, 1.6, 4.8};
}

SweepRow SweepRun::row() const {
  SweepRow r;
  r.beta = beta;
  r.ok = ok;
  r.fid = fid;
  if (result) r.summary = result->history.summary();
  return r;
}

std::vector<SweepRun> sweep(std::vector<double> betas, const TrainConfig& base, const Dataset& data,
                            const SweepOptions& options) {
  std::sort(betas.begin(), betas.end());
  if (std::adjacent_find(betas.begin(), betas.end()) != betas.end()) throw ValidationError("duplicate beta in sweep grid");
  std::vector<SweepRun> runs(betas.size());
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] > 0)) throw ValidationError("beta must be positive, got " + std::to_string(betas[i]));
    runs[i].beta = betas[i];
    runs[i].seed = base.seed + i;
  }

  std::atomic<std::size_t> next{0};
  std::mutex done_mutex;
  auto worker = [&]() {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      SweepRun& run = runs[i];
      if (options.skip && options.skip(run.beta)) {
        run.skipped = true;
      } else {
        try {
          TrainConfig cfg = base;
          cfg.beta = run.beta;
          cfg.seed = run.seed;
          run.result = run_training(cfg, data, options.hooks ? options.hooks(run.beta) : TrainHooks{});
          if (options.fid) run.fid = options.fid(run.result->model);
          run.ok = true;
        } catch (const std::exception& e) {
          run.ok = false;
          run.error = e.what();
        }
      }
      if (options.on_done) {
        std::lock_guard<std::mutex> lock(done_mutex);
        try {
          options.on_done(run);
        } catch (const std::exception& e) {
          run.ok = false;
          run.error = e.what();
        }
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, std::max<std::size_t>(runs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return runs;
}

}  // namespace vaelab::inline VAELAB_NS
