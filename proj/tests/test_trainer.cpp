#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "vaelab/error.hpp"
#include "vaelab/trainer.hpp"

using namespace vaelab;

namespace {

Dataset blobs(std::size_t train, std::size_t test) {
  auto make = [](std::size_t n, std::uint64_t seed, Tensor& x, std::vector<std::uint8_t>& y) {
    Rng rng(seed, 0);
    x = Tensor({n, kPixels});
    y.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = rng.below(4);
      y[i] = static_cast<std::uint8_t>(c);
      for (std::size_t p = 0; p < kPixels; ++p) {
        const bool on = (p / 28) / 7 == c;
        x[i * kPixels + p] = static_cast<Real>(on ? 0.7 + 0.3 * rng.uniform() : 0.1 * rng.uniform());
      }
    }
  };
  Dataset d;
  make(train, 1, d.train_images, d.train_labels);
  make(test, 2, d.test_images, d.test_labels);
  return d;
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 3;
  c.steps_per_epoch = 6;
  c.eval_every = 2;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("run_training: step and record counts follow the schedule") {
  const Dataset d = blobs(300, 120);
  std::size_t steps = 0, epochs = 0;
  TrainHooks hooks;
  hooks.on_step = [&](const StepInfo& s) {
    CHECK(s.step == steps);
    CHECK(s.batch.dim(0) == 50);
    ++steps;
  };
  hooks.on_epoch = [&](std::size_t e, const VaeModel&) { CHECK(e == ++epochs); };
  const auto r = run_training(small_config(), d, hooks);
  CHECK(steps == 18);
  CHECK(epochs == 3);
  REQUIRE(r.history.records.size() == 9);
  CHECK(r.history.records_per_epoch == 3);
  for (std::size_t i = 0; i < 9; ++i) CHECK(r.history.records[i].step == 2 * (i + 1));
}

TEST_CASE("run_training: the default schedule has 6000 steps and 1000 eval records") {
  const TrainConfig c;
  CHECK(c.total_steps() == 6000);
  CHECK(c.total_steps() / c.eval_every == 1000);
  CHECK(c.steps_per_epoch / c.eval_every == 200);
}

TEST_CASE("run_training: same seed, same history and parameters") {
  const Dataset d = blobs(300, 120);
  const auto a = run_training(small_config(), d);
  const auto b = run_training(small_config(), d);
  CHECK(a.model.params == b.model.params);
  REQUIRE(a.history.records.size() == b.history.records.size());
  for (std::size_t i = 0; i < a.history.records.size(); ++i) {
    CHECK(a.history.records[i].train.total == b.history.records[i].train.total);
    CHECK(a.history.records[i].test.total == b.history.records[i].test.total);
    CHECK(a.history.records[i].gen.total == b.history.records[i].gen.total);
  }
  TrainConfig other = small_config();
  other.seed = 6;
  CHECK_FALSE(run_training(other, d).model.params == a.model.params);
}

TEST_CASE("run_training: loss goes down on an easy dataset") {
  const Dataset d = blobs(300, 120);
  TrainConfig c = small_config();
  c.epochs = 10;
  const auto r = run_training(c, d);
  CHECK(r.history.records.back().test.total < 0.8 * r.history.records.front().test.total);
}

TEST_CASE("run_training: summary averages exactly the final epoch of records") {
  const Dataset d = blobs(300, 120);
  const auto r = run_training(small_config(), d);
  const auto s = r.history.summary();
  double want = 0;
  for (std::size_t i = 6; i < 9; ++i) want += r.history.records[i].test.total;
  CHECK(s.test.total == doctest::Approx(want / 3));
}

TEST_CASE("run_training: schedule/dataset mismatches and bad configs are rejected") {
  const Dataset d = blobs(300, 120);
  TrainConfig c = small_config();
  c.steps_per_epoch = 8;
  c.eval_every = 2;
  CHECK_THROWS_AS(run_training(c, d), IngestionError);
  c = small_config();
  c.beta = 0;
  CHECK_THROWS_AS(run_training(c, d), ValidationError);
  c = small_config();
  c.eval_every = 4;
  CHECK_THROWS_AS(run_training(c, d), ValidationError);
}

TEST_CASE("augmented training: batches double after gen_start_step and p = 1 re-seeds the pool from the batch") {
  const Dataset d = blobs(300, 120);
  TrainConfig c = small_config();
  c.augment.enabled = true;
  c.augment.gen_start_step = 4;
  c.augment.p_sampled = 1.0;
  std::size_t checked = 0;
  TrainHooks hooks;
  hooks.on_step = [&](const StepInfo& s) {
    CHECK(s.batch.dim(0) == (s.step <= 4 ? 50u : 100u));
    CHECK(s.pool.active() == (s.step >= 4));
    if (s.step < 4) return;
    // pool after this step == the sampled latents of this step's 50 real examples
    std::multiset<std::vector<Real>> want, got;
    for (std::size_t i = 0; i < 50; ++i) {
      auto zr = s.z.data().subspan(i * kLatentDim, kLatentDim);
      auto pr = s.pool.latents().data().subspan(i * kLatentDim, kLatentDim);
      want.emplace(zr.begin(), zr.end());
      got.emplace(pr.begin(), pr.end());
    }
    CHECK(got == want);
    ++checked;
  };
  run_training(c, d, hooks);
  CHECK(checked == 14);
}

TEST_CASE("augmented training: p = 0 keeps every slot on its variant chain") {
  const Dataset d = blobs(300, 120);
  TrainConfig c = small_config();
  c.augment.enabled = true;
  c.augment.gen_start_step = 2;
  c.augment.p_sampled = 0.0;
  TrainHooks hooks;
  hooks.on_step = [&](const StepInfo& s) {
    if (s.step <= 2) return;
    CHECK(s.pool.latents() == s.z.rows(50, 100));
  };
  run_training(c, d, hooks);
}

TEST_CASE("measure_generated_loss: seeded, n samples, finite") {
  const VaeModel m = VaeModel::create(Architecture::kFc, 3);
  const auto a = measure_generated_loss(m, 0.048, 50, 9);
  const auto b = measure_generated_loss(m, 0.048, 50, 9);
  CHECK(a.total == b.total);
  CHECK(a.total == doctest::Approx(a.recon + 0.048 * a.kl).epsilon(1e-6));
  CHECK(std::isfinite(a.total));
}

TEST_CASE("default beta grid: ascending, two per decade, contains the named values") {
  const auto g = default_beta_grid();
  CHECK(g.size() == 9);
  CHECK(std::is_sorted(g.begin(), g.end()));
  CHECK(g.front() == 4.8e-4);
  CHECK(g.back() == 4.8);
  for (double v : {0.0048, 0.016, 0.048, 0.48}) CHECK(std::find(g.begin(), g.end(), v) != g.end());
}

TEST_CASE("sweep: one run per beta, seeds by index, failures marked, independent of jobs") {
  const Dataset d = blobs(300, 120);
  TrainConfig base = small_config();
  base.epochs = 1;
  SweepOptions opt;
  opt.fid = [](const VaeModel&) { return 1.0; };
  std::size_t done = 0;
  opt.on_done = [&](const SweepRun&) { ++done; };
  const auto one = sweep({0.48, 0.0048, 0.048}, base, d, opt);
  REQUIRE(one.size() == 3);
  CHECK(done == 3);
  CHECK(one[0].beta == 0.0048);
  CHECK(one[2].seed == base.seed + 2);
  for (const auto& r : one) CHECK(r.ok);

  opt.jobs = 3;
  opt.fid = [](const VaeModel&) -> double { throw NumericError("boom"); };
  const auto three = sweep({0.48, 0.0048, 0.048}, base, d, opt);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK_FALSE(three[i].ok);
    CHECK(three[i].error == "boom");
    CHECK(three[i].result->model.params == one[i].result->model.params);
  }
  opt.skip = [](double b) { return b == 0.048; };
  opt.fid = {};
  const auto resumed = sweep({0.48, 0.0048, 0.048}, base, d, opt);
  CHECK(resumed[1].skipped);
  CHECK_FALSE(resumed[1].result.has_value());
  CHECK_THROWS_AS(sweep({0.1, -1}, base, d, opt), ValidationError);
}
