#include <doctest.h>

#include <cmath>
#include <set>

#include "vaelab/augment.hpp"
#include "vaelab/error.hpp"

using namespace vaelab;

namespace {

AugmentConfig cfg(double p, std::size_t n = 50) {
  AugmentConfig c;
  c.enabled = true;
  c.p_sampled = p;
  c.n_augmented = n;
  return c;
}

std::vector<Real> row(const Tensor& t, std::size_t r) {
  auto s = t.data().subspan(r * kLatentDim, kLatentDim);
  return {s.begin(), s.end()};
}

// Upper tail of chi-squared with even degrees of freedom, summed directly.
double chi2_upper_even(double x, int k) {
  double term = 1, acc = 1;
  for (int i = 1; i < k / 2; ++i) {
    term *= (x / 2) / i;
    acc += term;
  }
  return std::exp(-x / 2) * acc;
}

}  // namespace

TEST_CASE("pool init: shape, eps = 0 gives the batch means, double init is an error") {
  Rng rng(1, 0);
  PosteriorGaussian post{rng.normal_tensor({50, kLatentDim}), rng.normal_tensor({50, kLatentDim})};
  AugmentPool pool(cfg(1.0));
  CHECK_FALSE(pool.active());
  pool.init(post, Tensor({50, kLatentDim}));
  CHECK(pool.active());
  CHECK(pool.latents().shape() == Shape{50, kLatentDim});
  CHECK(pool.latents() == post.mu);
  CHECK_THROWS_AS(pool.init(post, Tensor({50, kLatentDim})), ContractError);
}

TEST_CASE("pool init is deterministic given the eps stream") {
  Rng r(2, 0);
  PosteriorGaussian post{r.normal_tensor({50, kLatentDim}), r.normal_tensor({50, kLatentDim})};
  AugmentPool a(cfg(1.0)), b(cfg(1.0));
  Rng ea(5, streams::kTrainEps), eb(5, streams::kTrainEps);
  a.init(post, ea.normal_tensor({50, kLatentDim}));
  b.init(post, eb.normal_tensor({50, kLatentDim}));
  CHECK(a.latents() == b.latents());
}

TEST_CASE("augment_batch: inactive leaves the batch alone, active doubles it with decoded variants") {
  const VaeModel m = VaeModel::create(Architecture::kFc, 3);
  Rng r(3, 0);
  Tensor batch({50, kPixels});
  for (auto& v : batch.data()) v = static_cast<Real>(r.uniform());
  AugmentPool pool(cfg(1.0));
  CHECK(pool.augment_batch(m, batch) == batch);
  pool.init(r.normal_tensor({50, kLatentDim}));
  const Tensor ext = pool.augment_batch(m, batch);
  CHECK(ext.shape() == Shape{100, kPixels});
  CHECK(ext.rows(0, 50) == batch);
  CHECK(ext.rows(50, 100) == decode(m, pool.latents()));
  for (auto v : ext.rows(50, 100).data()) {
    REQUIRE(v > 0);
    REQUIRE(v < 1);
  }
}

TEST_CASE("pool update: p = 1 re-seeds every slot from distinct rows of the current batch") {
  AugmentPool pool(cfg(1.0));
  Rng data(4, 0), rng(4, streams::kAugment);
  pool.init(data.normal_tensor({50, kLatentDim}));
  for (int step = 0; step < 100; ++step) {
    const Tensor batch = data.normal_tensor({50, kLatentDim});
    const Tensor variants = data.normal_tensor({50, kLatentDim});
    CHECK(pool.update(batch, variants, rng) == 50);
    std::multiset<std::vector<Real>> want, got;
    for (std::size_t i = 0; i < 50; ++i) {
      want.insert(row(batch, i));
      got.insert(row(pool.latents(), i));
    }
    REQUIRE(got == want);
  }
}

TEST_CASE("pool update: p = 0 follows each slot's own variant chain") {
  AugmentPool pool(cfg(0.0));
  Rng data(5, 0), rng(5, streams::kAugment);
  pool.init(data.normal_tensor({50, kLatentDim}));
  for (int step = 0; step < 20; ++step) {
    const Tensor variants = data.normal_tensor({50, kLatentDim});
    CHECK(pool.update(data.normal_tensor({50, kLatentDim}), variants, rng) == 0);
    REQUIRE(pool.latents() == variants);
  }
  for (auto a : pool.ages()) CHECK(a == 20);
}

TEST_CASE("pool update: p = 0.125 replacement rate over 1e4 steps") {
  AugmentPool pool(cfg(0.125));
  Rng data(6, 0), rng(6, streams::kAugment);
  const Tensor batch = data.normal_tensor({50, kLatentDim});
  pool.init(batch);
  std::size_t replaced = 0;
  const int steps = 10000;
  for (int s = 0; s < steps; ++s) replaced += pool.update(batch, pool.latents(), rng);
  const double rate = static_cast<double>(replaced) / (steps * 50.0);
  CHECK(std::abs(rate - 0.125) <= 0.01);
}

TEST_CASE("pool update: re-initialized slots never share a batch row") {
  AugmentPool pool(cfg(0.5));
  Rng data(7, 0), rng(7, streams::kAugment);
  pool.init(data.normal_tensor({50, kLatentDim}));
  for (int step = 0; step < 500; ++step) {
    const Tensor batch = data.normal_tensor({50, kLatentDim});
    pool.update(batch, data.normal_tensor({50, kLatentDim}), rng);
    std::set<std::vector<Real>> seen;
    for (std::size_t i = 0; i < 50; ++i) {
      if (pool.last_replaced()[i]) REQUIRE(seen.insert(row(pool.latents(), i)).second);
    }
  }
}

TEST_CASE("pool update: more replacements than batch rows is a contract error") {
  AugmentPool pool(cfg(1.0));
  Rng data(8, 0), rng(8, 0);
  pool.init(data.normal_tensor({50, kLatentDim}));
  CHECK_THROWS_AS(pool.update(data.normal_tensor({10, kLatentDim}), data.normal_tensor({50, kLatentDim}), rng),
                  ContractError);
  AugmentPool idle(cfg(1.0));
  CHECK_THROWS_AS(idle.update(data.normal_tensor({50, kLatentDim}), data.normal_tensor({50, kLatentDim}), rng),
                  ContractError);
}

TEST_CASE("slot lifetimes are geometric with mean 1/p (chi-squared goodness of fit)") {
  const double p = 0.125;
  AugmentPool pool(cfg(p));
  Rng data(9, 0), rng(9, streams::kAugment);
  const Tensor batch = data.normal_tensor({50, kLatentDim});
  pool.init(batch);
  const int kBins = 20;  // lifetimes 1..20, plus one tail bin
  std::vector<double> observed(kBins + 1, 0);
  std::size_t n = 0;
  double total = 0;
  while (n < 10000) {
    const auto before = pool.ages();
    pool.update(batch, pool.latents(), rng);
    for (std::size_t i = 0; i < 50; ++i) {
      if (!pool.last_replaced()[i]) continue;
      const std::size_t life = before[i] + 1;
      observed[std::min<std::size_t>(life, kBins + 1) - 1] += 1;
      total += static_cast<double>(life);
      ++n;
    }
  }
  CHECK(total / n == doctest::Approx(1 / p).epsilon(0.05));
  double chi2 = 0, tail = 1;
  for (int k = 1; k <= kBins + 1; ++k) {
    const double prob = k <= kBins ? std::pow(1 - p, k - 1) * p : tail;
    tail -= k <= kBins ? prob : 0;
    const double expected = prob * static_cast<double>(n);
    chi2 += (observed[k - 1] - expected) * (observed[k - 1] - expected) / expected;
  }
  // 21 bins, 20 degrees of freedom
  CHECK(chi2_upper_even(chi2, kBins) > 0.01);
}

TEST_CASE("augment config validation") {
  CHECK_THROWS_AS(AugmentPool(cfg(1.5)), ValidationError);
  CHECK_THROWS_AS(AugmentPool(cfg(-0.1)), ValidationError);
  CHECK_THROWS_AS(AugmentPool(cfg(0.5, 0)), ValidationError);
}
