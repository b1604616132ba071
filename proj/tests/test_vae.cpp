#include <doctest.h>

#include <cmath>
#include <cstring>

#include "vaelab/error.hpp"
#include "vaelab/rng.hpp"
#include "vaelab/vae.hpp"

using namespace vaelab;

namespace {

VaeModel zeroed(Architecture arch) {
  VaeModel m = VaeModel::create(arch, 1);
  for (auto& e : m.params)
    for (auto& v : e.value.data()) v = 0;
  return m;
}

Tensor uniform_images(std::size_t n, Rng& rng) {
  Tensor x({n, kPixels});
  for (auto& v : x.data()) v = static_cast<Real>(rng.uniform());
  return x;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(Real)) == 0;
}

}  // namespace

TEST_CASE("encode: shape contract and duplicate rows") {
  for (auto arch : {Architecture::kFc, Architecture::kConv}) {
    const VaeModel m = VaeModel::create(arch, 3);
    Rng rng(1, 0);
    Tensor one = uniform_images(1, rng);
    Tensor x = concat_rows(concat_rows(one, one), uniform_images(2, rng));
    auto post = encode(m, x);
    CHECK(post.mu.shape() == Shape{4, kLatentDim});
    CHECK(post.logvar.shape() == Shape{4, kLatentDim});
    CHECK(bitwise_equal(post.mu.rows(0, 1), post.mu.rows(1, 2)));
    CHECK(bitwise_equal(post.logvar.rows(0, 1), post.logvar.rows(1, 2)));
    // NHWC input is accepted as well
    auto post4 = encode(m, x.reshaped({4, 28, 28, 1}));
    CHECK(bitwise_equal(post4.mu, post.mu));
  }
}

TEST_CASE("encode: zero input with zero-bias init gives mu = 0") {
  for (auto arch : {Architecture::kFc, Architecture::kConv}) {
    const VaeModel m = VaeModel::create(arch, 5);
    auto post = encode(m, Tensor({3, kPixels}));
    for (auto v : post.mu.data()) CHECK(v == 0);
  }
}

TEST_CASE("encode: out-of-range pixels are rejected") {
  const VaeModel m = VaeModel::create(Architecture::kFc, 1);
  Tensor x({1, kPixels});
  x[10] = Real{1.5};
  CHECK_THROWS_AS(encode(m, x), ValidationError);
  x[10] = Real{-0.1};
  CHECK_THROWS_AS(encode(m, x), ValidationError);
  CHECK_THROWS_AS(encode(m, Tensor({1, 100})), ValidationError);
}

TEST_CASE("reparam_sample: closed-form cases") {
  Rng rng(2, 0);
  PosteriorGaussian post{rng.normal_tensor({2, kLatentDim}), rng.normal_tensor({2, kLatentDim})};
  CHECK(bitwise_equal(reparam_sample(post, Tensor({2, kLatentDim})), post.mu));

  PosteriorGaussian unit{Tensor({1, kLatentDim}), Tensor({1, kLatentDim})};
  auto z = reparam_sample(unit, Tensor::full({1, kLatentDim}, 1));
  for (auto v : z.data()) CHECK(v == 1);

  Tape tape;
  auto lv = tape.parameter("logvar", Tensor::scalar(0));
  auto zz = reparam_sample(PosteriorVars{tape.constant(Tensor::scalar(0)), lv}, tape.constant(Tensor::scalar(1)));
  CHECK(tape.backward(zz).at("logvar").item() == doctest::Approx(0.5));
}

TEST_CASE("decode: outputs lie strictly inside (0, 1) and mirror the image format") {
  Rng rng(3, 0);
  const VaeModel fc = VaeModel::create(Architecture::kFc, 7);
  Tensor z = rng.normal_tensor({5, kLatentDim});
  for (auto& v : z.data()) v *= 3;
  auto x = decode(fc, z);
  CHECK(x.shape() == Shape{5, kPixels});
  for (auto v : x.data()) {
    CHECK(v > 0);
    CHECK(v < 1);
  }
  const VaeModel conv = VaeModel::create(Architecture::kConv, 7);
  auto xc = decode(conv, z);
  CHECK(xc.shape() == Shape{5, 28, 28, 1});
  for (auto v : xc.data()) {
    CHECK(v > 0);
    CHECK(v < 1);
  }
}

TEST_CASE("decode: duplicated latent rows give identical output rows") {
  Rng rng(4, 0);
  const VaeModel m = VaeModel::create(Architecture::kFc, 8);
  Tensor z1 = rng.normal_tensor({1, kLatentDim});
  auto x = decode(m, concat_rows(z1, z1));
  CHECK(bitwise_equal(x.rows(0, 1), x.rows(1, 2)));
}

TEST_CASE("decode: chunked evaluation matches a single batch") {
  Rng rng(6, 0);
  const VaeModel m = VaeModel::create(Architecture::kFc, 9);
  Tensor z = rng.normal_tensor({1203, kLatentDim});
  auto big = decode(m, z);
  auto small = decode(m, z.rows(700, 703));
  CHECK(bitwise_equal(big.rows(700, 703), small));
}

TEST_CASE("vae_loss: fair-coin reconstruction costs ln 2 per pixel") {
  const VaeModel m = zeroed(Architecture::kFc);
  const Tensor x = Tensor::full({2, kPixels}, 0.5);
  auto l = vae_loss(m, x, Tensor({2, kLatentDim}), 0.048);
  CHECK(l.recon == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK(l.kl == doctest::Approx(0.0));
  CHECK(l.beta == 0.048);
}

TEST_CASE("vae_loss: KL closed form per dimension") {
  PosteriorGaussian prior{Tensor({3, kLatentDim}), Tensor({3, kLatentDim})};
  CHECK(kl_per_dim(prior) == 0);
  PosteriorGaussian shifted{Tensor({1, kLatentDim}), Tensor({1, kLatentDim})};
  shifted.mu[0] = 1;
  // one dimension contributes 0.5 nats; the reported value is the per-dim mean
  CHECK(kl_per_dim(shifted) * kLatentDim == doctest::Approx(0.5));

  VaeModel m = zeroed(Architecture::kFc);
  m.params.at("enc.mean.b")[0] = 1;
  auto l = vae_loss(m, Tensor::full({1, kPixels}, 0.5), Tensor({1, kLatentDim}), 1.0);
  CHECK(l.kl * kLatentDim == doctest::Approx(0.5));
}

TEST_CASE("vae_loss: total equals recon + beta * kl in the accumulation order") {
  Rng rng(10, 0);
  for (auto arch : {Architecture::kFc, Architecture::kConv}) {
    const VaeModel m = VaeModel::create(arch, 12);
    Tensor x = uniform_images(3, rng);
    for (double beta : {0.00048, 0.048, 4.8}) {
      auto l = vae_loss(m, x, rng.normal_tensor({3, kLatentDim}), beta);
      const Real expect = static_cast<Real>(l.recon) + static_cast<Real>(l.kl) * static_cast<Real>(beta);
      CHECK(static_cast<Real>(l.total) == expect);
    }
  }
}

TEST_CASE("vae_loss: saturated decoder stays finite thanks to the clamp") {
  VaeModel m = zeroed(Architecture::kFc);
  for (auto& v : m.params.at("dec.out.b").data()) v = 200;  // sigmoid rounds to exactly 1
  Tensor x({1, kPixels});  // all-zero target: log(1 - xhat) would be -inf without the clamp
  auto l = vae_loss(m, x, Tensor({1, kLatentDim}), 0.048);
  CHECK(std::isfinite(l.total));
  CHECK(l.recon == doctest::Approx(-std::log(static_cast<double>(Real{1} - (Real{1} - static_cast<Real>(kProbClamp))))).epsilon(1e-3));
}

TEST_CASE("generate: 50 prior draws give 50 images; fixed seed is bitwise reproducible") {
  const VaeModel m = VaeModel::create(Architecture::kFc, 2);
  Rng a(77, streams::kGenLatent), b(77, streams::kGenLatent);
  auto s1 = generate(m, a.normal_tensor({50, kLatentDim}));
  auto s2 = generate(m, b.normal_tensor({50, kLatentDim}));
  CHECK(s1.dim(0) == 50);
  CHECK(s1.size() == 50 * 28 * 28);
  CHECK(bitwise_equal(s1, s2));
}

TEST_CASE("repeated_autoencode: length, first element, determinism") {
  const VaeModel m = VaeModel::create(Architecture::kFc, 4);
  Rng rng(8, 0);
  Tensor x = uniform_images(4, rng);
  auto zero = repeated_autoencode(m, x, 0);
  REQUIRE(zero.size() == 1);
  CHECK(bitwise_equal(zero[0], x));

  auto seq = repeated_autoencode(m, x, 5);
  CHECK(seq.size() == 6);
  CHECK(bitwise_equal(seq[0], x));
  auto again = repeated_autoencode(m, x, 5);
  for (std::size_t k = 0; k < seq.size(); ++k) CHECK(bitwise_equal(seq[k], again[k]));
  // each step uses the posterior mean, never a sample
  CHECK(bitwise_equal(seq[1], decode(m, encode(m, x).mu)));
}

TEST_CASE("KL closed form matches a Monte-Carlo estimate over 1e5 reparameterized samples") {
  Rng rng(31, 0);
  for (int pair = 0; pair < 20; ++pair) {
    PosteriorGaussian post{Tensor({1, kLatentDim}), Tensor({1, kLatentDim})};
    for (auto& v : post.mu.data()) v = static_cast<Real>(4 * rng.uniform() - 2);
    for (auto& v : post.logvar.data()) v = static_cast<Real>(3 * rng.uniform() - 2);
    const double closed = kl_per_dim(post);

    // E_q[log q(z) - log p(z)] per dimension; the 0.5 log(2 pi) terms cancel.
    const int n = 100000;
    double acc = 0;
    for (int s = 0; s < n; ++s) {
      const Tensor eps = rng.normal_tensor({1, kLatentDim});
      const Tensor z = reparam_sample(post, eps);
      double lq_minus_lp = 0;
      for (std::size_t j = 0; j < kLatentDim; ++j) {
        const double lv = post.logvar[j];
        const double d = z[j] - post.mu[j];
        lq_minus_lp += -0.5 * lv - 0.5 * d * d / std::exp(lv) + 0.5 * static_cast<double>(z[j]) * z[j];
      }
      acc += lq_minus_lp / kLatentDim;
    }
    const double mc = acc / n;
    CHECK(std::abs(mc - closed) / closed < 0.01);
  }
}
