#include "vaelab/vae.hpp"

#include <algorithm>
#include <cmath>

#include "vaelab/error.hpp"

namespace vaelab::inline VAELAB_NS {

namespace {

constexpr std::size_t kChunk = 500;
constexpr std::size_t kConvDenseSide = 7;
constexpr std::size_t kConvDenseChannels = 32;

std::size_t batch_of(const Tensor& x) {
  if (x.rank() == 2 && x.dim(1) == kPixels) return x.dim(0);
  if (x.rank() == 4 && x.dim(1) == kImageSide && x.dim(2) == kImageSide && x.dim(3) == 1) return x.dim(0);
  throw ValidationError("expected B x 784 or B x 28 x 28 x 1 images, got " + shape_str(x.shape()));
}

void check_latents(const Tensor& z) {
  if (z.rank() != 2 || z.dim(1) != kLatentDim) {
    throw DimensionError("latent batch must be B x " + std::to_string(kLatentDim) + ", got " + shape_str(z.shape()));
  }
}

template <typename Fn>
Tensor chunked(const Tensor& rows, Fn fn) {
  return map_row_blocks(rows, kChunk, fn);
}

}  // namespace

std::string to_string(Architecture arch) { return arch == Architecture::kFc ? "fc" : "conv"; }

Architecture parse_architecture(const std::string& name) {
  if (name == "fc") return Architecture::kFc;
  if (name == "conv") return Architecture::kConv;
  throw ValidationError("unknown architecture '" + name + "' (expected fc or conv)");
}

ArchitectureDescriptor vae_descriptor(Architecture arch) {
  if (arch == Architecture::kFc) {
    return {
        dense_weight("enc.hidden.w", kPixels, 64),
        bias("enc.hidden.b", 64),
        dense_weight("enc.mean.w", 64, kLatentDim),
        bias("enc.mean.b", kLatentDim),
        dense_weight("enc.logvar.w", 64, kLatentDim),
        bias("enc.logvar.b", kLatentDim),
        dense_weight("dec.hidden.w", kLatentDim, 64),
        bias("dec.hidden.b", 64),
        dense_weight("dec.out.w", 64, kPixels),
        bias("dec.out.b", kPixels),
    };
  }
  const std::size_t dense_units = kConvDenseSide * kConvDenseSide * kConvDenseChannels;
  return {
      conv_kernel("enc.conv1.k", 3, 3, 1, 32),
      bias("enc.conv1.b", 32),
      conv_kernel("enc.conv2.k", 3, 3, 32, 64),
      bias("enc.conv2.b", 64),
      dense_weight("enc.dense.w", 7 * 7 * 64, 2 * kLatentDim),
      bias("enc.dense.b", 2 * kLatentDim),
      dense_weight("dec.dense.w", kLatentDim, dense_units),
      bias("dec.dense.b", dense_units),
      conv_transpose_kernel("dec.deconv1.k", 3, 3, kConvDenseChannels, 64),
      bias("dec.deconv1.b", 64),
      conv_transpose_kernel("dec.deconv2.k", 3, 3, 64, 32),
      bias("dec.deconv2.b", 32),
      conv_transpose_kernel("dec.deconv3.k", 3, 3, 32, 1),
      bias("dec.deconv3.b", 1),
  };
}

VaeModel VaeModel::create(Architecture arch, std::uint64_t seed) {
  return {arch, init_params(vae_descriptor(arch), seed)};
}

PosteriorVars encode(const BoundParams& p, Architecture arch, Var x) {
  const std::size_t b = x.shape()[0];
  if (arch == Architecture::kFc) {
    auto h = relu(dense(p, "enc.hidden", reshape(x, {b, kPixels})));
    return {dense(p, "enc.mean", h), dense(p, "enc.logvar", h)};
  }
  auto img = reshape(x, {b, kImageSide, kImageSide, 1});
  auto h1 = relu(bias_add(conv2d(img, p["enc.conv1.k"], 2, Padding::kSame), p["enc.conv1.b"]));
  auto h2 = relu(bias_add(conv2d(h1, p["enc.conv2.k"], 2, Padding::kSame), p["enc.conv2.b"]));
  auto flat = reshape(h2, {b, 7 * 7 * 64});
  auto out = dense(p, "enc.dense", flat);
  return {slice_cols(out, 0, kLatentDim), slice_cols(out, kLatentDim, 2 * kLatentDim)};
}

Var decode(const BoundParams& p, Architecture arch, Var z) {
  const std::size_t b = z.shape()[0];
  if (arch == Architecture::kFc) {
    auto h = relu(dense(p, "dec.hidden", z));
    return sigmoid(dense(p, "dec.out", h));
  }
  auto h = relu(dense(p, "dec.dense", z));
  auto img = reshape(h, {b, kConvDenseSide, kConvDenseSide, kConvDenseChannels});
  auto d1 = relu(bias_add(conv2d_transpose(img, p["dec.deconv1.k"], 2, Padding::kSame), p["dec.deconv1.b"]));
  auto d2 = relu(bias_add(conv2d_transpose(d1, p["dec.deconv2.k"], 2, Padding::kSame), p["dec.deconv2.b"]));
  auto d3 = bias_add(conv2d_transpose(d2, p["dec.deconv3.k"], 1, Padding::kSame), p["dec.deconv3.b"]);
  return reshape(sigmoid(d3), {b, kPixels});
}

Var reparam_sample(PosteriorVars post, Var eps) {
  return post.mu + exp(post.logvar * Real{0.5}) * eps;
}

Var kl_per_dim(PosteriorVars post) {
  auto terms = post.mu * post.mu + exp(post.logvar) - post.logvar + Real{-1};
  return mean(terms) * Real{0.5};
}

LossVars vae_loss(const BoundParams& p, Architecture arch, Var x, Var eps, double beta) {
  Tape& tape = p.tape();
  const std::size_t b = x.shape()[0];
  auto target = reshape(x, {b, kPixels});
  auto post = encode(p, arch, x);
  auto z = reparam_sample(post, eps);
  const Real lo = static_cast<Real>(kProbClamp);
  auto xhat = clamp(decode(p, arch, z), lo, Real{1} - lo);

  Tensor one_minus_x = target.value();
  for (auto& v : one_minus_x.data()) v = Real{1} - v;
  auto ce = target * log(xhat) + tape.constant(std::move(one_minus_x)) * log(Real{1} - xhat);
  auto recon = mean(ce) * Real{-1};

  auto kl = kl_per_dim(post);
  auto total = recon + kl * static_cast<Real>(beta);
  return {total, recon, kl, post, z};
}

LossBreakdown breakdown(const LossVars& vars, double beta) {
  return {vars.total.value().item(), vars.recon.value().item(), vars.kl.value().item(), beta};
}

void validate_images(const Tensor& x) {
  batch_of(x);
  for (auto v : x.data()) {
    if (!(v >= 0 && v <= 1)) throw ValidationError("pixel value " + std::to_string(v) + " outside [0, 1]");
  }
}

Tensor flatten_images(const Tensor& x) { return x.reshaped({batch_of(x), kPixels}); }

PosteriorGaussian encode(const VaeModel& model, const Tensor& x) {
  validate_images(x);
  const Tensor flat = flatten_images(x);
  const std::size_t n = flat.dim(0);
  PosteriorGaussian out{Tensor({n, kLatentDim}), Tensor({n, kLatentDim})};
  for (std::size_t b = 0; b < n; b += kChunk) {
    const std::size_t e = std::min(n, b + kChunk);
    Tape tape;
    BoundParams p(tape, model.params, false);
    auto post = encode(p, model.architecture, tape.constant(flat.rows(b, e)));
    std::copy(post.mu.value().data().begin(), post.mu.value().data().end(), out.mu.data().begin() + b * kLatentDim);
    std::copy(post.logvar.value().data().begin(), post.logvar.value().data().end(),
              out.logvar.data().begin() + b * kLatentDim);
  }
  return out;
}

Tensor reparam_sample(const PosteriorGaussian& post, const Tensor& eps) {
  if (post.mu.shape() != post.logvar.shape() || post.mu.shape() != eps.shape()) {
    throw DimensionError("reparam_sample: mu " + shape_str(post.mu.shape()) + ", logvar " + shape_str(post.logvar.shape()) +
                         ", eps " + shape_str(eps.shape()));
  }
  Tape tape;
  auto z = reparam_sample(PosteriorVars{tape.constant(post.mu), tape.constant(post.logvar)}, tape.constant(eps));
  return z.value();
}

double kl_per_dim(const PosteriorGaussian& post) {
  if (post.mu.shape() != post.logvar.shape()) throw DimensionError("kl_per_dim: mu and logvar shapes differ");
  Tape tape;
  return kl_per_dim(PosteriorVars{tape.constant(post.mu), tape.constant(post.logvar)}).value().item();
}

Tensor decode(const VaeModel& model, const Tensor& z) {
  check_latents(z);
  Tensor flat = chunked(z, [&](const Tensor& part) {
    Tape tape;
    BoundParams p(tape, model.params, false);
    return decode(p, model.architecture, tape.constant(part)).value();
  });
  if (model.architecture == Architecture::kConv) return std::move(flat).reshaped({z.dim(0), kImageSide, kImageSide, 1});
  return flat;
}

LossBreakdown vae_loss(const VaeModel& model, const Tensor& x, const Tensor& eps, double beta) {
  validate_images(x);
  if (eps.rank() != 2 || eps.dim(0) != batch_of(x) || eps.dim(1) != kLatentDim) {
    throw DimensionError("vae_loss: eps " + shape_str(eps.shape()) + " does not match batch " + shape_str(x.shape()));
  }
  Tape tape;
  BoundParams p(tape, model.params, false);
  return breakdown(vae_loss(p, model.architecture, tape.constant(x), tape.constant(eps), beta), beta);
}

Tensor generate(const VaeModel& model, const Tensor& z) { return decode(model, z); }

void repeated_autoencode(const VaeModel& model, const Tensor& x, std::size_t n_reps,
                         const std::function<void(std::size_t, const Tensor&)>& visit) {
  validate_images(x);
  visit(0, x);
  Tensor cur = x;
  for (std::size_t k = 1; k <= n_reps; ++k) {
    cur = decode(model, encode(model, cur).mu).reshaped(x.shape());
    visit(k, cur);
  }
}

std::vector<Tensor> repeated_autoencode(const VaeModel& model, const Tensor& x, std::size_t n_reps) {
  std::vector<Tensor> seq;
  seq.reserve(n_reps + 1);
  repeated_autoencode(model, x, n_reps, [&](std::size_t, const Tensor& t) { seq.push_back(t); });
  return seq;
}

}  // namespace vaelab::inline VAELAB_NS
