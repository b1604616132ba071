#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vaelab/autodiff.hpp"
#include "vaelab/nn.hpp"
#include "vaelab/param_set.hpp"

namespace vaelab::inline VAELAB_NS {

inline constexpr std::size_t kLatentDim = 32;
inline constexpr std::size_t kImageSide = 28;
inline constexpr std::size_t kPixels = kImageSide * kImageSide;

/// Clamp applied to decoder means before the cross-entropy logarithms.
inline constexpr double kProbClamp = 1e-7;

enum class Architecture {
  /// 784 -> 64 ReLU -> {32 mean, 32 logvar};  32 -> 64 ReLU -> 784 sigmoid
  kFc,
  /// Conv(32,3x3,s2,ReLU) -> Conv(64,3x3,s2,ReLU) -> Dense(64) split into mean/logvar;
  /// Dense(7*7*32,ReLU) -> Deconv(64,s2,ReLU) -> Deconv(32,s2,ReLU) -> Deconv(1,s1,sigmoid)
  kConv,
};

std::string to_string(Architecture arch);
/// Accepts "fc" and "conv"; ValidationError otherwise.
Architecture parse_architecture(const std::string& name);

ArchitectureDescriptor vae_descriptor(Architecture arch);

struct VaeModel {
  Architecture architecture = Architecture::kFc;
  ParamSet params;

  static VaeModel create(Architecture arch, std::uint64_t seed);
};

/// Diagonal Gaussian q(z|x): per-example mean and log-variance, B x 32.
struct PosteriorGaussian {
  Tensor mu;
  Tensor logvar;
};

struct LossBreakdown {
  double total = 0;
  double recon = 0;  ///< mean binary cross-entropy per pixel value
  double kl = 0;     ///< mean KL per latent dimension
  double beta = 0;
};

// Tape-level building blocks, shared with training.

struct PosteriorVars {
  Var mu;
  Var logvar;
};

struct LossVars {
  Var total;
  Var recon;
  Var kl;
  PosteriorVars posterior;
  Var z;
};

PosteriorVars encode(const BoundParams& p, Architecture arch, Var x);
/// Decoder means, flattened to B x 784.
Var decode(const BoundParams& p, Architecture arch, Var z);
Var reparam_sample(PosteriorVars post, Var eps);
/// Closed-form KL(q || N(0, I)) averaged over batch and latent dimensions.
Var kl_per_dim(PosteriorVars post);
/// total = recon + beta * kl, with recon the per-pixel mean cross-entropy and
/// kl the per-dimension mean KL to N(0, I).
LossVars vae_loss(const BoundParams& p, Architecture arch, Var x, Var eps, double beta);

LossBreakdown breakdown(const LossVars& vars, double beta);

// Tensor-level API on a frozen model. Inputs may be B x 784 or B x 28 x 28 x 1
// with pixels in [0, 1]; anything else is a ValidationError.

PosteriorGaussian encode(const VaeModel& model, const Tensor& x);
Tensor reparam_sample(const PosteriorGaussian& post, const Tensor& eps);
double kl_per_dim(const PosteriorGaussian& post);
/// Pixel means in (0, 1): B x 784 for fc, B x 28 x 28 x 1 for conv.
Tensor decode(const VaeModel& model, const Tensor& z);
LossBreakdown vae_loss(const VaeModel& model, const Tensor& x, const Tensor& eps, double beta);
/// Decoder means for the given prior draws; no pixel sampling.
Tensor generate(const VaeModel& model, const Tensor& z);
/// x(0) = x, x(k+1) = decode(mean of encode(x(k))). Returns n_reps + 1 images.
std::vector<Tensor> repeated_autoencode(const VaeModel& model, const Tensor& x, std::size_t n_reps);
/// Streaming form: visit(k, x(k)) for k = 0..n_reps without keeping earlier steps.
void repeated_autoencode(const VaeModel& model, const Tensor& x, std::size_t n_reps,
                         const std::function<void(std::size_t, const Tensor&)>& visit);

/// Throws ValidationError unless every element is in [0, 1] and the shape is an image batch.
void validate_images(const Tensor& x);
/// B x 784 view of an image batch.
Tensor flatten_images(const Tensor& x);

}  // namespace vaelab::inline VAELAB_NS
