#include "vaelab/augment.hpp"

#include <algorithm>
#include <numeric>

#include "vaelab/error.hpp"

namespace vaelab::inline VAELAB_NS {

void validate(const AugmentConfig& config) {
  if (!(config.p_sampled >= 0 && config.p_sampled <= 1)) {
    throw ValidationError("augment.p_sampled must lie in [0, 1], got " + std::to_string(config.p_sampled));
  }
  if (config.n_augmented == 0) throw ValidationError("augment.n_augmented must be positive");
}

AugmentPool::AugmentPool(AugmentConfig config) : config_(config) { validate(config_); }

void AugmentPool::init(const PosteriorGaussian& batch_posterior, const Tensor& eps) {
  init(reparam_sample(batch_posterior, eps));
}

void AugmentPool::init(const Tensor& batch_latents) {
  if (active_) throw ContractError("augment pool initialized twice");
  if (batch_latents.rank() != 2 || batch_latents.dim(1) != kLatentDim) {
    throw DimensionError("pool latents must be B x 32, got " + shape_str(batch_latents.shape()));
  }
  if (batch_latents.dim(0) < config_.n_augmented) {
    throw ContractError("batch has " + std::to_string(batch_latents.dim(0)) + " rows, pool needs " +
                        std::to_string(config_.n_augmented));
  }
  latents_ = batch_latents.rows(0, config_.n_augmented);
  ages_.assign(config_.n_augmented, 0);
  last_replaced_.assign(config_.n_augmented, true);
  active_ = true;
}

Tensor AugmentPool::augment_batch(const VaeModel& model, const Tensor& batch) const {
  if (!active_) return batch;
  return concat_rows(flatten_images(batch), flatten_images(decode(model, latents_)));
}

std::size_t AugmentPool::update(const Tensor& batch_latents, const Tensor& variant_latents, Rng& rng) {
  if (!active_) throw ContractError("augment pool updated before init");
  const std::size_t n = config_.n_augmented;
  if (variant_latents.rank() != 2 || variant_latents.dim(0) != n || variant_latents.dim(1) != kLatentDim) {
    throw DimensionError("variant latents must be " + std::to_string(n) + " x 32, got " +
                         shape_str(variant_latents.shape()));
  }
  if (batch_latents.rank() != 2 || batch_latents.dim(1) != kLatentDim) {
    throw DimensionError("batch latents must be B x 32, got " + shape_str(batch_latents.shape()));
  }

  std::size_t replaced = 0;
  for (std::size_t i = 0; i < n; ++i) {
    last_replaced_[i] = rng.bernoulli(config_.p_sampled);
    replaced += last_replaced_[i];
  }
  const std::size_t rows = batch_latents.dim(0);
  if (replaced > rows) {
    throw ContractError("cannot draw " + std::to_string(replaced) + " distinct examples from a batch of " +
                        std::to_string(rows));
  }
  // partial Fisher-Yates: the first `replaced` entries are a uniform draw without replacement
  std::vector<std::size_t> pick(rows);
  std::iota(pick.begin(), pick.end(), 0);
  for (std::size_t k = 0; k < replaced; ++k) std::swap(pick[k], pick[k + rng.below(rows - k)]);

  auto row = [](const Tensor& t, std::size_t r) { return t.data().subspan(r * kLatentDim, kLatentDim); };
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = latents_.data().subspan(i * kLatentDim, kLatentDim);
    if (last_replaced_[i]) {
      auto src = row(batch_latents, pick[next++]);
      std::copy(src.begin(), src.end(), dst.begin());
      ages_[i] = 0;
    } else {
      auto src = row(variant_latents, i);
      std::copy(src.begin(), src.end(), dst.begin());
      ++ages_[i];
    }
  }
  return replaced;
}

}  // namespace vaelab::inline VAELAB_NS
