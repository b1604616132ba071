#pragma once

#include <cstdint>
#include <vector>

#include "vaelab/rng.hpp"
#include "vaelab/vae.hpp"

namespace vaelab::inline VAELAB_NS {

struct AugmentConfig {
  bool enabled = false;
  /// Step index whose batch seeds the pool; augmented batches start on the step after.
  std::size_t gen_start_step = 2400;
  double p_sampled = 1.0;
  std::size_t n_augmented = 50;
};

/// Throws ValidationError for p_sampled outside [0, 1] or an empty pool.
void validate(const AugmentConfig& config);

/// Latent vectors whose decoded variants extend each training batch once active.
class AugmentPool {
 public:
  explicit AugmentPool(AugmentConfig config);

  const AugmentConfig& config() const { return config_; }
  bool active() const { return active_; }
  /// n_augmented x 32 once active; empty before.
  const Tensor& latents() const { return latents_; }
  /// Steps each slot has survived without being re-initialized from a real batch.
  const std::vector<std::size_t>& ages() const { return ages_; }
  /// Slots re-initialized from the batch by the last update.
  const std::vector<bool>& last_replaced() const { return last_replaced_; }

  /// latents = reparam_sample(batch_posterior, eps), taking the first n_augmented rows.
  void init(const PosteriorGaussian& batch_posterior, const Tensor& eps);
  /// Same, from latents already sampled during a training step.
  void init(const Tensor& batch_latents);

  /// Inactive: the batch itself. Active: concat(batch, decode(latents)) as B x 784.
  Tensor augment_batch(const VaeModel& model, const Tensor& batch) const;

  /// Per slot: with probability p_sampled take the sampled latent of a batch
  /// example (drawn without replacement), otherwise the sampled latent of the
  /// slot's own variant (row i of variant_latents). Returns the replacement count.
  std::size_t update(const Tensor& batch_latents, const Tensor& variant_latents, Rng& rng);

 private:
  AugmentConfig config_;
  bool active_ = false;
  Tensor latents_;
  std::vector<std::size_t> ages_;
  std::vector<bool> last_replaced_;
};

}  // namespace vaelab::inline VAELAB_NS
