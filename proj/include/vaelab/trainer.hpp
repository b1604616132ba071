#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vaelab/augment.hpp"
#include "vaelab/history.hpp"
#include "vaelab/mnist.hpp"
#include "vaelab/nn.hpp"
#include "vaelab/vae.hpp"

namespace vaelab::inline VAELAB_NS {

struct TrainConfig {
  double beta = 0.048;
  Architecture architecture = Architecture::kFc;
  std::size_t epochs = 5;
  std::size_t batch_size = 50;
  std::size_t steps_per_epoch = 1200;
  std::size_t eval_every = 6;
  std::size_t gen_eval_n = 50;
  std::uint64_t seed = 1;
  AugmentConfig augment;
  AdamConfig adam;

  std::size_t total_steps() const { return epochs * steps_per_epoch; }
};

/// ValidationError for beta <= 0, zero sizes, or an eval cadence that does not divide an epoch.
void validate(const TrainConfig& config);

/// What one optimizer step saw, for observers.
struct StepInfo {
  std::size_t step;      ///< 0-based step index
  const Tensor& batch;   ///< the batch actually trained on, augmented variants included
  const Tensor& z;       ///< sampled latents for every row of `batch`
  const AugmentPool& pool;  ///< state after this step's update
  LossBreakdown loss;
};

struct TrainHooks {
  std::function<void(const StepInfo&)> on_step;
  /// Called after every epoch with the 1-based epoch number.
  std::function<void(std::size_t, const VaeModel&)> on_epoch;
};

struct TrainResult {
  VaeModel model;
  RunHistory history;
};

/// Adam over per-epoch shuffled batches. Every eval_every steps records the
/// step's training loss, the loss on the next test batch (cycling the test set)
/// and the generated loss. The training set must hold exactly
/// steps_per_epoch * batch_size examples (IngestionError otherwise).
TrainResult run_training(const TrainConfig& config, const Dataset& data, const TrainHooks& hooks = {});

/// Decodes n prior draws and scores them with the full loss as if they were test
/// data: encode, fresh eps, cross-entropy against their own pixel means.
LossBreakdown measure_generated_loss(const VaeModel& model, double beta, std::size_t n, Rng& latent, Rng& eps);
LossBreakdown measure_generated_loss(const VaeModel& model, double beta, std::size_t n, std::uint64_t seed);

/// 4.8e-4 ... 4.8 at two points per decade: 4.8 and 1.6 times powers of ten.
std::vector<double> default_beta_grid();

struct SweepRun {
  double beta = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  bool skipped = false;
  std::string error;
  std::optional<TrainResult> result;
  double fid = 0;

  SweepRow row() const;
};

struct SweepOptions {
  std::size_t jobs = 1;
  /// Scores a finished model; may be empty.
  std::function<double(const VaeModel&)> fid;
  /// Betas for which this returns true are not trained (resumed sweeps).
  std::function<bool(double)> skip;
  /// Called from worker threads, serialized, as each run finishes.
  std::function<void(const SweepRun&)> on_done;
  /// Per-run observers, e.g. for sample grids.
  std::function<TrainHooks(double)> hooks;
};

/// One training run per beta, in ascending beta order; run i uses seed base.seed + i.
/// Failures are recorded in the run and do not stop the sweep.
std::vector<SweepRun> sweep(std::vector<double> betas, const TrainConfig& base, const Dataset& data,
                            const SweepOptions& options);

}  // namespace vaelab::inline VAELAB_NS
