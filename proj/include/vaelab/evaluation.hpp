#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vaelab/classifier.hpp"
#include "vaelab/metrics.hpp"
#include "vaelab/vae.hpp"

namespace vaelab::inline VAELAB_NS {

inline constexpr std::size_t kReferenceCount = 10000;

/// Logit statistics of real training data: global stats over a seeded random
/// subset of kReferenceCount examples, per-class stats over every training
/// example grouped by the classifier's own label. Rounded to f32.
struct ReferenceStats {
  GaussianStats global;
  std::vector<GaussianStats> per_class;
};

struct MetricsContext {
  ClassifierModel classifier;
  ReferenceStats reference;
};

ReferenceStats fit_reference(const ClassifierModel& classifier, const Dataset& data, std::uint64_t seed);
/// Trains the classifier (QualityError below the accuracy bar) and fits the reference stats.
MetricsContext build_metrics_context(const Dataset& data, const ClassifierConfig& config);

void save_metrics_context(const MetricsContext& ctx, const std::filesystem::path& path);
MetricsContext load_metrics_context(const std::filesystem::path& path);

/// Decoder means for n prior draws, z from stream kMetricsLatent of `seed`. N x 784.
Tensor prior_samples(const VaeModel& model, std::size_t n, std::uint64_t seed);

double fid_of_images(const MetricsContext& ctx, const Tensor& images);
double model_fid(const MetricsContext& ctx, const VaeModel& model, std::size_t n, std::uint64_t seed);

struct PValues {
  std::vector<double> conditional;
  std::vector<double> unconditional;
};
PValues score_images(const MetricsContext& ctx, const Tensor& images);

}  // namespace vaelab::inline VAELAB_NS
