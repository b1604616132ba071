#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vaelab/mnist.hpp"
#include "vaelab/nn.hpp"

namespace vaelab::inline VAELAB_NS {

inline constexpr std::size_t kClasses = 10;

struct ClassifierConfig {
  std::size_t epochs = 3;
  std::size_t batch_size = 50;
  std::uint64_t seed = 1;
  /// Test accuracy below this is a QualityError.
  double min_accuracy = 0.97;
  AdamConfig adam;
};

/// Conv(16,3x3,s2,ReLU) -> Conv(32,3x3,s2,ReLU) -> Dense(10), same padding.
struct ClassifierModel {
  ParamSet params;
  double test_accuracy = 0;
};

ArchitectureDescriptor classifier_descriptor();

Var classifier_logits(const BoundParams& p, Var images);
/// N x 10 logits for N images (N x 784 or N x 28 x 28 x 1).
Tensor classifier_logits(const ClassifierModel& model, const Tensor& images);
std::vector<int> predict_labels(const Tensor& logits);
double accuracy(const ClassifierModel& model, const Tensor& images, std::span<const std::uint8_t> labels);

ClassifierModel train_classifier(const Dataset& data, const ClassifierConfig& config);

}  // namespace vaelab::inline VAELAB_NS
