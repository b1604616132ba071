#include "vaelab/classifier.hpp"

#include <algorithm>

#include "vaelab/error.hpp"
#include "vaelab/rng.hpp"
#include "vaelab/vae.hpp"

namespace vaelab::inline VAELAB_NS {

ArchitectureDescriptor classifier_descriptor() {
  return {
      conv_kernel("cls.conv1.k", 3, 3, 1, 16),
      bias("cls.conv1.b", 16),
      conv_kernel("cls.conv2.k", 3, 3, 16, 32),
      bias("cls.conv2.b", 32),
      dense_weight("cls.out.w", 7 * 7 * 32, kClasses),
      bias("cls.out.b", kClasses),
  };
}

Var classifier_logits(const BoundParams& p, Var images) {
  const std::size_t b = images.shape()[0];
  Var x = reshape(images, {b, kImageSide, kImageSide, 1});
  x = relu(bias_add(conv2d(x, p["cls.conv1.k"], 2, Padding::kSame), p["cls.conv1.b"]));
  x = relu(bias_add(conv2d(x, p["cls.conv2.k"], 2, Padding::kSame), p["cls.conv2.b"]));
  return dense(p, "cls.out", reshape(x, {b, 7 * 7 * 32}));
}

Tensor classifier_logits(const ClassifierModel& model, const Tensor& images) {
  validate_images(images);
  return map_row_blocks(flatten_images(images), 500, [&](const Tensor& part) {
    Tape tape;
    BoundParams p(tape, model.params, false);
    return classifier_logits(p, tape.constant(part)).value();
  });
}

std::vector<int> predict_labels(const Tensor& logits) {
  if (logits.rank() != 2) throw DimensionError("logits must be N x k, got " + shape_str(logits.shape()));
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = logits.data().subspan(r * k, k);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double accuracy(const ClassifierModel& model, const Tensor& images, std::span<const std::uint8_t> labels) {
  const auto pred = predict_labels(classifier_logits(model, images));
  if (pred.size() != labels.size()) throw DimensionError("one label per image expected");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

ClassifierModel train_classifier(const Dataset& data, const ClassifierConfig& config) {
  const std::size_t n = data.train_count(), bs = config.batch_size;
  if (bs == 0 || n < bs) throw ContractError("classifier batch size must be in [1, train count]");
  ClassifierModel model{init_params(classifier_descriptor(), config.seed, streams::kClassifierInit), 0};
  AdamState adam = make_adam_state(model.params, config.adam);
  Rng shuffle(config.seed, streams::kClassifierShuffle);
  Tensor batch({bs, kPixels});
  std::vector<int> labels(bs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffle.permutation(n);
    for (std::size_t start = 0; start + bs <= n; start += bs) {
      for (std::size_t i = 0; i < bs; ++i) {
        const std::size_t src = order[start + i];
        std::copy_n(data.train_images.data().begin() + static_cast<std::ptrdiff_t>(src * kPixels), kPixels,
                    batch.data().begin() + static_cast<std::ptrdiff_t>(i * kPixels));
        labels[i] = data.train_labels[src];
      }
      Tape tape;
      BoundParams p(tape, model.params, true);
      const Var loss = softmax_cross_entropy(classifier_logits(p, tape.constant(batch)), labels);
      adam_step(model.params, tape.backward(loss), adam);
    }
  }
  model.test_accuracy = accuracy(model, data.test_images, data.test_labels);
  if (model.test_accuracy < config.min_accuracy) {
    throw QualityError("classifier test accuracy " + std::to_string(model.test_accuracy) + " is below the required " +
                       std::to_string(config.min_accuracy));
  }
  return model;
}

}  // namespace vaelab::inline VAELAB_NS
