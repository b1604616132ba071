#include "vaelab/evaluation.hpp"

#include "vaelab/checkpoint.hpp"
#include "vaelab/error.hpp"
#include "vaelab/rng.hpp"

namespace vaelab::inline VAELAB_NS {

namespace {

constexpr const char* kContextTag = "classifier-stats";

Tensor to_tensor(const std::vector<double>& v, Shape shape) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<Real>(v[i]);
  return t;
}

std::vector<double> to_vector(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

void put_stats(ParamSet& out, const std::string& prefix, const GaussianStats& s) {
  const std::size_t k = s.dim();
  out.add(prefix + ".m", to_tensor(s.m, {k}));
  out.add(prefix + ".sigma", to_tensor(s.sigma, {k, k}));
  out.add(prefix + ".count", Tensor::scalar(static_cast<Real>(s.count)));
}

GaussianStats get_stats(const ParamSet& in, const std::string& prefix) {
  GaussianStats s{to_vector(in.at(prefix + ".m")), to_vector(in.at(prefix + ".sigma")),
                  static_cast<std::size_t>(in.at(prefix + ".count").item())};
  if (s.sigma.size() != s.m.size() * s.m.size()) throw CheckpointError(prefix + ": covariance shape mismatch");
  return s;
}

}  // namespace

ReferenceStats fit_reference(const ClassifierModel& classifier, const Dataset& data, std::uint64_t seed) {
  const Tensor logits = classifier_logits(classifier, data.train_images);
  const std::size_t n = logits.dim(0);
  const std::size_t m = std::min(n, kReferenceCount);
  Rng rng(seed, streams::kMetricsSelect);
  const auto order = rng.permutation(n);
  Tensor subset({m, kClasses});
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(logits.data().begin() + static_cast<std::ptrdiff_t>(order[i] * kClasses), kClasses,
                subset.data().begin() + static_cast<std::ptrdiff_t>(i * kClasses));
  }
  ReferenceStats ref{fit_stats(subset), fit_class_stats(logits, predict_labels(logits), kClasses)};
  round_to_f32(ref.global);
  for (auto& s : ref.per_class) round_to_f32(s);
  return ref;
}

MetricsContext build_metrics_context(const Dataset& data, const ClassifierConfig& config) {
  ClassifierModel cls = train_classifier(data, config);
  ReferenceStats ref = fit_reference(cls, data, config.seed);
  return {std::move(cls), std::move(ref)};
}

void save_metrics_context(const MetricsContext& ctx, const std::filesystem::path& path) {
  Checkpoint ckpt{kContextTag, ctx.classifier.params};
  ckpt.tensors.add("cls.test_accuracy", Tensor::scalar(static_cast<Real>(ctx.classifier.test_accuracy)));
  put_stats(ckpt.tensors, "ref.global", ctx.reference.global);
  for (std::size_t c = 0; c < ctx.reference.per_class.size(); ++c) {
    put_stats(ckpt.tensors, "ref.class" + std::to_string(c), ctx.reference.per_class[c]);
  }
  save_checkpoint(ckpt, path);
}

MetricsContext load_metrics_context(const std::filesystem::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.tag != kContextTag) throw CheckpointError(path.string() + ": not a classifier stats cache (tag '" + ckpt.tag + "')");
  MetricsContext ctx;
  try {
    for (const auto& spec : classifier_descriptor()) {
      const Tensor& t = ckpt.tensors.at(spec.name);
      if (t.shape() != spec.shape) throw CheckpointError(path.string() + ": tensor '" + spec.name + "' has the wrong shape");
      ctx.classifier.params.add(spec.name, t);
    }
    ctx.classifier.test_accuracy = ckpt.tensors.at("cls.test_accuracy").item();
    ctx.reference.global = get_stats(ckpt.tensors, "ref.global");
    for (std::size_t c = 0; c < kClasses; ++c) {
      ctx.reference.per_class.push_back(get_stats(ckpt.tensors, "ref.class" + std::to_string(c)));
    }
  } catch (const ContractError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  return ctx;
}

Tensor prior_samples(const VaeModel& model, std::size_t n, std::uint64_t seed) {
  Rng rng(seed, streams::kMetricsLatent);
  return flatten_images(generate(model, rng.normal_tensor({n, kLatentDim})));
}

double fid_of_images(const MetricsContext& ctx, const Tensor& images) {
  GaussianStats s = fit_stats(classifier_logits(ctx.classifier, images));
  return frechet_distance(s, ctx.reference.global);
}

double model_fid(const MetricsContext& ctx, const VaeModel& model, std::size_t n, std::uint64_t seed) {
  return fid_of_images(ctx, prior_samples(model, n, seed));
}

PValues score_images(const MetricsContext& ctx, const Tensor& images) {
  const Tensor logits = classifier_logits(ctx.classifier, images);
  PValues out;
  for (const auto& r : conditional_p_values(logits, ctx.reference.per_class)) out.conditional.push_back(r.p);
  out.unconditional = unconditional_p_values(logits, ctx.reference.global);
  return out;
}

}  // namespace vaelab::inline VAELAB_NS
