#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "vaelab/autodiff.hpp"
#include "vaelab/param_set.hpp"
#include "vaelab/rng.hpp"

namespace vaelab::inline VAELAB_NS {

/// One parameter tensor of an architecture descriptor.
struct ParamSpec {
  std::string name;
  Shape shape;
  bool is_bias = false;
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
};

using ArchitectureDescriptor = std::vector<ParamSpec>;

ParamSpec dense_weight(std::string name, std::size_t in, std::size_t out);
ParamSpec bias(std::string name, std::size_t n);
/// kh x kw x Cin x Cout
ParamSpec conv_kernel(std::string name, std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout);
/// kh x kw x Cout x Cin (layout consumed by conv2d_transpose)
ParamSpec conv_transpose_kernel(std::string name, std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout);

double glorot_limit(const ParamSpec& spec);

/// Glorot-uniform weights strictly inside +-sqrt(6 / (fan_in + fan_out)),
/// zero biases. Deterministic in `seed`.
ParamSet init_params(const ArchitectureDescriptor& arch, std::uint64_t seed, std::uint64_t stream = streams::kInit);

/// Parameters as tape leaves. `trainable == false` records constants, so
/// evaluation passes skip gradient bookkeeping.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParamSet& params, bool trainable);
  Var operator[](const std::string& name) const;
  Tape& tape() const { return *tape_; }

 private:
  Tape* tape_;
  std::unordered_map<std::string, Var> vars_;
};

Var dense(const BoundParams& p, const std::string& prefix, Var x);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-7;
};

struct AdamState {
  AdamConfig config;
  ParamSet m;
  ParamSet v;
  std::uint64_t t = 0;
};

AdamState make_adam_state(const ParamSet& params, AdamConfig config = {});

/// Bias-corrected Adam: p -= lr * m_hat / (sqrt(v_hat) + eps).
/// ContractError if grads do not mirror params.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state);

}  // namespace vaelab::inline VAELAB_NS
