#include "vaelab/nn.hpp"

#include <cmath>

#include "vaelab/error.hpp"
#include "vaelab/rng.hpp"

namespace vaelab::inline VAELAB_NS {

ParamSpec dense_weight(std::string name, std::size_t in, std::size_t out) {
  return {std::move(name), {in, out}, false, in, out};
}

ParamSpec bias(std::string name, std::size_t n) { return {std::move(name), {n}, true, 0, 0}; }

ParamSpec conv_kernel(std::string name, std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout) {
  return {std::move(name), {kh, kw, cin, cout}, false, kh * kw * cin, kh * kw * cout};
}

ParamSpec conv_transpose_kernel(std::string name, std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout) {
  return {std::move(name), {kh, kw, cout, cin}, false, kh * kw * cout, kh * kw * cin};
}

double glorot_limit(const ParamSpec& spec) {
  return std::sqrt(6.0 / static_cast<double>(spec.fan_in + spec.fan_out));
}

ParamSet init_params(const ArchitectureDescriptor& arch, std::uint64_t seed, std::uint64_t stream) {
  Rng rng(seed, stream);
  ParamSet params;
  for (const auto& spec : arch) {
    Tensor t(spec.shape);
    if (!spec.is_bias) {
      const double limit = glorot_limit(spec);
      const Real rlimit = static_cast<Real>(limit);
      for (auto& v : t.data()) {
        Real w = static_cast<Real>((2.0 * rng.uniform() - 1.0) * limit);
        // rounding to Real can land on the bound itself
        if (std::abs(w) >= rlimit) w = std::nextafter(w, Real{0});
        v = w;
      }
    }
    params.add(spec.name, std::move(t));
  }
  return params;
}

BoundParams::BoundParams(Tape& tape, const ParamSet& params, bool trainable) : tape_(&tape) {
  for (const auto& e : params) {
    vars_.emplace(e.name, trainable ? tape.parameter(e.name, e.value) : tape.constant(e.value));
  }
}

Var BoundParams::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ContractError("model has no parameter '" + name + "'");
  return it->second;
}

Var dense(const BoundParams& p, const std::string& prefix, Var x) {
  return bias_add(matmul(x, p[prefix + ".w"]), p[prefix + ".b"]);
}

AdamState make_adam_state(const ParamSet& params, AdamConfig config) {
  AdamState s{config, {}, {}, 0};
  for (const auto& e : params) {
    s.m.add(e.name, Tensor::zeros(e.value.shape()));
    s.v.add(e.name, Tensor::zeros(e.value.shape()));
  }
  return s;
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state) {
  if (!params.same_layout(grads)) throw ContractError("adam_step: gradients do not mirror parameters");
  if (!params.same_layout(state.m) || !params.same_layout(state.v)) {
    throw ContractError("adam_step: optimizer state does not mirror parameters");
  }
  state.t += 1;
  const auto& c = state.config;
  const double t = static_cast<double>(state.t);
  const double corr1 = 1.0 - std::pow(c.beta1, t);
  const double corr2 = 1.0 - std::pow(c.beta2, t);
  const Real b1 = static_cast<Real>(c.beta1), b2 = static_cast<Real>(c.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].value.data();
    auto g = grads[i].value.data();
    auto m = state.m[i].value.data();
    auto v = state.v[i].value.data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (Real{1} - b1) * g[j];
      v[j] = b2 * v[j] + (Real{1} - b2) * g[j] * g[j];
      const double mhat = m[j] / corr1;
      const double vhat = v[j] / corr2;
      p[j] -= static_cast<Real>(c.lr * mhat / (std::sqrt(vhat) + c.eps));
    }
  }
}

}  // namespace vaelab::inline VAELAB_NS
