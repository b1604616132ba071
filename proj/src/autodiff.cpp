#include "vaelab/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "kernels.hpp"
#include "vaelab/error.hpp"

namespace vaelab::inline VAELAB_NS {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kConstant: return "constant";
    case OpKind::kParameter: return "parameter";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kBiasAdd: return "bias_add";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kClamp: return "clamp";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kReshape: return "reshape";
    case OpKind::kSliceCols: return "slice_cols";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kConv2dTranspose: return "conv2d_transpose";
    case OpKind::kSoftmaxCrossEntropy: return "softmax_cross_entropy";
  }
  return "?";
}

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::constant(Tensor value) {
  nodes_.push_back({OpKind::kConstant, {}, std::move(value), {}, false, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::parameter(std::string name, Tensor value) {
  nodes_.push_back({OpKind::kParameter, {}, std::move(value), {}, true, std::move(name)});
  params_.push_back(nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var Tape::record(OpKind kind, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward) {
  bool needs = false;
  for (auto in : inputs) {
    if (in >= nodes_.size()) throw ContractError("tape input refers to a later node");
    needs = needs || nodes_[in].requires_grad;
  }
  const bool differentiable = needs && backward != nullptr;
  nodes_.push_back({kind, std::move(inputs), std::move(value), std::move(backward), differentiable, {}});
  return {this, nodes_.size() - 1};
}

ParamSet Tape::backward(Var loss) const {
  if (loss.tape != this) throw ContractError("loss node belongs to another tape");
  const Tensor& lv = value(loss.id);
  if (lv.size() != 1) throw ContractError("backward needs a scalar loss, got shape " + shape_str(lv.shape()));

  std::vector<Tensor> grads(loss.id + 1);
  grads[loss.id] = Tensor::full(lv.shape(), Real{1});

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!node.requires_grad || !node.backward || grads[i].size() == 0) continue;
    in_values.clear();
    in_grads.clear();
    for (auto in : node.inputs) {
      in_values.push_back(&nodes_[in].value);
      if (nodes_[in].requires_grad) {
        if (grads[in].size() == 0) grads[in] = Tensor::zeros(nodes_[in].value.shape());
        in_grads.push_back(&grads[in]);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    node.backward(BackwardArgs{in_values, node.value, grads[i], in_grads});
  }

  ParamSet out;
  for (auto id : params_) {
    Tensor g = id < grads.size() && grads[id].size() != 0 ? std::move(grads[id]) : Tensor::zeros(nodes_[id].value.shape());
    out.add(nodes_[id].param_name, std::move(g));
  }
  return out;
}

namespace {

Tape* same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw ContractError("operands live on different tapes");
  return a.tape;
}

enum class Bcast { kEqual, kScalarLeft, kScalarRight };

Bcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Bcast::kEqual;
  if (b.size() == 1) return Bcast::kScalarRight;
  if (a.size() == 1) return Bcast::kScalarLeft;
  throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(a.shape()) + " with " + shape_str(b.shape()));
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, Bcast k, F f) {
  if (k == Bcast::kScalarLeft) {
    Tensor out(b.shape());
    const Real s = a[0];
    for (std::size_t i = 0; i < b.size(); ++i) out[i] = f(s, b[i]);
    return out;
  }
  Tensor out(a.shape());
  if (k == Bcast::kScalarRight) {
    const Real s = b[0];
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], s);
  } else {
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  }
  return out;
}

// Accumulates `g` (shaped like the output) into a possibly-broadcast operand gradient.
void accumulate(Tensor* dst, const Tensor& g, bool operand_is_broadcast_scalar, Real scale_sign = 1) {
  if (!dst) return;
  if (operand_is_broadcast_scalar) {
    Real s = 0;
    for (auto v : g.data()) s += v;
    (*dst)[0] += scale_sign * s;
  } else {
    for (std::size_t i = 0; i < g.size(); ++i) (*dst)[i] += scale_sign * g[i];
  }
}

template <typename Fwd, typename Deriv>
Var unary(OpKind kind, Var x, Fwd fwd, Deriv deriv) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  return x.tape->record(kind, {x.id}, std::move(out), [deriv](const BackwardArgs& a) {
    const Tensor& in = *a.inputs[0];
    Tensor& gi = *a.input_grads[0];
    for (std::size_t i = 0; i < in.size(); ++i) gi[i] += a.grad_output[i] * deriv(in[i], a.output[i]);
  });
}

Real stable_sigmoid(Real v) {
  if (v >= 0) return Real{1} / (Real{1} + std::exp(-v));
  const Real e = std::exp(v);
  return e / (Real{1} + e);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape* tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: shapes " + shape_str(av.shape()) + " and " + shape_str(bv.shape()) + " do not agree");
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  kernels::gemm_acc(av.data().data(), bv.data().data(), out.data().data(), m, k, n);
  return tape->record(OpKind::kMatmul, {a.id, b.id}, std::move(out), [m, k, n](const BackwardArgs& args) {
    const Real* g = args.grad_output.data().data();
    if (Tensor* ga = args.input_grads[0]) {
      auto bt = kernels::transpose(args.inputs[1]->data().data(), k, n);
      kernels::gemm_acc(g, bt.data(), ga->data().data(), m, n, k);
    }
    if (Tensor* gb = args.input_grads[1]) {
      auto at = kernels::transpose(args.inputs[0]->data().data(), m, k);
      kernels::gemm_acc(at.data(), g, gb->data().data(), k, m, n);
    }
  });
}

Var bias_add(Var x, Var bias) {
  Tape* tape = same_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (xv.rank() == 0 || bv.rank() != 1 || bv.dim(0) != xv.shape().back()) {
    throw DimensionError("bias_add: bias " + shape_str(bv.shape()) + " does not match last axis of " + shape_str(xv.shape()));
  }
  const std::size_t c = bv.dim(0);
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % c];
  return tape->record(OpKind::kBiasAdd, {x.id, bias.id}, std::move(out), [c](const BackwardArgs& args) {
    const Tensor& g = args.grad_output;
    if (Tensor* gx = args.input_grads[0]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
    }
    if (Tensor* gb = args.input_grads[1]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i % c] += g[i];
    }
  });
}

Var add(Var a, Var b) {
  Tape* tape = same_tape(a, b);
  const Bcast k = broadcast_kind("add", a.value(), b.value());
  Tensor out = zip(a.value(), b.value(), k, [](Real x, Real y) { return x + y; });
  return tape->record(OpKind::kAdd, {a.id, b.id}, std::move(out), [k](const BackwardArgs& args) {
    accumulate(args.input_grads[0], args.grad_output, k == Bcast::kScalarLeft);
    accumulate(args.input_grads[1], args.grad_output, k == Bcast::kScalarRight);
  });
}

Var sub(Var a, Var b) {
  Tape* tape = same_tape(a, b);
  const Bcast k = broadcast_kind("sub", a.value(), b.value());
  Tensor out = zip(a.value(), b.value(), k, [](Real x, Real y) { return x - y; });
  return tape->record(OpKind::kSub, {a.id, b.id}, std::move(out), [k](const BackwardArgs& args) {
    accumulate(args.input_grads[0], args.grad_output, k == Bcast::kScalarLeft);
    accumulate(args.input_grads[1], args.grad_output, k == Bcast::kScalarRight, Real{-1});
  });
}

Var mul(Var a, Var b) {
  Tape* tape = same_tape(a, b);
  const Bcast k = broadcast_kind("mul", a.value(), b.value());
  Tensor out = zip(a.value(), b.value(), k, [](Real x, Real y) { return x * y; });
  return tape->record(OpKind::kMul, {a.id, b.id}, std::move(out), [k](const BackwardArgs& args) {
    const Tensor& av = *args.inputs[0];
    const Tensor& bv = *args.inputs[1];
    const Tensor& g = args.grad_output;
    auto at = [&](const Tensor& t, std::size_t i) { return t.size() == 1 ? t[0] : t[i]; };
    if (Tensor* ga = args.input_grads[0]) {
      if (k == Bcast::kScalarLeft) {
        Real s = 0;
        for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * bv[i];
        (*ga)[0] += s;
      } else {
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * at(bv, i);
      }
    }
    if (Tensor* gb = args.input_grads[1]) {
      if (k == Bcast::kScalarRight) {
        Real s = 0;
        for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * av[i];
        (*gb)[0] += s;
      } else {
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * at(av, i);
      }
    }
  });
}

Var relu(Var x) {
  return unary(OpKind::kRelu, x, [](Real v) { return v > 0 ? v : Real{0}; },
               [](Real v, Real) { return v > 0 ? Real{1} : Real{0}; });
}

Var sigmoid(Var x) {
  return unary(OpKind::kSigmoid, x, stable_sigmoid, [](Real, Real y) { return y * (Real{1} - y); });
}

Var exp(Var x) {
  return unary(OpKind::kExp, x, [](Real v) { return std::exp(v); }, [](Real, Real y) { return y; });
}

Var log(Var x) {
  for (auto v : x.value().data()) {
    if (!(v > 0)) throw DomainError("log of non-positive value " + std::to_string(v));
  }
  return unary(OpKind::kLog, x, [](Real v) { return std::log(v); }, [](Real v, Real) { return Real{1} / v; });
}

Var clamp(Var x, Real lo, Real hi) {
  if (!(lo <= hi)) throw ContractError("clamp: empty interval");
  return unary(OpKind::kClamp, x, [lo, hi](Real v) { return std::clamp(v, lo, hi); },
               [lo, hi](Real v, Real) { return (v >= lo && v <= hi) ? Real{1} : Real{0}; });
}

Var sum(Var x) {
  double s = 0;
  for (auto v : x.value().data()) s += v;
  return x.tape->record(OpKind::kSum, {x.id}, Tensor::scalar(static_cast<Real>(s)), [](const BackwardArgs& args) {
    const Real g = args.grad_output[0];
    for (auto& v : args.input_grads[0]->data()) v += g;
  });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  double s = 0;
  for (auto v : x.value().data()) s += v;
  return x.tape->record(OpKind::kMean, {x.id}, Tensor::scalar(static_cast<Real>(s / static_cast<double>(n))), [n](const BackwardArgs& args) {
    const Real g = args.grad_output[0] / static_cast<Real>(n);
    for (auto& v : args.input_grads[0]->data()) v += g;
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape->record(OpKind::kReshape, {x.id}, std::move(out), [](const BackwardArgs& args) {
    Tensor& gi = *args.input_grads[0];
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += args.grad_output[i];
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || begin >= end || end > xv.dim(1)) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of range for " +
                         shape_str(xv.shape()));
  }
  const std::size_t rows = xv.dim(0), cols = xv.dim(1), w = end - begin;
  Tensor out({rows, w});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < w; ++c) out[r * w + c] = xv[r * cols + begin + c];
  }
  return x.tape->record(OpKind::kSliceCols, {x.id}, std::move(out), [rows, cols, begin, w](const BackwardArgs& args) {
    Tensor& gi = *args.input_grads[0];
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < w; ++c) gi[r * cols + begin + c] += args.grad_output[r * w + c];
    }
  });
}

ConvAxis conv_axis(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding) {
  if (stride == 0) throw ContractError("convolution stride must be positive");
  if (padding == Padding::kValid) {
    if (kernel > in) throw DimensionError("kernel extent " + std::to_string(kernel) + " exceeds input extent " + std::to_string(in));
    return {(in - kernel) / stride + 1, 0};
  }
  const std::size_t out = (in + stride - 1) / stride;
  const std::size_t needed = (out - 1) * stride + kernel;
  const std::size_t total = needed > in ? needed - in : 0;
  if (kernel > in + total) throw DimensionError("kernel extent exceeds padded input");
  return {out, total / 2};
}

namespace {

void check_conv_operands(const char* op, const Tensor& in, const Tensor& kernel, std::size_t in_channel_axis) {
  if (in.rank() != 4) throw DimensionError(std::string(op) + ": input must be NHWC, got " + shape_str(in.shape()));
  if (kernel.rank() != 4) throw DimensionError(std::string(op) + ": kernel must be rank 4, got " + shape_str(kernel.shape()));
  if (kernel.dim(in_channel_axis) != in.dim(3)) {
    throw DimensionError(std::string(op) + ": channel mismatch between input " + shape_str(in.shape()) + " and kernel " +
                         shape_str(kernel.shape()));
  }
}

}  // namespace

Var conv2d(Var input, Var kernel, std::size_t stride, Padding padding) {
  Tape* tape = same_tape(input, kernel);
  const Tensor& x = input.value();
  const Tensor& w = kernel.value();
  check_conv_operands("conv2d", x, w, 2);
  const auto ay = conv_axis(x.dim(1), w.dim(0), stride, padding);
  const auto ax = conv_axis(x.dim(2), w.dim(1), stride, padding);
  const kernels::ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), ay.out, ax.out,
                                w.dim(0), w.dim(1), stride, ay.pad_before, ax.pad_before};
  const std::size_t cout = w.dim(3);

  auto cols = kernels::im2col(x.data().data(), g);
  Tensor out({g.batch, g.small_h, g.small_w, cout});
  kernels::gemm_acc(cols.data(), w.data().data(), out.data().data(), g.positions(), g.patch(), cout);

  return tape->record(OpKind::kConv2d, {input.id, kernel.id}, std::move(out), [g, cout](const BackwardArgs& args) {
    const Real* dy = args.grad_output.data().data();
    if (Tensor* gx = args.input_grads[0]) {
      auto wt = kernels::transpose(args.inputs[1]->data().data(), g.patch(), cout);
      std::vector<Real> dcols(g.positions() * g.patch(), Real{0});
      kernels::gemm_acc(dy, wt.data(), dcols.data(), g.positions(), cout, g.patch());
      kernels::col2im_acc(dcols.data(), g, gx->data().data());
    }
    if (Tensor* gw = args.input_grads[1]) {
      auto cols = kernels::im2col(args.inputs[0]->data().data(), g);
      auto colst = kernels::transpose(cols.data(), g.positions(), g.patch());
      kernels::gemm_acc(colst.data(), dy, gw->data().data(), g.patch(), g.positions(), cout);
    }
  });
}

Var conv2d_transpose(Var input, Var kernel, std::size_t stride, Padding padding) {
  Tape* tape = same_tape(input, kernel);
  const Tensor& x = input.value();
  const Tensor& w = kernel.value();
  check_conv_operands("conv2d_transpose", x, w, 3);
  if (stride == 0) throw ContractError("convolution stride must be positive");
  const std::size_t kh = w.dim(0), kw = w.dim(1), cbig = w.dim(2);
  auto big_extent = [&](std::size_t small, std::size_t k) {
    return padding == Padding::kSame ? small * stride : (small - 1) * stride + k;
  };
  const std::size_t big_h = big_extent(x.dim(1), kh), big_w = big_extent(x.dim(2), kw);
  const auto ay = conv_axis(big_h, kh, stride, padding);
  const auto ax = conv_axis(big_w, kw, stride, padding);
  const kernels::ConvGeometry g{x.dim(0), big_h, big_w, cbig, x.dim(1), x.dim(2),
                                kh, kw, stride, ay.pad_before, ax.pad_before};
  const std::size_t csmall = x.dim(3);

  // y = col2im(x * W^T) with W viewed as [patch x csmall].
  auto wt = kernels::transpose(w.data().data(), g.patch(), csmall);
  std::vector<Real> cols(g.positions() * g.patch(), Real{0});
  kernels::gemm_acc(x.data().data(), wt.data(), cols.data(), g.positions(), csmall, g.patch());
  Tensor out({g.batch, big_h, big_w, cbig});
  kernels::col2im_acc(cols.data(), g, out.data().data());

  return tape->record(OpKind::kConv2dTranspose, {input.id, kernel.id}, std::move(out), [g, csmall](const BackwardArgs& args) {
    auto dcols = kernels::im2col(args.grad_output.data().data(), g);
    if (Tensor* gx = args.input_grads[0]) {
      kernels::gemm_acc(dcols.data(), args.inputs[1]->data().data(), gx->data().data(), g.positions(), g.patch(), csmall);
    }
    if (Tensor* gw = args.input_grads[1]) {
      auto dcolst = kernels::transpose(dcols.data(), g.positions(), g.patch());
      kernels::gemm_acc(dcolst.data(), args.inputs[0]->data().data(), gw->data().data(), g.patch(), g.positions(), csmall);
    }
  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  if (z.rank() != 2 || z.dim(0) != labels.size()) {
    throw DimensionError("softmax_cross_entropy: logits " + shape_str(z.shape()) + " vs " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = z.dim(0), c = z.dim(1);
  std::vector<int> lab(labels.begin(), labels.end());
  for (int l : lab) {
    if (l < 0 || static_cast<std::size_t>(l) >= c) throw ContractError("label out of range: " + std::to_string(l));
  }
  Tensor probs({n, c});
  Real total = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const Real* row = z.data().data() + r * c;
    const Real mx = *std::max_element(row, row + c);
    Real se = 0;
    for (std::size_t j = 0; j < c; ++j) se += std::exp(row[j] - mx);
    const Real lse = mx + std::log(se);
    for (std::size_t j = 0; j < c; ++j) probs[r * c + j] = std::exp(row[j] - lse);
    total += lse - row[lab[r]];
  }
  return logits.tape->record(OpKind::kSoftmaxCrossEntropy, {logits.id}, Tensor::scalar(total / static_cast<Real>(n)),
                             [probs = std::move(probs), lab = std::move(lab), n, c](const BackwardArgs& args) {
                               const Real g = args.grad_output[0] / static_cast<Real>(n);
                               Tensor& gz = *args.input_grads[0];
                               for (std::size_t r = 0; r < n; ++r) {
                                 for (std::size_t j = 0; j < c; ++j) {
                                   const Real onehot = static_cast<std::size_t>(lab[r]) == j ? Real{1} : Real{0};
                                   gz[r * c + j] += g * (probs[r * c + j] - onehot);
                                 }
                               }
                             });
}

Var operator+(Var a, Var b) { return add(a, b); }
Var operator-(Var a, Var b) { return sub(a, b); }
Var operator*(Var a, Var b) { return mul(a, b); }
Var operator*(Real s, Var x) { return mul(x.tape->constant(Tensor::scalar(s)), x); }
Var operator*(Var x, Real s) { return mul(x, x.tape->constant(Tensor::scalar(s))); }
Var operator+(Var x, Real s) { return add(x, x.tape->constant(Tensor::scalar(s))); }
Var operator-(Real s, Var x) { return sub(x.tape->constant(Tensor::scalar(s)), x); }

}  // namespace vaelab::inline VAELAB_NS
