#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vaelab/param_set.hpp"
#include "vaelab/tensor.hpp"

namespace vaelab::inline VAELAB_NS {

enum class OpKind {
  kConstant,
  kParameter,
  kMatmul,
  kBiasAdd,
  kAdd,
  kSub,
  kMul,
  kRelu,
  kSigmoid,
  kExp,
  kLog,
  kClamp,
  kSum,
  kMean,
  kReshape,
  kSliceCols,
  kConv2d,
  kConv2dTranspose,
  kSoftmaxCrossEntropy,
};

const char* op_name(OpKind kind);

enum class Padding { kSame, kValid };

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// What a node's backward rule sees. `input_grads[i]` is null when input i
/// does not lead to any parameter; otherwise the rule accumulates into it.
struct BackwardArgs {
  std::span<const Tensor* const> inputs;
  const Tensor& output;
  const Tensor& grad_output;
  std::span<Tensor* const> input_grads;
};

using BackwardFn = std::function<void(const BackwardArgs&)>;

/// Define-by-run computation record. Nodes are appended in evaluation order,
/// so every node's inputs precede it; backward walks the list in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(std::string name, Tensor value);

  /// Records one node. `backward` may be empty for ops that are never differentiated.
  Var record(OpKind kind, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  OpKind kind(std::size_t id) const { return nodes_.at(id).kind; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// dLoss/dP for every parameter leaf, in registration order. Non-parameter
  /// leaves are skipped. Throws ContractError unless `loss` is a scalar.
  ParamSet backward(Var loss) const;

 private:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> inputs;
    Tensor value;
    BackwardFn backward;
    bool requires_grad = false;
    std::string param_name;
  };

  std::deque<Node> nodes_;  // deque: node references stay valid while recording
  std::vector<std::size_t> params_;
};

// Operations. Binary elementwise ops accept equal shapes or a one-element
// operand on either side; nothing else broadcasts.

Var matmul(Var a, Var b);
Var bias_add(Var x, Var bias);  ///< adds `bias` along the last axis of `x`
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var relu(Var x);
Var sigmoid(Var x);
Var exp(Var x);
Var log(Var x);  ///< DomainError on any non-positive element
Var clamp(Var x, Real lo, Real hi);
Var sum(Var x);
Var mean(Var x);
Var reshape(Var x, Shape shape);
Var slice_cols(Var x, std::size_t begin, std::size_t end);

/// NHWC cross-correlation. kernel is kh x kw x Cin x Cout. Same padding puts
/// the odd extra pad row/column at the bottom/right.
Var conv2d(Var input, Var kernel, std::size_t stride, Padding padding);

/// Adjoint of conv2d with respect to its input. kernel is kh x kw x Cout x Cin,
/// i.e. the kernel of the conv2d that maps the output back to the input.
Var conv2d_transpose(Var input, Var kernel, std::size_t stride, Padding padding);

/// Mean over rows of -log softmax(logits)[label].
Var softmax_cross_entropy(Var logits, std::span<const int> labels);

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator*(Real s, Var x);
Var operator*(Var x, Real s);
Var operator+(Var x, Real s);
Var operator-(Real s, Var x);

/// Output spatial extent and leading pad of a convolution along one axis.
struct ConvAxis {
  std::size_t out;
  std::size_t pad_before;
};
ConvAxis conv_axis(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding);

}  // namespace vaelab::inline VAELAB_NS
