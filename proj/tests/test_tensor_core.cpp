#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "gradcheck.hpp"
#include "vaelab/autodiff.hpp"
#include "vaelab/error.hpp"

using namespace vaelab;
using vaelab::testing::random_tensor;

namespace {

// Direct loop references for NHWC convolution with explicit padding offsets.
struct ConvRef {
  Tensor y, dx, dw;
};

ConvRef conv_reference(const Tensor& x, const Tensor& w, const Tensor& dy, std::size_t stride, std::size_t pad_top,
                       std::size_t pad_left, std::size_t oh, std::size_t ow) {
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const std::size_t KH = w.dim(0), KW = w.dim(1), CO = w.dim(3);
  ConvRef r{Tensor({B, oh, ow, CO}), Tensor(x.shape()), Tensor(w.shape())};
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t co = 0; co < CO; ++co) {
          double acc = 0;
          const std::size_t yi = ((b * oh + oy) * ow + ox) * CO + co;
          for (std::size_t ky = 0; ky < KH; ++ky)
            for (std::size_t kx = 0; kx < KW; ++kx) {
              const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad_top);
              const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad_left);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
              for (std::size_t c = 0; c < C; ++c) {
                const std::size_t xi = ((b * H + iy) * W + ix) * C + c;
                const std::size_t wi = ((ky * KW + kx) * C + c) * CO + co;
                acc += static_cast<double>(x[xi]) * w[wi];
                r.dx[xi] += dy[yi] * w[wi];
                r.dw[wi] += dy[yi] * x[xi];
              }
            }
          r.y[yi] = static_cast<Real>(acc);
        }
  return r;
}

void check_close(const Tensor& a, const Tensor& b, double tol) {
  REQUIRE(a.shape() == b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(tol).scale(1.0));
}

}  // namespace

TEST_CASE("matmul: identity and hand-computed product") {
  Tape tape;
  auto eye = tape.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  auto m = tape.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  CHECK(matmul(eye, m).value() == m.value());

  auto col = tape.constant(Tensor::matrix({{5}, {6}}));
  CHECK(matmul(m, col).value() == Tensor::matrix({{17}, {39}}));
}

TEST_CASE("matmul: shape mismatch names both shapes") {
  Tape tape;
  auto a = tape.constant(Tensor({2, 3}));
  auto b = tape.constant(Tensor({2, 3}));
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul: gradient of sum(A B) w.r.t. A is row sums of B, matching central differences") {
  std::mt19937 rng(1);
  ParamSet p;
  p.add("A", random_tensor({3, 4}, rng));
  p.add("B", random_tensor({4, 5}, rng));
  auto build = [](Tape& t, const ParamSet& ps) {
    return sum(matmul(t.parameter("A", ps.at("A")), t.parameter("B", ps.at("B"))));
  };
  Tape tape;
  auto grads = tape.backward(build(tape, p));
  const Tensor& B = p.at("B");
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k) {
      Real row = 0;
      for (std::size_t j = 0; j < 5; ++j) row += B[k * 5 + j];
      CHECK(grads.at("A")[i * 4 + k] == doctest::Approx(row).epsilon(1e-5));
    }
  auto r = vaelab::testing::grad_check(p, build, 1e-3);
  CHECK(r.max_rel_error < 1e-2);
}

TEST_CASE("elementwise: sigmoid, relu and their derivatives") {
  Tape tape;
  auto z = tape.parameter("z", Tensor::scalar(0));
  auto s = sigmoid(z);
  CHECK(s.value().item() == doctest::Approx(0.5));
  CHECK(tape.backward(s).at("z").item() == doctest::Approx(0.25));

  auto r = relu(tape.constant(Tensor({2}, {-3, 3})));
  CHECK(r.value()[0] == 0);
  CHECK(r.value()[1] == 3);
}

TEST_CASE("elementwise: sigmoid stays finite and in range at extreme inputs") {
  Tape tape;
  auto s = sigmoid(tape.constant(Tensor({4}, {-1000, -50, 50, 1000})));
  for (auto v : s.value().data()) {
    CHECK(std::isfinite(v));
    CHECK(v >= 0);
    CHECK(v <= 1);
  }
}

TEST_CASE("elementwise: log of non-positive input is a domain error") {
  Tape tape;
  CHECK_THROWS_AS(log(tape.constant(Tensor({2}, {1, 0}))), DomainError);
  CHECK_THROWS_AS(log(tape.constant(Tensor({1}, {-2}))), DomainError);
}

TEST_CASE("elementwise: only scalar/equal-shape broadcasting") {
  Tape tape;
  auto a = tape.constant(Tensor({2, 3}));
  auto b = tape.constant(Tensor({3}));
  CHECK_THROWS_AS(add(a, b), DimensionError);
  auto c = add(a, tape.constant(Tensor::scalar(2)));
  CHECK(c.value()[5] == 2);
}

TEST_CASE("backward: sum and sum of squares") {
  Tape tape;
  auto x = tape.parameter("x", Tensor({3}, {1, 2, 3}));
  auto g1 = tape.backward(sum(x));
  for (std::size_t i = 0; i < 3; ++i) CHECK(g1.at("x")[i] == 1);

  Tape tape2;
  auto y = tape2.parameter("x", Tensor({3}, {1, 2, 3}));
  auto g2 = tape2.backward(sum(mul(y, y)));
  CHECK(g2.at("x") == Tensor({3}, {2, 4, 6}));
}

TEST_CASE("backward: non-scalar loss is a contract error; constants are skipped") {
  Tape tape;
  auto x = tape.parameter("x", Tensor({2}, {1, 2}));
  auto c = tape.constant(Tensor({2}, {5, 5}));
  CHECK_THROWS_AS(tape.backward(mul(x, c)), ContractError);
  auto grads = tape.backward(sum(mul(x, c)));
  CHECK(grads.size() == 1);
  CHECK(grads.at("x") == Tensor({2}, {5, 5}));
}

TEST_CASE("tape: inputs precede nodes") {
  Tape tape;
  auto x = tape.parameter("x", Tensor({2, 2}));
  auto y = relu(matmul(x, x));
  (void)mean(y);
  for (std::size_t i = 0; i < tape.size(); ++i)
    for (auto in : tape.inputs(i)) CHECK(in < i);
}

TEST_CASE("conv2d: identity 1x1 kernel") {
  std::mt19937 rng(3);
  Tape tape;
  auto x = tape.constant(random_tensor({2, 5, 5, 1}, rng));
  auto k = tape.constant(Tensor::full({1, 1, 1, 1}, 1));
  CHECK(conv2d(x, k, 1, Padding::kSame).value() == x.value());
  CHECK(conv2d_transpose(x, k, 1, Padding::kSame).value() == x.value());
}

TEST_CASE("conv2d: architecture shape arithmetic 28 -> 14 -> 7 and back") {
  Tape tape;
  auto x = tape.constant(Tensor({1, 28, 28, 1}));
  auto k1 = tape.constant(Tensor({3, 3, 1, 4}));
  auto k2 = tape.constant(Tensor({3, 3, 4, 2}));
  auto h1 = conv2d(x, k1, 2, Padding::kSame);
  CHECK(h1.shape() == Shape{1, 14, 14, 4});
  auto h2 = conv2d(h1, k2, 2, Padding::kSame);
  CHECK(h2.shape() == Shape{1, 7, 7, 2});

  auto d1 = conv2d_transpose(h2, tape.constant(Tensor({3, 3, 3, 2})), 2, Padding::kSame);
  CHECK(d1.shape() == Shape{1, 14, 14, 3});
  auto d2 = conv2d_transpose(d1, tape.constant(Tensor({3, 3, 5, 3})), 2, Padding::kSame);
  CHECK(d2.shape() == Shape{1, 28, 28, 5});
}

TEST_CASE("conv2d: channel mismatch is a dimension error") {
  Tape tape;
  auto x = tape.constant(Tensor({1, 5, 5, 2}));
  CHECK_THROWS_AS(conv2d(x, tape.constant(Tensor({3, 3, 3, 1})), 1, Padding::kSame), DimensionError);
  CHECK_THROWS_AS(conv2d_transpose(x, tape.constant(Tensor({3, 3, 1, 3})), 1, Padding::kSame), DimensionError);
  CHECK_THROWS_AS(conv2d(x, tape.constant(Tensor({7, 7, 2, 1})), 1, Padding::kValid), DimensionError);
}

TEST_CASE("conv2d: forward and both gradients match the quadruple-loop reference") {
  std::mt19937 rng(11);
  for (std::size_t stride : {1u, 2u}) {
    for (Padding pad : {Padding::kSame, Padding::kValid}) {
      const Tensor xv = random_tensor({2, 5, 5, 2}, rng);
      const Tensor wv = random_tensor({3, 3, 2, 3}, rng);
      Tape tape;
      auto x = tape.parameter("x", xv);
      auto w = tape.parameter("w", wv);
      auto y = conv2d(x, w, stride, pad);
      const Tensor dy = random_tensor(y.shape(), rng);
      auto loss = sum(mul(y, tape.constant(dy)));
      auto grads = tape.backward(loss);

      const auto ay = conv_axis(5, 3, stride, pad);
      auto ref = conv_reference(xv, wv, dy, stride, ay.pad_before, ay.pad_before, ay.out, ay.out);
      check_close(y.value(), ref.y, 1e-4);
      check_close(grads.at("x"), ref.dx, 1e-4);
      check_close(grads.at("w"), ref.dw, 1e-4);
    }
  }
}

TEST_CASE("conv2d: same padding puts the extra pad at the bottom/right") {
  // 4 wide, stride 2, kernel 3: total pad 1, all of it after the data.
  const auto a = conv_axis(4, 3, 2, Padding::kSame);
  CHECK(a.out == 2);
  CHECK(a.pad_before == 0);
  const auto b = conv_axis(5, 3, 1, Padding::kSame);
  CHECK(b.out == 5);
  CHECK(b.pad_before == 1);
}

TEST_CASE("conv2d_transpose equals the input-gradient of conv2d") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor small = random_tensor({2, 4, 4, 3}, rng);
    const Tensor kernel = random_tensor({3, 3, 2, 3}, rng);  // conv2d kernel: big(2) -> small(3)

    Tape t1;
    auto ytr = conv2d_transpose(t1.constant(small), t1.constant(kernel), 2, Padding::kSame);
    REQUIRE(ytr.shape() == Shape{2, 8, 8, 2});

    Tape t2;
    auto xbig = t2.parameter("x", Tensor({2, 8, 8, 2}));
    auto y = conv2d(xbig, t2.constant(kernel), 2, Padding::kSame);
    auto g = t2.backward(sum(mul(y, t2.constant(small))));
    check_close(ytr.value(), g.at("x"), 1e-5);
  }
}

TEST_CASE("determinism: identical tapes give bitwise identical values and gradients") {
  std::mt19937 rng(9);
  const Tensor xv = random_tensor({3, 6, 6, 2}, rng);
  const Tensor wv = random_tensor({3, 3, 2, 4}, rng);
  auto run = [&](Tensor& out, ParamSet& grads) {
    Tape tape;
    auto x = tape.parameter("x", xv);
    auto w = tape.parameter("w", wv);
    auto y = sigmoid(conv2d(x, w, 2, Padding::kSame));
    out = y.value();
    grads = tape.backward(mean(y));
  };
  Tensor y1, y2;
  ParamSet g1, g2;
  run(y1, g1);
  run(y2, g2);
  CHECK(std::memcmp(y1.data().data(), y2.data().data(), y1.size() * sizeof(Real)) == 0);
  CHECK(g1 == g2);
}

TEST_CASE("32-bit gradient check of composite layers within 1e-2") {
  std::mt19937 rng(21);
  ParamSet p;
  p.add("x", random_tensor({2, 6, 6, 1}, rng));
  p.add("k", random_tensor({3, 3, 1, 2}, rng, -0.5, 0.5));
  p.add("b", random_tensor({2}, rng));
  auto build = [](Tape& t, const ParamSet& ps) {
    auto h = bias_add(conv2d(t.parameter("x", ps.at("x")), t.parameter("k", ps.at("k")), 2, Padding::kSame),
                      t.parameter("b", ps.at("b")));
    return sum(sigmoid(h));
  };
  // float32 central differences need a larger step
  auto r = vaelab::testing::grad_check(p, build, 5e-2);
  CHECK_MESSAGE(r.max_rel_error < 1e-2, r.worst);
}
