#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mmsum/nn/gradcheck.hpp"
#include "mmsum/nn/rng.hpp"
#include "mmsum/nn/tensor.hpp"

using namespace mmsum::nn;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true) {
  std::vector<double> d(numel(shape));
  for (double& v : d) v = rng.uniform(-2.0, 2.0);
  return Tensor::from(std::move(shape), std::move(d), requires_grad);
}

// Checks autodiff against central differences for a scalar-valued builder.
void fd_check(const std::function<Tensor(const Tensor&)>& build, const Tensor& x,
              double tol = 1e-4) {
  Tensor loss = build(x);
  auto grads = grad(loss, {x});
  Tensor numeric = finite_diff_grad([&](const Tensor& p) { return build(p).item(); }, x, 1e-5);
  CHECK(max_rel_error(grads[0], numeric) < tol);
}

}  // namespace

TEST_CASE("d(x*x)/dx at x=3 is 6") {
  Tensor x = Tensor::scalar(3.0, true);
  auto g = grad(mul(x, x), {x});
  CHECK(g[0].item() == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("softmax cross-entropy gradient at uniform logits") {
  // -log(softmax(x)[0]) at x=[0,0]: gradient is softmax - onehot = [-0.5, 0.5]
  Tensor x = Tensor::from({1, 2}, {0.0, 0.0}, true);
  Tensor loss = cross_entropy_sum(x, {0});
  auto g = grad(loss, {x});
  CHECK(g[0].data()[0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(g[0].data()[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("d sum(W*v)/dW for ones matrix") {
  Tensor w = Tensor::from({2, 2}, {1, 1, 1, 1}, true);
  Tensor v = Tensor::from({2, 1}, {1, 2});
  auto g = grad(sum_all(matmul(w, v)), {w});
  CHECK(g[0].data() == std::vector<double>{1, 2, 1, 2});
}

TEST_CASE("non-scalar loss is a contract violation") {
  Tensor x = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
  CHECK_THROWS_AS(backward(add(x, x)), Error);
}

TEST_CASE("disconnected parameter gets a zero gradient") {
  Tensor x = Tensor::scalar(2.0, true);
  Tensor unused = Tensor::scalar(5.0, true);
  auto g = grad(mul(x, x), {x, unused});
  CHECK(g[0].item() == doctest::Approx(4.0));
  CHECK(g[1].item() == 0.0);
}

TEST_CASE("backward can rerun on the same graph") {
  Tensor x = Tensor::scalar(3.0, true);
  Tensor loss = mul(x, x);
  backward(loss);
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(6.0));  // re-zeroed, not doubled
}

TEST_CASE("finite differences recover simple derivatives") {
  Tensor x = Tensor::scalar(3.0);
  Tensor fd = finite_diff_grad([](const Tensor& t) { return t.item() * t.item(); }, x, 1e-5);
  CHECK(std::abs(fd.item() - 6.0) <= 1e-6);

  Tensor zero = Tensor::scalar(0.0);
  Tensor fd_sin = finite_diff_grad([](const Tensor& t) { return std::sin(t.item()); }, zero, 1e-4);
  CHECK(std::abs(fd_sin.item() - 1.0) <= 1e-8);

  CHECK_THROWS_AS(finite_diff_grad([](const Tensor& t) { return t.item(); }, x, 1e-2), Error);
}

TEST_CASE("every differentiable op matches finite differences") {
  Rng rng(1234);

  SUBCASE("add/sub/mul with broadcasting") {
    Tensor x = random_tensor({3, 4}, rng);
    Tensor row = random_tensor({1, 4}, rng, false);
    Tensor s = Tensor::scalar(1.7);
    fd_check([&](const Tensor& p) { return sum_all(mul(add(p, row), sub(p, s))); }, x);
    Tensor r = random_tensor({1, 4}, rng);
    Tensor base = random_tensor({3, 4}, rng, false);
    fd_check([&](const Tensor& p) { return sum_all(mul(base, add(base, p))); }, r);
  }
  SUBCASE("scale and neg") {
    Tensor x = random_tensor({2, 3}, rng);
    fd_check([&](const Tensor& p) { return sum_all(scale(p, -2.5)); }, x);
  }
  SUBCASE("matmul both sides") {
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng, false);
    fd_check([&](const Tensor& p) { return sum_all(matmul(p, b)); }, a);
    Tensor b2 = random_tensor({4, 2}, rng);
    Tensor a2 = random_tensor({3, 4}, rng, false);
    fd_check([&](const Tensor& p) { return sum_all(matmul(a2, p)); }, b2);
  }
  SUBCASE("transpose") {
    Tensor x = random_tensor({2, 5}, rng);
    Tensor m = random_tensor({2, 5}, rng, false);
    fd_check([&](const Tensor& p) { return sum_all(mul(transpose(p), transpose(m))); }, x);
  }
  SUBCASE("mean and sum reductions") {
    Tensor x = random_tensor({4, 3}, rng);
    Tensor w = random_tensor({1, 3}, rng, false);
    fd_check([&](const Tensor& p) { return sum_all(mul(mean_rows(p), w)); }, x);
    fd_check([&](const Tensor& p) { return mean_all(mul(p, p)); }, x);
  }
  SUBCASE("concat and slice") {
    Tensor x = random_tensor({3, 4}, rng);
    Tensor y = random_tensor({2, 4}, rng, false);
    fd_check(
        [&](const Tensor& p) {
          Tensor cat = concat_rows({p, y});
          return sum_all(mul(slice_rows(cat, 1, 4), slice_rows(cat, 0, 3)));
        },
        x);
    fd_check(
        [&](const Tensor& p) {
          Tensor cat = concat_cols({p, slice(p, 0, 3, 0, 2)});
          return sum_all(mul(cat, cat));
        },
        x);
  }
  SUBCASE("embedding lookup") {
    Tensor table = random_tensor({5, 3}, rng);
    Ids ids{4, 0, 4, 2};
    Tensor m = random_tensor({4, 3}, rng, false);
    fd_check([&](const Tensor& p) { return sum_all(mul(embedding(p, ids), m)); }, table);
  }
  SUBCASE("pointwise nonlinearities") {
    Tensor x = random_tensor({3, 3}, rng);
    fd_check([&](const Tensor& p) { return sum_all(relu(p)); }, x);
    fd_check([&](const Tensor& p) { return sum_all(sigmoid(p)); }, x);
    fd_check([&](const Tensor& p) { return sum_all(mmsum::nn::tanh(p)); }, x);
    fd_check([&](const Tensor& p) { return sum_all(mmsum::nn::exp(scale(p, 0.5))); }, x);
    // log over strictly positive inputs
    Tensor pos = Tensor::from({2, 2}, {0.5, 1.5, 2.5, 0.7}, true);
    fd_check([&](const Tensor& p) { return sum_all(mmsum::nn::log(p)); }, pos);
  }
  SUBCASE("softmax and log_softmax") {
    Tensor x = random_tensor({3, 5}, rng);
    Tensor m = random_tensor({3, 5}, rng, false);
    fd_check([&](const Tensor& p) { return sum_all(mul(softmax(p), m)); }, x);
    fd_check([&](const Tensor& p) { return sum_all(mul(log_softmax(p), m)); }, x);
  }
  SUBCASE("layer_norm") {
    Tensor x = random_tensor({3, 8}, rng);
    Tensor m = random_tensor({3, 8}, rng, false);
    fd_check([&](const Tensor& p) { return sum_all(mul(layer_norm(p, 1e-10), m)); }, x);
  }
  SUBCASE("cross_entropy") {
    Tensor x = random_tensor({4, 6}, rng);
    Ids t{1, 5, 0, 3};
    fd_check([&](const Tensor& p) { return cross_entropy_sum(p, t); }, x);
  }
  SUBCASE("composite chain") {
    Tensor x = random_tensor({4, 6}, rng);
    Tensor w = random_tensor({6, 6}, rng, false);
    fd_check(
        [&](const Tensor& p) {
          Tensor h = relu(matmul(p, w));
          Tensor n = layer_norm(h, 1e-10);
          return cross_entropy_sum(add(n, p), {0, 1, 2, 3});
        },
        x);
  }
}

TEST_CASE("gradients accumulate across repeated use of one tensor") {
  Tensor x = Tensor::scalar(2.0, true);
  // f = x*x + 3x -> df/dx = 2x + 3 = 7
  Tensor loss = add(mul(x, x), scale(x, 3.0));
  auto g = grad(loss, {x});
  CHECK(g[0].item() == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("no-grad mode records nothing") {
  Tensor x = Tensor::scalar(3.0, true);
  {
    NoGradGuard ng;
    Tensor y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(mul(x, x).requires_grad());
}

TEST_CASE("first_nonfinite names the offending tensor") {
  Tensor x = Tensor::scalar(-1.0, true);
  x.set_tag("bad_param");
  Tensor y = mmsum::nn::log(x);  // NaN
  Tensor loss = sum_all(y);
  CHECK(first_nonfinite(loss) == "log");
  Tensor ok = Tensor::scalar(1.0, true);
  CHECK(first_nonfinite(sum_all(ok)) == "");
}
