#include <doctest.h>

#include <cmath>
#include <functional>

#include "ffdgan/autodiff.hpp"
#include "ffdgan/errors.hpp"
#include "ffdgan/rng.hpp"

using namespace ffdgan;
using ad::Tensor;
using ad::Var;

namespace {

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  Tensor t(r, c);
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

// Checks grad() of f against central differences for every input element.
void check_fd(const std::function<Var(const std::vector<Var>&)>& f, std::vector<Tensor> inputs,
              double tol = 1e-4, double h = 1e-5) {
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(ad::parameter(t));
  const Var out = f(vars);
  const auto grads = ad::grad(out, vars);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      auto eval = [&](double delta) {
        ad::NoGradGuard guard;
        std::vector<Var> shifted;
        for (std::size_t q = 0; q < inputs.size(); ++q) {
          Tensor t = inputs[q];
          if (q == k) t.data[i] += delta;
          shifted.push_back(ad::constant(t));
        }
        return f(shifted).item();
      };
      const double fd = (eval(h) - eval(-h)) / (2.0 * h);
      CHECK(rel_err(grads[k].value().data[i], fd) < tol);
    }
  }
}

// Contracts a tensor output with fixed random weights into a scalar.
Var contract(const Var& y, std::uint64_t seed) {
  Rng rng(seed);
  return ad::sum(ad::mul(y, ad::constant(random_tensor(rng, y.rows(), y.cols()))));
}

}  // namespace

TEST_CASE("first and second derivatives of simple functions") {
  const Var x = ad::parameter(Tensor(1, 1, 3.0));
  CHECK(ad::grad(ad::square(x), std::span<const Var>(&x, 1))[0].item() == doctest::Approx(6.0));

  const Var y = ad::parameter(Tensor(1, 1, 2.0));
  const Var cube = ad::mul(ad::mul(y, y), y);
  const Var dy = ad::grad(cube, std::span<const Var>(&y, 1), true)[0];
  CHECK(dy.item() == doctest::Approx(12.0));
  const Var d2y = ad::grad(dy, std::span<const Var>(&y, 1))[0];
  CHECK(d2y.item() == doctest::Approx(12.0));
}

TEST_CASE("every op's backward pass matches finite differences") {
  Rng rng(1);
  const auto A = random_tensor(rng, 3, 4), B = random_tensor(rng, 4, 2), C = random_tensor(rng, 3, 4);
  const auto Bt = random_tensor(rng, 5, 4), At = random_tensor(rng, 3, 5);
  const auto row = random_tensor(rng, 1, 4), col = random_tensor(rng, 3, 1);
  const auto pos = random_tensor(rng, 3, 4, 0.5, 2.0);
  const auto s = random_tensor(rng, 1, 1);

  check_fd([](const auto& v) { return contract(ad::matmul(v[0], v[1]), 2); }, {A, B});
  check_fd([](const auto& v) { return contract(ad::matmul_nt(v[0], v[1]), 3); }, {A, Bt});
  check_fd([](const auto& v) { return contract(ad::matmul_tn(v[0], v[1]), 4); }, {A, At});
  check_fd([](const auto& v) { return contract(ad::add(v[0], v[1]), 5); }, {A, C});
  check_fd([](const auto& v) { return contract(ad::sub(v[0], v[1]), 6); }, {A, C});
  check_fd([](const auto& v) { return contract(ad::mul(v[0], v[1]), 7); }, {A, C});
  check_fd([](const auto& v) { return contract(ad::div(v[0], v[1]), 8); }, {A, pos});
  check_fd([](const auto& v) { return contract(ad::scale(v[0], -1.7), 9); }, {A});
  check_fd([](const auto& v) { return contract(ad::add_scalar(v[0], 0.3), 10); }, {A});
  check_fd([](const auto& v) { return contract(ad::add_row(v[0], v[1]), 11); }, {A, row});
  check_fd([](const auto& v) { return contract(ad::mul_col(v[0], v[1]), 12); }, {A, col});
  check_fd([](const auto& v) { return contract(ad::sum_rows(v[0]), 13); }, {A});
  check_fd([](const auto& v) { return contract(ad::broadcast_rows(v[0], 3), 14); }, {row});
  check_fd([](const auto& v) { return contract(ad::sum_cols(v[0]), 15); }, {A});
  check_fd([](const auto& v) { return contract(ad::broadcast_cols(v[0], 5), 16); }, {col});
  check_fd([](const auto& v) { return ad::scale(ad::sum(v[0]), 1.3); }, {A});
  check_fd([](const auto& v) { return ad::mean(ad::square(v[0])); }, {A});
  check_fd([](const auto& v) { return contract(ad::broadcast_to(v[0], 2, 3), 17); }, {s});
  check_fd([](const auto& v) { return contract(ad::leaky_relu(v[0], 0.2), 18); }, {A});
  check_fd([](const auto& v) { return contract(ad::square(v[0]), 19); }, {A});
  check_fd([](const auto& v) { return contract(ad::sqrt(v[0]), 20); }, {pos});
}

TEST_CASE("two-layer network gradients match finite differences") {
  Rng rng(2);
  for (int trial = 0; trial < 3; ++trial) {
    const auto x = random_tensor(rng, 6, 5), w1 = random_tensor(rng, 5, 32), b1 = random_tensor(rng, 1, 32);
    const auto w2 = random_tensor(rng, 32, 1), b2 = random_tensor(rng, 1, 1);
    check_fd(
        [](const auto& v) {
          const Var h = ad::leaky_relu(ad::add_row(ad::matmul(v[0], v[1]), v[2]), 0.2);
          return ad::mean(ad::add_row(ad::matmul(h, v[3]), v[4]));
        },
        {x, w1, b1, w2, b2});
  }
}

TEST_CASE("double backprop of the gradient penalty matches an analytic oracle") {
  // D(x) = w2 . lrelu(W1^T x + b1) + b2 for a single input x. Its input
  // gradient is W1 (w2 * mask); the penalty is (|grad| - 1)^2.
  Rng rng(3);
  const std::size_t d = 6, h = 32;
  auto penalty_oracle = [&](const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2) {
    std::vector<double> mask(h);
    for (std::size_t j = 0; j < h; ++j) {
      double pre = b1.data[j];
      for (std::size_t i = 0; i < d; ++i) pre += x.data[i] * w1(i, j);
      mask[j] = pre > 0.0 ? 1.0 : 0.2;
    }
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double g = 0.0;
      for (std::size_t j = 0; j < h; ++j) g += w1(i, j) * w2.data[j] * mask[j];
      norm_sq += g * g;
    }
    const double n = std::sqrt(norm_sq + 1e-12);
    return (n - 1.0) * (n - 1.0);
  };
  for (int trial = 0; trial < 3; ++trial) {
    const auto x = random_tensor(rng, 1, d), w1 = random_tensor(rng, d, h), b1 = random_tensor(rng, 1, h);
    const auto w2 = random_tensor(rng, h, 1), b2 = random_tensor(rng, 1, 1);
    const Var xv = ad::parameter(x), w1v = ad::parameter(w1), b1v = ad::parameter(b1);
    const Var w2v = ad::parameter(w2), b2v = ad::parameter(b2);
    const Var hid = ad::leaky_relu(ad::add_row(ad::matmul(xv, w1v), b1v), 0.2);
    const Var score = ad::sum(ad::add_row(ad::matmul(hid, w2v), b2v));
    const Var gx = ad::grad(score, std::span<const Var>(&xv, 1), true)[0];
    const Var norm = ad::sqrt(ad::add_scalar(ad::sum(ad::square(gx)), 1e-12));
    const Var pen = ad::square(ad::add_scalar(norm, -1.0));
    CHECK(pen.item() == doctest::Approx(penalty_oracle(x, w1, b1, w2)).epsilon(1e-12));
    const std::vector<Var> params = {w1v, b1v, w2v, b2v};
    const auto grads = ad::grad(pen, params);
    const double step = 1e-5;
    // FD over the weights of the oracle penalty.
    for (int which : {0, 2}) {
      const Tensor& base = which == 0 ? w1 : w2;
      for (std::size_t i = 0; i < base.size(); i += 7) {
        Tensor plus = base, minus = base;
        plus.data[i] += step;
        minus.data[i] -= step;
        const double fp = which == 0 ? penalty_oracle(x, plus, b1, w2) : penalty_oracle(x, w1, b1, plus);
        const double fm = which == 0 ? penalty_oracle(x, minus, b1, w2) : penalty_oracle(x, w1, b1, minus);
        CHECK(rel_err(grads[static_cast<std::size_t>(which)].value().data[i], (fp - fm) / (2 * step)) < 1e-3);
      }
    }
    // The penalty does not depend on the output bias.
    CHECK(grads[3].item() == 0.0);
  }
}

TEST_CASE("grad edge cases") {
  const Var a = ad::parameter(Tensor(2, 2, 1.0));
  const Var b = ad::parameter(Tensor(2, 2, 1.0));
  const Var out = ad::sum(ad::square(a));
  const auto g = ad::grad(out, std::vector<Var>{a, b});
  CHECK(g[1].rows() == 2);
  for (double v : g[1].value().data) CHECK(v == 0.0);
  for (double v : g[0].value().data) CHECK(v == 2.0);
  CHECK_THROWS_AS(ad::grad(ad::square(a), std::vector<Var>{a}), ArgumentError);
  CHECK_THROWS_AS(ad::matmul(a, ad::parameter(Tensor(3, 1))), ArgumentError);

  {
    ad::NoGradGuard guard;
    CHECK_FALSE(ad::grad_enabled());
    CHECK_FALSE(ad::square(a).requires_grad());
  }
  CHECK(ad::grad_enabled());
  CHECK(ad::square(a).requires_grad());
  // Without create_graph the gradient is a constant.
  CHECK_FALSE(ad::grad(out, std::vector<Var>{a})[0].requires_grad());
  CHECK(ad::grad(out, std::vector<Var>{a}, true)[0].requires_grad());
}
