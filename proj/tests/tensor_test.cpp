#include <doctest.h>

#include <cmath>
#include <numbers>

#include "check.hpp"
#include "pafrob/tensor.hpp"

using namespace pafrob;
using testing::gradient_error;
using testing::random_tensor;

TEST_CASE("construction and shape checks") {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.dim(1) == 3);
  CHECK(t.at(4) == 5.0);
  CHECK(shape_string(t.shape()) == "[2,3]");
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(add(Tensor({2}, {1, 2}), Tensor({3}, {1, 2, 3})), ShapeError);
  CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeError);
  CHECK_THROWS_AS(Tensor({2}, {1, 2}, true).backward(), ShapeError);
}

TEST_CASE("scalar broadcasting") {
  Tensor a({3}, {1, 2, 3}, true);
  Tensor s = Tensor::scalar(2.0, true);
  Tensor y = sum(a * s);
  CHECK(y.item() == 12.0);
  y.backward();
  CHECK(s.grad()[0] == 6.0);
  CHECK(a.grad()[1] == 2.0);
}

TEST_CASE("leaf gradients accumulate, op gradients reset") {
  Tensor a({2}, {1, 3}, true);
  sum(a * a).backward();
  sum(a * a).backward();
  CHECK(a.grad()[0] == 4.0);
  CHECK(a.grad()[1] == 12.0);
  a.zero_grad();
  CHECK(a.grad()[0] == 0.0);
}

TEST_CASE("a leaf used at several sites gets the sum of site gradients") {
  Tensor w = Tensor::scalar(1.5, true);
  Tensor x({3}, {1, -2, 4});
  Tensor y = sum(x * w) + sum(exp(x * w * 0.1));
  y.backward();
  double expected = 3.0;
  for (double v : {1.0, -2.0, 4.0}) expected += 0.1 * v * std::exp(0.15 * v);
  CHECK(w.grad()[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("no graph is kept when nothing requires grad") {
  Tensor a({2}, {1, 2});
  Tensor b = a * 3.0;
  CHECK(b.is_leaf());
  CHECK_FALSE(b.requires_grad());
}

TEST_CASE("elementwise gradients match finite differences") {
  Tensor a = random_tensor({3, 4}, 1);
  Tensor b = random_tensor({3, 4}, 2, 0.5, 2.0);
  CHECK(gradient_error([&] { return sum(a * b + a / b - b); }, {a, b}) < 1e-5);
  CHECK(gradient_error([&] { return mean(exp(a) * sigmoid(b)); }, {a, b}) < 1e-5);
  CHECK(gradient_error([&] { return sum(log1p(b) + neg(a)); }, {a, b}) < 1e-5);
  CHECK(gradient_error([&] { return sum(abs(a) + maximum(b, 1.0)); }, {a, b}) < 1e-5);
  Tensor cond({3, 4}, {1, 0, 1, 0, 1, 1, 0, 0, 1, 0, 1, 0});
  CHECK(gradient_error([&] { return sum(where(cond, a * a, b * 3.0)); }, {a, b}) < 1e-5);
}

TEST_CASE("abs has zero gradient at zero") {
  Tensor a({3}, {0.0, 2.0, -1.0}, true);
  sum(abs(a)).backward();
  CHECK(a.grad()[0] == 0.0);
  CHECK(a.grad()[1] == 1.0);
  CHECK(a.grad()[2] == -1.0);
}

TEST_CASE("matmul, bias and reshape") {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b({3, 2}, {1, 0, 0, 1, 1, 1});
  Tensor c = matmul(a, b);
  CHECK(std::vector<double>(c.values().begin(), c.values().end()) == std::vector<double>{4, 5, 10, 11});
  Tensor x = random_tensor({4, 3}, 3), w = random_tensor({3, 5}, 4), bias = random_tensor({5}, 5);
  CHECK(gradient_error([&] { return sum(sigmoid(add_bias(matmul(x, w), bias))); }, {x, w, bias}) < 1e-5);
  CHECK(gradient_error([&] { return sum(reshape(x, {2, 6}) * reshape(x, {2, 6})); }, {x}) < 1e-5);
  CHECK_THROWS_AS(reshape(x, {5}), ShapeError);
  CHECK_THROWS_AS(add_bias(x, bias), ShapeError);
}

TEST_CASE("conv2d matches a direct loop and its gradients") {
  const Conv2dOptions opt{2, 1};
  Tensor x = random_tensor({2, 2, 5, 5}, 6), k = random_tensor({3, 2, 3, 3}, 7);
  Tensor y = conv2d(x, k, opt);
  REQUIRE(y.shape() == Shape{2, 3, 3, 3});
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t o = 0; o < 3; ++o)
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t p = 0; p < 3; ++p)
              for (std::size_t q = 0; q < 3; ++q) {
                const long r = static_cast<long>(i * 2 + p) - 1, s = static_cast<long>(j * 2 + q) - 1;
                if (r < 0 || s < 0 || r >= 5 || s >= 5) continue;
                acc += x.at(((n * 2 + c) * 5 + static_cast<std::size_t>(r)) * 5 + static_cast<std::size_t>(s)) *
                       k.at(((o * 2 + c) * 3 + p) * 3 + q);
              }
          CHECK(y.at(((n * 3 + o) * 3 + i) * 3 + j) == doctest::Approx(acc).epsilon(1e-12));
        }
  Tensor bias = random_tensor({3}, 8);
  CHECK(gradient_error([&] { return sum(sigmoid(add_channel_bias(conv2d(x, k, opt), bias))); },
                       {x, k, bias}) < 1e-5);
  CHECK_THROWS_AS(conv2d(x, random_tensor({3, 2, 8, 8}, 9)), ShapeError);
  CHECK_THROWS_AS(conv2d(x, random_tensor({3, 1, 3, 3}, 9)), ShapeError);
}

TEST_CASE("reductions") {
  Tensor a({2, 3}, {1, 5, 5, -2, 0, 7}, true);
  CHECK(sum(a).item() == 16.0);
  CHECK(mean(a).item() == doctest::Approx(16.0 / 6.0));
  Tensor m = max(a, 1);
  CHECK(m.shape() == Shape{2});
  CHECK(m.at(0) == 5.0);
  sum(m).backward();
  // Tie between index 1 and 2 goes to the lower index.
  CHECK(a.grad()[1] == 1.0);
  CHECK(a.grad()[2] == 0.0);
  CHECK(a.grad()[5] == 1.0);
  Tensor s = sum(a, 0);
  CHECK(s.at(2) == 12.0);
  Tensor b = random_tensor({3, 4}, 10);
  CHECK(gradient_error([&] { return sum(sigmoid(mean(b, 1))) + sum(sum(b, 0) * sum(b, 0)); }, {b}) < 1e-5);
  CHECK(max(Tensor({1}, std::vector<double>{4.0})).item() == 4.0);
}

TEST_CASE("softmax cross-entropy") {
  Tensor z({2, 3}, {0, 0, 0, 1, 2, 3}, true);
  const int labels[] = {1, 2};
  Tensor l = softmax_cross_entropy(z, labels);
  const double row2 = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)) - 3.0;
  CHECK(l.item() == doctest::Approx((std::log(3.0) + row2) / 2.0).epsilon(1e-14));
  CHECK(gradient_error([&] { return softmax_cross_entropy(z, labels); }, {z}) < 1e-5);
  const int bad[] = {1, 3};
  CHECK_THROWS_AS(softmax_cross_entropy(z, bad), std::out_of_range);
  // Large logits stay finite.
  Tensor big({1, 2}, {1000.0, -1000.0});
  const int zero[] = {0};
  CHECK(std::isfinite(softmax_cross_entropy(big, zero).item()));
}

TEST_CASE("KL divergence value and gradients") {
  // softmax(0,0) = (1/2,1/2), softmax(ln3,-ln3) = (9/10,1/10): KL = ln(5/3).
  const double l3 = std::log(3.0);
  Tensor p({1, 2}, {0.0, 0.0}), q({1, 2}, {l3, -l3});
  CHECK(kl_divergence(p, q).item() == doctest::Approx(0.5108256237659907).epsilon(1e-14));
  CHECK(kl_divergence(q, q).item() == doctest::Approx(0.0).epsilon(1e-15));
  Tensor a = random_tensor({3, 4}, 11, -2, 2), b = random_tensor({3, 4}, 12, -2, 2);
  CHECK(gradient_error([&] { return kl_divergence(a, b); }, {a, b}) < 1e-5);
}

TEST_CASE("argmax ties resolve to the lowest index") {
  Tensor z({2, 3}, {1, 3, 3, 0, 0, 0});
  CHECK(argmax_rows(z) == std::vector<int>{1, 0});
  const auto p = softmax_rows(z);
  CHECK(p[3] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("detach cuts the graph") {
  Tensor a({2}, {1, 2}, true);
  Tensor d = (a * 2.0).detach();
  CHECK(d.is_leaf());
  CHECK_FALSE(d.requires_grad());
  CHECK(d.at(1) == 4.0);
  CHECK_THROWS_AS((a * 2.0).mutable_values(), std::logic_error);
}
