#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "check.hpp"
#include "pafrob/activations.hpp"
#include "pafrob/math.hpp"
#include "pafrob/rng.hpp"

using namespace pafrob;
using act::ActivationSpec;
using act::Family;
using testing::rel_error;

namespace {

ActivationSpec spec(Family f, double a, double b = 0.0) { return ActivationSpec::make(f, a, b); }

}  // namespace

TEST_CASE("hand-computed values") {
  CHECK(stable_sigmoid(1.0) == doctest::Approx(0.7310585786300049).epsilon(1e-15));
  CHECK(act::value(spec(Family::PSSiLU, 1.0, 0.3), -2.0) ==
        doctest::Approx(0.5165630799368071).epsilon(1e-12));
  CHECK(act::value(spec(Family::ReBLU, 1.0), 3.0) == doctest::Approx(5.16227766016838).epsilon(1e-14));
  CHECK(act::value(spec(Family::PSoftplus, 1.0), 0.0) == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
  CHECK(act::value(spec(Family::PELU, 0.5), -1.0) == doctest::Approx(-0.31606027941427883).epsilon(1e-14));
  CHECK(act::value(spec(Family::PReLU, 0.25), -4.0) == -1.0);
  CHECK(act::value(spec(Family::PReLUPlus, 2.0), 3.0) == 6.0);
  CHECK(act::value(spec(Family::PReLUPlus, 2.0), -3.0) == 0.0);
  CHECK(act::value(spec(Family::PSiLU, 2.0), 1.0) == doctest::Approx(stable_sigmoid(2.0)));
  CHECK(act::second_derivative(ActivationSpec::initial(Family::Softplus), 0.0) == doctest::Approx(0.25));
}

TEST_CASE("PSoftplus is stable for large |alpha x|") {
  const auto s = spec(Family::PSoftplus, 2.0);
  CHECK(act::value(s, 400.0) == doctest::Approx(400.0).epsilon(1e-15));
  CHECK(act::value(s, -400.0) >= 0.0);
  CHECK(act::value(s, -400.0) < 1e-300);
  CHECK(std::isfinite(act::derivative(s, 1e4)));
}

TEST_CASE("nonparametric families are their parametric anchors") {
  const act::Grid g;
  CHECK(act::identity_reduction_check(ActivationSpec::initial(Family::ReLU), spec(Family::PReLU, 0.0), g) == 0.0);
  CHECK(act::identity_reduction_check(ActivationSpec::initial(Family::ELU), spec(Family::PELU, 1.0), g) == 0.0);
  CHECK(act::identity_reduction_check(ActivationSpec::initial(Family::SiLU), spec(Family::PSiLU, 1.0), g) == 0.0);
  CHECK(act::identity_reduction_check(ActivationSpec::initial(Family::Softplus), spec(Family::PSoftplus, 1.0), g) == 0.0);
  CHECK(act::identity_reduction_check(spec(Family::PSSiLU, 0.7, 0.0), spec(Family::PSiLU, 0.7), g) <= 1e-12);
  CHECK(act::identity_reduction_check(spec(Family::ReBLU, 0.0), ActivationSpec::initial(Family::ReLU), g) == 0.0);
  CHECK(act::identity_reduction_check(spec(Family::PReLUPlus, 1.0), ActivationSpec::initial(Family::ReLU), g) == 0.0);
}

TEST_CASE("initial values give nonparametric shapes") {
  CHECK(ActivationSpec::initial(Family::PReLU).alpha == 0.0);
  CHECK(ActivationSpec::initial(Family::ReBLU).alpha == 0.0);
  for (Family f : {Family::PReLUPlus, Family::PELU, Family::PSiLU, Family::PSoftplus})
    CHECK(ActivationSpec::initial(f).alpha == 1.0);
  const auto p = ActivationSpec::initial(Family::PSSiLU);
  CHECK(p.alpha == 1.0);
  CHECK(p.beta == 0.0);
  CHECK(p.alpha_learnable);
  CHECK(p.beta_learnable);
  CHECK_FALSE(ActivationSpec::initial(Family::PSiLU).beta_learnable);
}

TEST_CASE("parameter counts and names") {
  CHECK(act::parameter_count(Family::PSSiLU) == 2);
  CHECK(act::parameter_count(Family::PSiLU) == 1);
  CHECK(act::parameter_count(Family::ReLU) == 0);
  for (Family f : act::kAllFamilies) CHECK(act::parse_family(act::family_name(f)) == f);
  CHECK(act::parse_family("pssilu") == Family::PSSiLU);
  CHECK(act::parse_family("PReLU+") == Family::PReLUPlus);
  CHECK_THROWS_AS(act::parse_family("tanh"), std::invalid_argument);
}

TEST_CASE("domain checks and clamping") {
  CHECK_THROWS_AS(spec(Family::PSoftplus, 0.01).validate(), act::DomainError);
  CHECK_THROWS_AS(spec(Family::PSSiLU, 1.0, 1.0).validate(), act::DomainError);
  CHECK_THROWS_AS(spec(Family::PSSiLU, 1.0, -0.1).validate(), act::DomainError);
  CHECK_THROWS_AS(spec(Family::PSSiLU, 0.0, 0.1).validate(), act::DomainError);
  CHECK_NOTHROW(spec(Family::PSSiLU, 1.0, 0.99).validate());
  double a = -1.0, b = 2.0;
  act::clamp_to_domain(Family::PSSiLU, a, b);
  CHECK(a == act::kPSSiLUAlphaMin);
  CHECK(b == act::kPSSiLUBetaMax);
  a = 0.0;
  act::clamp_to_domain(Family::PSoftplus, a, b);
  CHECK(a == act::kPSoftplusAlphaMin);
}

TEST_CASE("second derivative at a kink is an error") {
  CHECK_THROWS_AS(act::second_derivative(ActivationSpec::initial(Family::ReLU), 0.0), act::KinkError);
  CHECK_THROWS_AS(act::second_derivative(spec(Family::PELU, 0.5), 0.0), act::KinkError);
  CHECK(act::second_derivative(spec(Family::ReBLU, 2.0), 1e-9) == doctest::Approx(2.0));
}

TEST_CASE("first and second derivatives match central differences") {
  Rng rng(2024);
  const double h = 1e-5;
  int cases = 0;
  for (Family f : act::kAllFamilies) {
    for (int rep = 0; rep < 10; ++rep) {
      double a = rng.uniform(0.1, 2.0), b = f == Family::PSSiLU ? rng.uniform(0.0, 0.9) : 0.0;
      const ActivationSpec s = ActivationSpec::make(f, a, b);
      double x = rng.uniform(-4.0, 4.0);
      if (std::abs(x) < 1e-2) x = 0.5;
      const double d1 = (act::value(s, x + h) - act::value(s, x - h)) / (2 * h);
      const double d2 = (act::derivative(s, x + h) - act::derivative(s, x - h)) / (2 * h);
      CHECK(rel_error(act::derivative(s, x), d1) <= 1e-5);
      CHECK(rel_error(act::second_derivative(s, x), d2) <= 1e-5);
      ++cases;
    }
  }
  CHECK(cases >= 100);
}

TEST_CASE("parameter gradients match central differences") {
  Rng rng(7);
  const double h = 1e-6;
  for (Family f : {Family::PReLU, Family::PELU, Family::PSiLU, Family::PSoftplus,
                   Family::PReLUPlus, Family::ReBLU, Family::PSSiLU}) {
    for (int rep = 0; rep < 10; ++rep) {
      const double a = rng.uniform(0.2, 2.0), b = f == Family::PSSiLU ? rng.uniform(0.05, 0.9) : 0.0;
      const double x = rng.uniform(-4.0, 4.0);
      const auto g = act::parameter_gradient(ActivationSpec::make(f, a, b), x);
      const double da = (act::value(ActivationSpec::make(f, a + h, b), x) -
                         act::value(ActivationSpec::make(f, a - h, b), x)) / (2 * h);
      CHECK(rel_error(g.alpha, da) <= 1e-5);
      if (f == Family::PSSiLU) {
        const double db = (act::value(ActivationSpec::make(f, a, b + h), x) -
                           act::value(ActivationSpec::make(f, a, b - h), x)) / (2 * h);
        CHECK(rel_error(g.beta, db) <= 1e-5);
      }
    }
  }
}

TEST_CASE("batched evaluation equals scalar evaluation") {
  const std::vector<double> xs = act::grid_points({-6.0, 6.0, 97});
  std::vector<double> y(xs.size()), d(xs.size());
  for (Family f : act::kAllFamilies) {
    const ActivationSpec s = ActivationSpec::make(f, act::is_parametric(f) ? 0.6 : 0.0,
                                                  f == Family::PSSiLU ? 0.2 : 0.0);
    act::forward(s, xs, y);
    act::derivative(s, xs, d);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      CHECK(y[i] == act::value(s, xs[i]));
      CHECK(d[i] == act::derivative(s, xs[i]));
    }
  }
}

TEST_CASE("shared parameters receive summed gradients through apply") {
  Tensor x = testing::random_tensor({4, 3}, 5, -3.0, 3.0);
  Tensor a = Tensor::scalar(0.8, true), b = Tensor::scalar(0.3, true);
  auto f = [&] {
    return sum(act::apply(Family::PSSiLU, x, a, b) * act::apply(Family::PSSiLU, x * 0.5, a, b));
  };
  CHECK(testing::gradient_error(f, {x, a, b}) < 1e-5);
  Tensor c = Tensor::scalar(0.4, true);
  CHECK(testing::gradient_error([&] { return sum(act::apply(Family::PELU, x, c, Tensor::scalar(0.0))); },
                                {x, c}) < 1e-5);
}

TEST_CASE("curvature") {
  CHECK(act::curvature(ActivationSpec::initial(Family::ReLU), {}) == 0.0);
  CHECK(act::curvature(ActivationSpec::initial(Family::Softplus), {}) == doctest::Approx(0.25));
  CHECK(act::curvature(spec(Family::PSoftplus, 4.0), {}) == doctest::Approx(1.0));
  // Larger alpha means a sharper bend for PSiLU.
  CHECK(act::curvature(spec(Family::PSiLU, 4.0), {}) > act::curvature(spec(Family::PSiLU, 1.0), {}));
}

TEST_CASE("shape CSV") {
  std::ostringstream os;
  act::write_shape_csv(os, ActivationSpec::initial(Family::ReLU), {-1.0, 1.0, 3});
  CHECK(os.str() == "x,y\n-1,0\n0,0\n1,1\n");
  CHECK_THROWS_AS(act::grid_points({0.0, 1.0, 1}), std::invalid_argument);
}
