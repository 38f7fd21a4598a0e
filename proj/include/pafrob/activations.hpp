#pragma once

// Parametric activation functions (PAFs) and their nonparametric anchors.
//
//   PReLU_a(x)     = x <= 0 ? a x : x
//   PELU_a(x)      = x <= 0 ? a (e^x - 1) : x
//   PSiLU_a(x)     = x sigmoid(a x)
//   PSoftplus_a(x) = log(1 + e^{a x}) / a
//   PReLU+_a(x)    = x <= 0 ? 0 : a x
//   ReBLU_a(x)     = x <= 0 ? 0 : a (sqrt(x^2 + 1) - 1) + x
//   PSSiLU_ab(x)   = x (sigmoid(a x) - b) / (1 - b)
//
// ReLU, ELU, SiLU and Softplus are PReLU(0), PELU(1), PSiLU(1), PSoftplus(1).
// Piecewise families evaluate the x <= 0 branch at the kink, so ReLU-like
// shapes have derivative 0 there.

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pafrob/tensor.hpp"

namespace pafrob::act {

enum class Family {
  ReLU,
  ELU,
  SiLU,
  Softplus,
  PReLU,
  PELU,
  PSiLU,
  PSoftplus,
  PReLUPlus,
  ReBLU,
  PSSiLU,
};

inline constexpr Family kAllFamilies[] = {
    Family::ReLU,  Family::ELU,       Family::SiLU,      Family::Softplus,
    Family::PReLU, Family::PELU,      Family::PSiLU,     Family::PSoftplus,
    Family::PReLUPlus, Family::ReBLU, Family::PSSiLU};

inline constexpr double kPSoftplusAlphaMin = 0.05;
inline constexpr double kPSSiLUAlphaMin = 1e-3;
inline constexpr double kPSSiLUBetaMax = 0.99;

class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised by second_derivative at the kink of a piecewise family.
class KinkError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

std::string_view family_name(Family family);
// Accepts the canonical names case-insensitively, plus "PReLU+".
Family parse_family(std::string_view name);

bool is_parametric(Family family);
// 0 for nonparametric families, 2 for PSSiLU, 1 otherwise.
int parameter_count(Family family);
// True for families defined piecewise with a kink at x = 0.
bool is_piecewise(Family family);

struct ActivationSpec {
  Family family = Family::ReLU;
  double alpha = 0.0;
  double beta = 0.0;
  bool alpha_learnable = false;
  bool beta_learnable = false;

  // Validated construction. Nonparametric families get their canonical alpha
  // and no learnable flags whatever is passed.
  static ActivationSpec make(Family family, double alpha, double beta = 0.0,
                             bool learnable = false);

  // Parametric families initialised to their nonparametric shape: PReLU,
  // ReBLU -> 0; PReLU+, PELU, PSiLU, PSoftplus -> 1; PSSiLU -> (1, 0).
  static ActivationSpec initial(Family family, bool learnable = true);

  void validate() const;
};

// Pulls alpha/beta back into the family's domain (optimizer steps can leave it).
void clamp_to_domain(Family family, double& alpha, double& beta);

// Scalar evaluation ---------------------------------------------------------

double value(const ActivationSpec& spec, double x);
double derivative(const ActivationSpec& spec, double x);
// Throws KinkError at x = 0 for piecewise families.
double second_derivative(const ActivationSpec& spec, double x);

struct ParameterGradient {
  double alpha = 0.0;
  double beta = 0.0;
};
ParameterGradient parameter_gradient(const ActivationSpec& spec, double x);

// Batched evaluation ----------------------------------------------------------

void forward(const ActivationSpec& spec, std::span<const double> x, std::span<double> out);
void derivative(const ActivationSpec& spec, std::span<const double> x, std::span<double> out);

// Autodiff ------------------------------------------------------------------

// Elementwise activation whose parameters are one-element tensors. alpha and
// beta receive the sum of their gradients over every element of x, so one
// pair of parameter tensors can be shared by all activation sites.
Tensor apply(Family family, const Tensor& x, const Tensor& alpha, const Tensor& beta);

// Same, with the parameters taken from the ActivationSpec as constants.
Tensor paf_forward(const ActivationSpec& spec, const Tensor& x);
Tensor paf_derivative(const ActivationSpec& spec, const Tensor& x);
Tensor paf_second_derivative(const ActivationSpec& spec, const Tensor& x);

// Shape measures --------------------------------------------------------------

struct Grid {
  double lo = -10.0;
  double hi = 10.0;
  std::size_t n = 2001;
};

// lo + (hi - lo) i / (n - 1); requires n >= 2.
std::vector<double> grid_points(const Grid& grid);

// Max of the second derivative over the grid. Kink points of piecewise
// families are skipped; they carry no finite curvature.
double curvature(const ActivationSpec& spec, const Grid& grid);

// max |a(x) - b(x)| over the grid.
double identity_reduction_check(const ActivationSpec& a, const ActivationSpec& b,
                                const Grid& grid);

// CSV with header "x,y".
void write_shape_csv(std::ostream& os, const ActivationSpec& spec, const Grid& grid);

}  // namespace pafrob::act
