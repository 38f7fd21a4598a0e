#include "pafrob/activations.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ostream>

#include "pafrob/csv.hpp"
#include "pafrob/math.hpp"
#include "pafrob/simd/kernels.hpp"

namespace pafrob::act {

namespace {

// Nonparametric families expressed as their parametric parent.
struct Canonical {
  Family family;
  double alpha;
};

Canonical canonical(Family family, double alpha) {
  switch (family) {
    case Family::ReLU: return {Family::PReLU, 0.0};
    case Family::ELU: return {Family::PELU, 1.0};
    case Family::SiLU: return {Family::PSiLU, 1.0};
    case Family::Softplus: return {Family::PSoftplus, 1.0};
    default: return {family, alpha};
  }
}

double nonparametric_alpha(Family family) {
  switch (family) {
    case Family::ReLU: return 0.0;
    case Family::ELU:
    case Family::SiLU:
    case Family::Softplus: return 1.0;
    default: return 0.0;
  }
}

struct Local {
  double y;
  double dx;
  double dalpha;
  double dbeta;
};

Local evaluate(Family family, double a, double b, double x) {
  switch (family) {
    case Family::PReLU:
      return x <= 0.0 ? Local{a * x, a, x, 0.0} : Local{x, 1.0, 0.0, 0.0};
    case Family::PReLUPlus:
      return x <= 0.0 ? Local{0.0, 0.0, 0.0, 0.0} : Local{a * x, a, x, 0.0};
    case Family::PELU: {
      if (x > 0.0) return {x, 1.0, 0.0, 0.0};
      const double em1 = std::expm1(x);
      return {a * em1, a * std::exp(x), em1, 0.0};
    }
    case Family::ReBLU: {
      if (x <= 0.0) return {0.0, 0.0, 0.0, 0.0};
      const double r = std::sqrt(x * x + 1.0);
      return {a * (r - 1.0) + x, a * x / r + 1.0, r - 1.0, 0.0};
    }
    case Family::PSiLU: {
      const double s = stable_sigmoid(a * x);
      const double s1 = s * (1.0 - s);
      return {x * s, s + a * x * s1, x * x * s1, 0.0};
    }
    case Family::PSSiLU: {
      const double s = stable_sigmoid(a * x);
      const double s1 = s * (1.0 - s);
      const double inv = 1.0 / (1.0 - b);
      return {x * (s - b) * inv, (s + a * x * s1 - b) * inv, x * x * s1 * inv,
              x * (s - 1.0) * inv * inv};
    }
    case Family::PSoftplus: {
      const double z = a * x;
      const double y = softplus(z) / a;
      const double s = stable_sigmoid(z);
      return {y, s, (x * s - y) / a, 0.0};
    }
    default: break;
  }
  throw std::logic_error("evaluate: unexpected family");
}

double second(Family family, double a, double b, double x) {
  switch (family) {
    case Family::PReLU:
    case Family::PReLUPlus: return 0.0;
    case Family::PELU: return x < 0.0 ? a * std::exp(x) : 0.0;
    case Family::ReBLU: {
      if (x < 0.0) return 0.0;
      const double q = x * x + 1.0;
      return a / (q * std::sqrt(q));
    }
    case Family::PSiLU:
    case Family::PSSiLU: {
      const double s = stable_sigmoid(a * x);
      const double s1 = s * (1.0 - s);
      const double s2 = s1 * (1.0 - 2.0 * s);
      const double d2 = 2.0 * a * s1 + a * a * x * s2;
      return family == Family::PSSiLU ? d2 / (1.0 - b) : d2;
    }
    case Family::PSoftplus: {
      const double s = stable_sigmoid(a * x);
      return a * s * (1.0 - s);
    }
    default: break;
  }
  throw std::logic_error("second: unexpected family");
}

bool is_piecewise_linear(Family f) {
  return f == Family::PReLU || f == Family::PReLUPlus;
}

// (negative-side slope, positive-side slope) for PReLU / PReLU+.
std::pair<double, double> slopes(Family f, double a) {
  return f == Family::PReLU ? std::pair{a, 1.0} : std::pair{0.0, a};
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view family_name(Family family) {
  switch (family) {
    case Family::ReLU: return "ReLU";
    case Family::ELU: return "ELU";
    case Family::SiLU: return "SiLU";
    case Family::Softplus: return "Softplus";
    case Family::PReLU: return "PReLU";
    case Family::PELU: return "PELU";
    case Family::PSiLU: return "PSiLU";
    case Family::PSoftplus: return "PSoftplus";
    case Family::PReLUPlus: return "PReLUPlus";
    case Family::ReBLU: return "ReBLU";
    case Family::PSSiLU: return "PSSiLU";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  const std::string key = lower(name);
  if (key == "prelu+") return Family::PReLUPlus;
  for (Family f : kAllFamilies)
    if (lower(family_name(f)) == key) return f;
  throw DomainError("unknown activation family '" + std::string(name) + "'");
}

bool is_parametric(Family family) { return parameter_count(family) > 0; }

int parameter_count(Family family) {
  switch (family) {
    case Family::ReLU:
    case Family::ELU:
    case Family::SiLU:
    case Family::Softplus: return 0;
    case Family::PSSiLU: return 2;
    default: return 1;
  }
}

bool is_piecewise(Family family) {
  switch (canonical(family, 0.0).family) {
    case Family::PReLU:
    case Family::PELU:
    case Family::PReLUPlus:
    case Family::ReBLU: return true;
    default: return false;
  }
}

ActivationSpec ActivationSpec::make(Family family, double alpha, double beta, bool learnable) {
  ActivationSpec spec;
  spec.family = family;
  if (!is_parametric(family)) {
    spec.alpha = nonparametric_alpha(family);
  } else {
    spec.alpha = alpha;
    spec.alpha_learnable = learnable;
    if (family == Family::PSSiLU) {
      spec.beta = beta;
      spec.beta_learnable = learnable;
    }
  }
  spec.validate();
  return spec;
}

ActivationSpec ActivationSpec::initial(Family family, bool learnable) {
  switch (family) {
    case Family::PReLU:
    case Family::ReBLU: return make(family, 0.0, 0.0, learnable);
    case Family::PSSiLU: return make(family, 1.0, 0.0, learnable);
    default: return make(family, 1.0, 0.0, learnable);
  }
}

void ActivationSpec::validate() const {
  const std::string name(family_name(family));
  if (!std::isfinite(alpha) || !std::isfinite(beta))
    throw DomainError(name + ": parameters must be finite");
  if (!is_parametric(family) && (alpha_learnable || beta_learnable))
    throw DomainError(name + " has no learnable parameters");
  if (family != Family::PSSiLU && (beta != 0.0 || beta_learnable))
    throw DomainError(name + " has no beta parameter");
  if (family == Family::PSoftplus && alpha < kPSoftplusAlphaMin)
    throw DomainError("PSoftplus requires alpha >= " + format_double(kPSoftplusAlphaMin) +
                      ", got " + format_double(alpha));
  if (family == Family::PSSiLU) {
    if (alpha <= 0.0)
      throw DomainError("PSSiLU requires alpha > 0, got " + format_double(alpha));
    if (beta < 0.0 || beta > kPSSiLUBetaMax)
      throw DomainError("PSSiLU requires 0 <= beta <= " + format_double(kPSSiLUBetaMax) +
                        ", got " + format_double(beta));
  }
}

void clamp_to_domain(Family family, double& alpha, double& beta) {
  if (family == Family::PSoftplus) alpha = std::max(alpha, kPSoftplusAlphaMin);
  if (family == Family::PSSiLU) {
    alpha = std::max(alpha, kPSSiLUAlphaMin);
    beta = std::clamp(beta, 0.0, kPSSiLUBetaMax);
  }
}

double value(const ActivationSpec& spec, double x) {
  const Canonical c = canonical(spec.family, spec.alpha);
  return evaluate(c.family, c.alpha, spec.beta, x).y;
}

double derivative(const ActivationSpec& spec, double x) {
  const Canonical c = canonical(spec.family, spec.alpha);
  return evaluate(c.family, c.alpha, spec.beta, x).dx;
}

double second_derivative(const ActivationSpec& spec, double x) {
  if (is_piecewise(spec.family) && x == 0.0)
    throw KinkError(std::string(family_name(spec.family)) +
                    " has no second derivative at its kink x = 0");
  const Canonical c = canonical(spec.family, spec.alpha);
  return second(c.family, c.alpha, spec.beta, x);
}

ParameterGradient parameter_gradient(const ActivationSpec& spec, double x) {
  if (!is_parametric(spec.family)) return {};
  const Local l = evaluate(spec.family, spec.alpha, spec.beta, x);
  return {l.dalpha, l.dbeta};
}

void forward(const ActivationSpec& spec, std::span<const double> x, std::span<double> out) {
  const Canonical c = canonical(spec.family, spec.alpha);
  if (is_piecewise_linear(c.family)) {
    const auto [neg, pos] = slopes(c.family, c.alpha);
    simd::active().piecewise_linear(x.data(), neg, pos, out.data(), x.size());
    return;
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = evaluate(c.family, c.alpha, spec.beta, x[i]).y;
}

void derivative(const ActivationSpec& spec, std::span<const double> x, std::span<double> out) {
  const Canonical c = canonical(spec.family, spec.alpha);
  if (is_piecewise_linear(c.family)) {
    const auto [neg, pos] = slopes(c.family, c.alpha);
    simd::active().piecewise_linear_slope(x.data(), neg, pos, out.data(), x.size());
    return;
  }
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = evaluate(c.family, c.alpha, spec.beta, x[i]).dx;
}

Tensor apply(Family family, const Tensor& x, const Tensor& alpha, const Tensor& beta) {
  ActivationSpec spec;
  spec.family = family;
  spec.alpha = is_parametric(family) ? alpha.item() : nonparametric_alpha(family);
  spec.beta = family == Family::PSSiLU ? beta.item() : 0.0;
  spec.validate();

  const Canonical c = canonical(family, spec.alpha);
  const auto xv = x.values();
  const std::size_t n = xv.size();
  const bool want_alpha = is_parametric(family) && alpha.requires_grad();
  const bool want_beta = family == Family::PSSiLU && beta.requires_grad();

  std::vector<double> y(n), dx(n);
  std::vector<double> dalpha(want_alpha ? n : 0), dbeta(want_beta ? n : 0);
  if (is_piecewise_linear(c.family)) {
    const auto [neg, pos] = slopes(c.family, c.alpha);
    simd::active().piecewise_linear(xv.data(), neg, pos, y.data(), n);
    simd::active().piecewise_linear_slope(xv.data(), neg, pos, dx.data(), n);
    if (want_alpha) {
      const bool negative_side = c.family == Family::PReLU;
      for (std::size_t i = 0; i < n; ++i)
        dalpha[i] = (xv[i] <= 0.0) == negative_side ? xv[i] : 0.0;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const Local l = evaluate(c.family, c.alpha, spec.beta, xv[i]);
      y[i] = l.y;
      dx[i] = l.dx;
      if (want_alpha) dalpha[i] = l.dalpha;
      if (want_beta) dbeta[i] = l.dbeta;
    }
  }

  return Tensor::record(
      x.shape(), std::move(y), {x, alpha, beta}, "activation",
      [dx = std::move(dx), dalpha = std::move(dalpha), dbeta = std::move(dbeta)](
          std::span<const double> g, std::span<const std::span<double>> gin) {
        const auto& k = simd::active();
        if (!gin[0].empty()) {
          std::vector<double> t(g.size());
          k.mul(g.data(), dx.data(), t.data(), g.size());
          k.add(gin[0].data(), t.data(), gin[0].data(), g.size());
        }
        if (!gin[1].empty() && !dalpha.empty()) gin[1][0] += k.dot(g.data(), dalpha.data(), g.size());
        if (!gin[2].empty() && !dbeta.empty()) gin[2][0] += k.dot(g.data(), dbeta.data(), g.size());
      });
}

Tensor paf_forward(const ActivationSpec& spec, const Tensor& x) {
  spec.validate();
  return apply(spec.family, x, Tensor::scalar(spec.alpha), Tensor::scalar(spec.beta));
}

Tensor paf_derivative(const ActivationSpec& spec, const Tensor& x) {
  spec.validate();
  std::vector<double> out(x.numel());
  derivative(spec, x.values(), out);
  return Tensor(x.shape(), std::move(out));
}

Tensor paf_second_derivative(const ActivationSpec& spec, const Tensor& x) {
  spec.validate();
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = second_derivative(spec, x.at(i));
  return Tensor(x.shape(), std::move(out));
}

std::vector<double> grid_points(const Grid& grid) {
  if (grid.n < 2) throw std::invalid_argument("grid needs at least 2 points");
  if (!(grid.lo < grid.hi)) throw std::invalid_argument("grid needs lo < hi");
  std::vector<double> xs(grid.n);
  const double span = grid.hi - grid.lo;
  const double last = static_cast<double>(grid.n - 1);
  for (std::size_t i = 0; i < grid.n; ++i)
    xs[i] = grid.lo + span * static_cast<double>(i) / last;
  return xs;
}

double curvature(const ActivationSpec& spec, const Grid& grid) {
  spec.validate();
  const bool piecewise = is_piecewise(spec.family);
  bool any = false;
  double best = 0.0;
  for (double x : grid_points(grid)) {
    if (piecewise && x == 0.0) continue;
    const double d2 = second_derivative(spec, x);
    if (!any || d2 > best) best = d2;
    any = true;
  }
  if (!any) throw std::invalid_argument("curvature grid has no admissible points");
  return best;
}

double identity_reduction_check(const ActivationSpec& a, const ActivationSpec& b,
                                const Grid& grid) {
  a.validate();
  b.validate();
  double worst = 0.0;
  for (double x : grid_points(grid)) worst = std::max(worst, std::abs(value(a, x) - value(b, x)));
  return worst;
}

void write_shape_csv(std::ostream& os, const ActivationSpec& spec, const Grid& grid) {
  spec.validate();
  os << "x,y\n";
  for (double x : grid_points(grid))
    write_csv_row(os, {format_double(x), format_double(value(spec, x))});
}

}  // namespace pafrob::act
