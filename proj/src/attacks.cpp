#include "pafrob/attacks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ostream>

#include "pafrob/rng.hpp"
#include "pafrob/simd/kernels.hpp"
#include "pafrob/vendor_json.hpp"

namespace pafrob::attack {

namespace {

constexpr Family kFamilies[] = {Family::Fgsm, Family::PgdLinf, Family::PgdL2,
                                Family::SquareSearch, Family::MinRadius};

const simd::KernelTable& K() { return simd::active(); }

std::size_t sample_width(const Tensor& x) { return x.numel() / x.dim(0); }

// Per-sample cross-entropy from logits, stable.
std::vector<double> per_sample_ce(const Tensor& logits, std::span<const int> labels) {
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  const auto v = logits.values();
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = v.data() + r * cols;
    const double m = *std::max_element(row, row + cols);
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += std::exp(row[c] - m);
    out[r] = m + std::log(acc) - row[labels[r]];
  }
  return out;
}

double linf_distance(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

void require_batch(const Tensor& x, std::span<const int> labels, const char* who) {
  if (x.rank() < 2 || x.dim(0) != labels.size())
    throw ShapeError(std::string(who) + ": input " + shape_string(x.shape()) + " with " +
                     std::to_string(labels.size()) + " labels");
}

// Uniform draw from the ball of radius eps around x, one stream per sample.
std::vector<double> random_start(const Tensor& x, const AttackSpec& spec,
                                 std::uint64_t first_index, int restart) {
  const auto x0 = x.values();
  std::vector<double> out(x0.begin(), x0.end());
  if (!spec.random_start || spec.epsilon == 0.0) return out;
  const std::size_t n = x.dim(0), width = sample_width(x);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(sample_seed(spec.seed, first_index + i, static_cast<std::uint64_t>(restart)));
    double* s = out.data() + i * width;
    if (spec.family == Family::PgdL2) {
      std::vector<double> dir(width);
      double norm = 0.0;
      for (double& d : dir) {
        d = rng.normal();
        norm += d * d;
      }
      norm = std::sqrt(norm);
      const double radius =
          spec.epsilon * std::pow(rng.uniform(), 1.0 / static_cast<double>(width));
      if (norm > 0.0)
        for (std::size_t j = 0; j < width; ++j) s[j] += radius * dir[j] / norm;
    } else {
      for (std::size_t j = 0; j < width; ++j) s[j] += rng.uniform(-spec.epsilon, spec.epsilon);
    }
  }
  return out;
}

void project(const AttackSpec& spec, std::span<double> x, std::span<const double> x0,
             std::size_t width) {
  if (spec.family == Family::PgdL2) project_l2(x, x0, spec.epsilon, width);
  else project_linf(x, x0, spec.epsilon);
  K().clamp(x.data(), spec.clip_lo, spec.clip_hi, x.size());
}

Tensor ascend_from(const Objective& objective, const Tensor& x, std::vector<double> current,
                   const AttackSpec& spec) {
  const auto x0 = x.values();
  const std::size_t width = sample_width(x);
  project(spec, current, x0, width);
  std::vector<double> step(current.size());
  for (int it = 0; it < spec.steps; ++it) {
    Tensor xa(x.shape(), current, true);
    objective(xa).backward();
    const auto g = xa.grad();
    if (spec.family == Family::PgdL2) {
      const std::size_t n = x.dim(0);
      for (std::size_t i = 0; i < n; ++i) {
        const double norm = std::sqrt(K().sum_sq(g.data() + i * width, width));
        const double scale = norm > 0.0 ? spec.step_size / norm : 0.0;
        K().axpy(scale, g.data() + i * width, current.data() + i * width, width);
      }
    } else {
      K().sign(g.data(), step.data(), step.size());
      K().axpy(spec.step_size, step.data(), current.data(), current.size());
    }
    project(spec, current, x0, width);
  }
  return Tensor(x.shape(), std::move(current));
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view family_name(Family family) {
  switch (family) {
    case Family::Fgsm: return "fgsm";
    case Family::PgdLinf: return "pgd_linf";
    case Family::PgdL2: return "pgd_l2";
    case Family::SquareSearch: return "square_search";
    case Family::MinRadius: return "min_radius";
  }
  return "unknown";
}

std::string family_list() {
  std::string out;
  for (Family f : kFamilies) {
    if (!out.empty()) out += ", ";
    out += family_name(f);
  }
  return out;
}

Family parse_family(std::string_view name) {
  const std::string key = lower(name);
  for (Family f : kFamilies)
    if (family_name(f) == key) return f;
  throw UnknownAttackError("unknown attack '" + std::string(name) + "'; expected one of: " +
                           family_list());
}

void AttackSpec::validate() const {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("attack epsilon must be >= 0");
  if (steps < 1) throw std::invalid_argument("attack steps must be >= 1");
  if (restarts < 1) throw std::invalid_argument("attack restarts must be >= 1");
  if (!(clip_lo < clip_hi)) throw std::invalid_argument("attack clip range needs lo < hi");
  if (!(step_size >= 0.0)) throw std::invalid_argument("attack step size must be >= 0");
  if (family == Family::SquareSearch && query_budget < 1)
    throw std::invalid_argument("square search needs query_budget >= 1");
  if (family == Family::MinRadius && (!(radius_max > 0.0) || !(radius_tol > 0.0)))
    throw std::invalid_argument("min radius search needs radius_max > 0 and radius_tol > 0");
}

AttackSpec AttackSpec::pgd_linf_default() { return AttackSpec{}; }

AttackSpec AttackSpec::pgd_l2_default() {
  AttackSpec s;
  s.family = Family::PgdL2;
  s.epsilon = 0.5;
  s.step_size = 0.075;
  return s;
}

AttackSpec AttackSpec::square_default() {
  AttackSpec s;
  s.family = Family::SquareSearch;
  s.query_budget = 1000;
  return s;
}

AttackSpec AttackSpec::min_radius_default() {
  AttackSpec s;
  s.family = Family::MinRadius;
  s.steps = 4;
  s.step_size = 0.0078;
  return s;
}

Model as_model(const nn::Network& net) {
  return [&net](const Tensor& x) { return net.forward(x); };
}

void project_linf(std::span<double> x, std::span<const double> center, double eps) {
  K().project_box(x.data(), center.data(), eps, x.size());
}

void project_l2(std::span<double> x, std::span<const double> center, double eps,
                std::size_t width) {
  std::vector<double> delta(width);
  for (std::size_t off = 0; off < x.size(); off += width) {
    K().sub(x.data() + off, center.data() + off, delta.data(), width);
    const double norm = std::sqrt(K().sum_sq(delta.data(), width));
    if (norm > eps) {
      const double s = eps / norm;
      for (std::size_t j = 0; j < width; ++j) x[off + j] = center[off + j] + s * delta[j];
    }
  }
}

Tensor fgsm(const Model& model, const Tensor& x, std::span<const int> labels, double eps,
            double clip_lo, double clip_hi) {
  require_batch(x, labels, "fgsm");
  Tensor xa(x.shape(), std::vector<double>(x.values().begin(), x.values().end()), true);
  softmax_cross_entropy(model(xa), labels).backward();
  std::vector<double> out(x.values().begin(), x.values().end());
  std::vector<double> s(out.size());
  K().sign(xa.grad().data(), s.data(), s.size());
  K().axpy(eps, s.data(), out.data(), out.size());
  project_linf(out, x.values(), eps);
  K().clamp(out.data(), clip_lo, clip_hi, out.size());
  return Tensor(x.shape(), std::move(out));
}

Tensor pgd_ascent(const Objective& objective, const Tensor& x, const AttackSpec& spec,
                  std::uint64_t first_index, int restart) {
  spec.validate();
  if (spec.family != Family::PgdLinf && spec.family != Family::PgdL2)
    throw UnknownAttackError("pgd needs family pgd_linf or pgd_l2, got " +
                             std::string(family_name(spec.family)));
  return ascend_from(objective, x, random_start(x, spec, first_index, restart), spec);
}

PgdOutcome pgd_detailed(const Model& model, const Tensor& x, std::span<const int> labels,
                        const AttackSpec& spec, std::uint64_t first_index) {
  require_batch(x, labels, "pgd");
  const std::size_t n = x.dim(0), width = sample_width(x);
  const Objective ce = [&](const Tensor& xa) { return softmax_cross_entropy(model(xa), labels); };

  PgdOutcome out;
  std::vector<double> best(x.numel());
  out.success.assign(n, 0);
  out.loss.assign(n, -std::numeric_limits<double>::infinity());
  for (int r = 0; r < spec.restarts; ++r) {
    Tensor xa = pgd_ascent(ce, x, spec, first_index, r);
    const Tensor logits = model(xa);
    const std::vector<double> loss = per_sample_ce(logits, labels);
    const std::vector<int> pred = argmax_rows(logits);
    for (std::size_t i = 0; i < n; ++i) {
      if (pred[i] != labels[i]) out.success[i] = 1;
      if (loss[i] > out.loss[i]) {
        out.loss[i] = loss[i];
        std::copy_n(xa.values().begin() + static_cast<std::ptrdiff_t>(i * width), width,
                    best.begin() + static_cast<std::ptrdiff_t>(i * width));
      }
    }
  }
  out.x_adv = Tensor(x.shape(), std::move(best));
  return out;
}

Tensor pgd(const Model& model, const Tensor& x, std::span<const int> labels,
           const AttackSpec& spec, std::uint64_t first_index) {
  return pgd_detailed(model, x, labels, spec, first_index).x_adv;
}

RadiusResult min_radius_search(const Model& model, const Tensor& x, int label,
                               const AttackSpec& spec, std::uint64_t index) {
  spec.validate();
  if (x.dim(0) != 1) throw ShapeError("min_radius_search takes a single sample [1,...]");
  const int labels[] = {label};
  if (argmax_rows(model(x))[0] != label)
    throw MisclassifiedInputError("min_radius_search: input is already misclassified");

  AttackSpec probe = spec;
  probe.family = Family::PgdLinf;
  probe.restarts = 1;
  RadiusResult result;
  auto succeeds = [&](double radius) {
    probe.epsilon = radius;
    const Objective ce = [&](const Tensor& xa) { return softmax_cross_entropy(model(xa), labels); };
    Tensor xa = ascend_from(ce, x, random_start(x, probe, index, 0), probe);
    result.queries += probe.steps;
    return argmax_rows(model(xa))[0] != label;
  };

  double lo = 0.0, hi = spec.radius_max;
  const bool top = succeeds(hi);
  result.probes.push_back({hi, top, lo, hi});
  if (!top) {
    result.radius = spec.radius_max;
    result.censored = true;
    return result;
  }
  while (hi - lo > spec.radius_tol) {
    const double mid = 0.5 * (lo + hi);
    const bool ok = succeeds(mid);
    (ok ? hi : lo) = mid;
    result.probes.push_back({mid, ok, lo, hi});
  }
  result.radius = hi;
  return result;
}

SquareResult square_search(const Model& model, const Tensor& x, int label, double eps,
                           int query_budget, double clip_lo, double clip_hi, std::uint64_t seed,
                           std::uint64_t index) {
  if (query_budget < 1) throw std::invalid_argument("square_search needs query_budget >= 1");
  if (x.dim(0) != 1) throw ShapeError("square_search takes a single sample [1,...]");
  std::size_t channels = 1, height = 1, width = x.numel();
  if (x.rank() == 4) channels = x.dim(1), height = x.dim(2), width = x.dim(3);
  else if (x.rank() == 3) height = x.dim(1), width = x.dim(2);

  Rng rng(sample_seed(seed, index, 0));
  const auto x0 = x.values();
  SquareResult out;

  auto query = [&](const std::vector<double>& v) {
    ++out.queries;
    const Tensor logits = model(Tensor(x.shape(), v));
    const auto z = logits.values();
    double other = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < z.size(); ++c)
      if (static_cast<int>(c) != label) other = std::max(other, z[c]);
    const bool flipped = argmax_rows(logits)[0] != label;
    return std::pair{z[static_cast<std::size_t>(label)] - other, flipped};
  };
  auto at = [&](std::size_t c, std::size_t r, std::size_t col) {
    return (c * height + r) * width + col;
  };

  // Vertical stripes of +-eps, one sign per (channel, column).
  std::vector<double> best(x0.begin(), x0.end());
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t col = 0; col < width; ++col) {
      const double s = rng.random_sign();
      for (std::size_t r = 0; r < height; ++r) best[at(c, r, col)] += s * eps;
    }
  K().clamp(best.data(), clip_lo, clip_hi, best.size());
  auto [margin, flipped] = query(best);
  out.accepted_margins.push_back(margin);

  const std::size_t side0 =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.3 * static_cast<double>(std::min(height, width)))));
  const int period = std::max(1, query_budget / 5);
  std::vector<double> cand;
  while (!flipped && out.queries < query_budget) {
    const std::size_t halvings = static_cast<std::size_t>(out.queries / period);
    const std::size_t side = std::max<std::size_t>(1, halvings >= 63 ? 0 : side0 >> halvings);
    const std::size_t r0 = rng.below(height - std::min(side, height) + 1);
    const std::size_t c0 = rng.below(width - std::min(side, width) + 1);
    cand = best;
    for (std::size_t c = 0; c < channels; ++c) {
      const double s = rng.random_sign() * eps;
      for (std::size_t r = r0; r < std::min(height, r0 + side); ++r)
        for (std::size_t col = c0; col < std::min(width, c0 + side); ++col) {
          const std::size_t i = at(c, r, col);
          cand[i] = std::clamp(x0[i] + s, clip_lo, clip_hi);
        }
    }
    auto [m, f] = query(cand);
    if (m < margin) {
      best.swap(cand);
      margin = m;
      flipped = f;
      out.accepted_margins.push_back(m);
    }
  }
  out.success = flipped;
  out.x_adv = Tensor(x.shape(), std::move(best));
  return out;
}

AttackReport run_attack(const Model& model, const data::Dataset& ds, const AttackSpec& spec,
                        std::size_t batch_size) {
  spec.validate();
  const std::size_t n = ds.size();
  if (n == 0) throw std::invalid_argument("run_attack needs a nonempty dataset");
  const std::size_t width = shape_numel(ds.sample_shape());
  AttackReport rep;
  rep.clean_correct.assign(n, 0);
  rep.success.assign(n, 0);
  rep.queries.assign(n, 0);
  rep.r_min.assign(n, -1.0);
  rep.censored.assign(n, 0);
  rep.norm.assign(n, 0.0);

  AttackSpec s = spec;
  s.clip_lo = std::max(spec.clip_lo, ds.lo);
  s.clip_hi = std::min(spec.clip_hi, ds.hi);
  const bool l2 = spec.family == Family::PgdL2;

  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    std::vector<std::size_t> idx(stop - start);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
    const data::Dataset batch = ds.subset(idx);
    const std::vector<int> clean = argmax_rows(model(batch.x));
    for (std::size_t i = 0; i < idx.size(); ++i) rep.clean_correct[start + i] = clean[i] == batch.y[i];

    if (spec.family == Family::Fgsm || spec.family == Family::PgdLinf || spec.family == Family::PgdL2) {
      Tensor adv;
      std::vector<char> flipped(idx.size(), 0);
      if (spec.family == Family::Fgsm) {
        adv = fgsm(model, batch.x, batch.y, s.epsilon, s.clip_lo, s.clip_hi);
        const std::vector<int> pred = argmax_rows(model(adv));
        for (std::size_t i = 0; i < idx.size(); ++i) flipped[i] = pred[i] != batch.y[i];
      } else {
        PgdOutcome o = pgd_detailed(model, batch.x, batch.y, s, start);
        adv = o.x_adv;
        flipped = o.success;
      }
      const int q = spec.family == Family::Fgsm ? 1 : s.steps * s.restarts;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const std::size_t g = start + i;
        rep.success[g] = rep.clean_correct[g] && flipped[i];
        rep.queries[g] = q;
        const auto a = adv.values().subspan(i * width, width);
        const auto b = batch.x.values().subspan(i * width, width);
        rep.norm[g] = l2 ? l2_distance(a, b) : linf_distance(a, b);
      }
      continue;
    }

    for (std::size_t i = 0; i < idx.size(); ++i) {
      const std::size_t g = start + i;
      if (!rep.clean_correct[g]) continue;
      const std::size_t one[] = {g};
      const data::Dataset single = ds.subset(one);
      if (spec.family == Family::SquareSearch) {
        SquareResult r = square_search(model, single.x, single.y[0], s.epsilon, s.query_budget,
                                       s.clip_lo, s.clip_hi, s.seed, g);
        rep.success[g] = r.success;
        rep.queries[g] = r.queries;
        rep.norm[g] = linf_distance(r.x_adv.values(), single.x.values());
      } else {
        RadiusResult r = min_radius_search(model, single.x, single.y[0], s, g);
        rep.r_min[g] = r.radius;
        rep.censored[g] = r.censored;
        rep.queries[g] = r.queries;
        rep.norm[g] = r.radius;
        rep.success[g] = !r.censored && r.radius <= s.epsilon;
      }
    }
  }

  std::size_t correct = 0, robust = 0;
  for (std::size_t i = 0; i < n; ++i) {
    correct += rep.clean_correct[i];
    robust += rep.clean_correct[i] && !rep.success[i];
  }
  rep.clean_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  rep.robust_accuracy = static_cast<double>(robust) / static_cast<double>(n);
  return rep;
}

double robust_accuracy(const Model& model, const data::Dataset& ds, const AttackSpec& spec) {
  return run_attack(model, ds, spec).robust_accuracy;
}

std::vector<double> robust_accuracy_nested(const Model& model, const data::Dataset& ds,
                                           const AttackSpec& spec,
                                           std::span<const double> budgets) {
  spec.validate();
  if (spec.family != Family::PgdLinf && spec.family != Family::PgdL2)
    throw UnknownAttackError("nested robust accuracy needs a PGD family");
  for (std::size_t i = 1; i < budgets.size(); ++i)
    if (!(budgets[i] > budgets[i - 1]))
      throw std::invalid_argument("nested budgets must be increasing");
  const std::size_t n = ds.size();
  if (n == 0) throw std::invalid_argument("robust_accuracy_nested needs a nonempty dataset");

  const std::vector<int> clean = argmax_rows(model(ds.x));
  std::vector<char> broken(n, 0);
  for (std::size_t i = 0; i < n; ++i) broken[i] = clean[i] != ds.y[i];
  std::vector<double> current;
  std::vector<double> curve;
  const Objective ce = [&](const Tensor& xa) { return softmax_cross_entropy(model(xa), ds.y); };

  for (std::size_t b = 0; b < budgets.size(); ++b) {
    AttackSpec s = spec;
    s.epsilon = budgets[b];
    s.restarts = 1;
    s.validate();
    current = b == 0 ? random_start(ds.x, s, 0, 0) : current;
    Tensor adv = ascend_from(ce, ds.x, current, s);
    current.assign(adv.values().begin(), adv.values().end());
    const std::vector<int> pred = argmax_rows(model(adv));
    std::size_t robust = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pred[i] != ds.y[i]) broken[i] = 1;
      robust += !broken[i];
    }
    curve.push_back(static_cast<double>(robust) / static_cast<double>(n));
  }
  return curve;
}

void write_jsonl(std::ostream& os, const AttackReport& report) {
  for (std::size_t i = 0; i < report.success.size(); ++i) {
    nlohmann::ordered_json row;
    row["index"] = i;
    row["clean_correct"] = static_cast<bool>(report.clean_correct[i]);
    row["success"] = static_cast<bool>(report.success[i]);
    row["queries"] = report.queries[i];
    if (report.r_min[i] >= 0.0) row["r_min"] = report.r_min[i];
    else row["r_min"] = nullptr;
    row["norm"] = report.norm[i];
    os << row.dump() << '\n';
  }
}

}  // namespace pafrob::attack
