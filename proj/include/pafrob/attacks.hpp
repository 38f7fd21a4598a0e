#pragma once

// White-box and black-box adversaries.
//
// Models are plain callables from an input batch to logits, so anything from a
// Network to a call-counting wrapper can be attacked. Every attack output lies
// in its norm ball around the clean input and inside [clip_lo, clip_hi].
// Randomness is per sample: sample i of a batch whose first sample has global
// index k draws from sample_seed(spec.seed, k + i, restart).

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pafrob/data.hpp"
#include "pafrob/nnet.hpp"
#include "pafrob/tensor.hpp"

namespace pafrob::attack {

enum class Family { Fgsm, PgdLinf, PgdL2, SquareSearch, MinRadius };

std::string_view family_name(Family family);

class UnknownAttackError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Throws UnknownAttackError listing the valid names.
Family parse_family(std::string_view name);
std::string family_list();

struct AttackSpec {
  Family family = Family::PgdLinf;
  double epsilon = 0.031;
  double step_size = 0.0078;
  int steps = 10;
  int restarts = 1;
  int query_budget = 1000;
  double clip_lo = 0.0;
  double clip_hi = 1.0;
  std::uint64_t seed = 0;
  bool random_start = true;
  // MinRadius bracket.
  double radius_max = 0.25;
  double radius_tol = 1e-3;

  void validate() const;

  // 10-step L-inf PGD, budget 0.031, step 0.0078.
  static AttackSpec pgd_linf_default();
  // 10-step L2 PGD, budget 0.5, step 0.075.
  static AttackSpec pgd_l2_default();
  // 1000-query square search at budget 0.031.
  static AttackSpec square_default();
  // Binary search over the radius of 4-step L-inf PGD with step 0.0078.
  static AttackSpec min_radius_default();
};

using Model = std::function<Tensor(const Tensor&)>;

// Non-owning; the network must outlive the returned callable.
Model as_model(const nn::Network& net);

// Projections used by every attack; exposed for tests.
void project_linf(std::span<double> x, std::span<const double> center, double eps);
// Per-sample L2 projection; `width` is the number of features per sample.
void project_l2(std::span<double> x, std::span<const double> center, double eps,
                std::size_t width);

// One signed-gradient step of size eps on the mean cross-entropy.
Tensor fgsm(const Model& model, const Tensor& x, std::span<const int> labels, double eps,
            double clip_lo = 0.0, double clip_hi = 1.0);

// Scalar objective to ascend; must be differentiable wrt its argument.
using Objective = std::function<Tensor(const Tensor& x_adv)>;

// One projected-gradient ascent run (no restarts) on an arbitrary objective.
// Uses spec.family (PgdLinf or PgdL2), epsilon, step_size, steps, random_start.
Tensor pgd_ascent(const Objective& objective, const Tensor& x, const AttackSpec& spec,
                  std::uint64_t first_index = 0, int restart = 0);

struct PgdOutcome {
  Tensor x_adv;                  // per sample: the restart with the highest loss
  std::vector<char> success;     // per sample: some restart misclassified it
  std::vector<double> loss;      // per-sample cross-entropy at x_adv
};

// Cross-entropy PGD with restarts.
PgdOutcome pgd_detailed(const Model& model, const Tensor& x, std::span<const int> labels,
                        const AttackSpec& spec, std::uint64_t first_index = 0);

Tensor pgd(const Model& model, const Tensor& x, std::span<const int> labels,
           const AttackSpec& spec, std::uint64_t first_index = 0);

struct RadiusProbe {
  double radius;
  bool success;
  double lo;  // bracket after this probe
  double hi;
};

struct RadiusResult {
  double radius = 0.0;
  bool censored = false;  // attack failed even at radius_max
  int queries = 0;        // gradient evaluations spent
  std::vector<RadiusProbe> probes;
};

class MisclassifiedInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Smallest radius at which seeded PGD (spec.steps, spec.step_size) flips the
// prediction, by bisection on [0, radius_max] down to radius_tol. x is a
// single sample [1, ...]. Every probe reuses the same random stream, so
// success is a deterministic function of the radius.
RadiusResult min_radius_search(const Model& model, const Tensor& x, int label,
                               const AttackSpec& spec, std::uint64_t index = 0);

struct SquareResult {
  Tensor x_adv;
  int queries = 0;
  bool success = false;
  std::vector<double> accepted_margins;  // strictly decreasing
};

// Score-based random search on the margin logit_y - max_{j != y} logit_j.
// Proposals overwrite a square window (all channels) with x +- eps; a proposal
// is kept only if it lowers the margin. Side length starts at
// ceil(0.3 min(H, W)) and halves every budget/5 queries. x is [1, ...]; flat
// inputs [1, d] are treated as a 1 x d image.
SquareResult square_search(const Model& model, const Tensor& x, int label, double eps,
                           int query_budget, double clip_lo = 0.0, double clip_hi = 1.0,
                           std::uint64_t seed = 0, std::uint64_t index = 0);

struct AttackReport {
  std::vector<char> clean_correct;
  std::vector<char> success;  // attack flipped a clean-correct point
  std::vector<int> queries;
  std::vector<double> r_min;  // MinRadius only; negative otherwise
  std::vector<char> censored;
  std::vector<double> norm;   // |x_adv - x| in the attack norm
  double clean_accuracy = 0.0;
  double robust_accuracy = 0.0;
};

// Runs the attack over a dataset. A point is robust if it is classified
// correctly and the attack fails on it; for multi-restart PGD every restart
// must fail. MinRadius counts a point robust when r_min > epsilon.
AttackReport run_attack(const Model& model, const data::Dataset& ds, const AttackSpec& spec,
                        std::size_t batch_size = 64);

double robust_accuracy(const Model& model, const data::Dataset& ds, const AttackSpec& spec);

// Robust accuracy at increasing budgets. Each budget's PGD starts from the
// previous budget's adversarial point and successes carry over, so the curve
// is non-increasing. `budgets` must be increasing.
std::vector<double> robust_accuracy_nested(const Model& model, const data::Dataset& ds,
                                           const AttackSpec& spec,
                                           std::span<const double> budgets);

// JSON lines {index, clean_correct, success, queries, r_min, norm}.
void write_jsonl(std::ostream& os, const AttackReport& report);

}  // namespace pafrob::attack
