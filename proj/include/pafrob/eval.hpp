#pragma once

// Robustness measurements: attack ensembles, minimum radii, empirical
// Lipschitz estimates, parameter sweeps and learned-shape exports.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "pafrob/activations.hpp"
#include "pafrob/attacks.hpp"
#include "pafrob/data.hpp"
#include "pafrob/nnet.hpp"
#include "pafrob/training.hpp"
#include "pafrob/vendor_json.hpp"

namespace pafrob::eval {

struct LipschitzResult {
  double value = 0.0;        // mean ratio over the samples used
  std::size_t used = 0;
  std::size_t skipped = 0;   // x_hat == x after the ascent
  std::vector<double> ratios;  // per sample; NaN where skipped
};

class DegenerateLipschitzError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mean over samples of |f(x) - f(x_hat)|_1 / |x - x_hat|_inf, x_hat from
// L-inf PGD ascending the numerator. Throws DegenerateLipschitzError when
// every sample ends at x_hat == x.
LipschitzResult empirical_lipschitz(const attack::Model& f, const data::Dataset& ds,
                                    const attack::AttackSpec& spec);

// PGD with restarts unioned with square search: a point falls if either
// member breaks it.
struct EnsembleSpec {
  attack::AttackSpec pgd;
  attack::AttackSpec square;
  std::string label = "pgd5x50+square";
};
EnsembleSpec default_ensemble(double epsilon, std::uint64_t seed);

struct EnsembleResult {
  attack::AttackReport pgd;
  attack::AttackReport square;
  std::vector<char> success;
  double robust_accuracy = 0.0;
};
EnsembleResult run_ensemble(const attack::Model& model, const data::Dataset& ds,
                            const EnsembleSpec& spec);

struct ReportConfig {
  double epsilon = 0.031;
  std::uint64_t seed = 0;
  attack::AttackSpec pgd = attack::AttackSpec::pgd_linf_default();
  attack::AttackSpec min_radius = attack::AttackSpec::min_radius_default();
  attack::AttackSpec lipschitz = attack::AttackSpec::pgd_linf_default();
  int square_budget = 1000;
  bool ensemble = true;
};

struct RobustnessReport {
  std::string model_id;
  std::string family;
  double clean_acc = 0.0;
  std::vector<std::pair<std::string, double>> robust_acc;  // attack label -> accuracy
  std::string ensemble;                                    // label of the union entry
  double mean_min_radius = 0.0;  // over clean-correct points; censored count as radius_max
  std::size_t censored = 0;
  std::size_t radius_points = 0;
  double empirical_lipschitz = 0.0;
  std::size_t lipschitz_skipped = 0;
  double alpha_final = 0.0;
  double beta_final = 0.0;
  double curvature_final = 0.0;  // max second derivative on [-10, 10]
};

RobustnessReport full_report(const nn::Network& net, const data::Dataset& ds,
                             const ReportConfig& cfg, const std::string& model_id);

nlohmann::ordered_json to_json(const RobustnessReport& report);

// Square-search accuracy and min-radius statistics of one network.
struct ShapeStats {
  double clean_acc = 0.0;
  double square_acc = 0.0;
  double mean_min_radius = 0.0;
  std::size_t censored = 0;
};
ShapeStats shape_stats(const nn::Network& net, const data::Dataset& ds, const ReportConfig& cfg);

struct SweepRow {
  double param = 0.0;
  std::uint64_t seed = 0;
  double square_acc = 0.0;
  double mean_min_radius = 0.0;
  std::size_t censored = 0;
  // Filled by lambda sweeps.
  double clean_acc = 0.0;
  double pgd_acc = 0.0;
  double beta_final = 0.0;
};

// (train, test) for a seed.
using DataFactory = std::function<std::pair<data::Dataset, data::Dataset>(std::uint64_t seed)>;

enum class SweepParam { Alpha, Beta };

struct SweepSetup {
  nn::Architecture arch;
  train::TrainConfig train;  // method is forced to standard for shape sweeps
  ReportConfig eval;
  DataFactory data;
  std::vector<std::uint64_t> seeds;
};

// Standard-trains one network per (grid value, seed) with the activation
// parameter fixed at the grid value; `base` supplies the other parameter.
// Rows are grid-major.
std::vector<SweepRow> shape_sweep(const act::ActivationSpec& base, SweepParam param,
                                  const std::vector<double>& grid, const SweepSetup& setup);

// PSSiLU with learnable (alpha, beta) trained with setup.train for each
// regularization weight in the grid.
std::vector<SweepRow> lambda_sweep(const std::vector<double>& grid, const SweepSetup& setup);

// Header param,seed,square_acc,mean_min_radius,censored (plus
// clean_acc,pgd_acc,beta_final when `lambda_columns`).
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, bool lambda_columns);

// Columns x,y,family,alpha,beta over the grid (default 2001 points on [-5, 5]).
void learned_shape_export(std::ostream& os, const act::ActivationSpec& spec,
                          const act::Grid& grid = {-5.0, 5.0, 2001});
void learned_shape_export(std::ostream& os, const nn::Network& net,
                          const act::Grid& grid = {-5.0, 5.0, 2001});

}  // namespace pafrob::eval
