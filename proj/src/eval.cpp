#include "pafrob/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "pafrob/csv.hpp"
#include "pafrob/rng.hpp"

namespace pafrob::eval {

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

attack::AttackSpec with_seed(attack::AttackSpec spec, std::uint64_t root, std::string_view name) {
  spec.seed = derive_seed(root, name);
  return spec;
}

}  // namespace

LipschitzResult empirical_lipschitz(const attack::Model& f, const data::Dataset& ds,
                                    const attack::AttackSpec& spec) {
  if (ds.size() == 0) throw std::invalid_argument("empirical_lipschitz needs a nonempty dataset");
  if (spec.family != attack::Family::PgdLinf)
    throw std::invalid_argument("empirical_lipschitz needs an L-inf PGD spec");
  attack::AttackSpec s = spec;
  s.clip_lo = std::max(s.clip_lo, ds.lo);
  s.clip_hi = std::min(s.clip_hi, ds.hi);

  const Tensor fx = f(ds.x).detach();
  const attack::Objective numerator = [&](const Tensor& xa) { return sum(abs(f(xa) - fx)); };
  const Tensor x_hat = attack::pgd_ascent(numerator, ds.x, s);
  const Tensor fh = f(x_hat);

  const std::size_t n = ds.size();
  const std::size_t in_w = ds.x.numel() / n, out_w = fx.numel() / n;
  LipschitzResult r;
  r.ratios.assign(n, std::numeric_limits<double>::quiet_NaN());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double den = 0.0, num = 0.0;
    for (std::size_t j = 0; j < in_w; ++j)
      den = std::max(den, std::abs(ds.x.at(i * in_w + j) - x_hat.at(i * in_w + j)));
    if (den == 0.0) {
      ++r.skipped;
      continue;
    }
    for (std::size_t j = 0; j < out_w; ++j) num += std::abs(fx.at(i * out_w + j) - fh.at(i * out_w + j));
    r.ratios[i] = num / den;
    total += r.ratios[i];
    ++r.used;
  }
  if (r.used == 0)
    throw DegenerateLipschitzError("empirical_lipschitz: every sample ended at x_hat == x");
  r.value = total / static_cast<double>(r.used);
  return r;
}

EnsembleSpec default_ensemble(double epsilon, std::uint64_t seed) {
  EnsembleSpec e;
  e.pgd = attack::AttackSpec::pgd_linf_default();
  e.pgd.epsilon = epsilon;
  e.pgd.restarts = 5;
  e.pgd.steps = 50;
  e.pgd.seed = derive_seed(seed, "ensemble.pgd");
  e.square = attack::AttackSpec::square_default();
  e.square.epsilon = epsilon;
  e.square.seed = derive_seed(seed, "ensemble.square");
  return e;
}

EnsembleResult run_ensemble(const attack::Model& model, const data::Dataset& ds,
                            const EnsembleSpec& spec) {
  EnsembleResult r;
  r.pgd = attack::run_attack(model, ds, spec.pgd);
  r.square = attack::run_attack(model, ds, spec.square);
  const std::size_t n = ds.size();
  r.success.assign(n, 0);
  std::size_t robust = 0;
  for (std::size_t i = 0; i < n; ++i) {
    r.success[i] = r.pgd.success[i] || r.square.success[i];
    robust += r.pgd.clean_correct[i] && !r.success[i];
  }
  r.robust_accuracy = static_cast<double>(robust) / static_cast<double>(n);
  return r;
}

ShapeStats shape_stats(const nn::Network& net, const data::Dataset& ds, const ReportConfig& cfg) {
  const attack::Model model = attack::as_model(net);
  attack::AttackSpec square = attack::AttackSpec::square_default();
  square.epsilon = cfg.epsilon;
  square.query_budget = cfg.square_budget;
  square = with_seed(square, cfg.seed, "square");
  const attack::AttackReport sq = attack::run_attack(model, ds, square);
  const attack::AttackReport mr =
      attack::run_attack(model, ds, with_seed(cfg.min_radius, cfg.seed, "min_radius"));

  ShapeStats s;
  s.clean_acc = sq.clean_accuracy;
  s.square_acc = sq.robust_accuracy;
  std::vector<double> radii;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!mr.clean_correct[i]) continue;
    radii.push_back(mr.r_min[i]);
    s.censored += mr.censored[i];
  }
  s.mean_min_radius = mean_of(radii);
  return s;
}

RobustnessReport full_report(const nn::Network& net, const data::Dataset& ds,
                             const ReportConfig& cfg, const std::string& model_id) {
  const attack::Model model = attack::as_model(net);
  RobustnessReport r;
  r.model_id = model_id;
  r.family = std::string(act::family_name(net.family()));

  attack::AttackSpec pgd = with_seed(cfg.pgd, cfg.seed, "pgd");
  pgd.epsilon = cfg.epsilon;
  const attack::AttackReport pr = attack::run_attack(model, ds, pgd);
  r.clean_acc = pr.clean_accuracy;
  r.robust_acc.emplace_back(std::string(attack::family_name(pgd.family)), pr.robust_accuracy);

  if (cfg.ensemble) {
    EnsembleSpec ens = default_ensemble(cfg.epsilon, cfg.seed);
    ens.square.query_budget = cfg.square_budget;
    const EnsembleResult er = run_ensemble(model, ds, ens);
    r.robust_acc.emplace_back("pgd5x50", er.pgd.robust_accuracy);
    r.robust_acc.emplace_back("square_search", er.square.robust_accuracy);
    r.robust_acc.emplace_back(ens.label, er.robust_accuracy);
    r.ensemble = ens.label;
  }

  const attack::AttackReport mr =
      attack::run_attack(model, ds, with_seed(cfg.min_radius, cfg.seed, "min_radius"));
  std::vector<double> radii;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!mr.clean_correct[i]) continue;
    radii.push_back(mr.r_min[i]);
    r.censored += mr.censored[i];
  }
  r.radius_points = radii.size();
  r.mean_min_radius = mean_of(radii);

  attack::AttackSpec lip = with_seed(cfg.lipschitz, cfg.seed, "lipschitz");
  try {
    const LipschitzResult l = empirical_lipschitz(model, ds, lip);
    r.empirical_lipschitz = l.value;
    r.lipschitz_skipped = l.skipped;
  } catch (const DegenerateLipschitzError&) {
    r.empirical_lipschitz = 0.0;
    r.lipschitz_skipped = ds.size();
  }

  const act::ActivationSpec a = net.activation();
  r.alpha_final = a.alpha;
  r.beta_final = a.beta;
  r.curvature_final = act::curvature(a, act::Grid{});
  return r;
}

nlohmann::ordered_json to_json(const RobustnessReport& r) {
  nlohmann::ordered_json j;
  j["model_id"] = r.model_id;
  j["family"] = r.family;
  j["clean_acc"] = r.clean_acc;
  nlohmann::ordered_json acc = nlohmann::ordered_json::object();
  for (const auto& [name, value] : r.robust_acc) acc[name] = value;
  j["robust_acc"] = acc;
  j["ensemble"] = r.ensemble;
  j["mean_min_radius"] = r.mean_min_radius;
  j["censored"] = r.censored;
  j["radius_points"] = r.radius_points;
  j["empirical_lipschitz"] = r.empirical_lipschitz;
  j["lipschitz_skipped"] = r.lipschitz_skipped;
  j["alpha_final"] = r.alpha_final;
  j["beta_final"] = r.beta_final;
  j["curvature_final"] = r.curvature_final;
  return j;
}

std::vector<SweepRow> shape_sweep(const act::ActivationSpec& base, SweepParam param,
                                  const std::vector<double>& grid, const SweepSetup& setup) {
  if (grid.empty()) throw std::invalid_argument("shape_sweep needs a nonempty grid");
  if (setup.seeds.empty()) throw std::invalid_argument("shape_sweep needs at least one seed");
  std::vector<SweepRow> rows;
  for (double v : grid) {
    act::ActivationSpec spec = base;
    (param == SweepParam::Alpha ? spec.alpha : spec.beta) = v;
    spec.alpha_learnable = spec.beta_learnable = false;
    spec.validate();
    for (std::uint64_t seed : setup.seeds) {
      const auto [train_ds, test_ds] = setup.data(seed);
      train::TrainConfig cfg = setup.train;
      cfg.method = train::Method::Standard;
      cfg.seed = seed;
      nn::Network net = nn::build(setup.arch, spec, seed);
      const train::TrainResult tr = train::train(net, train_ds, test_ds, cfg);
      ReportConfig ec = setup.eval;
      ec.seed = seed;
      const ShapeStats s = shape_stats(tr.best, test_ds, ec);
      SweepRow row;
      row.param = v;
      row.seed = seed;
      row.square_acc = s.square_acc;
      row.mean_min_radius = s.mean_min_radius;
      row.censored = s.censored;
      row.clean_acc = s.clean_acc;
      row.beta_final = spec.beta;
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<SweepRow> lambda_sweep(const std::vector<double>& grid, const SweepSetup& setup) {
  if (grid.empty()) throw std::invalid_argument("lambda_sweep needs a nonempty grid");
  if (setup.seeds.empty()) throw std::invalid_argument("lambda_sweep needs at least one seed");
  std::vector<SweepRow> rows;
  for (double lambda : grid) {
    for (std::uint64_t seed : setup.seeds) {
      const auto [train_ds, test_ds] = setup.data(seed);
      train::TrainConfig cfg = setup.train;
      cfg.lambda_beta = lambda;
      cfg.seed = seed;
      nn::Network net =
          nn::build(setup.arch, act::ActivationSpec::initial(act::Family::PSSiLU), seed);
      const train::TrainResult tr = train::train(net, train_ds, test_ds, cfg);
      ReportConfig ec = setup.eval;
      ec.seed = seed;
      const ShapeStats s = shape_stats(tr.best, test_ds, ec);
      SweepRow row;
      row.param = lambda;
      row.seed = seed;
      row.square_acc = s.square_acc;
      row.mean_min_radius = s.mean_min_radius;
      row.censored = s.censored;
      row.clean_acc = s.clean_acc;
      row.pgd_acc = tr.history[static_cast<std::size_t>(tr.best_epoch)].pgd_acc;
      row.beta_final = tr.best.beta().item();
      rows.push_back(row);
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, bool lambda_columns) {
  std::vector<std::string> header = {"param", "seed", "square_acc", "mean_min_radius", "censored"};
  if (lambda_columns) header.insert(header.end(), {"clean_acc", "pgd_acc", "beta_final"});
  write_csv_row(os, header);
  for (const SweepRow& r : rows) {
    std::vector<std::string> f = {format_double(r.param), std::to_string(r.seed),
                                  format_double(r.square_acc), format_double(r.mean_min_radius),
                                  std::to_string(r.censored)};
    if (lambda_columns)
      f.insert(f.end(), {format_double(r.clean_acc), format_double(r.pgd_acc),
                         format_double(r.beta_final)});
    write_csv_row(os, f);
  }
}

void learned_shape_export(std::ostream& os, const act::ActivationSpec& spec,
                          const act::Grid& grid) {
  spec.validate();
  const std::string family(act::family_name(spec.family));
  const std::string alpha = format_double(spec.alpha), beta = format_double(spec.beta);
  write_csv_row(os, {"x", "y", "family", "alpha", "beta"});
  for (double x : act::grid_points(grid))
    write_csv_row(os, {format_double(x), format_double(act::value(spec, x)), family, alpha, beta});
}

void learned_shape_export(std::ostream& os, const nn::Network& net, const act::Grid& grid) {
  learned_shape_export(os, net.activation(), grid);
}

}  // namespace pafrob::eval
