#include "pafrob/cli/commands.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "pafrob/checkpoint.hpp"
#include "pafrob/cli/config.hpp"
#include "pafrob/csv.hpp"
#include "pafrob/eval.hpp"
#include "pafrob/rng.hpp"
#include "pafrob/training.hpp"

namespace pafrob::cli {

namespace {

namespace fs = std::filesystem;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  // Command-specific.
  std::string checkpoint;
  std::string attack;
  std::optional<double> epsilon;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config file (flat dotted keys)");
  sub->add_option("--seed", c.seed, "Root seed; overrides the config");
  sub->add_option("--out", c.out, "Output directory; overrides the config");
}

Experiment setup(const Common& c) {
  Json overrides = Json::object();
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) throw ConfigError("cannot read config file " + c.config);
    try {
      overrides = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config file " + c.config + " is not valid JSON: " + e.what());
    }
  }
  if (c.seed) overrides["seed"] = *c.seed;
  if (!c.out.empty()) overrides["out"] = c.out;
  return interpret(resolve_config(overrides));
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

void prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

data::Dataset eval_set(const Experiment& x) {
  data::Dataset test = make_data(x.resolved, x.seed).second;
  return x.eval_samples > 0 ? test.head(x.eval_samples) : test;
}

nn::Network checkpoint_for(const Common& c, const Experiment& x) {
  std::string path = c.checkpoint;
  if (path.empty()) path = x.resolved.at("eval.checkpoint").get<std::string>();
  if (path.empty()) throw ConfigError("no checkpoint given (--checkpoint or eval.checkpoint)");
  return nn::load_checkpoint(path);
}

int cmd_train(const Common& c, std::ostream& out) {
  const Experiment x = setup(c);
  auto [train_ds, test_ds] = make_data(x.resolved, x.seed);
  nn::Network net = nn::build(make_architecture(x.resolved, train_ds), x.activation, x.seed);
  const train::TrainResult tr = train::train(net, train_ds, test_ds, x.train);

  const data::Dataset ev = x.eval_samples > 0 ? test_ds.head(x.eval_samples) : test_ds;
  const eval::RobustnessReport report = eval::full_report(tr.best, ev, x.report, "best");

  std::ostringstream history;
  train::write_history_csv(history, tr.history);
  Json rep = eval::to_json(report);
  rep["best_epoch"] = tr.best_epoch;

  prepare_out(x.out);
  write_file(x.out / "config.json", dump(x.resolved));
  write_file(x.out / "checkpoint.json", dump(nn::to_json(tr.best)));
  write_file(x.out / "history.csv", history.str());
  write_file(x.out / "report.json", dump(rep));
  const train::HistoryRow& best = tr.history[static_cast<std::size_t>(tr.best_epoch)];
  out << "best epoch " << tr.best_epoch << ": clean_acc=" << format_double(best.clean_acc)
      << " pgd_acc=" << format_double(best.pgd_acc) << " alpha=" << format_double(best.alpha)
      << " beta=" << format_double(best.beta) << "\n"
      << "wrote " << x.out.string() << "\n";
  return kExitOk;
}

int cmd_sweep(const Common& c, std::ostream& out) {
  const Experiment x = setup(c);
  const std::string kind = x.resolved.at("sweep.kind").get<std::string>();
  const auto grid = x.resolved.at("sweep.grid").get<std::vector<double>>();
  if (grid.empty()) throw ConfigError("sweep.grid is empty");
  if (kind != "alpha" && kind != "beta" && kind != "lambda")
    throw ConfigError("sweep.kind must be alpha, beta or lambda, got '" + kind + "'");

  eval::SweepSetup s;
  s.train = x.train;
  s.eval = x.report;
  s.seeds = x.seeds;
  const Json resolved = x.resolved;
  s.data = [resolved](std::uint64_t seed) { return make_data(resolved, seed); };
  s.arch = make_architecture(x.resolved, make_data(x.resolved, x.seeds.front()).first);

  std::vector<eval::SweepRow> rows;
  if (kind == "lambda") {
    rows = eval::lambda_sweep(grid, s);
  } else {
    if (!act::is_parametric(x.activation.family))
      throw ConfigError("a shape sweep needs a parametric activation.family");
    if (kind == "beta" && x.activation.family != act::Family::PSSiLU)
      throw ConfigError("sweep.kind beta needs activation.family PSSiLU");
    rows = eval::shape_sweep(x.activation,
                             kind == "alpha" ? eval::SweepParam::Alpha : eval::SweepParam::Beta,
                             grid, s);
  }
  std::ostringstream csv;
  eval::write_sweep_csv(csv, rows, kind == "lambda");
  prepare_out(x.out);
  write_file(x.out / "config.json", dump(x.resolved));
  write_file(x.out / "sweep.csv", csv.str());
  out << "wrote " << rows.size() << " rows to " << (x.out / "sweep.csv").string() << "\n";
  return kExitOk;
}

int cmd_attack(const Common& c, std::ostream& out) {
  const Experiment x = setup(c);
  std::string name = c.attack.empty() ? x.resolved.at("attack.family").get<std::string>() : c.attack;
  const bool ensemble = name == "ensemble";
  attack::AttackSpec spec = x.attack;
  if (!ensemble) {
    const attack::Family f = attack::parse_family(name);
    if (f != spec.family) {
      // Family switched on the command line: take that family's defaults.
      const std::uint64_t seed = spec.seed;
      const int steps = spec.steps, restarts = spec.restarts;
      switch (f) {
        case attack::Family::PgdL2: spec = attack::AttackSpec::pgd_l2_default(); break;
        case attack::Family::SquareSearch: spec = attack::AttackSpec::square_default(); break;
        case attack::Family::MinRadius: spec = x.report.min_radius; break;
        default: spec = attack::AttackSpec::pgd_linf_default(); break;
      }
      spec.family = f;
      spec.seed = seed;
      if (f == attack::Family::PgdLinf) spec.steps = steps, spec.restarts = restarts;
      if (f == attack::Family::SquareSearch) spec.query_budget = x.attack.query_budget;
    }
  }
  if (c.epsilon) spec.epsilon = *c.epsilon;
  spec.validate();

  const nn::Network net = checkpoint_for(c, x);
  const data::Dataset ds = eval_set(x);
  const attack::Model model = attack::as_model(net);

  attack::AttackReport rep;
  if (ensemble) {
    eval::EnsembleSpec e = eval::default_ensemble(spec.epsilon, x.seed);
    e.square.query_budget = x.report.square_budget;
    const eval::EnsembleResult r = eval::run_ensemble(model, ds, e);
    rep = r.pgd;
    rep.success = r.success;
    for (std::size_t i = 0; i < rep.queries.size(); ++i) rep.queries[i] += r.square.queries[i];
    rep.robust_accuracy = r.robust_accuracy;
  } else {
    rep = attack::run_attack(model, ds, spec);
  }

  std::ostringstream lines;
  attack::write_jsonl(lines, rep);
  prepare_out(x.out);
  write_file(x.out / "attack.jsonl", lines.str());
  out << "attack=" << (ensemble ? std::string("ensemble") : std::string(attack::family_name(spec.family)))
      << " epsilon=" << format_double(spec.epsilon)
      << " clean_accuracy=" << format_double(rep.clean_accuracy)
      << " robust_accuracy=" << format_double(rep.robust_accuracy) << "\n";
  return kExitOk;
}

int cmd_shapes(const Common& c, std::ostream& out) {
  const Experiment x = setup(c);
  const Json& r = x.resolved;
  act::Grid grid;
  grid.lo = r.at("shapes.lo").get<double>();
  grid.hi = r.at("shapes.hi").get<double>();
  grid.n = r.at("shapes.n").get<std::size_t>();
  if (grid.n < 2 || !(grid.lo < grid.hi)) throw ConfigError("shapes grid needs n >= 2 and lo < hi");

  std::vector<std::pair<std::string, std::string>> files;
  auto emit = [&](const std::string& name, const act::ActivationSpec& spec) {
    std::ostringstream os;
    eval::learned_shape_export(os, spec, grid);
    files.emplace_back(name, os.str());
  };

  if (!c.checkpoint.empty() || !r.at("eval.checkpoint").get<std::string>().empty()) {
    const nn::Network net = checkpoint_for(c, x);
    emit("shape_learned.csv", net.activation());
  } else {
    const act::Family family = act::parse_family(r.at("shapes.family").get<std::string>());
    const std::string param = r.at("shapes.param").get<std::string>();
    const auto values = r.at("shapes.grid").get<std::vector<double>>();
    const act::ActivationSpec init = act::ActivationSpec::initial(family, false);
    const Json& fixed = r.at("shapes.fixed");
    const std::string fname(act::family_name(family));
    if (!act::is_parametric(family)) {
      emit("shape_" + fname + ".csv", init);
    } else {
      if (param != "alpha" && param != "beta") throw ConfigError("shapes.param must be alpha or beta");
      if (param == "beta" && family != act::Family::PSSiLU)
        throw ConfigError("shapes.param beta needs shapes.family PSSiLU");
      if (values.empty()) throw ConfigError("shapes.grid is empty");
      for (double v : values) {
        double alpha = init.alpha, beta = init.beta;
        if (param == "alpha") {
          alpha = v;
          if (!fixed.is_null()) beta = fixed.get<double>();
        } else {
          beta = v;
          if (!fixed.is_null()) alpha = fixed.get<double>();
        }
        const act::ActivationSpec spec = act::ActivationSpec::make(family, alpha, beta);
        try {
          spec.validate();
        } catch (const std::invalid_argument& e) {
          throw ConfigError(e.what());
        }
        emit("shape_" + fname + "_" + param + "_" + format_double(v) + ".csv", spec);
      }
    }
  }
  emit("shape_ReLU.csv", act::ActivationSpec::initial(act::Family::ReLU, false));

  prepare_out(x.out);
  write_file(x.out / "config.json", dump(x.resolved));
  for (const auto& [name, text] : files) write_file(x.out / name, text);
  out << "wrote " << files.size() << " shape files to " << x.out.string() << "\n";
  return kExitOk;
}

int cmd_lipschitz(const Common& c, std::ostream& out) {
  const Experiment x = setup(c);
  const nn::Network net = checkpoint_for(c, x);
  const data::Dataset ds = eval_set(x);
  attack::AttackSpec spec = x.report.lipschitz;
  spec.seed = derive_seed(x.seed, "lipschitz");
  if (c.epsilon) spec.epsilon = *c.epsilon;
  const eval::LipschitzResult l = eval::empirical_lipschitz(attack::as_model(net), ds, spec);

  Json j;
  j["empirical_lipschitz"] = l.value;
  j["used"] = l.used;
  j["skipped"] = l.skipped;
  j["epsilon"] = spec.epsilon;
  j["step_size"] = spec.step_size;
  j["steps"] = spec.steps;
  prepare_out(x.out);
  write_file(x.out / "lipschitz.json", dump(j));
  out << "empirical_lipschitz=" << format_double(l.value) << " used=" << l.used
      << " skipped=" << l.skipped << "\n";
  return kExitOk;
}

int cmd_report(const Common& c, std::ostream& out) {
  const Experiment x = setup(c);
  const nn::Network net = checkpoint_for(c, x);
  const data::Dataset ds = eval_set(x);
  const eval::RobustnessReport rep = eval::full_report(net, ds, x.report, c.checkpoint);
  prepare_out(x.out);
  write_file(x.out / "report.json", dump(eval::to_json(rep)));
  out << "clean_acc=" << format_double(rep.clean_acc);
  for (const auto& [name, v] : rep.robust_acc) out << " " << name << "=" << format_double(v);
  out << " mean_min_radius=" << format_double(rep.mean_min_radius) << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robustness experiments with parametric activation functions", "pafrob"};
  app.require_subcommand(1);
  Common c;
  CLI::App* train = app.add_subcommand("train", "Train a model; writes checkpoint, history, report");
  CLI::App* sweep = app.add_subcommand("sweep", "Activation-parameter or lambda sweep; writes sweep.csv");
  CLI::App* atk = app.add_subcommand("attack", "Attack a checkpoint; writes attack.jsonl");
  CLI::App* shapes = app.add_subcommand("shapes", "Export activation shape curves as CSV");
  CLI::App* lip = app.add_subcommand("lipschitz", "Empirical Lipschitz estimate of a checkpoint");
  CLI::App* report = app.add_subcommand("report", "Full robustness report of a checkpoint");
  for (CLI::App* sub : {train, sweep, atk, shapes, lip, report}) add_common(sub, c);
  for (CLI::App* sub : {atk, shapes, lip, report})
    sub->add_option("--checkpoint", c.checkpoint, "Checkpoint JSON written by train");
  atk->add_option("--attack", c.attack, "Attack family: " + attack::family_list() + ", ensemble");
  atk->add_option("--epsilon", c.epsilon, "Perturbation budget");
  lip->add_option("--epsilon", c.epsilon, "Perturbation budget");

  std::vector<std::string> argv_store{"pafrob"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*train) return cmd_train(c, out);
    if (*sweep) return cmd_sweep(c, out);
    if (*atk) return cmd_attack(c, out);
    if (*shapes) return cmd_shapes(c, out);
    if (*lip) return cmd_lipschitz(c, out);
    if (*report) return cmd_report(c, out);
  } catch (const attack::UnknownAttackError& e) {
    err << "usage error: " << e.what() << " (or ensemble)\n";
    return kExitUsage;
  } catch (const nn::CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const data::IdxError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace pafrob::cli
