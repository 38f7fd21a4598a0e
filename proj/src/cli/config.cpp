#include "pafrob/cli/config.hpp"

#include <fstream>

#include "pafrob/rng.hpp"

namespace pafrob::cli {

namespace {

Json number_list(std::initializer_list<double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

bool compatible(const Json& def, const Json& v) {
  if (def.is_null()) return v.is_number() || v.is_null();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  if (def.is_array()) {
    if (!v.is_array()) return false;
    for (const Json& e : v)
      if (!e.is_number()) return false;
    return true;
  }
  return false;
}

template <class T>
T get(const Json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

std::size_t get_size(const Json& j, const char* key) {
  const auto v = get<std::int64_t>(j, key);
  if (v < 0) throw ConfigError(std::string("config key '") + key + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

std::filesystem::path required_path(const Json& j, const char* key) {
  const std::string p = get<std::string>(j, key);
  if (p.empty()) throw ConfigError(std::string("config key '") + key + "' is required for IDX data");
  return p;
}

template <class F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

Json default_config() {
  Json c;
  c["seed"] = 12345;
  c["seeds"] = Json::array();
  c["out"] = "runs/default";

  c["data.kind"] = "two_moons";
  c["data.n_train"] = 400;
  c["data.n_test"] = 200;
  c["data.noise"] = 0.1;
  c["data.train_images"] = "";
  c["data.train_labels"] = "";
  c["data.test_images"] = "";
  c["data.test_labels"] = "";
  c["data.limit_train"] = 0;
  c["data.limit_test"] = 0;

  c["model.kind"] = "mlp";
  c["model.hidden"] = number_list({32, 32});
  c["model.channels1"] = 4;
  c["model.channels2"] = 8;
  c["model.kernel"] = 3;

  c["activation.family"] = "PSSiLU";
  c["activation.alpha"] = nullptr;  // null: the family's initial value
  c["activation.beta"] = nullptr;
  c["activation.learnable"] = true;

  c["train.method"] = "pgd_at";
  c["train.epochs"] = 20;
  c["train.batch_size"] = 128;
  c["train.lr0"] = 0.1;
  c["train.trades_beta"] = 0.6;
  c["train.lambda_beta"] = 10.0;
  c["train.beta_grad_clip"] = 0.01;

  c["attack.family"] = "pgd_linf";
  c["attack.epsilon"] = nullptr;  // null: 0.031 (L-inf) or 0.5 (L2)
  c["attack.step_size"] = nullptr;  // null: 0.0078 (L-inf) or 0.075 (L2)
  c["attack.steps"] = 10;
  c["attack.restarts"] = 1;
  c["attack.query_budget"] = 1000;
  c["attack.radius_max"] = 0.25;
  c["attack.radius_tol"] = 1e-3;

  c["eval.pgd_steps"] = 20;
  c["eval.square_budget"] = 1000;
  c["eval.ensemble"] = true;
  c["eval.samples"] = 0;
  c["eval.min_radius_steps"] = 4;
  c["eval.min_radius_step_size"] = 0.0078;
  c["eval.lipschitz_steps"] = 10;
  c["eval.checkpoint"] = "";

  c["sweep.kind"] = "alpha";
  c["sweep.grid"] = Json::array();

  c["shapes.family"] = "PSSiLU";
  c["shapes.param"] = "beta";
  c["shapes.grid"] = number_list({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
  c["shapes.fixed"] = nullptr;  // the other parameter; null: family initial value
  c["shapes.lo"] = -5.0;
  c["shapes.hi"] = 5.0;
  c["shapes.n"] = 2001;
  return c;
}

Json resolve_config(const Json& overrides) {
  if (!overrides.is_object()) throw ConfigError("config must be a JSON object");
  Json c = default_config();
  for (const auto& [key, value] : overrides.items()) {
    if (!c.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    if (!compatible(c[key], value)) throw ConfigError("config key '" + key + "' has the wrong type");
    c[key] = value;
  }

  // Fill family-dependent defaults so the written config is explicit.
  const auto family = guarded([&] { return attack::parse_family(get<std::string>(c, "attack.family")); });
  const bool l2 = family == attack::Family::PgdL2;
  if (c["attack.epsilon"].is_null()) c["attack.epsilon"] = l2 ? 0.5 : 0.031;
  if (c["attack.step_size"].is_null()) c["attack.step_size"] = l2 ? 0.075 : 0.0078;
  const auto paf = guarded([&] { return act::parse_family(get<std::string>(c, "activation.family")); });
  const act::ActivationSpec init = act::ActivationSpec::initial(paf, false);
  if (c["activation.alpha"].is_null()) c["activation.alpha"] = init.alpha;
  if (c["activation.beta"].is_null()) c["activation.beta"] = init.beta;
  return c;
}

Json load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return resolve_config(j);
}

Experiment interpret(const Json& c) {
  return guarded([&] {
    Experiment x;
    x.resolved = c;
    x.seed = get<std::uint64_t>(c, "seed");
    x.seeds = get<std::vector<std::uint64_t>>(c, "seeds");
    if (x.seeds.empty()) x.seeds.push_back(x.seed);
    x.out = get<std::string>(c, "out");

    const act::Family family = act::parse_family(get<std::string>(c, "activation.family"));
    x.activation = act::ActivationSpec::make(family, get<double>(c, "activation.alpha"),
                                             get<double>(c, "activation.beta"),
                                             get<bool>(c, "activation.learnable"));
    x.activation.validate();

    attack::AttackSpec a;
    a.family = attack::parse_family(get<std::string>(c, "attack.family"));
    a.epsilon = get<double>(c, "attack.epsilon");
    a.step_size = get<double>(c, "attack.step_size");
    a.steps = get<int>(c, "attack.steps");
    a.restarts = get<int>(c, "attack.restarts");
    a.query_budget = get<int>(c, "attack.query_budget");
    a.radius_max = get<double>(c, "attack.radius_max");
    a.radius_tol = get<double>(c, "attack.radius_tol");
    a.seed = derive_seed(x.seed, "attack");
    a.validate();
    x.attack = a;

    train::TrainConfig t;
    t.method = train::parse_method(get<std::string>(c, "train.method"));
    t.epochs = get<int>(c, "train.epochs");
    t.batch_size = get_size(c, "train.batch_size");
    t.lr0 = get<double>(c, "train.lr0");
    t.trades_beta = get<double>(c, "train.trades_beta");
    t.lambda_beta = get<double>(c, "train.lambda_beta");
    t.beta_grad_clip = get<double>(c, "train.beta_grad_clip");
    t.seed = x.seed;
    if (a.family == attack::Family::PgdLinf || a.family == attack::Family::PgdL2) {
      t.attack = a;
      t.eval_attack = a;
      t.eval_attack.steps = get<int>(c, "eval.pgd_steps");
    } else if (t.method != train::Method::Standard) {
      throw ConfigError("adversarial training needs attack.family pgd_linf or pgd_l2");
    }
    t.validate();
    x.train = t;

    eval::ReportConfig r;
    r.seed = x.seed;
    r.epsilon = a.epsilon;
    r.pgd = t.eval_attack;
    r.square_budget = get<int>(c, "eval.square_budget");
    r.ensemble = get<bool>(c, "eval.ensemble");
    r.min_radius = attack::AttackSpec::min_radius_default();
    r.min_radius.steps = get<int>(c, "eval.min_radius_steps");
    r.min_radius.step_size = get<double>(c, "eval.min_radius_step_size");
    r.min_radius.radius_max = a.radius_max;
    r.min_radius.radius_tol = a.radius_tol;
    r.lipschitz = attack::AttackSpec::pgd_linf_default();
    r.lipschitz.steps = get<int>(c, "eval.lipschitz_steps");
    if (r.square_budget < 1) throw ConfigError("eval.square_budget must be >= 1");
    r.min_radius.validate();
    r.lipschitz.validate();
    x.report = r;
    x.eval_samples = get_size(c, "eval.samples");
    return x;
  });
}

std::pair<data::Dataset, data::Dataset> make_data(const Json& c, std::uint64_t seed) {
  const std::string kind = get<std::string>(c, "data.kind");
  data::Dataset tr, te;
  if (kind == "two_moons") {
    const std::size_t n_train = get_size(c, "data.n_train"), n_test = get_size(c, "data.n_test");
    const double noise = get<double>(c, "data.noise");
    guarded([&] {
      tr = data::two_moons(n_train, noise, derive_seed(seed, "data.train"));
      te = data::two_moons(n_test, noise, derive_seed(seed, "data.test"));
      return 0;
    });
  } else if (kind == "idx") {
    tr = data::load_idx(required_path(c, "data.train_images"), required_path(c, "data.train_labels"));
    te = data::load_idx(required_path(c, "data.test_images"), required_path(c, "data.test_labels"));
    te.classes = tr.classes = std::max(tr.classes, te.classes);
  } else {
    throw ConfigError("data.kind must be two_moons or idx, got '" + kind + "'");
  }
  if (const std::size_t k = get_size(c, "data.limit_train"); k > 0) tr = tr.head(k);
  if (const std::size_t k = get_size(c, "data.limit_test"); k > 0) te = te.head(k);
  return {std::move(tr), std::move(te)};
}

nn::Architecture make_architecture(const Json& c, const data::Dataset& ds) {
  const std::string kind = get<std::string>(c, "model.kind");
  const Shape sample = ds.sample_shape();
  nn::Architecture arch;
  if (kind == "mlp") {
    if (sample.size() != 1) throw ConfigError("model.kind mlp needs flat inputs; use cnn for images");
    arch.kind = nn::Architecture::Kind::Mlp;
    arch.dims.push_back(sample[0]);
    for (double h : get<std::vector<double>>(c, "model.hidden")) {
      if (h < 1 || h != std::floor(h)) throw ConfigError("model.hidden entries must be positive integers");
      arch.dims.push_back(static_cast<std::size_t>(h));
    }
    arch.dims.push_back(ds.classes);
  } else if (kind == "cnn") {
    if (sample.size() != 3) throw ConfigError("model.kind cnn needs [C,H,W] inputs");
    arch.kind = nn::Architecture::Kind::Cnn;
    arch.cnn.in_channels = sample[0];
    arch.cnn.height = sample[1];
    arch.cnn.width = sample[2];
    arch.cnn.channels1 = get_size(c, "model.channels1");
    arch.cnn.channels2 = get_size(c, "model.channels2");
    arch.cnn.kernel = get_size(c, "model.kernel");
    arch.cnn.classes = ds.classes;
  } else {
    throw ConfigError("model.kind must be mlp or cnn, got '" + kind + "'");
  }
  return arch;
}

}  // namespace pafrob::cli
