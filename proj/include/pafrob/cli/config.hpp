#pragma once

// Experiment configuration: one flat JSON object whose keys are dotted paths,
//
//   {"seed": 7, "train.method": "pgd_at", "attack.epsilon": 0.05, ...}
//
// Every key has a default (the training recipe of the robust PAF models);
// a config file only lists the keys it changes. Unknown keys are rejected.
// The fully resolved config is what gets written beside a run's outputs, so
// feeding it back reproduces the run.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pafrob/activations.hpp"
#include "pafrob/attacks.hpp"
#include "pafrob/data.hpp"
#include "pafrob/eval.hpp"
#include "pafrob/nnet.hpp"
#include "pafrob/training.hpp"
#include "pafrob/vendor_json.hpp"

namespace pafrob::cli {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Json = nlohmann::ordered_json;

Json default_config();

// Defaults overlaid with `overrides`; throws ConfigError on unknown keys or
// mistyped values.
Json resolve_config(const Json& overrides);
Json load_config(const std::filesystem::path& path);

struct Experiment {
  Json resolved;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out;
  act::ActivationSpec activation;
  train::TrainConfig train;
  attack::AttackSpec attack;
  eval::ReportConfig report;
  std::size_t eval_samples = 0;  // 0: whole test set
};

// Typed view; validates every section.
Experiment interpret(const Json& resolved);

// (train, test) for a seed, per the data.* keys. Throws data::IdxError or
// ConfigError.
std::pair<data::Dataset, data::Dataset> make_data(const Json& resolved, std::uint64_t seed);

// Input/output sizes come from the dataset.
nn::Architecture make_architecture(const Json& resolved, const data::Dataset& ds);

}  // namespace pafrob::cli
