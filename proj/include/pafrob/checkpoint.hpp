#pragma once

// Network checkpoints as JSON:
//
//   {
//     "format": "pafrob-checkpoint", "version": 1,
//     "architecture": {"kind": "mlp", "dims": [...]}  |  {"kind": "cnn", ...},
//     "activation": {"family": "PSSiLU", "alpha_learnable": true, "beta_learnable": true},
//     "tensors": {"dense0.weight": {"shape": [...], "data": [...]}, ...,
//                 "paf.alpha": 1.0, "paf.beta": 0.0}
//   }
//
// Doubles are written with round-trip precision, so save/load is exact.

#include <filesystem>
#include <stdexcept>

#include "pafrob/nnet.hpp"
#include "vendor_json.hpp"

namespace pafrob::nn {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json architecture_to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Network& net);
Network from_json(const nlohmann::json& j);

void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace pafrob::nn
