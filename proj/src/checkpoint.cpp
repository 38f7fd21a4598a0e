#include "pafrob/checkpoint.hpp"

#include <fstream>

namespace pafrob::nn {

using nlohmann::json;

json architecture_to_json(const Architecture& arch) {
  if (arch.kind == Architecture::Kind::Mlp) return {{"kind", "mlp"}, {"dims", arch.dims}};
  const CnnConfig& c = arch.cnn;
  return {{"kind", "cnn"},           {"in_channels", c.in_channels}, {"height", c.height},
          {"width", c.width},        {"channels1", c.channels1},     {"channels2", c.channels2},
          {"kernel", c.kernel},      {"classes", c.classes}};
}

Architecture architecture_from_json(const json& j) {
  Architecture arch;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "mlp") {
    arch.kind = Architecture::Kind::Mlp;
    arch.dims = j.at("dims").get<std::vector<std::size_t>>();
  } else if (kind == "cnn") {
    arch.kind = Architecture::Kind::Cnn;
    CnnConfig& c = arch.cnn;
    c.in_channels = j.at("in_channels").get<std::size_t>();
    c.height = j.at("height").get<std::size_t>();
    c.width = j.at("width").get<std::size_t>();
    c.channels1 = j.at("channels1").get<std::size_t>();
    c.channels2 = j.at("channels2").get<std::size_t>();
    c.kernel = j.at("kernel").get<std::size_t>();
    c.classes = j.at("classes").get<std::size_t>();
  } else {
    throw CheckpointError("unknown architecture kind '" + kind + "'");
  }
  return arch;
}

json to_json(const Network& net) {
  const act::ActivationSpec spec = net.activation();
  json tensors = json::object();
  for (const Layer& l : net.layers()) {
    if (l.kind != LayerKind::Dense && l.kind != LayerKind::Conv) continue;
    for (const auto& [suffix, t] : {std::pair{".weight", &l.weight}, std::pair{".bias", &l.bias}}) {
      const auto v = t->values();
      tensors[l.name + suffix] = {{"shape", t->shape()},
                                  {"data", std::vector<double>(v.begin(), v.end())}};
    }
  }
  tensors["paf.alpha"] = spec.alpha;
  tensors["paf.beta"] = spec.beta;
  return {{"format", "pafrob-checkpoint"},
          {"version", kCheckpointVersion},
          {"architecture", architecture_to_json(net.architecture())},
          {"activation",
           {{"family", std::string(act::family_name(spec.family))},
            {"alpha_learnable", spec.alpha_learnable},
            {"beta_learnable", spec.beta_learnable}}},
          {"tensors", tensors}};
}

Network from_json(const json& j) {
  try {
    if (j.value("format", "") != "pafrob-checkpoint")
      throw CheckpointError("not a pafrob checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

    const json& a = j.at("activation");
    const json& tensors = j.at("tensors");
    act::ActivationSpec spec;
    spec.family = act::parse_family(a.at("family").get<std::string>());
    spec.alpha = tensors.at("paf.alpha").get<double>();
    spec.beta = tensors.at("paf.beta").get<double>();
    spec.alpha_learnable = a.value("alpha_learnable", false);
    spec.beta_learnable = a.value("beta_learnable", false);
    spec.validate();

    Network net = build(architecture_from_json(j.at("architecture")), spec, 0);
    for (Layer& l : NetworkAccess::layers(net)) {
      if (l.kind != LayerKind::Dense && l.kind != LayerKind::Conv) continue;
      for (const auto& [suffix, t] : {std::pair{".weight", &l.weight}, std::pair{".bias", &l.bias}}) {
        const std::string key = l.name + suffix;
        if (!tensors.contains(key)) throw CheckpointError("checkpoint is missing tensor '" + key + "'");
        const json& entry = tensors.at(key);
        if (entry.at("shape").get<Shape>() != t->shape())
          throw CheckpointError("tensor '" + key + "' has shape " +
                                shape_string(entry.at("shape").get<Shape>()) + ", expected " +
                                shape_string(t->shape()));
        const auto data = entry.at("data").get<std::vector<double>>();
        if (data.size() != t->numel())
          throw CheckpointError("tensor '" + key + "' has " + std::to_string(data.size()) +
                                " values, expected " + std::to_string(t->numel()));
        std::copy(data.begin(), data.end(), t->mutable_values().begin());
      }
    }
    return net;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const act::DomainError& e) {
    throw CheckpointError(std::string("invalid activation in checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out << to_json(net).dump(1) << '\n';
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

}  // namespace pafrob::nn
