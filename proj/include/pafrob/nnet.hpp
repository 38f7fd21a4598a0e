#pragma once

// Small feed-forward classifiers whose activation sites all share one
// ActivationSpec and one pair of parameter tensors (alpha, beta).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pafrob/activations.hpp"
#include "pafrob/tensor.hpp"

namespace pafrob::nn {

enum class LayerKind { Dense, Conv, Flatten, Activation };

struct Layer {
  LayerKind kind = LayerKind::Dense;
  std::string name;
  Tensor weight;  // Dense: [in, out]; Conv: [out, in, k, k]
  Tensor bias;    // Dense: [out];     Conv: [out]
  Conv2dOptions conv;
};

struct CnnConfig {
  std::size_t in_channels = 1;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t channels1 = 4;
  std::size_t channels2 = 8;
  std::size_t kernel = 3;
  std::size_t classes = 2;
};

struct Architecture {
  enum class Kind { Mlp, Cnn };
  Kind kind = Kind::Mlp;
  std::vector<std::size_t> dims;  // Mlp only: [d0, ..., dk]
  CnnConfig cnn;                  // Cnn only
};

class Network {
 public:
  // Logits [N, classes]. Input is [N, d0] for MLPs and [N, C, H, W] for CNNs.
  Tensor forward(const Tensor& x) const;

  // Activation with the current parameter values.
  act::ActivationSpec activation() const;
  act::Family family() const { return family_; }

  // Shared parameter tensors; always one element. requires_grad mirrors the
  // learnable flags of the ActivationSpec the network was built with.
  const Tensor& alpha() const { return alpha_; }
  const Tensor& beta() const { return beta_; }
  void set_activation_parameters(double alpha, double beta);

  // Resets parametric activations to their nonparametric shapes.
  void init_to_nonparametric();

  // Weights and biases (theta), in layer order.
  std::vector<Tensor> weights() const;
  // Learnable activation scalars: 0, 1 or 2 tensors.
  std::vector<Tensor> paf_parameters() const;
  std::vector<Tensor> learnable_parameters() const;

  std::size_t weight_count() const;
  std::size_t paf_parameter_count() const;

  const std::vector<Layer>& layers() const { return layers_; }
  const Architecture& architecture() const { return arch_; }
  Shape input_shape() const;  // without the batch dimension
  std::size_t classes() const;

  void zero_grad();

  // Deep copy; the copy shares no tensors with this network.
  Network clone() const;

 private:
  friend Network build(const Architecture&, const act::ActivationSpec&, std::uint64_t);
  friend class NetworkAccess;

  Architecture arch_;
  std::vector<Layer> layers_;
  act::Family family_ = act::Family::ReLU;
  Tensor alpha_;
  Tensor beta_;
};

// Weights are drawn uniformly in +-1/sqrt(fan_in) from the "init" stream of seed.
Network build(const Architecture& arch, const act::ActivationSpec& activation,
              std::uint64_t seed);

// Dense-activation alternation ending in a linear logit layer. dims.size() >= 2.
Network build_mlp(const std::vector<std::size_t>& dims, const act::ActivationSpec& activation,
                  std::uint64_t seed);

// conv(k, stride 1) - act - conv(k, stride 2) - act - flatten - dense.
Network build_cnn(const CnnConfig& config, const act::ActivationSpec& activation,
                  std::uint64_t seed);

// Internal mutable access used by checkpoint loading and tests.
class NetworkAccess {
 public:
  static std::vector<Layer>& layers(Network& net) { return net.layers_; }
};

std::vector<int> predict(const Network& net, const Tensor& x);
double accuracy(const Network& net, const Tensor& x, std::span<const int> labels);

}  // namespace pafrob::nn
