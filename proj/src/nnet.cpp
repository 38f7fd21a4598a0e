#include "pafrob/nnet.hpp"

#include <cmath>

#include "pafrob/rng.hpp"

namespace pafrob::nn {

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(v), true);
}

Layer dense(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Layer l;
  l.kind = LayerKind::Dense;
  l.name = name;
  l.weight = uniform_tensor({in, out}, bound, rng);
  l.bias = uniform_tensor({out}, bound, rng);
  return l;
}

Layer conv(const std::string& name, std::size_t in, std::size_t out, std::size_t k,
           Conv2dOptions options, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * k * k));
  Layer l;
  l.kind = LayerKind::Conv;
  l.name = name;
  l.weight = uniform_tensor({out, in, k, k}, bound, rng);
  l.bias = uniform_tensor({out}, bound, rng);
  l.conv = options;
  return l;
}

Layer marker(LayerKind kind, const std::string& name) {
  Layer l;
  l.kind = kind;
  l.name = name;
  return l;
}

std::size_t conv_out(std::size_t size, std::size_t k, Conv2dOptions o) {
  return (size + 2 * o.padding - k) / o.stride + 1;
}

}  // namespace

Network build(const Architecture& arch, const act::ActivationSpec& activation,
              std::uint64_t seed) {
  activation.validate();
  Rng rng(derive_seed(seed, "init"));
  Network net;
  net.arch_ = arch;
  net.family_ = activation.family;
  net.alpha_ = Tensor::scalar(activation.alpha, activation.alpha_learnable);
  net.beta_ = Tensor::scalar(activation.beta, activation.beta_learnable);

  if (arch.kind == Architecture::Kind::Mlp) {
    const auto& d = arch.dims;
    if (d.size() < 2) throw std::invalid_argument("build_mlp needs at least two dims");
    for (std::size_t v : d)
      if (v == 0) throw std::invalid_argument("build_mlp dims must be positive");
    for (std::size_t i = 0; i + 1 < d.size(); ++i) {
      net.layers_.push_back(dense("dense" + std::to_string(i), d[i], d[i + 1], rng));
      if (i + 2 < d.size()) net.layers_.push_back(marker(LayerKind::Activation, "act" + std::to_string(i)));
    }
  } else {
    const CnnConfig& c = arch.cnn;
    if (c.in_channels == 0 || c.height == 0 || c.width == 0 || c.channels1 == 0 ||
        c.channels2 == 0 || c.kernel == 0 || c.classes == 0)
      throw std::invalid_argument("build_cnn sizes must be positive");
    const Conv2dOptions first{1, c.kernel / 2};
    const Conv2dOptions second{2, c.kernel / 2};
    if (c.kernel > c.height + 2 * first.padding || c.kernel > c.width + 2 * first.padding)
      throw std::invalid_argument("build_cnn kernel larger than the padded input");
    const std::size_t h1 = conv_out(c.height, c.kernel, first);
    const std::size_t w1 = conv_out(c.width, c.kernel, first);
    const std::size_t h2 = conv_out(h1, c.kernel, second);
    const std::size_t w2 = conv_out(w1, c.kernel, second);
    net.layers_.push_back(conv("conv0", c.in_channels, c.channels1, c.kernel, first, rng));
    net.layers_.push_back(marker(LayerKind::Activation, "act0"));
    net.layers_.push_back(conv("conv1", c.channels1, c.channels2, c.kernel, second, rng));
    net.layers_.push_back(marker(LayerKind::Activation, "act1"));
    net.layers_.push_back(marker(LayerKind::Flatten, "flatten"));
    net.layers_.push_back(dense("dense0", c.channels2 * h2 * w2, c.classes, rng));
  }
  return net;
}

Network build_mlp(const std::vector<std::size_t>& dims, const act::ActivationSpec& activation,
                  std::uint64_t seed) {
  Architecture arch;
  arch.kind = Architecture::Kind::Mlp;
  arch.dims = dims;
  return build(arch, activation, seed);
}

Network build_cnn(const CnnConfig& config, const act::ActivationSpec& activation,
                  std::uint64_t seed) {
  Architecture arch;
  arch.kind = Architecture::Kind::Cnn;
  arch.cnn = config;
  return build(arch, activation, seed);
}

Shape Network::input_shape() const {
  if (arch_.kind == Architecture::Kind::Mlp) return {arch_.dims.front()};
  return {arch_.cnn.in_channels, arch_.cnn.height, arch_.cnn.width};
}

std::size_t Network::classes() const {
  return arch_.kind == Architecture::Kind::Mlp ? arch_.dims.back() : arch_.cnn.classes;
}

Tensor Network::forward(const Tensor& x) const {
  const Shape expected = input_shape();
  const Shape& got = x.shape();
  bool ok = got.size() == expected.size() + 1;
  for (std::size_t i = 0; ok && i < expected.size(); ++i) ok = got[i + 1] == expected[i];
  if (!ok)
    throw ShapeError("network expects input [N," + shape_string(expected).substr(1) + ", got " +
                     shape_string(got));

  Tensor h = x;
  for (const Layer& layer : layers_) {
    switch (layer.kind) {
      case LayerKind::Dense: h = add_bias(matmul(h, layer.weight), layer.bias); break;
      case LayerKind::Conv: h = add_channel_bias(conv2d(h, layer.weight, layer.conv), layer.bias); break;
      case LayerKind::Flatten: h = reshape(h, {h.dim(0), h.numel() / h.dim(0)}); break;
      case LayerKind::Activation: h = act::apply(family_, h, alpha_, beta_); break;
    }
  }
  return h;
}

act::ActivationSpec Network::activation() const {
  act::ActivationSpec spec;
  spec.family = family_;
  spec.alpha = alpha_.item();
  spec.beta = beta_.item();
  spec.alpha_learnable = alpha_.requires_grad();
  spec.beta_learnable = beta_.requires_grad();
  return spec;
}

void Network::set_activation_parameters(double alpha, double beta) {
  act::ActivationSpec spec = activation();
  spec.alpha = alpha;
  spec.beta = beta;
  spec.validate();
  alpha_.mutable_values()[0] = alpha;
  beta_.mutable_values()[0] = beta;
}

void Network::init_to_nonparametric() {
  if (!act::is_parametric(family_)) return;
  const act::ActivationSpec init = act::ActivationSpec::initial(family_);
  set_activation_parameters(init.alpha, init.beta);
}

std::vector<Tensor> Network::weights() const {
  std::vector<Tensor> out;
  for (const Layer& l : layers_)
    if (l.kind == LayerKind::Dense || l.kind == LayerKind::Conv) {
      out.push_back(l.weight);
      out.push_back(l.bias);
    }
  return out;
}

std::vector<Tensor> Network::paf_parameters() const {
  std::vector<Tensor> out;
  if (alpha_.requires_grad()) out.push_back(alpha_);
  if (beta_.requires_grad()) out.push_back(beta_);
  return out;
}

std::vector<Tensor> Network::learnable_parameters() const {
  std::vector<Tensor> out = weights();
  for (const Tensor& t : paf_parameters()) out.push_back(t);
  return out;
}

std::size_t Network::weight_count() const {
  std::size_t n = 0;
  for (const Tensor& t : weights()) n += t.numel();
  return n;
}

std::size_t Network::paf_parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& t : paf_parameters()) n += t.numel();
  return n;
}

void Network::zero_grad() {
  for (Tensor& t : learnable_parameters()) t.zero_grad();
}

Network Network::clone() const {
  auto copy_leaf = [](const Tensor& t) {
    if (!t.defined()) return Tensor();
    Tensor c = t.detach();
    c.set_requires_grad(t.requires_grad());
    return c;
  };
  Network net;
  net.arch_ = arch_;
  net.family_ = family_;
  net.alpha_ = copy_leaf(alpha_);
  net.beta_ = copy_leaf(beta_);
  net.layers_ = layers_;
  for (Layer& l : net.layers_) {
    l.weight = copy_leaf(l.weight);
    l.bias = copy_leaf(l.bias);
  }
  return net;
}

std::vector<int> predict(const Network& net, const Tensor& x) {
  return argmax_rows(net.forward(x.detach()));
}

double accuracy(const Network& net, const Tensor& x, std::span<const int> labels) {
  const std::vector<int> pred = predict(net, x);
  if (pred.size() != labels.size())
    throw ShapeError("accuracy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(pred.size()) + " samples");
  if (pred.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

}  // namespace pafrob::nn
