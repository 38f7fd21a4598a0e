#include "pafrob/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "pafrob/math.hpp"
#include "pafrob/simd/kernels.hpp"

namespace pafrob {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  Tensor::BackwardFn rule;
  const char* op = "leaf";
};

}  // namespace detail

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  for (std::size_t d : shape)
    if (d == 0) throw ShapeError("tensor dims must be positive, got " + shape_string(shape));
}

}  // namespace

Tensor::Tensor(Shape shape, bool requires_grad)
    : Tensor(shape, std::vector<double>(shape_numel(shape), 0.0), requires_grad) {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape);
  if (values.size() != shape_numel(shape))
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_string(shape));
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

detail::Node& Tensor::node() const {
  if (!node_) throw std::logic_error("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_string(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return node().value.size(); }

std::span<const double> Tensor::values() const { return node().value; }

double Tensor::item() const {
  if (numel() != 1)
    throw ShapeError("item() needs a one-element tensor, got " + shape_string(shape()));
  return node().value[0];
}

std::span<double> Tensor::mutable_values() {
  if (!is_leaf()) throw std::logic_error("mutable_values() on a non-leaf tensor");
  return node().value;
}

bool Tensor::requires_grad() const { return node().requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!is_leaf()) throw std::logic_error("set_requires_grad() on a non-leaf tensor");
  node().requires_grad = flag;
}

bool Tensor::is_leaf() const { return node().parents.empty() && !node().rule; }

const char* Tensor::op_name() const { return node().op; }

bool Tensor::has_grad() const { return !node().grad.empty(); }

std::span<const double> Tensor::grad() const { return node().grad; }

std::span<double> Tensor::mutable_grad() { return node().grad; }

void Tensor::zero_grad() {
  auto& g = node().grad;
  std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(node().shape, node().value); }

Tensor Tensor::record(Shape shape, std::vector<double> values,
                      std::vector<Tensor> parents, const char* op,
                      BackwardFn rule) {
  Tensor out(std::move(shape), std::move(values));
  out.node_->op = op;
  const bool needs_grad = std::any_of(parents.begin(), parents.end(),
                                      [](const Tensor& p) { return p.requires_grad(); });
  if (needs_grad) {
    out.node_->requires_grad = true;
    out.node_->rule = std::move(rule);
    out.node_->parents.reserve(parents.size());
    for (auto& p : parents) out.node_->parents.push_back(p.node_);
  }
  return out;
}

void Tensor::backward() const {
  detail::Node& root = node();
  if (root.value.size() != 1)
    throw ShapeError("backward() needs a one-element tensor, got " + shape_string(root.shape));
  if (!root.requires_grad) return;

  // Post-order DFS over nodes that require a gradient.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{&root, 0}};
  seen.insert(&root);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (detail::Node* n : order) {
    const bool leaf = n->parents.empty() && !n->rule;
    if (n->grad.size() != n->value.size()) n->grad.assign(n->value.size(), 0.0);
    else if (!leaf) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
  root.grad[0] += 1.0;

  std::vector<std::span<double>> sinks;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (!n->rule) continue;
    sinks.clear();
    for (auto& p : n->parents)
      sinks.push_back(p->requires_grad ? std::span<double>(p->grad) : std::span<double>());
    n->rule(n->grad, sinks);
  }
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

const simd::KernelTable& K() { return simd::active(); }

enum class Broadcast { Equal, LeftScalar, RightScalar };

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::Equal;
  if (b.numel() == 1) return Broadcast::RightScalar;
  if (a.numel() == 1) return Broadcast::LeftScalar;
  throw ShapeError(std::string("shape mismatch in ") + op + ": " + shape_string(a.shape()) +
                   " vs " + shape_string(b.shape()));
}

// Generic binary op. fwd(x, y) gives the value, da/db give the local partials.
template <class Fwd, class Da, class Db>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, Da da, Db db) {
  const Broadcast kind = broadcast_kind(op, a, b);
  const Shape shape = kind == Broadcast::LeftScalar ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t ai = kind == Broadcast::LeftScalar ? 0 : 1;
  const std::size_t bi = kind == Broadcast::RightScalar ? 0 : 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i * ai], bv[i * bi]);

  std::vector<double> sa(av.begin(), av.end());
  std::vector<double> sb(bv.begin(), bv.end());
  return Tensor::record(
      shape, std::move(out), {a, b}, op,
      [sa = std::move(sa), sb = std::move(sb), ai, bi, n, da, db](
          std::span<const double> g, std::span<const std::span<double>> gin) {
        if (!gin[0].empty())
          for (std::size_t i = 0; i < n; ++i) gin[0][i * ai] += g[i] * da(sa[i * ai], sb[i * bi]);
        if (!gin[1].empty())
          for (std::size_t i = 0; i < n; ++i) gin[1][i * bi] += g[i] * db(sa[i * ai], sb[i * bi]);
      });
}

template <class Fwd, class Deriv>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, Deriv deriv) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  std::vector<double> saved_in(av.begin(), av.end());
  std::vector<double> saved_out = out;
  return Tensor::record(a.shape(), std::move(out), {a}, op,
                        [x = std::move(saved_in), y = std::move(saved_out), deriv](
                            std::span<const double> g, std::span<const std::span<double>> gin) {
                          for (std::size_t i = 0; i < x.size(); ++i)
                            gin[0][i] += g[i] * deriv(x[i], y[i]);
                        });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.numel());
    K().add(a.values().data(), b.values().data(), out.data(), out.size());
    return Tensor::record(a.shape(), std::move(out), {a, b}, "add",
                          [](std::span<const double> g, std::span<const std::span<double>> gin) {
                            for (auto sink : gin)
                              if (!sink.empty()) K().axpy(1.0, g.data(), sink.data(), g.size());
                          });
  }
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.numel());
    K().sub(a.values().data(), b.values().data(), out.data(), out.size());
    return Tensor::record(a.shape(), std::move(out), {a, b}, "sub",
                          [](std::span<const double> g, std::span<const std::span<double>> gin) {
                            if (!gin[0].empty()) K().axpy(1.0, g.data(), gin[0].data(), g.size());
                            if (!gin[1].empty()) K().axpy(-1.0, g.data(), gin[1].data(), g.size());
                          });
  }
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

Tensor add(const Tensor& a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; },
               [](double, double) { return 1.0; });
}

Tensor mul(const Tensor& a, double s) {
  std::vector<double> out(a.numel());
  K().scale(a.values().data(), s, out.data(), out.size());
  return Tensor::record(a.shape(), std::move(out), {a}, "mul_scalar",
                        [s](std::span<const double> g, std::span<const std::span<double>> gin) {
                          K().axpy(s, g.data(), gin[0].data(), g.size());
                        });
}

Tensor neg(const Tensor& a) { return mul(a, -1.0); }

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Tensor log1p(const Tensor& a) {
  return unary("log1p", a, [](double x) { return std::log1p(x); },
               [](double x, double) { return 1.0 / (1.0 + x); });
}

Tensor sigmoid(const Tensor& a) {
  return unary("sigmoid", a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor abs(const Tensor& a) {
  return unary("abs", a, [](double x) { return std::abs(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor maximum(const Tensor& a, double s) {
  return unary("maximum", a, [s](double x) { return std::max(x, s); },
               [s](double x, double) { return x > s ? 1.0 : 0.0; });
}

Tensor where(const Tensor& cond, const Tensor& a, const Tensor& b) {
  if (cond.shape() != a.shape() || a.shape() != b.shape())
    throw ShapeError("shape mismatch in where: " + shape_string(cond.shape()) + ", " +
                     shape_string(a.shape()) + ", " + shape_string(b.shape()));
  const auto c = cond.values();
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(c.size());
  std::vector<char> mask(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    mask[i] = c[i] != 0.0;
    out[i] = mask[i] ? av[i] : bv[i];
  }
  return Tensor::record(a.shape(), std::move(out), {a, b}, "where",
                        [mask = std::move(mask)](std::span<const double> g,
                                                 std::span<const std::span<double>> gin) {
                          for (std::size_t i = 0; i < mask.size(); ++i) {
                            if (mask[i] && !gin[0].empty()) gin[0][i] += g[i];
                            if (!mask[i] && !gin[1].empty()) gin[1][i] += g[i];
                          }
                        });
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul inner dimensions differ: " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  K().gemm(m, n, k, a.values().data(), b.values().data(), out.data());
  std::vector<double> sa(a.values().begin(), a.values().end());
  std::vector<double> sb(b.values().begin(), b.values().end());
  return Tensor::record(
      {m, n}, std::move(out), {a, b}, "matmul",
      [sa = std::move(sa), sb = std::move(sb), m, k, n](std::span<const double> g,
                                                        std::span<const std::span<double>> gin) {
        if (!gin[0].empty()) {
          std::vector<double> da(m * k);
          K().gemm_nt(m, k, n, g.data(), sb.data(), da.data());
          K().axpy(1.0, da.data(), gin[0].data(), da.size());
        }
        if (!gin[1].empty()) {
          std::vector<double> db(k * n);
          K().gemm_tn(k, n, m, sa.data(), g.data(), db.data());
          K().axpy(1.0, db.data(), gin[1].data(), db.size());
        }
      });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1))
    throw ShapeError("add_bias shape mismatch: " + shape_string(x.shape()) + " + " +
                     shape_string(bias.shape()));
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t r = 0; r < rows; ++r)
    K().add(out.data() + r * cols, bias.values().data(), out.data() + r * cols, cols);
  return Tensor::record(x.shape(), std::move(out), {x, bias}, "add_bias",
                        [rows, cols](std::span<const double> g,
                                     std::span<const std::span<double>> gin) {
                          if (!gin[0].empty()) K().axpy(1.0, g.data(), gin[0].data(), g.size());
                          if (!gin[1].empty())
                            for (std::size_t r = 0; r < rows; ++r)
                              K().axpy(1.0, g.data() + r * cols, gin[1].data(), cols);
                        });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 4 || bias.rank() != 1 || bias.dim(0) != x.dim(1))
    throw ShapeError("add_channel_bias shape mismatch: " + shape_string(x.shape()) + " + " +
                     shape_string(bias.shape()));
  const std::size_t batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<double> out(x.values().begin(), x.values().end());
  const auto bv = bias.values();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c) {
      double* p = out.data() + (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += bv[c];
    }
  return Tensor::record(x.shape(), std::move(out), {x, bias}, "add_channel_bias",
                        [batch, channels, plane](std::span<const double> g,
                                                 std::span<const std::span<double>> gin) {
                          if (!gin[0].empty()) K().axpy(1.0, g.data(), gin[0].data(), g.size());
                          if (!gin[1].empty())
                            for (std::size_t b = 0; b < batch; ++b)
                              for (std::size_t c = 0; c < channels; ++c)
                                gin[1][c] += K().sum(g.data() + (b * channels + c) * plane, plane);
                        });
}

Tensor reshape(const Tensor& a, Shape shape) {
  check_shape(shape);
  if (shape_numel(shape) != a.numel())
    throw ShapeError("cannot reshape " + shape_string(a.shape()) + " to " + shape_string(shape));
  std::vector<double> out(a.values().begin(), a.values().end());
  return Tensor::record(std::move(shape), std::move(out), {a}, "reshape",
                        [](std::span<const double> g, std::span<const std::span<double>> gin) {
                          K().axpy(1.0, g.data(), gin[0].data(), g.size());
                        });
}

namespace {

struct ConvGeometry {
  std::size_t batch, channels, height, width;
  std::size_t out_channels, kh, kw;
  std::size_t stride, padding;
  std::size_t out_h, out_w;

  std::size_t patch() const { return channels * kh * kw; }
  std::size_t positions() const { return out_h * out_w; }
};

// cols[patch x positions] for sample b.
void im2col(const ConvGeometry& g, const double* x, double* cols) {
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* row = cols + ((c * g.kh + i) * g.kw + j) * g.positions();
        for (std::size_t oy = 0; oy < g.out_h; ++oy)
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride + i) -
                                     static_cast<std::ptrdiff_t>(g.padding);
            const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(ox * g.stride + j) -
                                      static_cast<std::ptrdiff_t>(g.padding);
            const bool inside = y >= 0 && xx >= 0 && y < static_cast<std::ptrdiff_t>(g.height) &&
                                xx < static_cast<std::ptrdiff_t>(g.width);
            row[oy * g.out_w + ox] =
                inside ? x[(c * g.height + static_cast<std::size_t>(y)) * g.width +
                           static_cast<std::size_t>(xx)]
                       : 0.0;
          }
      }
}

void col2im_add(const ConvGeometry& g, const double* cols, double* dx) {
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* row = cols + ((c * g.kh + i) * g.kw + j) * g.positions();
        for (std::size_t oy = 0; oy < g.out_h; ++oy)
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride + i) -
                                     static_cast<std::ptrdiff_t>(g.padding);
            const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(ox * g.stride + j) -
                                      static_cast<std::ptrdiff_t>(g.padding);
            if (y >= 0 && xx >= 0 && y < static_cast<std::ptrdiff_t>(g.height) &&
                xx < static_cast<std::ptrdiff_t>(g.width))
              dx[(c * g.height + static_cast<std::size_t>(y)) * g.width +
                 static_cast<std::size_t>(xx)] += row[oy * g.out_w + ox];
          }
      }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& k, Conv2dOptions options) {
  if (x.rank() != 4 || k.rank() != 4 || x.dim(1) != k.dim(1))
    throw ShapeError("conv2d expects x[N,C,H,W] and k[O,C,kh,kw], got " +
                     shape_string(x.shape()) + " and " + shape_string(k.shape()));
  if (options.stride == 0) throw std::invalid_argument("conv2d stride must be positive");
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), k.dim(0), k.dim(2), k.dim(3),
                 options.stride, options.padding, 0, 0};
  const std::size_t ph = g.height + 2 * g.padding, pw = g.width + 2 * g.padding;
  if (g.kh > ph || g.kw > pw)
    throw ShapeError("conv2d kernel " + shape_string(k.shape()) +
                     " is larger than the padded input " + shape_string(x.shape()));
  g.out_h = (ph - g.kh) / g.stride + 1;
  g.out_w = (pw - g.kw) / g.stride + 1;

  const std::size_t in_sample = g.channels * g.height * g.width;
  const std::size_t out_sample = g.out_channels * g.positions();
  std::vector<double> cols(g.batch * g.patch() * g.positions());
  std::vector<double> out(g.batch * out_sample);
  for (std::size_t b = 0; b < g.batch; ++b) {
    double* c = cols.data() + b * g.patch() * g.positions();
    im2col(g, x.values().data() + b * in_sample, c);
    K().gemm(g.out_channels, g.positions(), g.patch(), k.values().data(), c,
             out.data() + b * out_sample);
  }

  std::vector<double> kernel(k.values().begin(), k.values().end());
  return Tensor::record(
      {g.batch, g.out_channels, g.out_h, g.out_w}, std::move(out), {x, k}, "conv2d",
      [g, cols = std::move(cols), kernel = std::move(kernel), in_sample, out_sample](
          std::span<const double> grad, std::span<const std::span<double>> gin) {
        std::vector<double> dcols(g.patch() * g.positions());
        std::vector<double> dk(g.out_channels * g.patch());
        for (std::size_t b = 0; b < g.batch; ++b) {
          const double* gout = grad.data() + b * out_sample;
          const double* c = cols.data() + b * g.patch() * g.positions();
          if (!gin[1].empty()) {
            K().gemm_nt(g.out_channels, g.patch(), g.positions(), gout, c, dk.data());
            K().axpy(1.0, dk.data(), gin[1].data(), dk.size());
          }
          if (!gin[0].empty()) {
            K().gemm_tn(g.patch(), g.positions(), g.out_channels, kernel.data(), gout,
                        dcols.data());
            col2im_add(g, dcols.data(), gin[0].data() + b * in_sample);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& a) {
  const double s = K().sum(a.values().data(), a.numel());
  return Tensor::record({1}, {s}, {a}, "sum",
                        [](std::span<const double> g, std::span<const std::span<double>> gin) {
                          for (double& v : gin[0]) v += g[0];
                        });
}

Tensor mean(const Tensor& a) { return mul(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor max(const Tensor& a) {
  const auto v = a.values();
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return Tensor::record({1}, {v[best]}, {a}, "max",
                        [best](std::span<const double> g, std::span<const std::span<double>> gin) {
                          gin[0][best] += g[0];
                        });
}

namespace {

struct AxisSplit {
  std::size_t outer, extent, inner;
  Shape reduced;
};

AxisSplit split_axis(const Tensor& a, std::size_t axis) {
  const Shape& s = a.shape();
  if (axis >= s.size())
    throw ShapeError("invalid axis " + std::to_string(axis) + " for shape " + shape_string(s));
  AxisSplit sp{1, s[axis], 1, {}};
  for (std::size_t i = 0; i < axis; ++i) sp.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) sp.inner *= s[i];
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) sp.reduced.push_back(s[i]);
  if (sp.reduced.empty()) sp.reduced.push_back(1);
  return sp;
}

}  // namespace

Tensor sum(const Tensor& a, std::size_t axis) {
  const AxisSplit sp = split_axis(a, axis);
  const auto v = a.values();
  std::vector<double> out(sp.outer * sp.inner, 0.0);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t e = 0; e < sp.extent; ++e)
      for (std::size_t i = 0; i < sp.inner; ++i)
        out[o * sp.inner + i] += v[(o * sp.extent + e) * sp.inner + i];
  return Tensor::record(sp.reduced, std::move(out), {a}, "sum_axis",
                        [sp](std::span<const double> g, std::span<const std::span<double>> gin) {
                          for (std::size_t o = 0; o < sp.outer; ++o)
                            for (std::size_t e = 0; e < sp.extent; ++e)
                              for (std::size_t i = 0; i < sp.inner; ++i)
                                gin[0][(o * sp.extent + e) * sp.inner + i] += g[o * sp.inner + i];
                        });
}

Tensor mean(const Tensor& a, std::size_t axis) {
  const std::size_t extent = a.dim(axis);
  return mul(sum(a, axis), 1.0 / static_cast<double>(extent));
}

Tensor max(const Tensor& a, std::size_t axis) {
  const AxisSplit sp = split_axis(a, axis);
  const auto v = a.values();
  std::vector<double> out(sp.outer * sp.inner);
  std::vector<std::size_t> arg(sp.outer * sp.inner);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i) {
      std::size_t best = (o * sp.extent) * sp.inner + i;
      for (std::size_t e = 1; e < sp.extent; ++e) {
        const std::size_t idx = (o * sp.extent + e) * sp.inner + i;
        if (v[idx] > v[best]) best = idx;
      }
      out[o * sp.inner + i] = v[best];
      arg[o * sp.inner + i] = best;
    }
  return Tensor::record(sp.reduced, std::move(out), {a}, "max_axis",
                        [arg = std::move(arg)](std::span<const double> g,
                                               std::span<const std::span<double>> gin) {
                          for (std::size_t j = 0; j < arg.size(); ++j) gin[0][arg[j]] += g[j];
                        });
}

// ---------------------------------------------------------------------------
// Losses

namespace {

void require_rows(const char* op, const Tensor& logits) {
  if (logits.rank() != 2)
    throw ShapeError(std::string(op) + " expects [N,K] logits, got " +
                     shape_string(logits.shape()));
}

// Row-wise log-softmax with the row max subtracted first.
std::vector<double> log_softmax_rows(std::span<const double> z, std::size_t rows,
                                     std::size_t cols) {
  std::vector<double> out(z.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = z.data() + r * cols;
    const double m = *std::max_element(row, row + cols);
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += std::exp(row[c] - m);
    const double lse = m + std::log(acc);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = row[c] - lse;
  }
  return out;
}

}  // namespace

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rows("softmax_cross_entropy", logits);
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  if (labels.size() != rows)
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(rows) + " rows");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= cols)
      throw std::out_of_range("label " + std::to_string(y) + " outside [0," +
                              std::to_string(cols) + ")");
  std::vector<double> logp = log_softmax_rows(logits.values(), rows, cols);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) loss -= logp[r * cols + static_cast<std::size_t>(labels[r])];
  loss /= static_cast<double>(rows);

  std::vector<int> ys(labels.begin(), labels.end());
  return Tensor::record(
      {1}, {loss}, {logits}, "softmax_cross_entropy",
      [logp = std::move(logp), ys = std::move(ys), rows, cols](
          std::span<const double> g, std::span<const std::span<double>> gin) {
        const double scale = g[0] / static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) {
            const double p = std::exp(logp[r * cols + c]);
            const double onehot = static_cast<std::size_t>(ys[r]) == c ? 1.0 : 0.0;
            gin[0][r * cols + c] += scale * (p - onehot);
          }
      });
}

Tensor kl_divergence(const Tensor& p_logits, const Tensor& q_logits) {
  require_rows("kl_divergence", p_logits);
  if (p_logits.shape() != q_logits.shape())
    throw ShapeError("kl_divergence shape mismatch: " + shape_string(p_logits.shape()) + " vs " +
                     shape_string(q_logits.shape()));
  const std::size_t rows = p_logits.dim(0), cols = p_logits.dim(1);
  std::vector<double> lp = log_softmax_rows(p_logits.values(), rows, cols);
  std::vector<double> lq = log_softmax_rows(q_logits.values(), rows, cols);
  std::vector<double> row_kl(rows, 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      row_kl[r] += std::exp(lp[i]) * (lp[i] - lq[i]);
    }
    total += row_kl[r];
  }
  total /= static_cast<double>(rows);

  return Tensor::record(
      {1}, {total}, {p_logits, q_logits}, "kl_divergence",
      [lp = std::move(lp), lq = std::move(lq), row_kl = std::move(row_kl), rows, cols](
          std::span<const double> g, std::span<const std::span<double>> gin) {
        const double scale = g[0] / static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t i = r * cols + c;
            const double p = std::exp(lp[i]);
            const double q = std::exp(lq[i]);
            // dKL/dp_i = P_i (log P_i - log Q_i - KL_row); dKL/dq_i = Q_i - P_i
            if (!gin[0].empty()) gin[0][i] += scale * p * (lp[i] - lq[i] - row_kl[r]);
            if (!gin[1].empty()) gin[1][i] += scale * (q - p);
          }
      });
}

std::vector<double> softmax_rows(const Tensor& logits) {
  require_rows("softmax_rows", logits);
  std::vector<double> out = log_softmax_rows(logits.values(), logits.dim(0), logits.dim(1));
  for (double& v : out) v = std::exp(v);
  return out;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  require_rows("argmax_rows", logits);
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  const auto v = logits.values();
  std::vector<int> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c)
      if (v[r * cols + c] > v[r * cols + best]) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

}  // namespace pafrob
