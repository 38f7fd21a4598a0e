#pragma once

// Dense float64 tensors with reverse-mode automatic differentiation.
//
// A Tensor is a handle to a graph node. Leaves are created by the
// constructors; every op returns a new node that remembers its parents when
// at least one of them requires a gradient. `backward()` on a one-element
// tensor accumulates d(out)/d(leaf) into every reachable leaf that requires a
// gradient. A leaf feeding several sites receives the sum of the site-local
// gradients, which is what shared activation parameters rely on.
//
// Broadcasting is limited to "equal shapes, or one side has one element".
// Bias additions have their own ops (add_bias, add_channel_bias).

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pafrob {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {
struct Node;
}

class Tensor {
 public:
  // Undefined handle; only `defined()` may be called on it.
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor full(Shape shape, double value);

  bool defined() const { return node_ != nullptr; }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  double item() const;
  double at(std::size_t flat_index) const { return values()[flat_index]; }

  // In-place access for parameter updates and attack iterates. Only valid on
  // leaves; mutating an op result would silently invalidate its saved state.
  std::span<double> mutable_values();

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;
  const char* op_name() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Copy of the values as a fresh leaf with no graph attachment.
  Tensor detach() const;

  void backward() const;

  // True when both handles refer to the same node.
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Backward rule of a recorded op. `grad_in[i]` is empty when parent i does
  // not require a gradient; otherwise the rule adds into it.
  using BackwardFn = std::function<void(std::span<const double> grad_out,
                                        std::span<const std::span<double>> grad_in)>;

  // Builds an op result. Parents and the rule are only retained when some
  // parent requires a gradient.
  static Tensor record(Shape shape, std::vector<double> values,
                       std::vector<Tensor> parents, const char* op,
                       BackwardFn rule);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  detail::Node& node() const;

  std::shared_ptr<detail::Node> node_;
};

// Elementwise ----------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double s);
Tensor mul(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor exp(const Tensor& a);
Tensor log1p(const Tensor& a);
Tensor sigmoid(const Tensor& a);
// d|x|/dx at 0 is 0.
Tensor abs(const Tensor& a);
// max(a, s); ties send no gradient to a.
Tensor maximum(const Tensor& a, double s);
// cond != 0 ? a : b. No gradient flows to cond.
Tensor where(const Tensor& cond, const Tensor& a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return mul(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return add(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// Linear algebra and layers ---------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
// x[N,K] + bias[K] per row.
Tensor add_bias(const Tensor& x, const Tensor& bias);
// x[N,C,H,W] + bias[C] per channel.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);
Tensor reshape(const Tensor& a, Shape shape);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// Cross-correlation of x[N,C,H,W] with kernels k[O,C,kh,kw], zero padding.
Tensor conv2d(const Tensor& x, const Tensor& k, Conv2dOptions options = {});

// Reductions ------------------------------------------------------------------

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Gradient goes to a single argmax; ties go to the lowest flat index.
Tensor max(const Tensor& a);
// Axis reductions drop the axis (a rank-1 input yields shape [1]).
Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a, std::size_t axis);
Tensor max(const Tensor& a, std::size_t axis);

// Losses ----------------------------------------------------------------------

// Mean over the batch of -log softmax(logits)[label].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

// Mean over the batch of KL(softmax(p) || softmax(q)), rows of [N,K] logits.
Tensor kl_divergence(const Tensor& p_logits, const Tensor& q_logits);

// Plain helpers on values (no graph) ------------------------------------------

std::vector<double> softmax_rows(const Tensor& logits);
// Row-wise argmax; ties resolve to the lowest class index.
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace pafrob
