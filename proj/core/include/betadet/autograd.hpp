#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace betadet::ag {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

struct Node;

struct TensorData {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient arrives
  bool requires_grad = false;
  std::shared_ptr<Node> node;  // null for leaves and constants
};

/// Shared handle to a dense row-major float64 array that may take part in
/// reverse-mode differentiation. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;

  /// Constant (requires_grad = false) tensor. Throws InputError if the value
  /// length does not match the shape.
  Tensor(Shape shape, std::vector<double> value);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v);
  /// Trainable leaf.
  static Tensor parameter(Shape shape, std::vector<double> value);

  bool defined() const noexcept { return static_cast<bool>(d_); }
  const Shape& shape() const { return d_->shape; }
  std::size_t dim(std::ptrdiff_t axis) const;
  std::size_t rank() const { return d_->shape.size(); }
  std::size_t size() const { return d_->value.size(); }

  std::span<const double> values() const { return d_->value; }
  std::span<double> mutable_values() { return d_->value; }
  std::span<const double> grad() const { return d_->grad; }
  std::span<double> mutable_grad() { return d_->grad; }
  bool has_grad() const { return !d_->grad.empty(); }
  double item() const;
  double at(std::size_t flat_index) const { return d_->value.at(flat_index); }

  bool requires_grad() const noexcept { return d_ && d_->requires_grad; }
  bool is_leaf() const noexcept { return !d_->node; }

  /// Sets grad to zeros of matching size.
  void zero_grad();

  /// Value copy cut off from the graph.
  Tensor detach() const;

  TensorData& data() const { return *d_; }
  const std::shared_ptr<TensorData>& handle() const { return d_; }

 private:
  explicit Tensor(std::shared_ptr<TensorData> d) : d_(std::move(d)) {}
  friend class OpBuilder;

  std::shared_ptr<TensorData> d_;
};

/// Recorded operation. backward reads the output gradient and accumulates
/// vector-Jacobian products into the inputs.
struct Node {
  std::string_view op;
  std::uint64_t sequence = 0;
  std::vector<Tensor> inputs;
  std::function<void(const TensorData& out)> backward;
  bool consumed = false;
};

/// While alive, ops on this thread record no graph nodes (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Runs reverse accumulation from a one-element tensor. Nodes execute in the
/// exact reverse of their forward order; the traversed graph is released
/// afterwards, so a second call on the same loss throws InputError.
void backward(const Tensor& loss);

// Elementwise binary ops broadcast when one shape is a trailing suffix of the
// other (a scalar has the empty suffix).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

Tensor neg(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor lgamma(const Tensor& x);
/// Clamps into [lo, hi]; zero gradient where the clamp is active.
Tensor clamp(const Tensor& x, double lo, double hi);

/// [..., n, k] x [k, m] or batched [B..., n, k] x [B..., k, m].
Tensor matmul(const Tensor& a, const Tensor& b);
/// Swaps the last two axes.
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(std::span<const Tensor> parts, std::ptrdiff_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::ptrdiff_t axis);
/// Half-open range [start, stop) along axis.
Tensor slice(const Tensor& x, std::ptrdiff_t axis, std::size_t start, std::size_t stop);
/// Full reduction to a scalar.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Reduces the last axis away.
Tensor sum_last(const Tensor& x);
Tensor softmax(const Tensor& x);
/// Normalizes the last axis, then applies scale and shift of that length.
Tensor layernorm(const Tensor& x, const Tensor& scale, const Tensor& shift, double eps = 1e-5);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator+(double s, const Tensor& a) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
inline Tensor operator-(double s, const Tensor& a) { return add_scalar(neg(a), s); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator/(const Tensor& a, double s) { return mul_scalar(a, 1.0 / s); }

namespace testing {

/// Scales the input gradients produced by every op named `op` by `factor`.
/// A negative control for gradient checks; pass an empty name to disable.
void set_backward_fault(std::string op, double factor);

}  // namespace testing

}  // namespace betadet::ag
