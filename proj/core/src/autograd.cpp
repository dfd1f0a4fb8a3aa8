#include "betadet/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "betadet/errors.hpp"
#include "betadet/special.hpp"

namespace betadet::ag {

std::size_t numel(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

thread_local std::uint64_t g_sequence = 0;
thread_local bool g_no_grad = false;

struct FaultInjection {
  std::string op;
  double factor = 1.0;
};
FaultInjection g_fault;

std::vector<double>& grad_of(TensorData& t) {
  if (t.grad.empty()) t.grad.assign(t.value.size(), 0.0);
  return t.grad;
}

std::size_t normalize_axis(std::ptrdiff_t axis, std::size_t rank, const char* op) {
  const auto r = static_cast<std::ptrdiff_t>(rank);
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw InputError(std::string(op) + ": axis out of range for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(axis);
}

void check_finite(std::string_view op, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string(op) + ": produced a non-finite value");
    }
  }
}

using BackwardFn = std::function<void(const TensorData& out)>;

}  // namespace

// Assembles op outputs and records the node when any input needs a gradient.
class OpBuilder {
 public:
  static Tensor make(std::string_view op, Shape shape, std::vector<double> value,
                     std::vector<Tensor> inputs, BackwardFn backward) {
    check_finite(op, value);
    auto data = std::make_shared<TensorData>();
    data->shape = std::move(shape);
    data->value = std::move(value);
    const bool needs_grad =
        !g_no_grad && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    if (needs_grad) {
      auto node = std::make_shared<Node>();
      node->op = op;
      node->sequence = ++g_sequence;
      node->inputs = std::move(inputs);
      node->backward = std::move(backward);
      data->requires_grad = true;
      data->node = std::move(node);
    }
    return Tensor(std::move(data));
  }
};

Tensor::Tensor(Shape shape, std::vector<double> value) {
  if (numel(shape) != value.size()) {
    throw InputError("Tensor: value length " + std::to_string(value.size()) +
                     " does not match shape " + shape_string(shape));
  }
  d_ = std::make_shared<TensorData>();
  d_->shape = std::move(shape);
  d_->value = std::move(value);
}

Tensor Tensor::zeros(Shape shape) {
  const std::size_t n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double v) {
  const std::size_t n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, {v}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> value) {
  Tensor t(std::move(shape), std::move(value));
  t.d_->requires_grad = true;
  return t;
}

std::size_t Tensor::dim(std::ptrdiff_t axis) const {
  return d_->shape[normalize_axis(axis, d_->shape.size(), "dim")];
}

double Tensor::item() const {
  if (d_->value.size() != 1) {
    throw InputError("item: tensor has " + std::to_string(d_->value.size()) + " elements");
  }
  return d_->value[0];
}

void Tensor::zero_grad() { d_->grad.assign(d_->value.size(), 0.0); }

Tensor Tensor::detach() const { return Tensor(d_->shape, d_->value); }

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw InputError("backward: loss must be a one-element tensor");
  }
  if (!loss.requires_grad()) throw InputError("backward: loss does not depend on any parameter");
  TensorData& root = loss.data();
  if (!root.node) {
    grad_of(root)[0] += 1.0;
    return;
  }
  if (root.node->consumed) {
    throw InputError("backward: graph already consumed; run the forward pass again");
  }

  // Owning references keep every intermediate alive while nodes release inputs.
  std::vector<std::pair<std::shared_ptr<TensorData>, Node*>> order;
  std::unordered_set<const Node*> seen;
  std::vector<std::shared_ptr<TensorData>> stack{loss.handle()};
  while (!stack.empty()) {
    std::shared_ptr<TensorData> t = std::move(stack.back());
    stack.pop_back();
    Node* node = t->node.get();
    if (!node || node->consumed || !seen.insert(node).second) continue;
    for (const Tensor& in : node->inputs) {
      if (in.requires_grad()) stack.push_back(in.handle());
    }
    order.emplace_back(std::move(t), node);
  }
  std::sort(order.begin(), order.end(),
            [](const auto& a, const auto& b) { return a.second->sequence > b.second->sequence; });

  grad_of(root)[0] += 1.0;
  for (auto& [out, node] : order) {
    if (!out->grad.empty()) {
      if (!g_fault.op.empty() && node->op == g_fault.op) {
        TensorData faulty;
        faulty.shape = out->shape;
        faulty.value = out->value;
        faulty.grad = out->grad;
        for (double& g : faulty.grad) g *= g_fault.factor;
        node->backward(faulty);
      } else {
        node->backward(*out);
      }
    }
    node->consumed = true;
    node->backward = nullptr;
    node->inputs.clear();
    if (out.get() != &root) std::vector<double>().swap(out->grad);
  }
}

namespace testing {

void set_backward_fault(std::string op, double factor) {
  g_fault.op = std::move(op);
  g_fault.factor = factor;
}

}  // namespace testing

namespace {

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(), big.end() - static_cast<std::ptrdiff_t>(small.size()));
}

// f(a, b) forward; da(a, b, y) and db(a, b, y) are the partial derivatives.
template <class F, class DA, class DB>
Tensor binary(std::string_view op, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
  Shape out_shape;
  if (a.shape() == b.shape() || is_suffix(b.shape(), a.shape())) {
    out_shape = a.shape();
  } else if (is_suffix(a.shape(), b.shape())) {
    out_shape = b.shape();
  } else {
    throw InputError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  const std::size_t n = numel(out_shape);
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i % na], bv[i % nb]);

  auto ad = a.handle();
  auto bd = b.handle();
  return OpBuilder::make(op, std::move(out_shape), std::move(out), {a, b},
                         [ad, bd, da, db](const TensorData& o) {
                           const std::size_t n = o.value.size();
                           const std::size_t na = ad->value.size();
                           const std::size_t nb = bd->value.size();
                           if (ad->requires_grad) {
                             auto& ga = grad_of(*ad);
                             for (std::size_t i = 0; i < n; ++i) {
                               ga[i % na] += o.grad[i] * da(ad->value[i % na], bd->value[i % nb], o.value[i]);
                             }
                           }
                           if (bd->requires_grad) {
                             auto& gb = grad_of(*bd);
                             for (std::size_t i = 0; i < n; ++i) {
                               gb[i % nb] += o.grad[i] * db(ad->value[i % na], bd->value[i % nb], o.value[i]);
                             }
                           }
                         });
}

// f(x) forward; df(x, y) derivative.
template <class F, class DF>
Tensor unary(std::string_view op, const Tensor& x, F f, DF df) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  auto xd = x.handle();
  return OpBuilder::make(op, x.shape(), std::move(out), {x}, [xd, df](const TensorData& o) {
    auto& g = grad_of(*xd);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * df(xd->value[i], o.value[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

// C[n,m] += A[n,k] * B[k,m]
void gemm_nn(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
    }
  }
}

// dA[n,k] += dC[n,m] * B[k,m]^T
void gemm_nt(std::size_t n, std::size_t k, std::size_t m, const double* dc, const double* b,
             double* da) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* crow = dc + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * m;
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += crow[j] * brow[j];
      da[i * k + p] += acc;
    }
  }
}

// dB[k,m] += A[n,k]^T * dC[n,m]
void gemm_tn(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* dc,
             double* db) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* crow = dc + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      double* brow = db + p * m;
      for (std::size_t j = 0; j < m; ++j) brow[j] += aip * crow[j];
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary(
      "minimum", a, b, [](double x, double y) { return std::min(x, y); },
      [](double x, double y, double) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x <= y ? 0.0 : 1.0; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary(
      "maximum", a, b, [](double x, double y) { return std::max(x, y); },
      [](double x, double y, double) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x >= y ? 0.0 : 1.0; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(
      "add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary(
      "mul_scalar", a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor& x) {
  return unary(
      "neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor abs(const Tensor& x) {
  return unary(
      "abs", x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor log(const Tensor& x) {
  return unary(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      "sqrt", x, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Tensor softplus(const Tensor& x) {
  return unary("softplus", x, stable_softplus, [](double v, double) { return stable_sigmoid(v); });
}

Tensor lgamma(const Tensor& x) {
  return unary(
      "lgamma", x, [](double v) { return special::lgamma(v); },
      [](double v, double) { return special::digamma(v); });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary(
      "clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) throw InputError("matmul: operands need rank >= 2");
  const std::size_t k = a.dim(-1);
  if (b.dim(-2) != k) {
    throw InputError("matmul: inner dimensions differ: " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  const std::size_t m = b.dim(-1);
  std::size_t batches = 1;
  std::size_t n = 0;
  bool batched_b = false;
  if (b.rank() == 2) {
    n = a.size() / k;
  } else {
    if (a.rank() != b.rank() ||
        !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin())) {
      throw InputError("matmul: batch dimensions differ: " + shape_string(a.shape()) + " x " +
                       shape_string(b.shape()));
    }
    n = a.dim(-2);
    batches = a.size() / (n * k);
    batched_b = true;
  }
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(m);
  std::vector<double> out(numel(out_shape), 0.0);
  const std::size_t b_stride = batched_b ? k * m : 0;
  for (std::size_t t = 0; t < batches; ++t) {
    gemm_nn(n, k, m, a.values().data() + t * n * k, b.values().data() + t * b_stride,
            out.data() + t * n * m);
  }
  auto ad = a.handle();
  auto bd = b.handle();
  return OpBuilder::make("matmul", std::move(out_shape), std::move(out), {a, b},
                         [ad, bd, batches, n, k, m, b_stride](const TensorData& o) {
                           if (ad->requires_grad) {
                             auto& ga = grad_of(*ad);
                             for (std::size_t t = 0; t < batches; ++t) {
                               gemm_nt(n, k, m, o.grad.data() + t * n * m,
                                       bd->value.data() + t * b_stride, ga.data() + t * n * k);
                             }
                           }
                           if (bd->requires_grad) {
                             auto& gb = grad_of(*bd);
                             for (std::size_t t = 0; t < batches; ++t) {
                               gemm_tn(n, k, m, ad->value.data() + t * n * k,
                                       o.grad.data() + t * n * m, gb.data() + t * b_stride);
                             }
                           }
                         });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() < 2) throw InputError("transpose: rank must be >= 2");
  const std::size_t r = x.dim(-2);
  const std::size_t c = x.dim(-1);
  const std::size_t batches = x.size() / (r * c);
  Shape out_shape = x.shape();
  std::swap(out_shape[out_shape.size() - 1], out_shape[out_shape.size() - 2]);
  std::vector<double> out(x.size());
  const auto xv = x.values();
  for (std::size_t t = 0; t < batches; ++t) {
    const std::size_t base = t * r * c;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) out[base + j * r + i] = xv[base + i * c + j];
    }
  }
  auto xd = x.handle();
  return OpBuilder::make("transpose", std::move(out_shape), std::move(out), {x},
                         [xd, r, c, batches](const TensorData& o) {
                           auto& g = grad_of(*xd);
                           for (std::size_t t = 0; t < batches; ++t) {
                             const std::size_t base = t * r * c;
                             for (std::size_t i = 0; i < r; ++i) {
                               for (std::size_t j = 0; j < c; ++j) {
                                 g[base + i * c + j] += o.grad[base + j * r + i];
                               }
                             }
                           }
                         });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw InputError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  auto xd = x.handle();
  return OpBuilder::make("reshape", std::move(shape), std::vector<double>(x.values().begin(), x.values().end()),
                         {x}, [xd](const TensorData& o) {
                           auto& g = grad_of(*xd);
                           for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
                         });
}

Tensor concat(std::span<const Tensor> parts, std::ptrdiff_t axis) {
  if (parts.empty()) throw InputError("concat: no inputs");
  const Shape& first = parts[0].shape();
  const std::size_t ax = normalize_axis(axis, first.size(), "concat");
  Shape out_shape = first;
  out_shape[ax] = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == ax || s[d] == first[d];
    if (!ok) {
      throw InputError("concat: incompatible shapes " + shape_string(first) + " and " + shape_string(s));
    }
    out_shape[ax] += s[ax];
  }
  std::size_t outer = 1;
  for (std::size_t d = 0; d < ax; ++d) outer *= first[d];
  std::size_t inner = 1;
  for (std::size_t d = ax + 1; d < first.size(); ++d) inner *= first[d];
  const std::size_t out_row = out_shape[ax] * inner;

  std::vector<double> out(numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t row = p.dim(static_cast<std::ptrdiff_t>(ax)) * inner;
    const auto pv = p.values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * row), row,
                  out.begin() + static_cast<std::ptrdiff_t>(o * out_row + offset));
    }
    offsets.push_back(offset);
    offset += row;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  std::vector<std::shared_ptr<TensorData>> handles;
  for (const Tensor& p : parts) handles.push_back(p.handle());
  return OpBuilder::make("concat", std::move(out_shape), std::move(out), std::move(inputs),
                         [handles, offsets, outer, out_row](const TensorData& o) {
                           for (std::size_t i = 0; i < handles.size(); ++i) {
                             TensorData& in = *handles[i];
                             if (!in.requires_grad) continue;
                             auto& g = grad_of(in);
                             const std::size_t row = in.value.size() / outer;
                             for (std::size_t r = 0; r < outer; ++r) {
                               const double* src = o.grad.data() + r * out_row + offsets[i];
                               double* dst = g.data() + r * row;
                               for (std::size_t j = 0; j < row; ++j) dst[j] += src[j];
                             }
                           }
                         });
}

Tensor concat(std::initializer_list<Tensor> parts, std::ptrdiff_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor slice(const Tensor& x, std::ptrdiff_t axis, std::size_t start, std::size_t stop) {
  const std::size_t ax = normalize_axis(axis, x.rank(), "slice");
  if (start >= stop || stop > x.shape()[ax]) {
    throw InputError("slice: range [" + std::to_string(start) + ", " + std::to_string(stop) +
                     ") invalid for " + shape_string(x.shape()));
  }
  std::size_t outer = 1;
  for (std::size_t d = 0; d < ax; ++d) outer *= x.shape()[d];
  std::size_t inner = 1;
  for (std::size_t d = ax + 1; d < x.rank(); ++d) inner *= x.shape()[d];
  const std::size_t in_row = x.shape()[ax] * inner;
  const std::size_t out_row = (stop - start) * inner;
  const std::size_t offset = start * inner;
  Shape out_shape = x.shape();
  out_shape[ax] = stop - start;
  std::vector<double> out(outer * out_row);
  const auto xv = x.values();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(o * in_row + offset), out_row,
                out.begin() + static_cast<std::ptrdiff_t>(o * out_row));
  }
  auto xd = x.handle();
  return OpBuilder::make("slice", std::move(out_shape), std::move(out), {x},
                         [xd, outer, in_row, out_row, offset](const TensorData& o) {
                           auto& g = grad_of(*xd);
                           for (std::size_t r = 0; r < outer; ++r) {
                             for (std::size_t j = 0; j < out_row; ++j) {
                               g[r * in_row + offset + j] += o.grad[r * out_row + j];
                             }
                           }
                         });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  auto xd = x.handle();
  return OpBuilder::make("sum", Shape{}, {total}, {x}, [xd](const TensorData& o) {
    auto& g = grad_of(*xd);
    for (double& v : g) v += o.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.size());
  double total = 0.0;
  for (double v : x.values()) total += v;
  auto xd = x.handle();
  return OpBuilder::make("mean", Shape{}, {total / n}, {x}, [xd, n](const TensorData& o) {
    auto& g = grad_of(*xd);
    for (double& v : g) v += o.grad[0] / n;
  });
}

Tensor sum_last(const Tensor& x) {
  if (x.rank() == 0) throw InputError("sum_last: scalar input");
  const std::size_t d = x.dim(-1);
  const std::size_t rows = x.size() / d;
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  std::vector<double> out(rows, 0.0);
  const auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) out[r] += xv[r * d + j];
  }
  auto xd = x.handle();
  return OpBuilder::make("sum_last", std::move(out_shape), std::move(out), {x},
                         [xd, d, rows](const TensorData& o) {
                           auto& g = grad_of(*xd);
                           for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t j = 0; j < d; ++j) g[r * d + j] += o.grad[r];
                           }
                         });
}

Tensor softmax(const Tensor& x) {
  if (x.rank() == 0) throw InputError("softmax: scalar input");
  const std::size_t d = x.dim(-1);
  const std::size_t rows = x.size() / d;
  std::vector<double> out(x.size());
  const auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * d;
    double* y = out.data() + r * d;
    const double mx = *std::max_element(in, in + d);
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      y[j] = std::exp(in[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < d; ++j) y[j] /= z;
  }
  auto xd = x.handle();
  return OpBuilder::make("softmax", x.shape(), std::move(out), {x}, [xd, d, rows](const TensorData& o) {
    auto& g = grad_of(*xd);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = o.value.data() + r * d;
      const double* gy = o.grad.data() + r * d;
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < d; ++j) g[r * d + j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor layernorm(const Tensor& x, const Tensor& scale, const Tensor& shift, double eps) {
  if (x.rank() == 0) throw InputError("layernorm: scalar input");
  const std::size_t d = x.dim(-1);
  if (scale.shape() != Shape{d} || shift.shape() != Shape{d}) {
    throw InputError("layernorm: scale/shift must have shape [" + std::to_string(d) + "]");
  }
  const std::size_t rows = x.size() / d;
  std::vector<double> out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> rstd(rows);
  const auto xv = x.values();
  const auto sv = scale.values();
  const auto bv = shift.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += in[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(d);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (in[j] - mu) * rstd[r];
      out[r * d + j] = xhat[r * d + j] * sv[j] + bv[j];
    }
  }
  auto xd = x.handle();
  auto sd = scale.handle();
  auto bd = shift.handle();
  return OpBuilder::make(
      "layernorm", x.shape(), std::move(out), {x, scale, shift},
      [xd, sd, bd, d, rows, xhat = std::move(xhat), rstd = std::move(rstd)](const TensorData& o) {
        if (bd->requires_grad) {
          auto& gb = grad_of(*bd);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < d; ++j) gb[j] += o.grad[r * d + j];
          }
        }
        if (sd->requires_grad) {
          auto& gs = grad_of(*sd);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < d; ++j) gs[j] += o.grad[r * d + j] * xhat[r * d + j];
          }
        }
        if (xd->requires_grad) {
          auto& gx = grad_of(*xd);
          const double inv_d = 1.0 / static_cast<double>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double m1 = 0.0;
            double m2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double gh = o.grad[r * d + j] * sd->value[j];
              m1 += gh;
              m2 += gh * xhat[r * d + j];
            }
            m1 *= inv_d;
            m2 *= inv_d;
            for (std::size_t j = 0; j < d; ++j) {
              const double gh = o.grad[r * d + j] * sd->value[j];
              gx[r * d + j] += rstd[r] * (gh - m1 - xhat[r * d + j] * m2);
            }
          }
        }
      });
}

}  // namespace betadet::ag
