#include "ptmf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "ptmf/errors.hpp"

namespace ptmf {

using detail::Node;

namespace {

thread_local bool g_grad_enabled = true;
#ifdef PTMF_NO_FINITE_CHECKS
bool g_finite_checks = false;
#else
bool g_finite_checks = true;
#endif

void check_finite(const std::vector<double>& values, const char* op) {
  if (!g_finite_checks) return;
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": non-finite value in output");
    }
  }
}

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  for (std::size_t e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive: " + shape_str(shape));
  }
  check_finite(values, "leaf");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->data.size(), 0.0);
  return node;
}

// Creates an op output. The graph edge is recorded only when grad mode is on
// and some input requires a gradient.
Tensor make_result(Shape shape, std::vector<double> values, const char* op,
                   std::initializer_list<const Tensor*> inputs, detail::BackwardFn backward) {
  check_finite(values, op);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->op = op;
  bool needs = false;
  if (g_grad_enabled) {
    for (const Tensor* in : inputs) needs = needs || in->requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const Tensor* in : inputs) node->parents.push_back(in->node_ptr());
    node->backward = std::move(backward);
  }
  return Tensor::from_node(std::move(node));
}

Tensor make_result_n(Shape shape, std::vector<double> values, const char* op,
                     std::span<const Tensor> inputs, detail::BackwardFn backward) {
  check_finite(values, op);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->op = op;
  bool needs = false;
  if (g_grad_enabled) {
    for (const Tensor& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const Tensor& in : inputs) node->parents.push_back(in.node_ptr());
    node->backward = std::move(backward);
  }
  return Tensor::from_node(std::move(node));
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ValidationError(std::string(op) + ": undefined tensor");
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// Flat source offsets for each output element of a broadcast binary op.
struct Broadcast {
  Shape out;
  bool same = false;
  std::vector<std::size_t> ia;
  std::vector<std::size_t> ib;
};

Broadcast plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast plan;
  if (a == b) {
    plan.out = a;
    plan.same = true;
    return plan;
  }
  if (a.size() != b.size()) {
    throw DimensionError(std::string(op) + ": rank mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
  }
  const std::size_t rank = a.size();
  plan.out.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (a[i] == b[i] || a[i] == 1 || b[i] == 1) {
      plan.out[i] = std::max(a[i], b[i]);
    } else {
      throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " +
                           shape_str(b));
    }
  }
  std::vector<std::size_t> sa(rank), sb(rank);
  std::size_t ra = 1, rb = 1;
  for (std::size_t i = rank; i-- > 0;) {
    sa[i] = a[i] == 1 ? 0 : ra;
    sb[i] = b[i] == 1 ? 0 : rb;
    ra *= a[i];
    rb *= b[i];
  }
  const std::size_t n = shape_numel(plan.out);
  plan.ia.resize(n);
  plan.ib.resize(n);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t oa = 0, ob = 0;
    for (std::size_t i = 0; i < rank; ++i) {
      oa += idx[i] * sa[i];
      ob += idx[i] * sb[i];
    }
    plan.ia[flat] = oa;
    plan.ib[flat] = ob;
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < plan.out[i]) break;
      idx[i] = 0;
    }
  }
  return plan;
}

enum class BinaryKind { kAdd, kSub, kMul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  auto plan = std::make_shared<Broadcast>(plan_broadcast(a.shape(), b.shape(), op));
  const auto da = a.data();
  const auto db = b.data();
  const std::size_t n = shape_numel(plan->out);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = da[plan->same ? i : plan->ia[i]];
    const double y = db[plan->same ? i : plan->ib[i]];
    switch (kind) {
      case BinaryKind::kAdd: out[i] = x + y; break;
      case BinaryKind::kSub: out[i] = x - y; break;
      case BinaryKind::kMul: out[i] = x * y; break;
    }
  }
  auto na = a.node_ptr();
  auto nb = b.node_ptr();
  return make_result(
      plan->out, std::move(out), op, {&a, &b},
      [plan, na, nb, kind, n](const Node&, const double* g, std::span<double* const> pg) {
        double* ga = pg[0];
        double* gb = pg[1];
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t ia = plan->same ? i : plan->ia[i];
          const std::size_t ib = plan->same ? i : plan->ib[i];
          switch (kind) {
            case BinaryKind::kAdd:
              if (ga) ga[ia] += g[i];
              if (gb) gb[ib] += g[i];
              break;
            case BinaryKind::kSub:
              if (ga) ga[ia] += g[i];
              if (gb) gb[ib] -= g[i];
              break;
            case BinaryKind::kMul:
              if (ga) ga[ia] += g[i] * nb->data[ib];
              if (gb) gb[ib] += g[i] * na->data[ia];
              break;
          }
        }
      });
}

// y = f(x); dy/dx expressed through (x, y).
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, const char* op, Fwd fwd, Deriv deriv) {
  require_defined(x, op);
  const auto dx = x.data();
  std::vector<double> out(dx.size());
  for (std::size_t i = 0; i < dx.size(); ++i) out[i] = fwd(dx[i]);
  auto nx = x.node_ptr();
  return make_result(x.shape(), std::move(out), op, {&x},
                     [nx, deriv](const Node& self, const double* g, std::span<double* const> pg) {
                       double* gx = pg[0];
                       const std::size_t n = self.data.size();
                       for (std::size_t i = 0; i < n; ++i) {
                         gx[i] += g[i] * deriv(nx->data[i], self.data[i]);
                       }
                     });
}

}  // namespace

// ---- Tensor ---------------------------------------------------------------

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from_node(make_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return from_node(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = dist(rng);
  return from(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::normal(Shape shape, double mean, double stddev, Rng& rng, bool requires_grad) {
  std::normal_distribution<double> dist(mean, stddev);
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = dist(rng);
  return from(std::move(shape), std::move(values), requires_grad);
}

const Shape& Tensor::shape() const {
  require_defined(*this, "shape");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::data() const {
  require_defined(*this, "data");
  return node_->data;
}

std::span<double> Tensor::mutable_data() {
  require_defined(*this, "mutable_data");
  if (!node_->is_leaf()) throw ValidationError("mutable_data on a non-leaf tensor");
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  const Shape& s = shape();
  if (s.size() != 2 || row >= s[0] || col >= s[1]) {
    throw DimensionError("at(" + std::to_string(row) + "," + std::to_string(col) +
                         ") on shape " + shape_str(s));
  }
  return node_->data[row * s[1] + col];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::span<const double> Tensor::grad() const {
  require_defined(*this, "grad");
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  require_defined(*this, "grad");
  return node_->grad;
}

void Tensor::zero_grad() {
  require_defined(*this, "zero_grad");
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  require_defined(*this, "detach");
  auto node = std::make_shared<Node>();
  node->shape = node_->shape;
  node->data = node_->data;
  return from_node(std::move(node));
}

Tensor Tensor::clone(bool requires_grad) const {
  require_defined(*this, "clone");
  return from(node_->shape, node_->data, requires_grad);
}

void Tensor::backward() const {
  require_defined(*this, "backward");
  if (numel() != 1) {
    throw ValidationError("backward requires a scalar loss, got shape " + shape_str(shape()));
  }
  if (!node_->requires_grad) {
    throw ValidationError("backward on a tensor that does not require grad");
  }

  // Post-order DFS yields a topological order (inputs before outputs).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Leaves collect this sweep's gradient in scratch first and are added to
  // their persistent buffer once at the end, so a repeated backward()
  // accumulates exactly g + g.
  std::unordered_map<Node*, std::vector<double>> scratch;
  auto grad_buffer = [&](Node* n) -> double* {
    auto it = scratch.find(n);
    if (it == scratch.end()) it = scratch.emplace(n, std::vector<double>(n->data.size(), 0.0)).first;
    return it->second.data();
  };

  grad_buffer(node_.get())[0] += 1.0;
  std::vector<double*> parent_grads;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->is_leaf()) continue;
    const double* g = grad_buffer(n);
    parent_grads.clear();
    for (const auto& p : n->parents) {
      parent_grads.push_back(p->requires_grad ? grad_buffer(p.get()) : nullptr);
    }
    n->backward(*n, g, parent_grads);
    scratch.erase(n);
  }
  for (auto& [n, g] : scratch) {
    if (!n->is_leaf()) continue;
    if (n->grad.size() != g.size()) n->grad.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) n->grad[i] += g[i];
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }
void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks() { return g_finite_checks; }

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const auto da = a.data();
  const auto db = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = da[i * k + p];
      const double* brow = &db[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  auto na = a.node_ptr();
  auto nb = b.node_ptr();
  return make_result({m, n}, std::move(out), "matmul", {&a, &b},
                     [na, nb, m, k, n](const Node&, const double* g, std::span<double* const> pg) {
                       if (double* ga = pg[0]) {
                         // dA = dC * B^T
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t p = 0; p < k; ++p) {
                             double acc = 0.0;
                             for (std::size_t j = 0; j < n; ++j) {
                               acc += g[i * n + j] * nb->data[p * n + j];
                             }
                             ga[i * k + p] += acc;
                           }
                         }
                       }
                       if (double* gb = pg[1]) {
                         // dB = A^T * dC
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t p = 0; p < k; ++p) {
                             const double av = na->data[i * k + p];
                             for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
                           }
                         }
                       }
                     });
}

Tensor transpose(const Tensor& a) {
  require_defined(a, "transpose");
  if (a.rank() != 2) throw DimensionError("transpose: expected rank 2, got " + shape_str(a.shape()));
  const std::size_t r = a.dim(0), c = a.dim(1);
  const auto da = a.data();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = da[i * c + j];
  return make_result({c, r}, std::move(out), "transpose", {&a},
                     [r, c](const Node&, const double* g, std::span<double* const> pg) {
                       double* ga = pg[0];
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
                     });
}

// ---- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kAdd, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kSub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kMul, "mul"); }

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, "scale", [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      a, "add_scalar", [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor square(const Tensor& x) {
  return unary(
      x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sqrt(const Tensor& x) {
  for (double v : x.data()) {
    if (v < 0.0) throw ValidationError("sqrt: negative input " + std::to_string(v));
  }
  return unary(
      x, "sqrt", [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (v < 0.0) throw ValidationError("log: negative input " + std::to_string(v));
  }
  return unary(
      x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

// ---- softmax family -------------------------------------------------------

Tensor softmax(const Tensor& x, std::size_t axis) {
  require_defined(x, "softmax");
  const AxisSplit s = split_at(x.shape(), axis, "softmax");
  const auto dx = x.data();
  std::vector<double> out(dx.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double mx = dx[base];
      for (std::size_t j = 1; j < s.extent; ++j) mx = std::max(mx, dx[base + j * s.inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < s.extent; ++j) {
        const double e = std::exp(dx[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < s.extent; ++j) out[base + j * s.inner] /= total;
    }
  }
  return make_result(x.shape(), std::move(out), "softmax", {&x},
                     [s](const Node& self, const double* g, std::span<double* const> pg) {
                       double* gx = pg[0];
                       const auto& y = self.data;
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         for (std::size_t i = 0; i < s.inner; ++i) {
                           const std::size_t base = o * s.extent * s.inner + i;
                           double dot = 0.0;
                           for (std::size_t j = 0; j < s.extent; ++j) {
                             dot += g[base + j * s.inner] * y[base + j * s.inner];
                           }
                           for (std::size_t j = 0; j < s.extent; ++j) {
                             const std::size_t at = base + j * s.inner;
                             gx[at] += y[at] * (g[at] - dot);
                           }
                         }
                       }
                     });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  require_defined(x, "log_softmax");
  const AxisSplit s = split_at(x.shape(), axis, "log_softmax");
  const auto dx = x.data();
  std::vector<double> out(dx.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double mx = dx[base];
      for (std::size_t j = 1; j < s.extent; ++j) mx = std::max(mx, dx[base + j * s.inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < s.extent; ++j) total += std::exp(dx[base + j * s.inner] - mx);
      const double lse = mx + std::log(total);
      for (std::size_t j = 0; j < s.extent; ++j) {
        out[base + j * s.inner] = dx[base + j * s.inner] - lse;
      }
    }
  }
  return make_result(x.shape(), std::move(out), "log_softmax", {&x},
                     [s](const Node& self, const double* g, std::span<double* const> pg) {
                       double* gx = pg[0];
                       const auto& y = self.data;
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         for (std::size_t i = 0; i < s.inner; ++i) {
                           const std::size_t base = o * s.extent * s.inner + i;
                           double gsum = 0.0;
                           for (std::size_t j = 0; j < s.extent; ++j) gsum += g[base + j * s.inner];
                           for (std::size_t j = 0; j < s.extent; ++j) {
                             const std::size_t at = base + j * s.inner;
                             gx[at] += g[at] - std::exp(y[at]) * gsum;
                           }
                         }
                       }
                     });
}

// ---- reductions -----------------------------------------------------------

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  double total = 0.0;
  for (double v : x.data()) total += v;
  const std::size_t n = x.numel();
  return make_result({1}, {total}, "sum", {&x},
                     [n](const Node&, const double* g, std::span<double* const> pg) {
                       for (std::size_t i = 0; i < n; ++i) pg[0][i] += g[0];
                     });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum_axis(const Tensor& x, std::size_t axis) {
  require_defined(x, "sum_axis");
  const AxisSplit s = split_at(x.shape(), axis, "sum_axis");
  Shape out_shape = x.shape();
  out_shape[axis] = 1;
  const auto dx = x.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t j = 0; j < s.extent; ++j)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[o * s.inner + i] += dx[(o * s.extent + j) * s.inner + i];
  return make_result(std::move(out_shape), std::move(out), "sum_axis", {&x},
                     [s](const Node&, const double* g, std::span<double* const> pg) {
                       double* gx = pg[0];
                       for (std::size_t o = 0; o < s.outer; ++o)
                         for (std::size_t j = 0; j < s.extent; ++j)
                           for (std::size_t i = 0; i < s.inner; ++i)
                             gx[(o * s.extent + j) * s.inner + i] += g[o * s.inner + i];
                     });
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  const double n = static_cast<double>(x.dim(axis));
  return scale(sum_axis(x, axis), 1.0 / n);
}

// ---- normalization / regularization --------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_defined(x, "layer_norm");
  if (!(eps > 0.0)) throw ValidationError("layer_norm: eps must be positive");
  const std::size_t d = x.shape().back();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " do not match last axis of " +
                         shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / d;
  const auto dx = x.data();
  const auto dg = gain.data();
  const auto db = bias.data();
  std::vector<double> out(dx.size());
  auto xhat = std::make_shared<std::vector<double>>(dx.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = &dx[r * d];
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * is;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = h * dg[j] + db[j];
    }
  }
  auto ng = gain.node_ptr();
  return make_result(
      x.shape(), std::move(out), "layer_norm", {&x, &gain, &bias},
      [ng, xhat, inv_std, rows, d](const Node&, const double* g, std::span<double* const> pg) {
        double* gx = pg[0];
        double* ggain = pg[1];
        double* gbias = pg[2];
        std::vector<double> dh(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gr = g + r * d;
          const double* hr = xhat->data() + r * d;
          if (ggain)
            for (std::size_t j = 0; j < d; ++j) ggain[j] += gr[j] * hr[j];
          if (gbias)
            for (std::size_t j = 0; j < d; ++j) gbias[j] += gr[j];
          if (!gx) continue;
          double mean_dh = 0.0, mean_dh_h = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            dh[j] = gr[j] * ng->data[j];
            mean_dh += dh[j];
            mean_dh_h += dh[j] * hr[j];
          }
          mean_dh /= static_cast<double>(d);
          mean_dh_h /= static_cast<double>(d);
          const double is = (*inv_std)[r];
          for (std::size_t j = 0; j < d; ++j) {
            gx[r * d + j] += is * (dh[j] - mean_dh - hr[j] * mean_dh_h);
          }
        }
      });
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ValidationError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::bernoulli_distribution keep(1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(x.numel());
  for (double& m : *mask) m = keep(rng) ? keep_scale : 0.0;
  const auto dx = x.data();
  std::vector<double> out(dx.size());
  for (std::size_t i = 0; i < dx.size(); ++i) out[i] = dx[i] * (*mask)[i];
  return make_result(x.shape(), std::move(out), "dropout", {&x},
                     [mask](const Node&, const double* g, std::span<double* const> pg) {
                       for (std::size_t i = 0; i < mask->size(); ++i) pg[0][i] += g[i] * (*mask)[i];
                     });
}

// ---- structural -----------------------------------------------------------

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ValidationError("concat: no inputs");
  for (const Tensor& p : parts) require_defined(p, "concat");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw DimensionError("concat: axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) {
      throw DimensionError("concat: shape " + shape_str(s) + " incompatible with " +
                           shape_str(first) + " along axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  std::vector<std::size_t> chunk(parts.size());
  std::size_t out_chunk = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    chunk[k] = parts[k].numel() / outer;
    out_chunk += chunk[k];
  }
  std::vector<double> out(outer * out_chunk);
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t offset = o * out_chunk;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const auto d = parts[k].data();
      std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(o * chunk[k]), chunk[k],
                  out.begin() + static_cast<std::ptrdiff_t>(offset));
      offset += chunk[k];
    }
  }
  return make_result_n(std::move(out_shape), std::move(out), "concat", parts,
                       [chunk, outer, out_chunk](const Node&, const double* g,
                                                 std::span<double* const> pg) {
                         for (std::size_t o = 0; o < outer; ++o) {
                           std::size_t offset = o * out_chunk;
                           for (std::size_t k = 0; k < chunk.size(); ++k) {
                             if (double* gk = pg[k]) {
                               for (std::size_t i = 0; i < chunk[k]; ++i) {
                                 gk[o * chunk[k] + i] += g[offset + i];
                               }
                             }
                             offset += chunk[k];
                           }
                         }
                       });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  require_defined(x, "slice");
  const AxisSplit s = split_at(x.shape(), axis, "slice");
  if (begin >= end || end > s.extent) {
    throw DimensionError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for axis " + std::to_string(axis) + " of " +
                         shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t len = end - begin;
  const auto dx = x.data();
  std::vector<double> out(s.outer * len * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    const double* src = &dx[(o * s.extent + begin) * s.inner];
    std::copy_n(src, len * s.inner, out.begin() + static_cast<std::ptrdiff_t>(o * len * s.inner));
  }
  return make_result(std::move(out_shape), std::move(out), "slice", {&x},
                     [s, begin, len](const Node&, const double* g, std::span<double* const> pg) {
                       double* gx = pg[0];
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         double* dst = gx + (o * s.extent + begin) * s.inner;
                         const double* src = g + o * len * s.inner;
                         for (std::size_t i = 0; i < len * s.inner; ++i) dst[i] += src[i];
                       }
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape) +
                         " changes element count");
  }
  const std::size_t n = x.numel();
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), "reshape", {&x},
                     [n](const Node&, const double* g, std::span<double* const> pg) {
                       for (std::size_t i = 0; i < n; ++i) pg[0][i] += g[i];
                     });
}

}  // namespace ptmf
