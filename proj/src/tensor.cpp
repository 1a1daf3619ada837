#include "mmsum/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace mmsum::nn {

void fail(const std::string& msg) { throw Error(msg); }

std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

namespace {

thread_local int g_no_grad_depth = 0;

NodePtr make_node(Shape shape, std::vector<double> data, const char* tag) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->tag = tag;
  return n;
}

// Wires parents and the backprop closure onto `out` when grad recording
// is active and at least one parent needs gradients.
void wire(const NodePtr& out, std::vector<NodePtr> parents, std::function<void()> backprop) {
  if (!grad_enabled()) return;
  bool any = false;
  for (const auto& p : parents) any = any || p->requires_grad;
  if (!any) return;
  out->requires_grad = true;
  out->parents = std::move(parents);
  out->backprop = std::move(backprop);
}

void ensure_grad(Node* n) {
  if (n->grad.size() != n->data.size()) n->grad.assign(n->data.size(), 0.0);
}

// Rank-2 view used for broadcasting arithmetic.
struct View2 {
  std::size_t r, c;
};

View2 view2(const Shape& s) {
  if (s.size() == 1) return {1, s[0]};
  return {s[0], s[1]};
}

void mm_nn(const double* a, std::size_t n, std::size_t k, const double* b, std::size_t m,
           double* c) {
  // c[n,m] += a[n,k] * b[k,m]
  for (std::size_t i = 0; i < n; ++i) {
    const double* ar = a + i * k;
    double* cr = c + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ar[p];
      if (av == 0.0) continue;
      const double* br = b + p * m;
      for (std::size_t j = 0; j < m; ++j) cr[j] += av * br[j];
    }
  }
}

void mm_nt(const double* a, std::size_t n, std::size_t k, const double* b, std::size_t m,
           double* c) {
  // c[n,m] += a[n,k] * b[m,k]^T
  for (std::size_t i = 0; i < n; ++i) {
    const double* ar = a + i * k;
    double* cr = c + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double* br = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
      cr[j] += s;
    }
  }
}

void mm_tn(const double* a, std::size_t n, std::size_t k, const double* b, std::size_t m,
           double* c) {
  // c[k,m] += a[n,k]^T * b[n,m]
  for (std::size_t i = 0; i < n; ++i) {
    const double* ar = a + i * k;
    const double* br = b + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ar[p];
      if (av == 0.0) continue;
      double* cr = c + p * m;
      for (std::size_t j = 0; j < m; ++j) cr[j] += av * br[j];
    }
  }
}

// Shared elementwise-binary machinery with the broadcast rules from the
// header. FD gives the partial of out w.r.t. each input at a point.
template <class FV, class FA, class FB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* tag, FV fv, FA fa, FB fb) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  Shape out_shape;
  if (sa == sb) {
    out_shape = sa;
  } else if (numel(sb) == 1 && sb.size() <= 2) {
    out_shape = sa;
  } else if (numel(sa) == 1 && sa.size() <= 2) {
    out_shape = sb;
  } else if (sa.size() == 2 && sb.size() == 2 && (sa[0] == sb[0] || sa[0] == 1 || sb[0] == 1) &&
             (sa[1] == sb[1] || sa[1] == 1 || sb[1] == 1)) {
    out_shape = {std::max(sa[0], sb[0]), std::max(sa[1], sb[1])};
  } else {
    fail(std::string(tag) + ": incompatible shapes " + shape_str(sa) + " vs " + shape_str(sb));
  }

  const View2 va = view2(sa), vb = view2(sb), vo = view2(out_shape);
  const auto& da = a.data();
  const auto& db = b.data();
  std::vector<double> out(numel(out_shape));
  auto idx = [](const View2& v, std::size_t i, std::size_t j) {
    return (v.r == 1 ? 0 : i) * v.c + (v.c == 1 ? 0 : j);
  };
  for (std::size_t i = 0; i < vo.r; ++i)
    for (std::size_t j = 0; j < vo.c; ++j)
      out[i * vo.c + j] = fv(da[idx(va, i, j)], db[idx(vb, i, j)]);

  NodePtr n = make_node(out_shape, std::move(out), tag);
  Node* self = n.get();
  Node* pa = a.node().get();
  Node* pb = b.node().get();
  wire(n, {a.node(), b.node()}, [self, pa, pb, va, vb, vo, idx, fa, fb]() {
    if (pa->requires_grad) ensure_grad(pa);
    if (pb->requires_grad) ensure_grad(pb);
    for (std::size_t i = 0; i < vo.r; ++i)
      for (std::size_t j = 0; j < vo.c; ++j) {
        const double g = self->grad[i * vo.c + j];
        const double av = pa->data[idx(va, i, j)];
        const double bv = pb->data[idx(vb, i, j)];
        if (pa->requires_grad) pa->grad[idx(va, i, j)] += g * fa(av, bv);
        if (pb->requires_grad) pb->grad[idx(vb, i, j)] += g * fb(av, bv);
      }
  });
  return wrap_node(n);
}

template <class FV, class FD>
Tensor unary_op(const Tensor& a, const char* tag, FV fv, FD fd) {
  std::vector<double> out(a.size());
  const auto& da = a.data();
  for (std::size_t i = 0; i < da.size(); ++i) out[i] = fv(da[i]);
  NodePtr n = make_node(a.shape(), std::move(out), tag);
  Node* self = n.get();
  Node* pa = a.node().get();
  wire(n, {a.node()}, [self, pa, fd]() {
    ensure_grad(pa);
    for (std::size_t i = 0; i < self->data.size(); ++i)
      pa->grad[i] += self->grad[i] * fd(pa->data[i], self->data[i]);
  });
  return wrap_node(n);
}

void require_rank2(const Tensor& t, const char* tag) {
  check(t.shape().size() == 2, std::string(tag) + ": rank-2 tensor required, got shape " +
                                   shape_str(t.shape()));
}

// Topological order with parents before children.
std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool grad_enabled() { return g_no_grad_depth == 0; }

Tensor wrap_node(NodePtr n) {
  struct Access : Tensor {
    explicit Access(NodePtr p) : Tensor(std::move(p)) {}
  };
  return Access(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  check(!shape.empty() && shape.size() <= 2, "tensor rank must be 1 or 2");
  std::vector<double> d(numel(shape), value);
  NodePtr n = make_node(std::move(shape), std::move(d), "leaf");
  n->requires_grad = requires_grad;
  return wrap_node(n);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  check(!shape.empty() && shape.size() <= 2, "tensor rank must be 1 or 2");
  check(numel(shape) == data.size(), "tensor data length " + std::to_string(data.size()) +
                                         " does not match shape " + shape_str(shape));
  NodePtr n = make_node(std::move(shape), std::move(data), "leaf");
  n->requires_grad = requires_grad;
  return wrap_node(n);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

Tensor Tensor::glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::vector<double> d(rows * cols);
  for (double& v : d) v = rng.uniform(-limit, limit);
  NodePtr n = make_node({rows, cols}, std::move(d), "leaf");
  n->requires_grad = true;
  return wrap_node(n);
}

Tensor Tensor::gaussian(Shape shape, Rng& rng, double stddev) {
  std::vector<double> d(numel(shape));
  for (double& v : d) v = rng.normal(0.0, stddev);
  NodePtr n = make_node(std::move(shape), std::move(d), "leaf");
  n->requires_grad = true;
  return wrap_node(n);
}

std::size_t Tensor::rows() const {
  return node_->shape.size() == 2 ? node_->shape[0] : 1;
}

std::size_t Tensor::cols() const {
  return node_->shape.size() == 2 ? node_->shape[1] : node_->shape[0];
}

const std::vector<double>& Tensor::grad() const {
  check(node_->grad.size() == node_->data.size(),
        "gradient not available; run backward() first (tensor " + node_->tag + ")");
  return node_->grad;
}

double Tensor::item() const {
  check(size() == 1, "item() requires a 1-element tensor, got " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return node_->data[r * cols() + c];
}

bool Tensor::all_finite() const {
  for (double v : node_->data)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double c) {
  return unary_op(
      a, "scale", [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  check(b.shape()[0] == k, "matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                               shape_str(b.shape()));
  std::vector<double> out(n * m, 0.0);
  mm_nn(a.data().data(), n, k, b.data().data(), m, out.data());
  NodePtr node = make_node({n, m}, std::move(out), "matmul");
  Node* self = node.get();
  Node* pa = a.node().get();
  Node* pb = b.node().get();
  wire(node, {a.node(), b.node()}, [self, pa, pb, n, k, m]() {
    if (pa->requires_grad) {
      ensure_grad(pa);
      mm_nt(self->grad.data(), n, m, pb->data.data(), k, pa->grad.data());
    }
    if (pb->requires_grad) {
      ensure_grad(pb);
      mm_tn(pa->data.data(), n, k, self->grad.data(), m, pb->grad.data());
    }
  });
  return wrap_node(node);
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t n = a.shape()[0], m = a.shape()[1];
  std::vector<double> out(n * m);
  const auto& d = a.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = d[i * m + j];
  NodePtr node = make_node({m, n}, std::move(out), "transpose");
  Node* self = node.get();
  Node* pa = a.node().get();
  wire(node, {a.node()}, [self, pa, n, m]() {
    ensure_grad(pa);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) pa->grad[i * m + j] += self->grad[j * n + i];
  });
  return wrap_node(node);
}

Tensor mean_rows(const Tensor& a) {
  require_rank2(a, "mean_rows");
  const std::size_t n = a.shape()[0], d = a.shape()[1];
  check(n >= 1, "mean_rows: need at least one row");
  std::vector<double> out(d, 0.0);
  const auto& da = a.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += da[i * d + j];
  for (std::size_t j = 0; j < d; ++j) out[j] /= static_cast<double>(n);
  NodePtr node = make_node({1, d}, std::move(out), "mean_rows");
  Node* self = node.get();
  Node* pa = a.node().get();
  wire(node, {a.node()}, [self, pa, n, d]() {
    ensure_grad(pa);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) pa->grad[i * d + j] += self->grad[j] * inv;
  });
  return wrap_node(node);
}

namespace {
Tensor reduce_all(const Tensor& a, bool mean) {
  const std::size_t n = a.size();
  check(!mean || n >= 1, "mean_all: empty tensor");
  double s = 0.0;
  for (double v : a.data()) s += v;
  if (mean) s /= static_cast<double>(n);
  NodePtr node = make_node({1}, {s}, mean ? "mean_all" : "sum_all");
  Node* self = node.get();
  Node* pa = a.node().get();
  const double w = mean ? 1.0 / static_cast<double>(n) : 1.0;
  wire(node, {a.node()}, [self, pa, w]() {
    ensure_grad(pa);
    const double g = self->grad[0] * w;
    for (double& gv : pa->grad) gv += g;
  });
  return wrap_node(node);
}
}  // namespace

Tensor mean_all(const Tensor& a) { return reduce_all(a, true); }
Tensor sum_all(const Tensor& a) { return reduce_all(a, false); }

namespace {
Tensor concat_impl(const std::vector<Tensor>& parts, bool rows) {
  check(!parts.empty(), "concat: no parts");
  for (const auto& p : parts) require_rank2(p, "concat");
  const std::size_t fixed = rows ? parts[0].shape()[1] : parts[0].shape()[0];
  std::size_t total = 0;
  for (const auto& p : parts) {
    check((rows ? p.shape()[1] : p.shape()[0]) == fixed,
          std::string("concat: mismatched ") + (rows ? "column" : "row") + " extent");
    total += rows ? p.shape()[0] : p.shape()[1];
  }
  const Shape out_shape = rows ? Shape{total, fixed} : Shape{fixed, total};
  std::vector<double> out(numel(out_shape));
  if (rows) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      std::copy(p.data().begin(), p.data().end(), out.begin() + off);
      off += p.data().size();
    }
  } else {
    std::size_t coff = 0;
    for (const auto& p : parts) {
      const std::size_t pc = p.shape()[1];
      for (std::size_t i = 0; i < fixed; ++i)
        std::copy(p.data().begin() + i * pc, p.data().begin() + (i + 1) * pc,
                  out.begin() + i * total + coff);
      coff += pc;
    }
  }
  NodePtr node = make_node(out_shape, std::move(out), rows ? "concat_rows" : "concat_cols");
  Node* self = node.get();
  std::vector<NodePtr> parent_nodes;
  parent_nodes.reserve(parts.size());
  for (const auto& p : parts) parent_nodes.push_back(p.node());
  std::vector<Node*> raw;
  for (const auto& p : parent_nodes) raw.push_back(p.get());
  wire(node, parent_nodes, [self, raw, rows, fixed, total]() {
    if (rows) {
      std::size_t off = 0;
      for (Node* p : raw) {
        if (p->requires_grad) {
          ensure_grad(p);
          for (std::size_t i = 0; i < p->data.size(); ++i) p->grad[i] += self->grad[off + i];
        }
        off += p->data.size();
      }
    } else {
      std::size_t coff = 0;
      for (Node* p : raw) {
        const std::size_t pc = p->shape[1];
        if (p->requires_grad) {
          ensure_grad(p);
          for (std::size_t i = 0; i < fixed; ++i)
            for (std::size_t j = 0; j < pc; ++j)
              p->grad[i * pc + j] += self->grad[i * total + coff + j];
        }
        coff += pc;
      }
    }
  });
  return wrap_node(node);
}
}  // namespace

Tensor concat_rows(const std::vector<Tensor>& parts) { return concat_impl(parts, true); }
Tensor concat_cols(const std::vector<Tensor>& parts) { return concat_impl(parts, false); }

Tensor slice(const Tensor& a, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  require_rank2(a, "slice");
  const std::size_t n = a.shape()[0], m = a.shape()[1];
  check(r0 <= r1 && r1 <= n && c0 <= c1 && c1 <= m,
        "slice: range out of bounds for shape " + shape_str(a.shape()));
  const std::size_t sr = r1 - r0, sc = c1 - c0;
  std::vector<double> out(sr * sc);
  const auto& d = a.data();
  for (std::size_t i = 0; i < sr; ++i)
    for (std::size_t j = 0; j < sc; ++j) out[i * sc + j] = d[(r0 + i) * m + (c0 + j)];
  NodePtr node = make_node({sr, sc}, std::move(out), "slice");
  Node* self = node.get();
  Node* pa = a.node().get();
  wire(node, {a.node()}, [self, pa, r0, c0, sr, sc, m]() {
    ensure_grad(pa);
    for (std::size_t i = 0; i < sr; ++i)
      for (std::size_t j = 0; j < sc; ++j)
        pa->grad[(r0 + i) * m + (c0 + j)] += self->grad[i * sc + j];
  });
  return wrap_node(node);
}

Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1) {
  require_rank2(a, "slice_rows");
  return slice(a, r0, r1, 0, a.shape()[1]);
}

Tensor embedding(const Tensor& table, const Ids& ids) {
  require_rank2(table, "embedding");
  const std::size_t v = table.shape()[0], d = table.shape()[1];
  std::vector<double> out(ids.size() * d);
  const auto& td = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    check(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < v,
          "embedding: id " + std::to_string(ids[i]) + " out of range [0," + std::to_string(v) +
              ")");
    std::copy(td.begin() + ids[i] * d, td.begin() + (ids[i] + 1) * d, out.begin() + i * d);
  }
  NodePtr node = make_node({ids.size(), d}, std::move(out), "embedding");
  Node* self = node.get();
  Node* pt = table.node().get();
  wire(node, {table.node()}, [self, pt, ids, d]() {
    ensure_grad(pt);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < d; ++j)
        pt->grad[static_cast<std::size_t>(ids[i]) * d + j] += self->grad[i * d + j];
  });
  return wrap_node(node);
}

Tensor relu(const Tensor& a) {
  return unary_op(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a, "sigmoid",
      [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_op(
      a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

namespace {
// Row-wise softmax family. Accepts rank-1 (one row) or rank-2 input.
struct RowView {
  std::size_t n, d;
};
RowView rows_of(const Tensor& a, const char* tag) {
  const Shape& s = a.shape();
  check(numel(s) > 0, std::string(tag) + ": empty input");
  if (s.size() == 1) return {1, s[0]};
  return {s[0], s[1]};
}
}  // namespace

Tensor softmax(const Tensor& a) {
  const RowView v = rows_of(a, "softmax");
  std::vector<double> out(a.size());
  const auto& d = a.data();
  for (std::size_t i = 0; i < v.n; ++i) {
    const double* row = d.data() + i * v.d;
    double* orow = out.data() + i * v.d;
    double mx = row[0];
    for (std::size_t j = 1; j < v.d; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < v.d; ++j) s += (orow[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < v.d; ++j) orow[j] /= s;
  }
  NodePtr node = make_node(a.shape(), std::move(out), "softmax");
  Node* self = node.get();
  Node* pa = a.node().get();
  wire(node, {a.node()}, [self, pa, v]() {
    ensure_grad(pa);
    for (std::size_t i = 0; i < v.n; ++i) {
      const double* p = self->data.data() + i * v.d;
      const double* g = self->grad.data() + i * v.d;
      double dot = 0.0;
      for (std::size_t j = 0; j < v.d; ++j) dot += g[j] * p[j];
      for (std::size_t j = 0; j < v.d; ++j) pa->grad[i * v.d + j] += p[j] * (g[j] - dot);
    }
  });
  return wrap_node(node);
}

Tensor log_softmax(const Tensor& a) {
  const RowView v = rows_of(a, "log_softmax");
  std::vector<double> out(a.size());
  const auto& d = a.data();
  for (std::size_t i = 0; i < v.n; ++i) {
    const double* row = d.data() + i * v.d;
    double* orow = out.data() + i * v.d;
    double mx = row[0];
    for (std::size_t j = 1; j < v.d; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < v.d; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < v.d; ++j) orow[j] = row[j] - lse;
  }
  NodePtr node = make_node(a.shape(), std::move(out), "log_softmax");
  Node* self = node.get();
  Node* pa = a.node().get();
  wire(node, {a.node()}, [self, pa, v]() {
    ensure_grad(pa);
    for (std::size_t i = 0; i < v.n; ++i) {
      const double* ls = self->data.data() + i * v.d;
      const double* g = self->grad.data() + i * v.d;
      double gs = 0.0;
      for (std::size_t j = 0; j < v.d; ++j) gs += g[j];
      for (std::size_t j = 0; j < v.d; ++j)
        pa->grad[i * v.d + j] += g[j] - std::exp(ls[j]) * gs;
    }
  });
  return wrap_node(node);
}

Tensor layer_norm(const Tensor& a, double eps) {
  const RowView v = rows_of(a, "layer_norm");
  check(v.d >= 2, "layer_norm: row width must be >= 2");
  std::vector<double> out(a.size());
  std::vector<double> inv_sigma(v.n);
  const auto& d = a.data();
  for (std::size_t i = 0; i < v.n; ++i) {
    const double* row = d.data() + i * v.d;
    double mu = 0.0;
    for (std::size_t j = 0; j < v.d; ++j) mu += row[j];
    mu /= static_cast<double>(v.d);
    double var = 0.0;
    for (std::size_t j = 0; j < v.d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(v.d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[i] = is;
    for (std::size_t j = 0; j < v.d; ++j) out[i * v.d + j] = (row[j] - mu) * is;
  }
  NodePtr node = make_node(a.shape(), std::move(out), "layer_norm");
  Node* self = node.get();
  Node* pa = a.node().get();
  wire(node, {a.node()}, [self, pa, v, inv_sigma = std::move(inv_sigma)]() {
    ensure_grad(pa);
    for (std::size_t i = 0; i < v.n; ++i) {
      const double* y = self->data.data() + i * v.d;
      const double* g = self->grad.data() + i * v.d;
      double gm = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < v.d; ++j) {
        gm += g[j];
        gy += g[j] * y[j];
      }
      gm /= static_cast<double>(v.d);
      gy /= static_cast<double>(v.d);
      const double is = inv_sigma[i];
      for (std::size_t j = 0; j < v.d; ++j)
        pa->grad[i * v.d + j] += is * (g[j] - gm - y[j] * gy);
    }
  });
  return wrap_node(node);
}

Tensor cross_entropy_sum(const Tensor& logits, const Ids& targets) {
  require_rank2(logits, "cross_entropy");
  const std::size_t n = logits.shape()[0], vsz = logits.shape()[1];
  check(n >= 1, "cross_entropy: empty target");
  check(targets.size() == n, "cross_entropy: target count " + std::to_string(targets.size()) +
                                 " does not match logit rows " + std::to_string(n));
  // Cache the per-row softmax for the backward pass.
  std::vector<double> probs(n * vsz);
  const auto& d = logits.data();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    check(targets[i] >= 0 && static_cast<std::size_t>(targets[i]) < vsz,
          "cross_entropy: target id out of range");
    const double* row = d.data() + i * vsz;
    double* prow = probs.data() + i * vsz;
    double mx = row[0];
    for (std::size_t j = 1; j < vsz; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < vsz; ++j) s += (prow[j] = std::exp(row[j] - mx));
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < vsz; ++j) prow[j] /= s;
    loss += lse - row[targets[i]];
  }
  NodePtr node = make_node({1}, {loss}, "cross_entropy");
  Node* self = node.get();
  Node* pa = logits.node().get();
  wire(node, {logits.node()}, [self, pa, targets, n, vsz, probs = std::move(probs)]() {
    ensure_grad(pa);
    const double g = self->grad[0];
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < vsz; ++j) pa->grad[i * vsz + j] += g * probs[i * vsz + j];
      pa->grad[i * vsz + static_cast<std::size_t>(targets[i])] -= g;
    }
  });
  return wrap_node(node);
}

void backward(const Tensor& loss) {
  check(loss.size() == 1, "backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  Node* root = loss.node().get();
  auto order = topo_order(root);
  for (Node* n : order)
    if (n->requires_grad) n->grad.assign(n->data.size(), 0.0);
  if (!root->requires_grad) return;  // nothing trainable feeds this loss
  root->grad.assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop();
}

std::vector<Tensor> grad(const Tensor& loss, const std::vector<Tensor>& params) {
  // Pre-zero so parameters disconnected from this graph report zero.
  for (const auto& p : params) p.node()->grad.assign(p.size(), 0.0);
  backward(loss);
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(Tensor::from(p.shape(), p.node()->grad));
  return out;
}

std::string first_nonfinite(const Tensor& root) {
  auto order = topo_order(root.node().get());
  for (Node* n : order)
    for (double v : n->data)
      if (!std::isfinite(v)) return n->tag;
  return "";
}

}  // namespace mmsum::nn
