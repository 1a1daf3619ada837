#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmsum/nn/rng.hpp"

namespace mmsum::nn {

// Error type for contract violations (bad shapes, invalid arguments,
// malformed files). The CLI maps these to exit code 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

[[noreturn]] void fail(const std::string& msg);

inline void check(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

using Shape = std::vector<std::size_t>;
using Ids = std::vector<std::int32_t>;

std::size_t numel(const Shape& s);
std::string shape_str(const Shape& s);

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated by backward(); same length as data
  bool requires_grad = false;
  std::string tag;  // op name, or parameter name for leaves (diagnostics)
  std::vector<NodePtr> parents;
  std::function<void()> backprop;  // accumulates into parents' grad
};

// Dense tensor of 64-bit reals participating in a reverse-mode
// differentiation graph. Value type over a shared node: copies alias the
// same storage and graph position.
//
// Rank is 1 or 2. Sequence-like dimensions may be zero (an empty visual
// block is a [0, d] tensor); parameter tensors always have positive
// extents. Data is immutable after creation except through the optimizer
// (adam_step) or explicit mutable_data() access.
//
// Graph retain policy: the graph is define-by-run and rebuilt each
// forward pass. backward() may be called repeatedly on the same graph;
// each call first zeroes the grad buffers of every reachable node, then
// accumulates fresh gradients, so leaf .grad always reflects exactly one
// backward pass.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  // Glorot-uniform fan-in/fan-out init for a [rows, cols] matrix.
  static Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng);
  static Tensor gaussian(Shape shape, Rng& rng, double stddev);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return node_->data.size(); }

  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& mutable_data() { return node_->data; }
  const std::vector<double>& grad() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  double item() const;                            // value of a 1-element tensor
  double at(std::size_t r, std::size_t c) const;  // rank-2 access

  bool all_finite() const;

  const std::string& tag() const { return node_->tag; }
  void set_tag(const std::string& t) { node_->tag = t; }

  NodePtr node() const { return node_; }

 private:
  explicit Tensor(NodePtr n) : node_(std::move(n)) {}
  NodePtr node_;

  friend Tensor wrap_node(NodePtr);
};

Tensor wrap_node(NodePtr n);

// When a NoGradGuard is alive, ops do not record parents or backprop
// closures (pure inference mode). Guards nest.
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
};
bool grad_enabled();

// Elementwise arithmetic. Shapes must match, or one operand broadcasts:
// a scalar ({1} or [1,1]) against anything, or a rank-2 operand whose
// row and/or column extent is 1 against a rank-2 tensor.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b);  // [n,k]x[k,m] -> [n,m]
Tensor transpose(const Tensor& a);

Tensor mean_rows(const Tensor& a);  // [n,d] -> [1,d], n >= 1
Tensor mean_all(const Tensor& a);   // -> {1}
Tensor sum_all(const Tensor& a);    // -> {1}

Tensor concat_rows(const std::vector<Tensor>& parts);  // along axis 0
Tensor concat_cols(const std::vector<Tensor>& parts);  // along axis 1
Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1);
Tensor slice(const Tensor& a, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1);

// Row lookup: out[i] = table[ids[i]]. Gradient scatter-adds into the table.
Tensor embedding(const Tensor& table, const Ids& ids);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

// Row-wise, numerically stable (max / log-sum-exp subtraction).
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);

// Per-row standardization (x - mean) / sqrt(var + eps), no affine part.
Tensor layer_norm(const Tensor& a, double eps);

// Sum over positions of -log p(target_i | logits row i), with the
// log-sum-exp computed stably. logits [n,V], targets length n.
Tensor cross_entropy_sum(const Tensor& logits, const Ids& targets);

// Runs one backward pass from a scalar loss (shape {1}).
void backward(const Tensor& loss);

// Backward + gather: returns dL/dp for each param as a detached tensor.
// Parameters not reachable from the loss get a zero gradient.
std::vector<Tensor> grad(const Tensor& loss, const std::vector<Tensor>& params);

// Tag of the first non-finite tensor in the graph under `root`, walking
// inputs before outputs; empty string when everything is finite.
std::string first_nonfinite(const Tensor& root);

}  // namespace mmsum::nn
