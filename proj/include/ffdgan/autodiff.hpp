#pragma once

// Reverse-mode automatic differentiation on dense row-major matrices.
// Backward rules are themselves written with graph operations, so gradients
// computed with create_graph = true can be differentiated again.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ffdgan::ad {

struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Tensor(std::size_t r, std::size_t c, std::vector<double> values);

  std::size_t size() const { return data.size(); }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

class Var;

struct Node {
  std::string op;
  Tensor value;
  bool requires_grad = false;
  std::vector<Var> parents;
  // Maps the gradient of this node to one gradient per parent. `need` flags
  // the parents whose gradient is wanted; the others may be left undefined.
  std::function<std::vector<Var>(const Var& grad, const std::vector<bool>& need)> backward;
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  // Direct access for optimizers; invalidates any graph built on this value.
  Tensor& mutable_value() { return node_->value; }
  std::size_t rows() const { return node_->value.rows; }
  std::size_t cols() const { return node_->value.cols; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::string& op() const { return node_->op; }
  Node* get() const { return node_.get(); }
  double item() const;

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Tensor value);
Var parameter(Tensor value);
Var scalar(double value);

// Graph recording is on by default; the guard turns it off for its scope
// (per thread).
bool grad_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

Var matmul(const Var& a, const Var& b);     // a b
Var matmul_nt(const Var& a, const Var& b);  // a b^T
Var matmul_tn(const Var& a, const Var& b);  // a^T b
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var div(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var add_row(const Var& a, const Var& row);            // row (1 x c) added to every row
Var mul_col(const Var& a, const Var& col);            // col (r x 1) scales every column
Var sum_rows(const Var& a);                           // r x c -> 1 x c
Var broadcast_rows(const Var& row, std::size_t rows); // 1 x c -> rows x c
Var sum_cols(const Var& a);                           // r x c -> r x 1
Var broadcast_cols(const Var& col, std::size_t cols); // r x 1 -> r x cols
Var sum(const Var& a);                                // -> 1 x 1
Var mean(const Var& a);
Var broadcast_to(const Var& s, std::size_t rows, std::size_t cols);
Var mask_mul(const Var& a, const Tensor& mask);       // elementwise by a constant
Var leaky_relu(const Var& a, double slope);
Var square(const Var& a);
Var sqrt(const Var& a);

// Gradients of the scalar `output` with respect to `inputs`. Inputs the
// output does not depend on receive zeros.
std::vector<Var> grad(const Var& output, std::span<const Var> inputs, bool create_graph = false);

}  // namespace ffdgan::ad
