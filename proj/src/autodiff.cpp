#include "ffdgan/autodiff.hpp"

#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "ffdgan/errors.hpp"
#include "ffdgan/kernels.hpp"

namespace ffdgan::ad {

namespace {

thread_local bool g_grad_enabled = true;

using Needs = std::vector<bool>;
using Backward = std::function<std::vector<Var>(const Var&, const Needs&)>;

Var make(std::string op, Tensor value, std::vector<Var> parents, Backward backward) {
  auto node = std::make_shared<Node>();
  node->op = std::move(op);
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

void require_same(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) throw ArgumentError(std::string(op) + ": shape mismatch");
}

Tensor transpose(const Tensor& t) {
  Tensor out(t.cols, t.rows);
  for (std::size_t i = 0; i < t.rows; ++i) {
    for (std::size_t j = 0; j < t.cols; ++j) out.data[j * t.rows + i] = t.data[i * t.cols + j];
  }
  return out;
}

Tensor gemm(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows, b.cols);
  kernels::gemm(a.data, b.data, out.data, a.rows, a.cols, b.cols);
  return out;
}

template <class F>
Tensor map2(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = f(a.data[i], b.data[i]);
  return out;
}

template <class F>
Tensor map1(const Tensor& a, F f) {
  Tensor out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = f(a.data[i]);
  return out;
}

}  // namespace

Tensor::Tensor(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) throw ArgumentError("Tensor: value count does not match shape");
}

double Var::item() const {
  if (value().size() != 1) throw ArgumentError("item: not a scalar");
  return value().data[0];
}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->op = "constant";
  node->value = std::move(value);
  return Var(std::move(node));
}

Var parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->op = "parameter";
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var scalar(double value) { return constant(Tensor(1, 1, value)); }

bool grad_enabled() { return g_grad_enabled; }
NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw ArgumentError("matmul: inner dimensions differ");
  return make("matmul", gemm(a.value(), b.value()), {a, b}, [a, b](const Var& g, const Needs& need) {
    return std::vector<Var>{need[0] ? matmul_nt(g, b) : Var(),
                            need[1] ? matmul_tn(a, g) : Var()};
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw ArgumentError("matmul_nt: inner dimensions differ");
  return make("matmul_nt", gemm(a.value(), transpose(b.value())), {a, b}, [a, b](const Var& g, const Needs& need) {
    return std::vector<Var>{need[0] ? matmul(g, b) : Var(),
                            need[1] ? matmul_tn(g, a) : Var()};
  });
}

Var matmul_tn(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) throw ArgumentError("matmul_tn: inner dimensions differ");
  return make("matmul_tn", gemm(transpose(a.value()), b.value()), {a, b}, [a, b](const Var& g, const Needs& need) {
    return std::vector<Var>{need[0] ? matmul_nt(b, g) : Var(),
                            need[1] ? matmul(a, g) : Var()};
  });
}

Var add(const Var& a, const Var& b) {
  require_same(a, b, "add");
  return make("add", map2(a.value(), b.value(), [](double x, double y) { return x + y; }), {a, b},
              [](const Var& g, const Needs&) { return std::vector<Var>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
  require_same(a, b, "sub");
  return make("sub", map2(a.value(), b.value(), [](double x, double y) { return x - y; }), {a, b},
              [](const Var& g, const Needs& need) {
                return std::vector<Var>{g, need[1] ? scale(g, -1.0) : Var()};
              });
}

Var mul(const Var& a, const Var& b) {
  require_same(a, b, "mul");
  return make("mul", map2(a.value(), b.value(), [](double x, double y) { return x * y; }), {a, b},
              [a, b](const Var& g, const Needs& need) {
                return std::vector<Var>{need[0] ? mul(g, b) : Var(),
                                        need[1] ? mul(g, a) : Var()};
              });
}

Var div(const Var& a, const Var& b) {
  require_same(a, b, "div");
  return make("div", map2(a.value(), b.value(), [](double x, double y) { return x / y; }), {a, b},
              [a, b](const Var& g, const Needs& need) {
                return std::vector<Var>{
                    need[0] ? div(g, b) : Var(),
                    need[1] ? scale(div(mul(g, a), mul(b, b)), -1.0) : Var()};
              });
}

Var scale(const Var& a, double s) {
  return make("scale", map1(a.value(), [s](double x) { return s * x; }), {a},
              [s](const Var& g, const Needs&) { return std::vector<Var>{scale(g, s)}; });
}

Var add_scalar(const Var& a, double s) {
  return make("add_scalar", map1(a.value(), [s](double x) { return x + s; }), {a},
              [](const Var& g, const Needs&) { return std::vector<Var>{g}; });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ArgumentError("add_row: shape mismatch");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += row.value().data[j];
  }
  return make("add_row", std::move(out), {a, row}, [](const Var& g, const Needs& need) {
    return std::vector<Var>{g, need[1] ? sum_rows(g) : Var()};
  });
}

Var mul_col(const Var& a, const Var& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) throw ArgumentError("mul_col: shape mismatch");
  return mul(a, broadcast_cols(col, a.cols()));
}

Var sum_rows(const Var& a) {
  Tensor out(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out.data[j] += a.value()(i, j);
  }
  const std::size_t r = a.rows();
  return make("sum_rows", std::move(out), {a},
              [r](const Var& g, const Needs&) { return std::vector<Var>{broadcast_rows(g, r)}; });
}

Var broadcast_rows(const Var& row, std::size_t rows) {
  if (row.rows() != 1) throw ArgumentError("broadcast_rows: expected a row");
  Tensor out(rows, row.cols());
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < row.cols(); ++j) out(i, j) = row.value().data[j];
  }
  return make("broadcast_rows", std::move(out), {row},
              [](const Var& g, const Needs&) { return std::vector<Var>{sum_rows(g)}; });
}

Var sum_cols(const Var& a) {
  Tensor out(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a.value()(i, j);
    out.data[i] = s;
  }
  const std::size_t c = a.cols();
  return make("sum_cols", std::move(out), {a},
              [c](const Var& g, const Needs&) { return std::vector<Var>{broadcast_cols(g, c)}; });
}

Var broadcast_cols(const Var& col, std::size_t cols) {
  if (col.cols() != 1) throw ArgumentError("broadcast_cols: expected a column");
  Tensor out(col.rows(), cols);
  for (std::size_t i = 0; i < col.rows(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = col.value().data[i];
  }
  return make("broadcast_cols", std::move(out), {col},
              [](const Var& g, const Needs&) { return std::vector<Var>{sum_cols(g)}; });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data) s += v;
  const std::size_t r = a.rows(), c = a.cols();
  return make("sum", Tensor(1, 1, s), {a},
              [r, c](const Var& g, const Needs&) { return std::vector<Var>{broadcast_to(g, r, c)}; });
}

Var mean(const Var& a) {
  if (a.value().size() == 0) throw ArgumentError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var broadcast_to(const Var& s, std::size_t rows, std::size_t cols) {
  if (s.value().size() != 1) throw ArgumentError("broadcast_to: expected a scalar");
  return make("broadcast_to", Tensor(rows, cols, s.value().data[0]), {s},
              [](const Var& g, const Needs&) { return std::vector<Var>{sum(g)}; });
}

Var mask_mul(const Var& a, const Tensor& mask) {
  if (!a.value().same_shape(mask)) throw ArgumentError("mask_mul: shape mismatch");
  return make("mask_mul", map2(a.value(), mask, [](double x, double m) { return x * m; }), {a},
              [mask](const Var& g, const Needs&) { return std::vector<Var>{mask_mul(g, mask)}; });
}

Var leaky_relu(const Var& a, double slope) {
  const Tensor mask = map1(a.value(), [slope](double x) { return x > 0.0 ? 1.0 : slope; });
  return mask_mul(a, mask);
}

Var square(const Var& a) {
  return make("square", map1(a.value(), [](double x) { return x * x; }), {a},
              [a](const Var& g, const Needs&) { return std::vector<Var>{mul(g, scale(a, 2.0))}; });
}

Var sqrt(const Var& a) {
  return make("sqrt", map1(a.value(), [](double x) { return std::sqrt(x); }), {a},
              [a](const Var& g, const Needs&) { return std::vector<Var>{div(scale(g, 0.5), sqrt(a))}; });
}

std::vector<Var> grad(const Var& output, std::span<const Var> inputs, bool create_graph) {
  if (!output.defined() || output.value().size() != 1) throw ArgumentError("grad: output must be a scalar");

  // Reverse topological order of the recorded graph.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  if (output.requires_grad()) {
    stack.push_back({output.get(), 0});
    seen.insert(output.get());
  }
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Only nodes with a path to a requested input need gradients.
  std::unordered_set<Node*> targets;
  for (const auto& v : inputs) {
    if (v.defined()) targets.insert(v.get());
  }
  std::unordered_set<Node*> relevant;
  for (Node* node : order) {  // parents precede children here
    bool hit = targets.count(node) > 0;
    for (const auto& p : node->parents) hit = hit || relevant.count(p.get()) > 0;
    if (hit) relevant.insert(node);
  }

  const bool previous = g_grad_enabled;
  g_grad_enabled = create_graph;
  std::unordered_map<Node*, Var> grads;
  if (relevant.count(output.get())) grads[output.get()] = scalar(1.0);
  try {
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = *it;
      auto found = grads.find(node);
      if (found == grads.end() || !node->backward) continue;
      std::vector<bool> need(node->parents.size());
      for (std::size_t k = 0; k < need.size(); ++k) need[k] = relevant.count(node->parents[k].get()) > 0;
      const std::vector<Var> parent_grads = node->backward(found->second, need);
      for (std::size_t k = 0; k < node->parents.size(); ++k) {
        Node* parent = node->parents[k].get();
        if (!parent_grads[k].defined() || !relevant.count(parent)) continue;
        auto slot = grads.find(parent);
        if (slot == grads.end()) {
          grads.emplace(parent, parent_grads[k]);
        } else {
          slot->second = add(slot->second, parent_grads[k]);
        }
      }
    }
  } catch (...) {
    g_grad_enabled = previous;
    throw;
  }
  g_grad_enabled = previous;

  std::vector<Var> out;
  out.reserve(inputs.size());
  for (const auto& v : inputs) {
    auto found = v.defined() ? grads.find(v.get()) : grads.end();
    if (found != grads.end()) {
      out.push_back(found->second);
    } else {
      out.push_back(constant(Tensor(v.defined() ? v.rows() : 0, v.defined() ? v.cols() : 0)));
    }
  }
  return out;
}

}  // namespace ffdgan::ad
