#pragma once

// Reverse-mode automatic differentiation on dense row-major matrices.
//
// A Tape is an append-only list of primitive operations; node inputs always
// precede the node, so the backward pass is a single reverse sweep that visits
// each node exactly once. Gradients are only propagated through nodes that
// (transitively) depend on a trainable parameter leaf.
//
// The volumetric compositing step is a single fused node (Composite) with a
// hand-derived adjoint; everything else is built from generic primitives.

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "scenefield/parallel.hpp"

namespace scenefield {

struct Tensor {
  int rows = 0, cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(size_t(r) * size_t(c), 0.0) {}

  double& at(int r, int c) { return v[size_t(r) * cols + c]; }
  double at(int r, int c) const { return v[size_t(r) * cols + c]; }
  size_t size() const { return v.size(); }
  double* row_ptr(int r) { return v.data() + size_t(r) * cols; }
  const double* row_ptr(int r) const { return v.data() + size_t(r) * cols; }

  static Tensor scalar(double x) {
    Tensor t(1, 1);
    t.v[0] = x;
    return t;
  }
};

// Named dense parameter arrays (decoder weights/biases and the latent table).
// Shapes are fixed at construction; the trainable flag selects what the
// optimizer updates and what the tape differentiates.
struct ParameterStore {
  struct Entry {
    std::string name;
    Tensor value;
    bool trainable = true;
  };

  std::vector<Entry> entries;
  std::unordered_map<std::string, int> index;

  int add(const std::string& name, int rows, int cols) {
    if (index.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    index[name] = int(entries.size());
    entries.push_back({name, Tensor(rows, cols), true});
    return int(entries.size()) - 1;
  }

  int find(const std::string& name) const {
    auto it = index.find(name);
    return it == index.end() ? -1 : it->second;
  }

  Entry& at(const std::string& name) {
    const int i = find(name);
    if (i < 0) throw std::invalid_argument("unknown parameter: " + name);
    return entries[size_t(i)];
  }

  const Entry& at(const std::string& name) const {
    const int i = find(name);
    if (i < 0) throw std::invalid_argument("unknown parameter: " + name);
    return entries[size_t(i)];
  }

  size_t total_params() const {
    size_t n = 0;
    for (const auto& e : entries) n += e.value.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& e : entries)
      for (const double x : e.value.v)
        if (!std::isfinite(x)) return false;
    return true;
  }
};

namespace kernels {

// C = A * B. Row-parallel; each output row has a fixed inner summation order,
// so results are bit-identical for any thread count.
inline void matmul(Tensor& c, const Tensor& a, const Tensor& b) {
  const int n = a.rows, k = a.cols, m = b.cols;
  parallel_for(n, [&](long long i0, long long i1) {
    for (long long i = i0; i < i1; ++i) {
      double* crow = c.row_ptr(int(i));
      for (int j = 0; j < m; ++j) crow[j] = 0.0;
      const double* arow = a.row_ptr(int(i));
      for (int kk = 0; kk < k; ++kk) {
        const double av = arow[kk];
        const double* brow = b.row_ptr(kk);
        for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

// dA += G * B^T
inline void matmul_grad_a(Tensor& da, const Tensor& g, const Tensor& b) {
  const int n = g.rows, m = g.cols, k = b.rows;
  parallel_for(n, [&](long long i0, long long i1) {
    for (long long i = i0; i < i1; ++i) {
      const double* grow = g.row_ptr(int(i));
      double* darow = da.row_ptr(int(i));
      for (int kk = 0; kk < k; ++kk) {
        const double* brow = b.row_ptr(kk);
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += grow[j] * brow[j];
        darow[kk] += s;
      }
    }
  });
}

// dB += A^T * G. Parallel over rows of dB (the k dimension); each (k, j)
// accumulates over i in fixed order.
inline void matmul_grad_b(Tensor& db, const Tensor& a, const Tensor& g) {
  const int n = a.rows, k = a.cols, m = g.cols;
  parallel_for(k, [&](long long k0, long long k1) {
    for (long long kk = k0; kk < k1; ++kk) {
      double* dbrow = db.row_ptr(int(kk));
      for (int i = 0; i < n; ++i) {
        const double av = a.at(i, int(kk));
        if (av == 0.0) continue;
        const double* grow = g.row_ptr(i);
        for (int j = 0; j < m; ++j) dbrow[j] += av * grow[j];
      }
    }
  });
}

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace kernels

enum class Op : uint8_t {
  Leaf,
  Constant,
  Embed,
  Matmul,
  AddBias,
  Add,
  Sub,
  Mul,
  Scale,
  Relu,
  Softplus,
  Sigmoid,
  Sin,
  Cos,
  Exp,
  Square,
  ConcatCols,
  SliceCols,
  RowNormalize,
  Cross3,
  Composite,
  MeanAll,
  SumAll,
};

// Per-ray sample ranges for the Composite node. All rays carry the same
// number of samples; deltas are the marching segment lengths.
struct CompositeAux {
  int num_rays = 0;
  int samples_per_ray = 0;
  std::vector<double> delta;  // num_rays * samples_per_ray
  double background[3] = {0, 0, 0};
};

class Tape {
 public:
  explicit Tape(ParameterStore* params = nullptr) : params_(params) {}

  // --- graph construction ---

  int leaf(const std::string& param_name) {
    if (!params_) throw std::logic_error("tape has no parameter store");
    const int pid = params_->find(param_name);
    if (pid < 0) throw std::invalid_argument("unknown parameter: " + param_name);
    auto it = leaf_cache_.find(pid);
    if (it != leaf_cache_.end()) return it->second;
    Node n;
    n.op = Op::Leaf;
    n.param = pid;
    n.val = params_->entries[size_t(pid)].value;
    n.requires_grad = params_->entries[size_t(pid)].trainable;
    const int id = push(std::move(n));
    leaf_cache_[pid] = id;
    return id;
  }

  int constant(Tensor t) {
    Node n;
    n.op = Op::Constant;
    n.val = std::move(t);
    n.requires_grad = false;
    return push(std::move(n));
  }

  int embed(int table, std::vector<int> rows) {
    const Tensor& tab = val(table);
    Node n;
    n.op = Op::Embed;
    n.a = table;
    n.indices = std::move(rows);
    n.val = Tensor(int(n.indices.size()), tab.cols);
    for (size_t i = 0; i < n.indices.size(); ++i) {
      const int r = n.indices[i];
      if (r < 0 || r >= tab.rows) throw std::out_of_range("embed row out of range");
      for (int c = 0; c < tab.cols; ++c) n.val.at(int(i), c) = tab.at(r, c);
    }
    n.requires_grad = needs_grad(table);
    return push(std::move(n));
  }

  int matmul(int a, int b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.cols != tb.rows) throw std::invalid_argument("matmul shape mismatch");
    Node n;
    n.op = Op::Matmul;
    n.a = a;
    n.b = b;
    n.val = Tensor(ta.rows, tb.cols);
    kernels::matmul(n.val, ta, tb);
    n.requires_grad = needs_grad(a) || needs_grad(b);
    return push(std::move(n));
  }

  // Broadcast-add a 1 x C bias row to every row of a.
  int add_bias(int a, int bias) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(bias);
    if (tb.rows != 1 || tb.cols != ta.cols) throw std::invalid_argument("bias shape mismatch");
    Node n;
    n.op = Op::AddBias;
    n.a = a;
    n.b = bias;
    n.val = ta;
    for (int i = 0; i < ta.rows; ++i) {
      double* row = n.val.row_ptr(i);
      for (int c = 0; c < ta.cols; ++c) row[c] += tb.v[size_t(c)];
    }
    n.requires_grad = needs_grad(a) || needs_grad(bias);
    return push(std::move(n));
  }

  int add(int a, int b) { return binary(Op::Add, a, b); }
  int sub(int a, int b) { return binary(Op::Sub, a, b); }
  int mul(int a, int b) { return binary(Op::Mul, a, b); }

  int scale(int a, double s) {
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.scalar = s;
    n.val = val(a);
    for (double& x : n.val.v) x *= s;
    n.requires_grad = needs_grad(a);
    return push(std::move(n));
  }

  int relu(int a) { return unary(Op::Relu, a, [](double x) { return x > 0.0 ? x : 0.0; }); }
  int softplus(int a) { return unary(Op::Softplus, a, kernels::softplus); }
  int sigmoid(int a) { return unary(Op::Sigmoid, a, kernels::sigmoid); }
  int sin(int a) { return unary(Op::Sin, a, [](double x) { return std::sin(x); }); }
  int cos(int a) { return unary(Op::Cos, a, [](double x) { return std::cos(x); }); }
  int exp(int a) { return unary(Op::Exp, a, [](double x) { return std::exp(x); }); }
  int square(int a) { return unary(Op::Square, a, [](double x) { return x * x; }); }

  int concat_cols(int a, int b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.rows != tb.rows) throw std::invalid_argument("concat row mismatch");
    Node n;
    n.op = Op::ConcatCols;
    n.a = a;
    n.b = b;
    n.val = Tensor(ta.rows, ta.cols + tb.cols);
    for (int i = 0; i < ta.rows; ++i) {
      double* row = n.val.row_ptr(i);
      const double* ra = ta.row_ptr(i);
      const double* rb = tb.row_ptr(i);
      for (int c = 0; c < ta.cols; ++c) row[c] = ra[c];
      for (int c = 0; c < tb.cols; ++c) row[ta.cols + c] = rb[c];
    }
    n.requires_grad = needs_grad(a) || needs_grad(b);
    return push(std::move(n));
  }

  int slice_cols(int a, int c0, int c1) {
    const Tensor& ta = val(a);
    if (c0 < 0 || c1 > ta.cols || c0 >= c1) throw std::invalid_argument("bad column slice");
    Node n;
    n.op = Op::SliceCols;
    n.a = a;
    n.c0 = c0;
    n.c1 = c1;
    n.val = Tensor(ta.rows, c1 - c0);
    for (int i = 0; i < ta.rows; ++i)
      for (int c = c0; c < c1; ++c) n.val.at(i, c - c0) = ta.at(i, c);
    n.requires_grad = needs_grad(a);
    return push(std::move(n));
  }

  // Row-wise v / max(|v|, eps). Rows are 3-vectors.
  int row_normalize(int a, double eps = 1e-9) {
    const Tensor& ta = val(a);
    if (ta.cols != 3) throw std::invalid_argument("row_normalize expects 3 columns");
    Node n;
    n.op = Op::RowNormalize;
    n.a = a;
    n.scalar = eps;
    n.val = Tensor(ta.rows, 3);
    for (int i = 0; i < ta.rows; ++i) {
      const double* r = ta.row_ptr(i);
      const double nn = std::max(std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]), eps);
      for (int c = 0; c < 3; ++c) n.val.at(i, c) = r[c] / nn;
    }
    n.requires_grad = needs_grad(a);
    return push(std::move(n));
  }

  // Row-wise cross product of two S x 3 operands.
  int cross3(int a, int b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.cols != 3 || tb.cols != 3 || ta.rows != tb.rows)
      throw std::invalid_argument("cross3 expects matching S x 3 operands");
    Node n;
    n.op = Op::Cross3;
    n.a = a;
    n.b = b;
    n.val = Tensor(ta.rows, 3);
    for (int i = 0; i < ta.rows; ++i) {
      const double* x = ta.row_ptr(i);
      const double* y = tb.row_ptr(i);
      double* o = n.val.row_ptr(i);
      o[0] = x[1] * y[2] - x[2] * y[1];
      o[1] = x[2] * y[0] - x[0] * y[2];
      o[2] = x[0] * y[1] - x[1] * y[0];
    }
    n.requires_grad = needs_grad(a) || needs_grad(b);
    return push(std::move(n));
  }

  // Volumetric compositing: sigma (S x 1), color (S x 3) -> per-ray
  // (r, g, b, alpha) as an N x 4 tensor. See renderer.hpp for the equation.
  int composite(int sigma, int color, std::shared_ptr<CompositeAux> aux) {
    const Tensor& ts = val(sigma);
    const Tensor& tc = val(color);
    const int total = aux->num_rays * aux->samples_per_ray;
    if (ts.cols != 1 || ts.rows != total || tc.cols != 3 || tc.rows != total ||
        int(aux->delta.size()) != total)
      throw std::invalid_argument("composite shape mismatch");
    Node n;
    n.op = Op::Composite;
    n.a = sigma;
    n.b = color;
    n.comp = std::move(aux);
    n.val = Tensor(n.comp->num_rays, 4);
    const int spr = n.comp->samples_per_ray;
    const CompositeAux& cx = *n.comp;
    Tensor& out = n.val;
    parallel_for(cx.num_rays, [&](long long r0, long long r1) {
      for (long long r = r0; r < r1; ++r) {
        const int base = int(r) * spr;
        double trans = 1.0;
        double acc[3] = {0, 0, 0};
        for (int j = 0; j < spr; ++j) {
          const double alpha = 1.0 - std::exp(-ts.v[size_t(base + j)] * cx.delta[size_t(base + j)]);
          const double w = trans * alpha;
          const double* c = tc.row_ptr(base + j);
          acc[0] += w * c[0];
          acc[1] += w * c[1];
          acc[2] += w * c[2];
          trans *= 1.0 - alpha;
        }
        double* o = out.row_ptr(int(r));
        o[0] = acc[0] + trans * cx.background[0];
        o[1] = acc[1] + trans * cx.background[1];
        o[2] = acc[2] + trans * cx.background[2];
        o[3] = 1.0 - trans;
      }
    });
    n.requires_grad = needs_grad(sigma) || needs_grad(color);
    return push(std::move(n));
  }

  int mean_all(int a) { return reduce(Op::MeanAll, a); }
  int sum_all(int a) { return reduce(Op::SumAll, a); }

  // --- access ---

  const Tensor& val(int id) const { return nodes_[size_t(id)].val; }
  bool needs_grad(int id) const { return nodes_[size_t(id)].requires_grad; }
  size_t num_nodes() const { return nodes_.size(); }

  const Tensor& grad(int id) const {
    const Node& n = nodes_[size_t(id)];
    if (!n.requires_grad) throw std::logic_error("node does not require gradients");
    return n.grad;
  }

  // Gradient of the last backward() w.r.t. a parameter; zero tensor if the
  // parameter never participated.
  Tensor param_grad(const std::string& name) const {
    if (!params_) throw std::logic_error("tape has no parameter store");
    const int pid = params_->find(name);
    if (pid < 0) throw std::invalid_argument("unknown parameter: " + name);
    auto it = leaf_cache_.find(pid);
    const Tensor& shape = params_->entries[size_t(pid)].value;
    if (it == leaf_cache_.end() || !nodes_[size_t(it->second)].requires_grad)
      return Tensor(shape.rows, shape.cols);
    return nodes_[size_t(it->second)].grad;
  }

  // --- backward ---

  void backward(int loss) {
    Node& ln = nodes_[size_t(loss)];
    if (ln.val.rows != 1 || ln.val.cols != 1)
      throw std::invalid_argument("backward requires a scalar loss node");
    for (auto& n : nodes_)
      if (n.requires_grad) {
        n.grad = Tensor(n.val.rows, n.val.cols);
      }
    if (!ln.requires_grad) return;  // loss does not depend on any trainable leaf
    ln.grad.v[0] = 1.0;
    for (int id = loss; id >= 0; --id) {
      Node& n = nodes_[size_t(id)];
      if (!n.requires_grad) continue;
      backprop_node(n);
    }
  }

 private:
  struct Node {
    Op op = Op::Constant;
    int a = -1, b = -1;
    bool requires_grad = false;
    int param = -1;
    int c0 = 0, c1 = 0;
    double scalar = 0.0;
    std::vector<int> indices;
    std::shared_ptr<CompositeAux> comp;
    Tensor val;
    Tensor grad;
  };

  ParameterStore* params_;
  std::vector<Node> nodes_;
  std::unordered_map<int, int> leaf_cache_;

  int push(Node n) {
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
  }

  int binary(Op op, int a, int b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.rows != tb.rows || ta.cols != tb.cols)
      throw std::invalid_argument("elementwise shape mismatch");
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.val = Tensor(ta.rows, ta.cols);
    for (size_t i = 0; i < ta.size(); ++i) {
      switch (op) {
        case Op::Add: n.val.v[i] = ta.v[i] + tb.v[i]; break;
        case Op::Sub: n.val.v[i] = ta.v[i] - tb.v[i]; break;
        default: n.val.v[i] = ta.v[i] * tb.v[i]; break;
      }
    }
    n.requires_grad = needs_grad(a) || needs_grad(b);
    return push(std::move(n));
  }

  template <typename Fn>
  int unary(Op op, int a, Fn&& fn) {
    Node n;
    n.op = op;
    n.a = a;
    const Tensor& ta = val(a);
    n.val = Tensor(ta.rows, ta.cols);
    for (size_t i = 0; i < ta.size(); ++i) n.val.v[i] = fn(ta.v[i]);
    n.requires_grad = needs_grad(a);
    return push(std::move(n));
  }

  int reduce(Op op, int a) {
    Node n;
    n.op = op;
    n.a = a;
    const Tensor& ta = val(a);
    double s = 0.0;
    for (const double x : ta.v) s += x;
    n.val = Tensor::scalar(op == Op::MeanAll ? s / double(ta.size()) : s);
    n.requires_grad = needs_grad(a);
    return push(std::move(n));
  }

  void add_grad(int id, const Tensor& g) {
    Node& n = nodes_[size_t(id)];
    if (!n.requires_grad) return;
    for (size_t i = 0; i < g.size(); ++i) n.grad.v[i] += g.v[i];
  }

  Tensor* grad_slot(int id) {
    Node& n = nodes_[size_t(id)];
    return n.requires_grad ? &n.grad : nullptr;
  }

  void backprop_node(Node& n) {
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
      case Op::Constant:
        break;
      case Op::Embed: {
        Tensor* da = grad_slot(n.a);
        if (da)
          for (size_t i = 0; i < n.indices.size(); ++i) {
            const int r = n.indices[i];
            for (int c = 0; c < da->cols; ++c) da->at(r, c) += g.at(int(i), c);
          }
        break;
      }
      case Op::Matmul: {
        Tensor* da = grad_slot(n.a);
        Tensor* db = grad_slot(n.b);
        if (da) kernels::matmul_grad_a(*da, g, val(n.b));
        if (db) kernels::matmul_grad_b(*db, val(n.a), g);
        break;
      }
      case Op::AddBias: {
        Tensor* da = grad_slot(n.a);
        Tensor* db = grad_slot(n.b);
        if (da)
          for (size_t i = 0; i < g.size(); ++i) da->v[i] += g.v[i];
        if (db)
          for (int i = 0; i < g.rows; ++i)
            for (int c = 0; c < g.cols; ++c) db->v[size_t(c)] += g.at(i, c);
        break;
      }
      case Op::Add: {
        Tensor* da = grad_slot(n.a);
        Tensor* db = grad_slot(n.b);
        if (da)
          for (size_t i = 0; i < g.size(); ++i) da->v[i] += g.v[i];
        if (db)
          for (size_t i = 0; i < g.size(); ++i) db->v[i] += g.v[i];
        break;
      }
      case Op::Sub: {
        Tensor* da = grad_slot(n.a);
        Tensor* db = grad_slot(n.b);
        if (da)
          for (size_t i = 0; i < g.size(); ++i) da->v[i] += g.v[i];
        if (db)
          for (size_t i = 0; i < g.size(); ++i) db->v[i] -= g.v[i];
        break;
      }
      case Op::Mul: {
        Tensor* da = grad_slot(n.a);
        Tensor* db = grad_slot(n.b);
        const Tensor& ta = val(n.a);
        const Tensor& tb = val(n.b);
        if (da)
          for (size_t i = 0; i < g.size(); ++i) da->v[i] += g.v[i] * tb.v[i];
        if (db)
          for (size_t i = 0; i < g.size(); ++i) db->v[i] += g.v[i] * ta.v[i];
        break;
      }
      case Op::Scale: {
        Tensor* da = grad_slot(n.a);
        if (da)
          for (size_t i = 0; i < g.size(); ++i) da->v[i] += g.v[i] * n.scalar;
        break;
      }
      case Op::Relu: {
        Tensor* da = grad_slot(n.a);
        const Tensor& ta = val(n.a);
        if (da)
          for (size_t i = 0; i < g.size(); ++i) da->v[i] += ta.v[i] > 0.0 ? g.v[i] : 0.0;
        break;
      }
      case Op::Softplus: {
        Tensor* da = grad_slot(n.a);
        const Tensor& ta = val(n.a);
        if (da)
          for (size_t i = 0; i < g.size(); ++i) da->v[i] += g.v[i] * kernels::sigmoid(ta.v[i]);
        break;
      }
      case Op::Sigmoid: {
        Tensor* da = grad_slot(n.a);
        if (da)
          for (size_t i = 0; i < g.size(); ++i) {
            const double y = n.val.v[i];
            da->v[i] += g.v[i] * y * (1.0 - y);
          }
        break;
      }
      case Op::Sin: {
        Tensor* da = grad_slot(n.a);
        const Tensor& ta = val(n.a);
        if (da)
          for (size_t i = 0; i < g.size(); ++i) da->v[i] += g.v[i] * std::cos(ta.v[i]);
        break;
      }
      case Op::Cos: {
        Tensor* da = grad_slot(n.a);
        const Tensor& ta = val(n.a);
        if (da)
          for (size_t i = 0; i < g.size(); ++i) da->v[i] -= g.v[i] * std::sin(ta.v[i]);
        break;
      }
      case Op::Exp: {
        Tensor* da = grad_slot(n.a);
        if (da)
          for (size_t i = 0; i < g.size(); ++i) da->v[i] += g.v[i] * n.val.v[i];
        break;
      }
      case Op::Square: {
        Tensor* da = grad_slot(n.a);
        const Tensor& ta = val(n.a);
        if (da)
          for (size_t i = 0; i < g.size(); ++i) da->v[i] += g.v[i] * 2.0 * ta.v[i];
        break;
      }
      case Op::ConcatCols: {
        Tensor* da = grad_slot(n.a);
        Tensor* db = grad_slot(n.b);
        const int ca = val(n.a).cols;
        for (int i = 0; i < g.rows; ++i) {
          const double* grow = g.row_ptr(i);
          if (da) {
            double* r = da->row_ptr(i);
            for (int c = 0; c < ca; ++c) r[c] += grow[c];
          }
          if (db) {
            double* r = db->row_ptr(i);
            for (int c = 0; c < db->cols; ++c) r[c] += grow[ca + c];
          }
        }
        break;
      }
      case Op::SliceCols: {
        Tensor* da = grad_slot(n.a);
        if (da)
          for (int i = 0; i < g.rows; ++i)
            for (int c = 0; c < g.cols; ++c) da->at(i, n.c0 + c) += g.at(i, c);
        break;
      }
      case Op::RowNormalize: {
        Tensor* da = grad_slot(n.a);
        if (!da) break;
        const Tensor& ta = val(n.a);
        for (int i = 0; i < ta.rows; ++i) {
          const double* r = ta.row_ptr(i);
          const double* y = n.val.row_ptr(i);
          const double* gr = g.row_ptr(i);
          const double nn = std::max(std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]), n.scalar);
          double* o = da->row_ptr(i);
          if (std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]) < n.scalar) {
            // below the epsilon guard the map is linear: y = v / eps
            for (int c = 0; c < 3; ++c) o[c] += gr[c] / nn;
          } else {
            const double gy = gr[0] * y[0] + gr[1] * y[1] + gr[2] * y[2];
            for (int c = 0; c < 3; ++c) o[c] += (gr[c] - y[c] * gy) / nn;
          }
        }
        break;
      }
      case Op::Cross3: {
        // c = a x b: dL/da = b x g, dL/db = g x a
        Tensor* da = grad_slot(n.a);
        Tensor* db = grad_slot(n.b);
        const Tensor& ta = val(n.a);
        const Tensor& tb = val(n.b);
        for (int i = 0; i < ta.rows; ++i) {
          const double* x = ta.row_ptr(i);
          const double* y = tb.row_ptr(i);
          const double* gr = g.row_ptr(i);
          if (da) {
            double* o = da->row_ptr(i);
            o[0] += y[1] * gr[2] - y[2] * gr[1];
            o[1] += y[2] * gr[0] - y[0] * gr[2];
            o[2] += y[0] * gr[1] - y[1] * gr[0];
          }
          if (db) {
            double* o = db->row_ptr(i);
            o[0] += gr[1] * x[2] - gr[2] * x[1];
            o[1] += gr[2] * x[0] - gr[0] * x[2];
            o[2] += gr[0] * x[1] - gr[1] * x[0];
          }
        }
        break;
      }
      case Op::Composite: {
        backprop_composite(n);
        break;
      }
      case Op::MeanAll:
      case Op::SumAll: {
        Tensor* da = grad_slot(n.a);
        if (da) {
          const double s =
              n.op == Op::MeanAll ? g.v[0] / double(da->size()) : g.v[0];
          for (size_t i = 0; i < da->size(); ++i) da->v[i] += s;
        }
        break;
      }
    }
  }

  void backprop_composite(Node& n) {
    Tensor* dsig = grad_slot(n.a);
    Tensor* dcol = grad_slot(n.b);
    if (!dsig && !dcol) return;
    const Tensor& sig = val(n.a);
    const Tensor& col = val(n.b);
    const Tensor& g = n.grad;
    const CompositeAux& cx = *n.comp;
    const int spr = cx.samples_per_ray;
    parallel_for(cx.num_rays, [&](long long r0, long long r1) {
      for (long long r = r0; r < r1; ++r) {
        const int base = int(r) * spr;
        const double* gr = g.row_ptr(int(r));
        // forward recompute of transmittance and weights
        std::vector<double> trans(size_t(spr) + 1, 0.0);
        std::vector<double> alpha(size_t(spr), 0.0);
        trans[0] = 1.0;
        for (int j = 0; j < spr; ++j) {
          alpha[size_t(j)] =
              1.0 - std::exp(-sig.v[size_t(base + j)] * cx.delta[size_t(base + j)]);
          trans[size_t(j) + 1] = trans[size_t(j)] * (1.0 - alpha[size_t(j)]);
        }
        const double t_end = trans[size_t(spr)];
        // suffix[j] = sum_{m >= j} w_m * (gr . c_m), with w_m = T_m alpha_m
        std::vector<double> suffix(size_t(spr) + 1, 0.0);
        for (int j = spr - 1; j >= 0; --j) {
          const double w = trans[size_t(j)] * alpha[size_t(j)];
          const double* c = col.row_ptr(base + j);
          suffix[size_t(j)] = suffix[size_t(j) + 1] +
                              w * (gr[0] * c[0] + gr[1] * c[1] + gr[2] * c[2]);
        }
        const double g_bg =
            gr[0] * cx.background[0] + gr[1] * cx.background[1] + gr[2] * cx.background[2];
        for (int j = 0; j < spr; ++j) {
          const double w = trans[size_t(j)] * alpha[size_t(j)];
          if (dcol) {
            double* o = dcol->row_ptr(base + j);
            o[0] += w * gr[0];
            o[1] += w * gr[1];
            o[2] += w * gr[2];
          }
          if (dsig) {
            const double d = cx.delta[size_t(base + j)];
            const double* c = col.row_ptr(base + j);
            const double own =
                trans[size_t(j)] * (1.0 - alpha[size_t(j)]) * d *
                (gr[0] * c[0] + gr[1] * c[1] + gr[2] * c[2]);
            const double later = -d * suffix[size_t(j) + 1];
            // alpha output = 1 - T_end; d(1 - T_end)/d sigma_j = d * T_end
            const double from_alpha = gr[3] * d * t_end;
            const double from_bg = -d * t_end * g_bg;
            dsig->v[size_t(base + j)] += own + later + from_alpha + from_bg;
          }
        }
      }
    });
  }
};

}  // namespace scenefield
