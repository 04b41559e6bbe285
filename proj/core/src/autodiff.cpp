#include "flowid/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>

#include "flowid/error.hpp"
#include "flowid/parallel.hpp"
#include "flowid/parameters.hpp"

namespace flowid {

const Tensor& Var::value() const { return tape_->value(id_); }

Tensor Var::grad() const {
  if (const Tensor* g = tape_->grad_if_any(id_)) return *g;
  return Tensor(value().shape(), 0.0);
}

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::make(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) { return make(Node{std::move(value), {}, false, false, {}}); }

Var Tape::variable(Tensor value) { return make(Node{std::move(value), {}, false, true, {}}); }

bool Tape::is_frozen(const std::string& name) const {
  return std::any_of(frozen_.begin(), frozen_.end(),
                     [&](const std::string& p) { return name.rfind(p, 0) == 0; });
}

Var Tape::param(const ParameterStore& store, const std::string& name) {
  if (auto it = params_.find(name); it != params_.end()) return Var(this, it->second);
  Var leaf = is_frozen(name) ? constant(store.value(name)) : variable(store.value(name));
  params_.emplace(name, leaf.id());
  return leaf;
}

Var Tape::record(Tensor value, const std::vector<std::size_t>& parents, Backward backward) {
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [&](std::size_t p) { return nodes_[p].requires_grad; });
  if (!needs) backward = nullptr;
  return make(Node{std::move(value), {}, false, needs, std::move(backward)});
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (!node.has_grad) {
    node.grad = Tensor(node.value.shape(), 0.0);
    node.has_grad = true;
  }
  return node.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  if (!nodes_[id].requires_grad) return;
  Node& node = nodes_[id];
  if (!node.has_grad) {
    if (!g.same_shape(node.value)) {
      throw ShapeError("gradient shape " + shape_string(g.shape()) + " for node of shape " +
                       shape_string(node.value.shape()));
    }
    node.grad = g;
    node.has_grad = true;
    return;
  }
  node.grad += g;
}

const Tensor* Tape::grad_if_any(std::size_t id) const {
  return nodes_[id].has_grad ? &nodes_[id].grad : nullptr;
}

void Tape::sweep(std::size_t from) {
  for (std::size_t id = from + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.has_grad && node.backward) node.backward(*this, node.grad);
  }
}

void Tape::backward(Var root) {
  if (root.value().size() != 1) {
    throw ShapeError("backward(root) requires a single-element node, got " +
                     shape_string(root.value().shape()));
  }
  backward({{root, Tensor(root.value().shape(), 1.0)}});
}

void Tape::backward(const std::vector<std::pair<Var, Tensor>>& seeds) {
  std::size_t top = 0;
  bool any = false;
  for (const auto& [var, seed] : seeds) {
    if (var.tape() != this) throw ShapeError("backward: seed belongs to another tape");
    accumulate(var.id(), seed);
    top = std::max(top, var.id());
    any = true;
  }
  if (any) sweep(top);
}

void Tape::write_param_grads(ParameterStore& store) const {
  for (const auto& [name, id] : params_) {
    const Node& node = nodes_[id];
    if (!node.requires_grad || !node.has_grad) continue;
    store.grad(name) += node.grad;
  }
}

namespace ad {

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) {
    throw ShapeError(std::string(op) + ": operands must live on the same tape");
  }
  return *a.tape();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
  }
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out += b.value();
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Tensor& g) {
    tp.accumulate(ia, g);
    tp.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Tensor& g) {
    tp.accumulate(ia, g);
    if (tp.requires_grad(ib)) {
      Tensor neg = g;
      neg *= -1.0;
      tp.accumulate(ib, neg);
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad_buffer(ia);
      const Tensor& bv = tp.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tp.requires_grad(ib)) {
      Tensor& gb = tp.grad_buffer(ib);
      const Tensor& av = tp.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  out *= factor;
  const auto ia = a.id();
  return a.tape()->record(std::move(out), {ia}, [ia, factor](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

Var add_bias(Var x, Var bias) {
  Tape& t = same_tape(x, bias, "add_bias");
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  require_matrix(xv, "add_bias");
  if (bv.size() != xv.cols()) {
    throw ShapeError("add_bias: bias " + shape_string(bv.shape()) + " for input " +
                     shape_string(xv.shape()));
  }
  Tensor out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv[c];
  }
  const auto ix = x.id(), ib = bias.id();
  return t.record(std::move(out), {ix, ib}, [ix, ib](Tape& tp, const Tensor& g) {
    tp.accumulate(ix, g);
    if (tp.requires_grad(ib)) {
      Tensor& gb = tp.grad_buffer(ib);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto row = g.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) gb[c] += row[c];
      }
    }
  });
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  Tensor out = flowid::matmul(a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(ia)) tp.accumulate(ia, flowid::matmul_bt(g, tp.value(ib)));
    if (tp.requires_grad(ib)) tp.accumulate(ib, flowid::matmul_at(tp.value(ia), g));
  });
}

Var matmul_bt(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul_bt");
  Tensor out = flowid::matmul_bt(a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(ia)) tp.accumulate(ia, flowid::matmul(g, tp.value(ib)));
    if (tp.requires_grad(ib)) tp.accumulate(ib, flowid::matmul_at(g, tp.value(ia)));
  });
}

Var transpose(Var a) {
  Tensor out = flowid::transpose(a.value());
  const auto ia = a.id();
  return a.tape()->record(std::move(out), {ia}, [ia](Tape& tp, const Tensor& g) {
    tp.accumulate(ia, flowid::transpose(g));
  });
}

namespace {

// Elementwise op whose derivative is expressed through (input, output).
template <typename Forward, typename Derivative>
Var elementwise(Var a, Forward forward, Derivative derivative) {
  Tensor out = a.value();
  for (auto& v : out.values()) v = forward(v);
  const auto ia = a.id();
  Tape* tape = a.tape();
  const std::size_t out_id = tape->size();
  return tape->record(std::move(out), {ia}, [ia, out_id, derivative](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(ia);
    const Tensor& y = tp.value(out_id);
    Tensor& gx = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * derivative(x[i], y[i]);
  });
}

}  // namespace

Var relu(Var a) {
  return elementwise(a, [](double x) { return flowid::relu(x); },
                     [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var elu(Var a) {
  return elementwise(a, [](double x) { return flowid::elu(x); },
                     [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Var tanh(Var a) {
  return elementwise(a, [](double x) { return std::tanh(x); },
                     [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return elementwise(a, [](double x) { return flowid::sigmoid(x); },
                     [](double, double y) { return y * (1.0 - y); });
}

Var log(Var a, double eps) {
  return elementwise(a, [eps](double x) { return std::log(x + eps); },
                     [eps](double x, double) { return 1.0 / (x + eps); });
}

Var softmax_rows(Var logits) {
  require_matrix(logits.value(), "softmax_rows");
  Tensor out = flowid::softmax_rows(logits.value());
  const auto ia = logits.id();
  const std::size_t out_id = logits.tape()->size();
  return logits.tape()->record(std::move(out), {ia}, [ia, out_id](Tape& tp, const Tensor& g) {
    const Tensor& y = tp.value(out_id);
    Tensor& gx = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto yr = y.row(r);
      auto gr = g.row(r);
      double dot = 0.0;
      for (std::size_t c = 0; c < yr.size(); ++c) dot += gr[c] * yr[c];
      auto out = gx.row(r);
      for (std::size_t c = 0; c < yr.size(); ++c) out[c] += yr[c] * (gr[c] - dot);
    }
  });
}

Var log_softmax_rows(Var logits) {
  require_matrix(logits.value(), "log_softmax_rows");
  Tensor out = logits.value();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double peak = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - peak);
    const double lse = peak + std::log(total);
    for (auto& v : row) v -= lse;
  }
  const auto ia = logits.id();
  const std::size_t out_id = logits.tape()->size();
  return logits.tape()->record(std::move(out), {ia}, [ia, out_id](Tape& tp, const Tensor& g) {
    const Tensor& y = tp.value(out_id);
    Tensor& gx = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto yr = y.row(r);
      auto gr = g.row(r);
      double total = 0.0;
      for (double v : gr) total += v;
      auto out = gx.row(r);
      for (std::size_t c = 0; c < yr.size(); ++c) out[c] += gr[c] - std::exp(yr[c]) * total;
    }
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const auto ia = a.id();
  return a.tape()->record(Tensor::scalar(total), {ia}, [ia](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad_buffer(ia);
    const double s = g[0];
    for (auto& v : gx.values()) v += s;
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var mean_rows(Var a) {
  require_matrix(a.value(), "mean_rows");
  const Tensor& x = a.value();
  Tensor out = Tensor::matrix(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c];
  }
  const double inv = 1.0 / static_cast<double>(x.rows());
  out *= inv;
  const auto ia = a.id();
  return a.tape()->record(std::move(out), {ia}, [ia, inv](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < gx.rows(); ++r) {
      auto row = gx.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += g[c] * inv;
    }
  });
}

Var trace(Var a) {
  const Tensor& x = a.value();
  require_matrix(x, "trace");
  if (x.rows() != x.cols()) throw ShapeError("trace: matrix not square " + shape_string(x.shape()));
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) total += x(i, i);
  const auto ia = a.id();
  return a.tape()->record(Tensor::scalar(total), {ia}, [ia](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < gx.rows(); ++i) gx(i, i) += g[0];
  });
}

Var gather(Var a, std::vector<std::size_t> rows, std::vector<std::size_t> cols) {
  const Tensor& x = a.value();
  require_matrix(x, "gather");
  if (rows.size() != cols.size() || rows.empty()) {
    throw ShapeError("gather: index lists must be non-empty and of equal length");
  }
  Tensor out = Tensor::matrix(rows.size(), 1);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= x.rows() || cols[k] >= x.cols()) {
      throw ShapeError("gather: index out of range for " + shape_string(x.shape()));
    }
    out[k] = x(rows[k], cols[k]);
  }
  const auto ia = a.id();
  return a.tape()->record(std::move(out), {ia},
                          [ia, rows = std::move(rows), cols = std::move(cols)](
                              Tape& tp, const Tensor& g) {
                            Tensor& gx = tp.grad_buffer(ia);
                            for (std::size_t k = 0; k < rows.size(); ++k)
                              gx(rows[k], cols[k]) += g[k];
                          });
}

Var concat_cols(Var a, Var b) {
  Tape& t = same_tape(a, b, "concat_cols");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_matrix(x, "concat_cols");
  require_matrix(y, "concat_cols");
  if (x.rows() != y.rows()) {
    throw ShapeError("concat_cols: row counts " + shape_string(x.shape()) + " vs " +
                     shape_string(y.shape()));
  }
  const std::size_t ca = x.cols(), cb = y.cols();
  Tensor out = Tensor::matrix(x.rows(), ca + cb);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::copy(x.row(r).begin(), x.row(r).end(), out.row(r).begin());
    std::copy(y.row(r).begin(), y.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(ca));
  }
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib, ca, cb](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < ca; ++c) ga(r, c) += g(r, c);
    }
    if (tp.requires_grad(ib)) {
      Tensor& gb = tp.grad_buffer(ib);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < cb; ++c) gb(r, c) += g(r, ca + c);
    }
  });
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  Tape& t = *rows.front().tape();
  const std::size_t width = rows.front().value().size();
  Tensor out = Tensor::matrix(rows.size(), width);
  std::vector<std::size_t> ids;
  ids.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].tape() != &t) throw ShapeError("stack_rows: rows live on different tapes");
    const Tensor& v = rows[r].value();
    if (v.size() != width) throw ShapeError("stack_rows: row widths differ");
    std::copy(v.values().begin(), v.values().end(), out.row(r).begin());
    ids.push_back(rows[r].id());
  }
  return t.record(std::move(out), ids, [ids](Tape& tp, const Tensor& g) {
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (!tp.requires_grad(ids[r])) continue;
      Tensor& gr = tp.grad_buffer(ids[r]);
      auto src = g.row(r);
      for (std::size_t c = 0; c < src.size(); ++c) gr[c] += src[c];
    }
  });
}

Var mul_const(Var a, const Tensor& factors) {
  require_same_shape(a.value(), factors, "mul_const");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factors[i];
  const auto ia = a.id();
  return a.tape()->record(std::move(out), {ia}, [ia, factors](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factors[i];
  });
}

Var scale_rows(Var a, std::vector<double> weights) {
  const Tensor& x = a.value();
  require_matrix(x, "scale_rows");
  if (weights.size() != x.rows()) {
    throw ShapeError("scale_rows: " + std::to_string(weights.size()) + " weights for " +
                     shape_string(x.shape()));
  }
  Tensor out = x;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (auto& v : out.row(r)) v *= weights[r];
  const auto ia = a.id();
  return a.tape()->record(std::move(out), {ia},
                          [ia, weights = std::move(weights)](Tape& tp, const Tensor& g) {
                            Tensor& gx = tp.grad_buffer(ia);
                            for (std::size_t r = 0; r < g.rows(); ++r) {
                              auto src = g.row(r);
                              auto dst = gx.row(r);
                              for (std::size_t c = 0; c < src.size(); ++c)
                                dst[c] += weights[r] * src[c];
                            }
                          });
}

Var spmm(const CsrMatrix& matrix, Var dense) {
  Tensor out = matrix.multiply(dense.value());
  const auto ia = dense.id();
  return dense.tape()->record(std::move(out), {ia}, [ia, matrix](Tape& tp, const Tensor& g) {
    tp.accumulate(ia, matrix.multiply_transposed(g));
  });
}

Var row_normalize(Var a, double eps) {
  const Tensor& x = a.value();
  require_matrix(x, "row_normalize");
  std::vector<double> norms(x.rows());
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double sq = 0.0;
    for (double v : x.row(r)) sq += v * v;
    norms[r] = std::sqrt(sq);
    if (norms[r] == 0.0 && eps == 0.0) {
      throw DegenerateEmbeddingError("cosine similarity undefined: row " + std::to_string(r) +
                                     " has zero norm");
    }
    const double denom = norms[r] + eps;
    for (auto& v : out.row(r)) v /= denom;
  }
  const auto ia = a.id();
  return a.tape()->record(std::move(out), {ia},
                          [ia, eps, norms = std::move(norms)](Tape& tp, const Tensor& g) {
                            const Tensor& xv = tp.value(ia);
                            Tensor& gx = tp.grad_buffer(ia);
                            for (std::size_t r = 0; r < g.rows(); ++r) {
                              const double n = norms[r];
                              const double s = n + eps;
                              auto xr = xv.row(r);
                              auto gr = g.row(r);
                              auto out = gx.row(r);
                              double dot = 0.0;
                              for (std::size_t c = 0; c < xr.size(); ++c) dot += gr[c] * xr[c];
                              const double k = n > 0.0 ? dot / (n * s * s) : 0.0;
                              for (std::size_t c = 0; c < xr.size(); ++c)
                                out[c] += gr[c] / s - xr[c] * k;
                            }
                          });
}

Var conv1d(Var x, Var kernel, std::size_t stride, std::size_t padding) {
  Tape& t = same_tape(x, kernel, "conv1d");
  Tensor out = flowid::conv1d(x.value(), kernel.value(), stride, padding);
  const auto ix = x.id(), ik = kernel.id();
  return t.record(std::move(out), {ix, ik}, [ix, ik, stride, padding](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.value(ix);
    const Tensor& kv = tp.value(ik);
    const std::size_t c_out = kv.shape()[0], c_in = kv.shape()[1], k = kv.shape()[2];
    const std::size_t length = xv.cols(), out_len = g.cols();
    const bool want_x = tp.requires_grad(ix);
    const bool want_k = tp.requires_grad(ik);
    Tensor* gx = want_x ? &tp.grad_buffer(ix) : nullptr;
    Tensor* gk = want_k ? &tp.grad_buffer(ik) : nullptr;
    for (std::size_t co = 0; co < c_out; ++co) {
      const double* go = g.row(co).data();
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        const double* xr = xv.row(ci).data();
        const double* w = kv.data() + (co * c_in + ci) * k;
        for (std::size_t j = 0; j < k; ++j) {
          const auto [t_begin, t_end] = conv1d_tap_range(j, length, out_len, stride, padding);
          const std::ptrdiff_t shift =
              static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(padding);
          if (stride == 1) {
            const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(t_begin) + shift;
            const std::size_t count = t_end - t_begin;
            const double* gs = go + t_begin;
            if (want_k) {
              const double* xs = xr + offset;
              double acc[4] = {0.0, 0.0, 0.0, 0.0};
              std::size_t u = 0;
              for (; u + 4 <= count; u += 4)
                for (std::size_t lane = 0; lane < 4; ++lane) acc[lane] += gs[u + lane] * xs[u + lane];
              for (; u < count; ++u) acc[0] += gs[u] * xs[u];
              gk->at(co, ci, j) += (acc[0] + acc[1]) + (acc[2] + acc[3]);
            }
            if (want_x && w[j] != 0.0) {
              double* gxs = &(*gx)(ci, 0) + offset;
              for (std::size_t u = 0; u < count; ++u) gxs[u] += w[j] * gs[u];
            }
          } else {
            if (want_k) {
              double acc = 0.0;
              for (std::size_t tt = t_begin; tt < t_end; ++tt)
                acc += go[tt] * xr[static_cast<std::ptrdiff_t>(tt * stride) + shift];
              gk->at(co, ci, j) += acc;
            }
            if (want_x && w[j] != 0.0) {
              double* gxr = &(*gx)(ci, 0);
              for (std::size_t tt = t_begin; tt < t_end; ++tt)
                gxr[static_cast<std::ptrdiff_t>(tt * stride) + shift] += w[j] * go[tt];
            }
          }
        }
      }
    }
  });
}

Var add_channel_bias(Var x, Var bias) {
  Tape& t = same_tape(x, bias, "add_channel_bias");
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  require_matrix(xv, "add_channel_bias");
  if (bv.size() != xv.rows()) {
    throw ShapeError("add_channel_bias: bias " + shape_string(bv.shape()) + " for input " +
                     shape_string(xv.shape()));
  }
  Tensor out = xv;
  for (std::size_t c = 0; c < out.rows(); ++c)
    for (auto& v : out.row(c)) v += bv[c];
  const auto ix = x.id(), ib = bias.id();
  return t.record(std::move(out), {ix, ib}, [ix, ib](Tape& tp, const Tensor& g) {
    tp.accumulate(ix, g);
    if (tp.requires_grad(ib)) {
      Tensor& gb = tp.grad_buffer(ib);
      for (std::size_t c = 0; c < g.rows(); ++c)
        for (double v : g.row(c)) gb[c] += v;
    }
  });
}

Var maxpool1d(Var x, std::size_t width) {
  const Tensor& xv = x.value();
  require_matrix(xv, "maxpool1d");
  if (width == 0 || xv.cols() < width) {
    throw ShapeError("maxpool1d: width " + std::to_string(width) + " for length " +
                     std::to_string(xv.cols()));
  }
  const std::size_t out_len = xv.cols() / width;
  Tensor out = Tensor::matrix(xv.rows(), out_len);
  std::vector<std::size_t> argmax(xv.rows() * out_len);
  for (std::size_t c = 0; c < xv.rows(); ++c) {
    for (std::size_t p = 0; p < out_len; ++p) {
      std::size_t best = p * width;
      for (std::size_t q = best + 1; q < (p + 1) * width; ++q)
        if (xv(c, q) > xv(c, best)) best = q;
      out(c, p) = xv(c, best);
      argmax[c * out_len + p] = best;
    }
  }
  const auto ix = x.id();
  return x.tape()->record(std::move(out), {ix},
                          [ix, out_len, argmax = std::move(argmax)](Tape& tp, const Tensor& g) {
                            Tensor& gx = tp.grad_buffer(ix);
                            for (std::size_t c = 0; c < g.rows(); ++c)
                              for (std::size_t p = 0; p < out_len; ++p)
                                gx(c, argmax[c * out_len + p]) += g(c, p);
                          });
}

Var lstm(Var x, Var w_ih, Var w_hh, Var b) {
  Tape& t = same_tape(x, w_ih, "lstm");
  same_tape(x, w_hh, "lstm");
  same_tape(x, b, "lstm");
  const Tensor& xv = x.value();
  const Tensor& wi = w_ih.value();
  const Tensor& wh = w_hh.value();
  const Tensor& bv = b.value();
  require_matrix(xv, "lstm");
  const std::size_t steps = xv.rows(), d_in = xv.cols();
  const std::size_t hidden = wh.rows();
  if (wi.rank() != 2 || wi.rows() != d_in || wi.cols() != 4 * hidden || wh.cols() != 4 * hidden ||
      bv.size() != 4 * hidden) {
    throw ShapeError("lstm: inconsistent weights w_ih " + shape_string(wi.shape()) + ", w_hh " +
                     shape_string(wh.shape()) + ", b " + shape_string(bv.shape()) +
                     " for input " + shape_string(xv.shape()));
  }
  // gates(t) holds activated (i, f, g, o); cells(t) the cell state after step t.
  auto gates = std::make_shared<Tensor>(Tensor::matrix(steps, 4 * hidden));
  auto cells = std::make_shared<Tensor>(Tensor::matrix(steps, hidden));
  Tensor hs = Tensor::matrix(steps, hidden);
  std::vector<double> pre(4 * hidden);
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t k = 0; k < 4 * hidden; ++k) pre[k] = bv[k];
    for (std::size_t d = 0; d < d_in; ++d) {
      const double xd = xv(s, d);
      if (xd == 0.0) continue;
      for (std::size_t k = 0; k < 4 * hidden; ++k) pre[k] += xd * wi(d, k);
    }
    if (s > 0) {
      for (std::size_t h = 0; h < hidden; ++h) {
        const double hp = hs(s - 1, h);
        if (hp == 0.0) continue;
        for (std::size_t k = 0; k < 4 * hidden; ++k) pre[k] += hp * wh(h, k);
      }
    }
    for (std::size_t h = 0; h < hidden; ++h) {
      const double ig = flowid::sigmoid(pre[h]);
      const double fg = flowid::sigmoid(pre[hidden + h]);
      const double cg = std::tanh(pre[2 * hidden + h]);
      const double og = flowid::sigmoid(pre[3 * hidden + h]);
      const double c_prev = s > 0 ? (*cells)(s - 1, h) : 0.0;
      const double c = fg * c_prev + ig * cg;
      (*gates)(s, h) = ig;
      (*gates)(s, hidden + h) = fg;
      (*gates)(s, 2 * hidden + h) = cg;
      (*gates)(s, 3 * hidden + h) = og;
      (*cells)(s, h) = c;
      hs(s, h) = og * std::tanh(c);
    }
  }
  const auto ix = x.id(), iwi = w_ih.id(), iwh = w_hh.id(), ib = b.id();
  const std::size_t out_id = t.size();
  return t.record(
      std::move(hs), {ix, iwi, iwh, ib},
      [=](Tape& tp, const Tensor& g) {
        const Tensor& xs = tp.value(ix);
        const Tensor& wi_v = tp.value(iwi);
        const Tensor& wh_v = tp.value(iwh);
        const Tensor& h_all = tp.value(out_id);
        Tensor* gx = tp.requires_grad(ix) ? &tp.grad_buffer(ix) : nullptr;
        Tensor* gwi = tp.requires_grad(iwi) ? &tp.grad_buffer(iwi) : nullptr;
        Tensor* gwh = tp.requires_grad(iwh) ? &tp.grad_buffer(iwh) : nullptr;
        Tensor* gb = tp.requires_grad(ib) ? &tp.grad_buffer(ib) : nullptr;
        std::vector<double> dh_next(hidden, 0.0), dc_next(hidden, 0.0), da(4 * hidden);
        for (std::size_t s = steps; s-- > 0;) {
          for (std::size_t h = 0; h < hidden; ++h) {
            const double ig = (*gates)(s, h);
            const double fg = (*gates)(s, hidden + h);
            const double cg = (*gates)(s, 2 * hidden + h);
            const double og = (*gates)(s, 3 * hidden + h);
            const double c = (*cells)(s, h);
            const double c_prev = s > 0 ? (*cells)(s - 1, h) : 0.0;
            const double tc = std::tanh(c);
            const double dh = g(s, h) + dh_next[h];
            const double d_o = dh * tc;
            const double dc = dh * og * (1.0 - tc * tc) + dc_next[h];
            da[h] = dc * cg * ig * (1.0 - ig);
            da[hidden + h] = dc * c_prev * fg * (1.0 - fg);
            da[2 * hidden + h] = dc * ig * (1.0 - cg * cg);
            da[3 * hidden + h] = d_o * og * (1.0 - og);
            dc_next[h] = dc * fg;
          }
          if (gb)
            for (std::size_t k = 0; k < 4 * hidden; ++k) (*gb)[k] += da[k];
          for (std::size_t d = 0; d < xs.cols(); ++d) {
            if (gwi) {
              const double xd = xs(s, d);
              if (xd != 0.0)
                for (std::size_t k = 0; k < 4 * hidden; ++k) (*gwi)(d, k) += xd * da[k];
            }
            if (gx) {
              double acc = 0.0;
              for (std::size_t k = 0; k < 4 * hidden; ++k) acc += wi_v(d, k) * da[k];
              (*gx)(s, d) += acc;
            }
          }
          for (std::size_t h = 0; h < hidden; ++h) {
            if (gwh && s > 0) {
              const double hp = h_all(s - 1, h);
              if (hp != 0.0)
                for (std::size_t k = 0; k < 4 * hidden; ++k) (*gwh)(h, k) += hp * da[k];
            }
            double acc = 0.0;
            for (std::size_t k = 0; k < 4 * hidden; ++k) acc += wh_v(h, k) * da[k];
            dh_next[h] = acc;
          }
        }
      });
}

Var interpolate(Var alpha, Var a, Var b) {
  Tape& t = same_tape(a, b, "interpolate");
  same_tape(alpha, a, "interpolate");
  require_same_shape(a.value(), b.value(), "interpolate");
  const double raw = alpha.value().item();
  const double w = std::clamp(raw, 0.0, 1.0);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = w * out[i] + (1.0 - w) * bv[i];
  const auto ial = alpha.id(), ia = a.id(), ib = b.id();
  const bool inside = raw >= 0.0 && raw <= 1.0;
  return t.record(std::move(out), {ial, ia, ib}, [=](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += w * g[i];
    }
    if (tp.requires_grad(ib)) {
      Tensor& gb = tp.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += (1.0 - w) * g[i];
    }
    if (inside && tp.requires_grad(ial)) {
      const Tensor& av = tp.value(ia);
      const Tensor& bvv = tp.value(ib);
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * (av[i] - bvv[i]);
      tp.grad_buffer(ial)[0] += acc;
    }
  });
}

Var attention_pool(Var states, Var w, Var b, Var v) {
  Var scores = matmul(tanh(add_bias(matmul(states, w), b)), v);  // T×1
  Var weights = softmax_rows(transpose(scores));                  // 1×T
  return matmul(weights, states);
}

Var linear(Var x, Var w, Var b) { return add_bias(matmul(x, w), b); }

Var map_rows(Tape& main, const ParameterStore& store, std::size_t items,
             const std::function<Var(Tape&, std::size_t)>& build, std::size_t chunk) {
  if (items == 0) throw ShapeError("map_rows: no items");
  if (chunk == 0) chunk = 1;
  const std::size_t chunk_count = (items + chunk - 1) / chunk;
  auto tapes = std::make_shared<std::vector<std::unique_ptr<Tape>>>(chunk_count);
  auto outputs = std::make_shared<std::vector<std::vector<Var>>>(chunk_count);
  parallel_for(chunk_count, [&](std::size_t c) {
    auto tape = std::make_unique<Tape>();
    for (const auto& prefix : main.frozen_prefixes()) tape->freeze_prefix(prefix);
    auto& rows = (*outputs)[c];
    for (std::size_t i = c * chunk; i < std::min(items, (c + 1) * chunk); ++i) {
      rows.push_back(build(*tape, i));
    }
    (*tapes)[c] = std::move(tape);
  });

  const std::size_t width = outputs->front().front().value().size();
  Tensor stacked = Tensor::matrix(items, width);
  std::set<std::string> names;
  for (std::size_t c = 0; c < chunk_count; ++c) {
    const auto& rows = (*outputs)[c];
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const Tensor& v = rows[k].value();
      if (v.size() != width) throw ShapeError("map_rows: rows of differing width");
      std::copy(v.values().begin(), v.values().end(), stacked.row(c * chunk + k).begin());
    }
    for (const auto& [name, id] : (*tapes)[c]->param_leaves())
      if ((*tapes)[c]->requires_grad(id)) names.insert(name);
  }
  if (names.empty()) return main.constant(std::move(stacked));

  std::vector<std::string> ordered(names.begin(), names.end());
  std::vector<std::size_t> parents;
  for (const auto& name : ordered) parents.push_back(main.param(store, name).id());

  return main.record(
      std::move(stacked), parents,
      [tapes, outputs, ordered, parents, chunk](Tape& tp, const Tensor& g) {
        const std::size_t count = tapes->size();
        parallel_for(count, [&](std::size_t c) {
          const auto& rows = (*outputs)[c];
          std::vector<std::pair<Var, Tensor>> seeds;
          seeds.reserve(rows.size());
          for (std::size_t k = 0; k < rows.size(); ++k) {
            Tensor seed(rows[k].value().shape(), 0.0);
            auto src = g.row(c * chunk + k);
            std::copy(src.begin(), src.end(), seed.values().begin());
            seeds.emplace_back(rows[k], std::move(seed));
          }
          (*tapes)[c]->backward(seeds);
        });
        for (std::size_t c = 0; c < count; ++c) {
          const auto& leaves = (*tapes)[c]->param_leaves();
          for (std::size_t p = 0; p < ordered.size(); ++p) {
            auto it = leaves.find(ordered[p]);
            if (it == leaves.end()) continue;
            if (const Tensor* grad = (*tapes)[c]->grad_if_any(it->second))
              tp.accumulate(parents[p], *grad);
          }
        }
      });
}

}  // namespace ad
}  // namespace flowid
