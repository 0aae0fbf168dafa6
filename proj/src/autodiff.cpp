#include "termstory/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "termstory/error.hpp"
#include "termstory/optim.hpp"
#include "termstory/rng.hpp"

namespace termstory::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

MapC view(const Tensor& t) {
  return MapC(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
Map view(Tensor& t) {
  return Map(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

Shape matrix_shape(std::size_t r, std::size_t c) { return {r, c}; }

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::kShape,
              std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

Graph& same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw Error(ErrorCode::kInvalidArgument, "operands belong to different graphs");
  return a.graph();
}

}  // namespace

const Tensor& Var::value() const { return graph_->node(id_).value; }
const Tensor& Var::grad() const { return graph_->node(id_).grad; }
bool Var::requires_grad() const { return graph_->node(id_).requires_grad; }

Var Graph::constant(Tensor value) { return push("constant", std::move(value), {}, nullptr); }

Var Graph::variable(Tensor value) {
  Var v = push("variable", std::move(value), {}, nullptr);
  nodes_[v.id_].requires_grad = grad_enabled_;
  return v;
}

Var Graph::parameter(Parameter& p) {
  Var v = push(p.name.c_str(), p.value, {}, nullptr);
  auto& n = nodes_[v.id_];
  n.requires_grad = grad_enabled_ && p.trainable;
  if (n.requires_grad) n.param = &p;
  return v;
}

Var Graph::push(const char* op, Tensor value, std::initializer_list<Var> parents,
                const std::function<std::function<void()>(std::size_t)>& make_backward) {
  return push(op, std::move(value), std::span<const Var>(parents.begin(), parents.size()), make_backward);
}

Var Graph::push(const char* op, Tensor value, std::span<const Var> parents,
                const std::function<std::function<void()>(std::size_t)>& make_backward) {
  if (!value.all_finite()) throw Error(ErrorCode::kNonFinite, std::string(op) + ": non-finite value");
  bool needs = false;
  if (grad_enabled_) {
    for (const auto& p : parents) needs = needs || nodes_[p.id_].requires_grad;
  }
  const std::size_t id = nodes_.size();
  auto& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs && make_backward) n.backward = make_backward(id);
  return Var(this, id);
}

Tensor& Graph::grad_of(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

std::size_t Graph::backward(Var loss) {
  if (&loss.graph() != this) throw Error(ErrorCode::kInvalidArgument, "backward: loss from another graph");
  if (loss.value().size() != 1) {
    throw Error(ErrorCode::kShape, "backward: loss must be a single element, got " + shape_string(loss.shape()));
  }
  if (!nodes_[loss.id_].requires_grad) return 0;
  grad_of(loss.id_)[0] += 1.0;
  std::size_t visited = 0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) {
      n.backward();
      ++visited;
    }
    if (n.param != nullptr) {
      auto& pg = n.param->grad;
      if (pg.shape() != n.value.shape()) pg = Tensor(n.value.shape());
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
    }
  }
  return visited;
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows() || av.rank() > 2 || bv.rank() != 2) shape_error("matmul", av.shape(), bv.shape());
  Tensor out(matrix_shape(av.rows(), bv.cols()));
  if (!out.empty() && av.cols() > 0) view(out).noalias() = view(av) * view(bv);
  return g.push("matmul", std::move(out), {a, b}, [&g, a, b](std::size_t self) {
    return [&g, a, b, self] {
      const Tensor& dc = g.node(self).grad;
      if (a.requires_grad()) view(g.grad_of(a.id())).noalias() += view(dc) * view(b.value()).transpose();
      if (b.requires_grad()) view(g.grad_of(b.id())).noalias() += view(a.value()).transpose() * view(dc);
    };
  });
}

Var transpose(Var a) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  Tensor out(matrix_shape(av.cols(), av.rows()));
  view(out) = view(av).transpose();
  return g.push("transpose", std::move(out), {a}, [&g, a](std::size_t self) {
    return [&g, a, self] { view(g.grad_of(a.id())) += view(g.node(self).grad).transpose(); };
  });
}

namespace {

template <typename Fwd, typename BwdA, typename BwdB>
Var elementwise2(const char* op, Var a, Var b, Fwd fwd, BwdA da, BwdB db) {
  Graph& g = same_graph(a, b);
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  return g.push(op, std::move(out), {a, b}, [&g, a, b, da, db](std::size_t self) {
    return [&g, a, b, da, db, self] {
      const Tensor& dc = g.node(self).grad;
      const Tensor& av = a.value();
      const Tensor& bv = b.value();
      if (a.requires_grad()) {
        Tensor& ga = g.grad_of(a.id());
        for (std::size_t i = 0; i < dc.size(); ++i) ga[i] += dc[i] * da(av[i], bv[i]);
      }
      if (b.requires_grad()) {
        Tensor& gb = g.grad_of(b.id());
        for (std::size_t i = 0; i < dc.size(); ++i) gb[i] += dc[i] * db(av[i], bv[i]);
      }
    };
  });
}

/// Unary op whose derivative is expressed through input x and output y.
template <typename Fwd, typename Deriv>
Var elementwise1(const char* op, Var x, Fwd fwd, Deriv deriv) {
  Graph& g = x.graph();
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  return g.push(op, std::move(out), {x}, [&g, x, deriv](std::size_t self) {
    return [&g, x, deriv, self] {
      const auto& n = g.node(self);
      const Tensor& xv = x.value();
      Tensor& gx = g.grad_of(x.id());
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += n.grad[i] * deriv(xv[i], n.value[i]);
    };
  });
}

}  // namespace

Var add(Var a, Var b) {
  return elementwise2(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return elementwise2(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return elementwise2(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var add_bias(Var x, Var bias) {
  Graph& g = same_graph(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.size() != xv.cols()) shape_error("add_bias", xv.shape(), bv.shape());
  Tensor out = xv;
  const std::size_t rows = xv.rows(), cols = xv.cols();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += bv[c];
  return g.push("add_bias", std::move(out), {x, bias}, [&g, x, bias, rows, cols](std::size_t self) {
    return [&g, x, bias, rows, cols, self] {
      const Tensor& dc = g.node(self).grad;
      if (x.requires_grad()) {
        Tensor& gx = g.grad_of(x.id());
        for (std::size_t i = 0; i < dc.size(); ++i) gx[i] += dc[i];
      }
      if (bias.requires_grad()) {
        Tensor& gb = g.grad_of(bias.id());
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) gb[c] += dc[r * cols + c];
      }
    };
  });
}

Var add_constant(Var x, const Tensor& c) {
  Graph& g = x.graph();
  if (c.shape() != x.shape()) shape_error("add_constant", x.shape(), c.shape());
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i];
  return g.push("add_constant", std::move(out), {x}, [&g, x](std::size_t self) {
    return [&g, x, self] {
      const Tensor& dc = g.node(self).grad;
      Tensor& gx = g.grad_of(x.id());
      for (std::size_t i = 0; i < dc.size(); ++i) gx[i] += dc[i];
    };
  });
}

Var scale(Var x, double s) {
  return elementwise1(
      "scale", x, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

Var sum(Var x) {
  Graph& g = x.graph();
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  return g.push("sum", Tensor({1}, {total}), {x}, [&g, x](std::size_t self) {
    return [&g, x, self] {
      const double d = g.node(self).grad[0];
      Tensor& gx = g.grad_of(x.id());
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += d;
    };
  });
}

Var mean(Var x) {
  const auto n = x.value().size();
  if (n == 0) throw Error(ErrorCode::kShape, "mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var sigmoid(Var x) {
  return elementwise1(
      "sigmoid", x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var x) {
  return elementwise1(
      "tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var x) {
  return elementwise1(
      "relu", x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Var gelu(Var x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2 / pi)
  constexpr double kA = 0.044715;
  return elementwise1(
      "gelu", x,
      [](double v) { return 0.5 * v * (1.0 + std::tanh(kC * (v + kA * v * v * v))); },
      [](double v, double) {
        const double t = std::tanh(kC * (v + kA * v * v * v));
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kC * (1.0 + 3.0 * kA * v * v);
      });
}

namespace {

Var softmax_impl(const char* op, Var x, std::span<const std::uint8_t> allowed) {
  Graph& g = x.graph();
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = &xv.data()[r * cols];
    double* o = &out.data()[r * cols];
    const std::uint8_t* mask = allowed.empty() ? nullptr : &allowed[r * cols];
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c)
      if (!mask || mask[c]) mx = std::max(mx, in[c]);
    if (!std::isfinite(mx)) throw Error(ErrorCode::kInvalidArgument, std::string(op) + ": row without allowed entry");
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = (!mask || mask[c]) ? std::exp(in[c] - mx) : 0.0;
      z += o[c];
    }
    for (std::size_t c = 0; c < cols; ++c) o[c] /= z;
  }
  return g.push(op, std::move(out), {x}, [&g, x, rows, cols](std::size_t self) {
    return [&g, x, rows, cols, self] {
      const auto& n = g.node(self);
      Tensor& gx = g.grad_of(x.id());
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = &n.value.data()[r * cols];
        const double* dy = &n.grad.data()[r * cols];
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += y[c] * dy[c];
        for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += y[c] * (dy[c] - dot);
      }
    };
  });
}

}  // namespace

Var softmax(Var x) { return softmax_impl("softmax", x, {}); }

Var masked_softmax(Var x, std::span<const std::uint8_t> allowed) {
  if (allowed.size() != x.value().size()) {
    throw Error(ErrorCode::kShape, "masked_softmax: mask size " + std::to_string(allowed.size()) +
                                       " vs " + shape_string(x.shape()));
  }
  return softmax_impl("masked_softmax", x, allowed);
}

Var layernorm(Var x, Var gamma, Var beta, double eps) {
  Graph& g = same_graph(x, gamma);
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (gamma.value().size() != cols || beta.value().size() != cols) {
    shape_error("layernorm", xv.shape(), gamma.shape());
  }
  Tensor xhat(xv.shape());
  std::vector<double> rstd(rows);
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += xv.at(r, c);
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (xv.at(r, c) - mu) * (xv.at(r, c) - mu);
    var /= static_cast<double>(cols);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      xhat.at(r, c) = (xv.at(r, c) - mu) * rstd[r];
      out.at(r, c) = xhat.at(r, c) * gamma.value()[c] + beta.value()[c];
    }
  }
  return g.push("layernorm", std::move(out), {x, gamma, beta},
                [&g, x, gamma, beta, xhat = std::move(xhat), rstd = std::move(rstd), rows, cols](std::size_t self) {
                  return [&g, x, gamma, beta, xhat, rstd, rows, cols, self] {
                    const Tensor& dy = g.node(self).grad;
                    const Tensor& gv = gamma.value();
                    if (gamma.requires_grad()) {
                      Tensor& gg = g.grad_of(gamma.id());
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < cols; ++c) gg[c] += dy.at(r, c) * xhat.at(r, c);
                    }
                    if (beta.requires_grad()) {
                      Tensor& gb = g.grad_of(beta.id());
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < cols; ++c) gb[c] += dy.at(r, c);
                    }
                    if (x.requires_grad()) {
                      Tensor& gx = g.grad_of(x.id());
                      const double inv_n = 1.0 / static_cast<double>(cols);
                      for (std::size_t r = 0; r < rows; ++r) {
                        double m1 = 0.0, m2 = 0.0;
                        for (std::size_t c = 0; c < cols; ++c) {
                          const double dxh = dy.at(r, c) * gv[c];
                          m1 += dxh;
                          m2 += dxh * xhat.at(r, c);
                        }
                        m1 *= inv_n;
                        m2 *= inv_n;
                        for (std::size_t c = 0; c < cols; ++c) {
                          const double dxh = dy.at(r, c) * gv[c];
                          gx.at(r, c) += rstd[r] * (dxh - m1 - xhat.at(r, c) * m2);
                        }
                      }
                    }
                  };
                });
}

Var embed(Var table, std::span<const int> ids) {
  Graph& g = table.graph();
  const Tensor& tv = table.value();
  const std::size_t vocab = tv.rows(), dim = tv.cols();
  Tensor out(matrix_shape(ids.size(), dim));
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab) {
      throw Error(ErrorCode::kInvalidArgument,
                  "embed: id " + std::to_string(ids[r]) + " out of range for table of " + std::to_string(vocab));
    }
    std::copy_n(&tv.data()[static_cast<std::size_t>(ids[r]) * dim], dim, &out.data()[r * dim]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return g.push("embed", std::move(out), {table}, [&g, table, idx = std::move(idx), dim](std::size_t self) {
    return [&g, table, idx, dim, self] {
      const Tensor& dy = g.node(self).grad;
      Tensor& gt = g.grad_of(table.id());
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < dim; ++c) gt[static_cast<std::size_t>(idx[r]) * dim + c] += dy[r * dim + c];
    };
  });
}

Var cross_entropy(Var logits, std::span<const int> targets, std::span<const double> weights) {
  Graph& g = logits.graph();
  const Tensor& lv = logits.value();
  const std::size_t rows = lv.rows(), cols = lv.cols();
  if (targets.size() != rows || (!weights.empty() && weights.size() != rows)) {
    throw Error(ErrorCode::kShape, "cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                                       std::to_string(rows) + " rows");
  }
  std::vector<double> w(rows, 1.0);
  if (!weights.empty()) w.assign(weights.begin(), weights.end());
  double total_w = 0.0;
  for (double x : w) total_w += x;
  if (!(total_w > 0.0)) throw Error(ErrorCode::kInvalidArgument, "cross_entropy: total weight must be positive");

  Tensor probs(lv.shape());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = &lv.data()[r * cols];
    double mx = *std::max_element(in, in + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(in[c] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < cols; ++c) probs.at(r, c) = std::exp(in[c] - lse);
    if (w[r] == 0.0) continue;
    const int t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= cols) {
      throw Error(ErrorCode::kInvalidArgument, "cross_entropy: target " + std::to_string(t) + " out of range");
    }
    loss += w[r] * (lse - in[t]);
  }
  loss /= total_w;
  std::vector<int> tgt(targets.begin(), targets.end());
  return g.push("cross_entropy", Tensor({1}, {loss}), {logits},
                [&g, logits, probs = std::move(probs), tgt = std::move(tgt), w = std::move(w), total_w, rows,
                 cols](std::size_t self) {
                  return [&g, logits, probs, tgt, w, total_w, rows, cols, self] {
                    const double d = g.node(self).grad[0] / total_w;
                    Tensor& gl = g.grad_of(logits.id());
                    for (std::size_t r = 0; r < rows; ++r) {
                      if (w[r] == 0.0) continue;
                      const double k = d * w[r];
                      for (std::size_t c = 0; c < cols; ++c) gl.at(r, c) += k * probs.at(r, c);
                      gl.at(r, static_cast<std::size_t>(tgt[r])) -= k;
                    }
                  };
                });
}

Var cross_entropy(Var logits, std::span<const int> targets) { return cross_entropy(logits, targets, {}); }

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorCode::kInvalidArgument, "concat_rows: no inputs");
  Graph& g = parts[0].graph();
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) shape_error("concat_rows", parts[0].shape(), p.shape());
    rows += p.rows();
  }
  Tensor out(matrix_shape(rows, cols));
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + static_cast<long>(off));
    off += p.value().size();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return g.push("concat_rows", std::move(out), parts, [&g, ps](std::size_t self) {
    return [&g, ps, self] {
      const Tensor& dy = g.node(self).grad;
      std::size_t off = 0;
      for (const auto& p : ps) {
        const std::size_t n = p.value().size();
        if (p.requires_grad()) {
          Tensor& gp = g.grad_of(p.id());
          for (std::size_t i = 0; i < n; ++i) gp[i] += dy[off + i];
        }
        off += n;
      }
    };
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorCode::kInvalidArgument, "concat_cols: no inputs");
  Graph& g = parts[0].graph();
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts[0].shape(), p.shape());
    cols += p.cols();
  }
  Tensor out(matrix_shape(rows, cols));
  std::size_t c0 = 0;
  for (const auto& p : parts) {
    const std::size_t pc = p.cols();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < pc; ++c) out.at(r, c0 + c) = p.value()[r * pc + c];
    c0 += pc;
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return g.push("concat_cols", std::move(out), parts, [&g, ps, rows, cols](std::size_t self) {
    return [&g, ps, rows, cols, self] {
      const Tensor& dy = g.node(self).grad;
      std::size_t c0 = 0;
      for (const auto& p : ps) {
        const std::size_t pc = p.cols();
        if (p.requires_grad()) {
          Tensor& gp = g.grad_of(p.id());
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < pc; ++c) gp[r * pc + c] += dy[r * cols + c0 + c];
        }
        c0 += pc;
      }
    };
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  Graph& g = x.graph();
  const Tensor& xv = x.value();
  const std::size_t cols = xv.cols();
  if (begin + count > xv.rows()) {
    throw Error(ErrorCode::kShape, "slice_rows: [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                                       ") outside " + shape_string(xv.shape()));
  }
  Tensor out(matrix_shape(count, cols));
  std::copy_n(xv.data().begin() + static_cast<long>(begin * cols), count * cols, out.data().begin());
  return g.push("slice_rows", std::move(out), {x}, [&g, x, begin, cols](std::size_t self) {
    return [&g, x, begin, cols, self] {
      const Tensor& dy = g.node(self).grad;
      Tensor& gx = g.grad_of(x.id());
      for (std::size_t i = 0; i < dy.size(); ++i) gx[begin * cols + i] += dy[i];
    };
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  Graph& g = x.graph();
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (begin + count > cols) {
    throw Error(ErrorCode::kShape, "slice_cols: [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                                       ") outside " + shape_string(xv.shape()));
  }
  Tensor out(matrix_shape(rows, count));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < count; ++c) out.at(r, c) = xv.at(r, begin + c);
  return g.push("slice_cols", std::move(out), {x}, [&g, x, begin, count, rows](std::size_t self) {
    return [&g, x, begin, count, rows, self] {
      const Tensor& dy = g.node(self).grad;
      Tensor& gx = g.grad_of(x.id());
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < count; ++c) gx.at(r, begin + c) += dy.at(r, c);
    };
  });
}

Var dropout(Var x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw Error(ErrorCode::kInvalidArgument, "dropout rate must be < 1");
  Tensor mask(x.shape());
  const double keep = 1.0 / (1.0 - rate);
  for (auto& m : mask.data()) m = rng.uniform() < rate ? 0.0 : keep;
  return mul(x, x.graph().constant(std::move(mask)));
}

}  // namespace termstory::ad
