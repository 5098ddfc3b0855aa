#include "vburst/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <utility>

#include "vburst/errors.hpp"

namespace vburst {

using detail::Node;

Var make_op(const char* name, Tensor value, std::vector<Var> parents,
            std::function<void(Node&)> backprop) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->parents.reserve(parents.size());
  for (auto& p : parents) node->parents.push_back(p.node());
  node->backprop = std::move(backprop);
  node->op = name;
  return Var(std::move(node));
}

Var Var::leaf(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

const Tensor& Var::grad() const {
  if (!node_ || !node_->grad_ready) {
    throw std::logic_error("Var::grad: no backward pass has reached this node");
  }
  return node_->grad;
}

std::span<double> Var::mutable_value() {
  if (!node_) throw std::logic_error("Var::mutable_value: empty handle");
  if (node_->backprop) {
    throw std::logic_error("Var::mutable_value: only leaves may be mutated");
  }
  return node_->value.mutable_data();
}

// --- elementwise ----------------------------------------------------------

namespace {

enum class Bcast { Same, ScalarA, ScalarB };

Bcast binary_mode(const char* op, const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return Bcast::Same;
  if (a.numel() == 1) return Bcast::ScalarA;
  if (b.numel() == 1) return Bcast::ScalarB;
  throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                   shape_str(b.shape()) + " differ and neither is a scalar");
}

const Tensor& wide(const Tensor& a, const Tensor& b, Bcast mode) {
  return mode == Bcast::ScalarA ? b : a;
}

std::size_t idx_a(Bcast mode, std::size_t i) { return mode == Bcast::ScalarA ? 0 : i; }
std::size_t idx_b(Bcast mode, std::size_t i) { return mode == Bcast::ScalarB ? 0 : i; }

}  // namespace

Var add(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Bcast mode = binary_mode("add", av, bv);
  Tensor out = Tensor::zeros_like(wide(av, bv, mode));
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[idx_a(mode, i)] + bv[idx_b(mode, i)];
  return make_op("add", std::move(out), {a, b}, [mode](Node& self) {
    Tensor& ga = self.parents[0]->grad;
    Tensor& gb = self.parents[1]->grad;
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      ga[idx_a(mode, i)] += self.grad[i];
      gb[idx_b(mode, i)] += self.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Bcast mode = binary_mode("sub", av, bv);
  Tensor out = Tensor::zeros_like(wide(av, bv, mode));
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[idx_a(mode, i)] - bv[idx_b(mode, i)];
  return make_op("sub", std::move(out), {a, b}, [mode](Node& self) {
    Tensor& ga = self.parents[0]->grad;
    Tensor& gb = self.parents[1]->grad;
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      ga[idx_a(mode, i)] += self.grad[i];
      gb[idx_b(mode, i)] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Bcast mode = binary_mode("mul", av, bv);
  Tensor out = Tensor::zeros_like(wide(av, bv, mode));
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[idx_a(mode, i)] * bv[idx_b(mode, i)];
  return make_op("mul", std::move(out), {a, b}, [mode](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    Tensor& ga = self.parents[0]->grad;
    Tensor& gb = self.parents[1]->grad;
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      ga[idx_a(mode, i)] += self.grad[i] * bv[idx_b(mode, i)];
      gb[idx_b(mode, i)] += self.grad[i] * av[idx_a(mode, i)];
    }
  });
}

Var div(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Bcast mode = binary_mode("div", av, bv);
  Tensor out = Tensor::zeros_like(wide(av, bv, mode));
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[idx_a(mode, i)] / bv[idx_b(mode, i)];
  out.validate("div");
  return make_op("div", std::move(out), {a, b}, [mode](Node& self) {
    const Tensor& bv = self.parents[1]->value;
    Tensor& ga = self.parents[0]->grad;
    Tensor& gb = self.parents[1]->grad;
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      const double inv_b = 1.0 / bv[idx_b(mode, i)];
      ga[idx_a(mode, i)] += self.grad[i] * inv_b;
      gb[idx_b(mode, i)] -= self.grad[i] * self.value[i] * inv_b;
    }
  });
}

Var add(const Var& a, double b) { return add(a, Var::leaf(Tensor::scalar(b))); }
Var sub(double a, const Var& b) { return sub(Var::leaf(Tensor::scalar(a)), b); }
Var mul(const Var& a, double b) { return mul(a, Var::leaf(Tensor::scalar(b))); }

namespace {

template <typename Fwd, typename Dydx>
Var unary_op(const char* name, const Var& x, Fwd fwd, Dydx dydx, bool check_finite = false) {
  const Tensor& xv = x.value();
  Tensor out = Tensor::zeros_like(xv);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = fwd(xv[i]);
  if (check_finite) out.validate(name);
  return make_op(name, std::move(out), {x}, [dydx](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    Tensor& gx = self.parents[0]->grad;
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      gx[i] += self.grad[i] * dydx(xv[i], self.value[i]);
    }
  });
}

}  // namespace

Var sigmoid(const Var& x) {
  // 1/(1+exp(-t)) evaluated via the non-overflowing branch for each sign.
  auto fwd = [](double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
  };
  return unary_op("sigmoid", x, fwd, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& x) {
  return unary_op("tanh", x, [](double t) { return std::tanh(t); },
                  [](double, double y) { return 1.0 - y * y; });
}

Var log(const Var& x) {
  return unary_op("log", x, [](double t) { return std::log(t); },
                  [](double t, double) { return 1.0 / t; },
                  /*check_finite=*/true);
}

Var exp(const Var& x) {
  return unary_op("exp", x, [](double t) { return std::exp(t); },
                  [](double, double y) { return y; },
                  /*check_finite=*/true);
}

// --- reductions -----------------------------------------------------------

namespace {

struct AxisDecomp {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisDecomp decompose(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("reduce: axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(shape));
  }
  AxisDecomp d;
  for (std::size_t i = 0; i < axis; ++i) d.outer *= shape[i];
  d.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) d.inner *= shape[i];
  return d;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  if (shape.size() == 1) return {1};
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  return out;
}

}  // namespace

Var reduce(ReduceOp op, const Var& x, std::size_t axis) {
  const Tensor& xv = x.value();
  const AxisDecomp d = decompose(xv.shape(), axis);
  Tensor out = Tensor::zeros(drop_axis(xv.shape(), axis));

  if (op == ReduceOp::Max) {
    std::vector<std::size_t> argmax(d.outer * d.inner, 0);
    for (std::size_t o = 0; o < d.outer; ++o) {
      for (std::size_t i = 0; i < d.inner; ++i) {
        double best = xv[(o * d.n) * d.inner + i];
        std::size_t best_j = 0;
        for (std::size_t j = 1; j < d.n; ++j) {
          const double v = xv[(o * d.n + j) * d.inner + i];
          if (v > best) {  // ties keep the first maximal element
            best = v;
            best_j = j;
          }
        }
        out[o * d.inner + i] = best;
        argmax[o * d.inner + i] = best_j;
      }
    }
    return make_op("reduce_max", std::move(out), {x},
                   [d, argmax = std::move(argmax)](Node& self) {
                     Tensor& gx = self.parents[0]->grad;
                     for (std::size_t o = 0; o < d.outer; ++o) {
                       for (std::size_t i = 0; i < d.inner; ++i) {
                         const std::size_t j = argmax[o * d.inner + i];
                         gx[(o * d.n + j) * d.inner + i] += self.grad[o * d.inner + i];
                       }
                     }
                   });
  }

  const double scale = op == ReduceOp::Mean ? 1.0 / static_cast<double>(d.n) : 1.0;
  for (std::size_t o = 0; o < d.outer; ++o) {
    for (std::size_t i = 0; i < d.inner; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d.n; ++j) acc += xv[(o * d.n + j) * d.inner + i];
      out[o * d.inner + i] = acc * scale;
    }
  }
  const char* name = op == ReduceOp::Mean ? "reduce_mean" : "reduce_sum";
  return make_op(name, std::move(out), {x}, [d, scale](Node& self) {
    Tensor& gx = self.parents[0]->grad;
    for (std::size_t o = 0; o < d.outer; ++o) {
      for (std::size_t i = 0; i < d.inner; ++i) {
        const double g = self.grad[o * d.inner + i] * scale;
        for (std::size_t j = 0; j < d.n; ++j) gx[(o * d.n + j) * d.inner + i] += g;
      }
    }
  });
}

Var reduce_sum(const Var& x, std::size_t axis) { return reduce(ReduceOp::Sum, x, axis); }
Var reduce_mean(const Var& x, std::size_t axis) { return reduce(ReduceOp::Mean, x, axis); }
Var reduce_max(const Var& x, std::size_t axis) { return reduce(ReduceOp::Max, x, axis); }

namespace {

Var full_reduce(const char* name, const Var& x, bool mean) {
  const Tensor& xv = x.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.numel(); ++i) acc += xv[i];
  const double scale = mean ? 1.0 / static_cast<double>(xv.numel()) : 1.0;
  return make_op(name, Tensor::scalar(acc * scale), {x}, [scale](Node& self) {
    Tensor& gx = self.parents[0]->grad;
    const double g = self.grad[0] * scale;
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g;
  });
}

}  // namespace

Var sum_all(const Var& x) { return full_reduce("sum_all", x, false); }
Var mean_all(const Var& x) { return full_reduce("mean_all", x, true); }

// --- matmul and linear ------------------------------------------------------

namespace {

// C[M,N] += A[M,K] * B[K,N]
void mm_nn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = &b[p * n];
      double* crow = &c[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
void mm_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = &a[i * k];
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = &b[j * k];
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

// C[M,N] += A[K,M]^T * B[K,N]
void mm_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = &a[p * m];
    const double* brow = &b[p * n];
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = &c[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " + shape_str(t.shape()));
  }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2("matmul", av);
  require_rank2("matmul", bv);
  if (av.extent(1) != bv.extent(0)) {
    throw ShapeError("matmul: inner extents differ: " + shape_str(av.shape()) + " vs " +
                     shape_str(bv.shape()));
  }
  const std::size_t m = av.extent(0), k = av.extent(1), n = bv.extent(1);
  Tensor out = Tensor::zeros({m, n});
  mm_nn_acc(av.data(), bv.data(), out.mutable_data(), m, k, n);
  return make_op("matmul", std::move(out), {a, b}, [m, k, n](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    // dA = dC * B^T, dB = A^T * dC
    mm_nt_acc(self.grad.data(), bv.data(), self.parents[0]->grad.mutable_data(), m, n, k);
    mm_tn_acc(av.data(), self.grad.data(), self.parents[1]->grad.mutable_data(), k, m, n);
  });
}

namespace {

Var linear_impl(const Var& x, const Var& w, const Var* bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  require_rank2("linear", xv);
  require_rank2("linear", wv);
  if (xv.extent(1) != wv.extent(1)) {
    throw ShapeError("linear: input dim " + shape_str(xv.shape()) + " does not match weight " +
                     shape_str(wv.shape()));
  }
  const std::size_t b = xv.extent(0), in = xv.extent(1), out_dim = wv.extent(0);
  if (bias) {
    const Tensor& bt = bias->value();
    if (bt.rank() != 1 || bt.extent(0) != out_dim) {
      throw ShapeError("linear: bias " + shape_str(bt.shape()) + " does not match weight " +
                       shape_str(wv.shape()));
    }
  }
  Tensor out = Tensor::zeros({b, out_dim});
  mm_nt_acc(xv.data(), wv.data(), out.mutable_data(), b, in, out_dim);
  if (bias) {
    const Tensor& bt = bias->value();
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < out_dim; ++j) out[i * out_dim + j] += bt[j];
    }
  }
  const bool has_bias = bias != nullptr;
  std::vector<Var> parents = has_bias ? std::vector<Var>{x, w, *bias} : std::vector<Var>{x, w};
  return make_op("linear", std::move(out), std::move(parents),
                 [b, in, out_dim, has_bias](Node& self) {
                   const Tensor& xv = self.parents[0]->value;
                   const Tensor& wv = self.parents[1]->value;
                   // dx = g * W ; dW = g^T * x ; db = column sums of g
                   mm_nn_acc(self.grad.data(), wv.data(), self.parents[0]->grad.mutable_data(),
                             b, out_dim, in);
                   mm_tn_acc(self.grad.data(), xv.data(), self.parents[1]->grad.mutable_data(),
                             out_dim, b, in);
                   if (has_bias) {
                     Tensor& gb = self.parents[2]->grad;
                     for (std::size_t i = 0; i < b; ++i) {
                       for (std::size_t j = 0; j < out_dim; ++j) gb[j] += self.grad[i * out_dim + j];
                     }
                   }
                 });
}

}  // namespace

Var linear(const Var& x, const Var& w, const Var& bias) { return linear_impl(x, w, &bias); }
Var linear(const Var& x, const Var& w) { return linear_impl(x, w, nullptr); }

// --- softmax family ---------------------------------------------------------

Var softmax_rows(const Var& x) {
  const Tensor& xv = x.value();
  require_rank2("softmax_rows", xv);
  xv.validate("softmax_rows input");
  const std::size_t b = xv.extent(0), c = xv.extent(1);
  Tensor out = Tensor::zeros({b, c});
  for (std::size_t i = 0; i < b; ++i) {
    double mx = xv[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, xv[i * c + j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = std::exp(xv[i * c + j] - mx);
      out[i * c + j] = e;
      denom += e;
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= denom;
  }
  return make_op("softmax_rows", std::move(out), {x}, [b, c](Node& self) {
    Tensor& gx = self.parents[0]->grad;
    for (std::size_t i = 0; i < b; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += self.grad[i * c + j] * self.value[i * c + j];
      for (std::size_t j = 0; j < c; ++j) {
        gx[i * c + j] += self.value[i * c + j] * (self.grad[i * c + j] - dot);
      }
    }
  });
}

Var logsumexp_rows(const Var& x) {
  const Tensor& xv = x.value();
  require_rank2("logsumexp_rows", xv);
  xv.validate("logsumexp_rows input");
  const std::size_t b = xv.extent(0), c = xv.extent(1);
  Tensor out = Tensor::zeros({b});
  for (std::size_t i = 0; i < b; ++i) {
    double mx = xv[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, xv[i * c + j]);
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += std::exp(xv[i * c + j] - mx);
    out[i] = mx + std::log(acc);
  }
  return make_op("logsumexp_rows", std::move(out), {x}, [b, c](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    Tensor& gx = self.parents[0]->grad;
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        gx[i * c + j] += self.grad[i] * std::exp(xv[i * c + j] - self.value[i]);
      }
    }
  });
}

Var pick_cols(const Var& x, std::span<const std::size_t> index) {
  const Tensor& xv = x.value();
  require_rank2("pick_cols", xv);
  const std::size_t b = xv.extent(0), c = xv.extent(1);
  if (index.size() != b) {
    throw ShapeError("pick_cols: index count " + std::to_string(index.size()) +
                     " does not match rows " + std::to_string(b));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  Tensor out = Tensor::zeros({b});
  for (std::size_t i = 0; i < b; ++i) {
    if (idx[i] >= c) {
      throw ShapeError("pick_cols: index " + std::to_string(idx[i]) + " out of range for " +
                       std::to_string(c) + " columns");
    }
    out[i] = xv[i * c + idx[i]];
  }
  return make_op("pick_cols", std::move(out), {x}, [c, idx = std::move(idx)](Node& self) {
    Tensor& gx = self.parents[0]->grad;
    for (std::size_t i = 0; i < idx.size(); ++i) gx[i * c + idx[i]] += self.grad[i];
  });
}

// --- shape ops ---------------------------------------------------------------

Var reshape(const Var& x, Shape shape) {
  const Tensor& xv = x.value();
  Tensor out(std::move(shape), std::vector<double>(xv.data().begin(), xv.data().end()));
  if (out.numel() != xv.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(xv.shape()) + " as " +
                     shape_str(out.shape()));
  }
  return make_op("reshape", std::move(out), {x}, [](Node& self) {
    Tensor& gx = self.parents[0]->grad;
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += self.grad[i];
  });
}

Var slice_cols(const Var& x, std::size_t start, std::size_t len) {
  const Tensor& xv = x.value();
  require_rank2("slice_cols", xv);
  const std::size_t b = xv.extent(0), n = xv.extent(1);
  if (len == 0 || start + len > n) {
    throw ShapeError("slice_cols: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") out of bounds for " + shape_str(xv.shape()));
  }
  Tensor out = Tensor::zeros({b, len});
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < len; ++j) out[i * len + j] = xv[i * n + start + j];
  }
  return make_op("slice_cols", std::move(out), {x}, [b, n, start, len](Node& self) {
    Tensor& gx = self.parents[0]->grad;
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < len; ++j) gx[i * n + start + j] += self.grad[i * len + j];
    }
  });
}

Var slice_time(const Var& x, std::size_t t) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3) {
    throw ShapeError("slice_time: expected a rank-3 tensor, got " + shape_str(xv.shape()));
  }
  const std::size_t b = xv.extent(0), m = xv.extent(1), k = xv.extent(2);
  if (t >= m) {
    throw ShapeError("slice_time: step " + std::to_string(t) + " out of range for " +
                     shape_str(xv.shape()));
  }
  Tensor out = Tensor::zeros({b, k});
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = xv[(i * m + t) * k + j];
  }
  return make_op("slice_time", std::move(out), {x}, [b, m, k, t](Node& self) {
    Tensor& gx = self.parents[0]->grad;
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < k; ++j) gx[(i * m + t) * k + j] += self.grad[i * k + j];
    }
  });
}

Var stack_time(std::span<const Var> steps) {
  if (steps.empty()) throw ShapeError("stack_time: no steps");
  const Tensor& first = steps[0].value();
  require_rank2("stack_time", first);
  const std::size_t b = first.extent(0), k = first.extent(1), m = steps.size();
  Tensor out = Tensor::zeros({b, m, k});
  std::vector<Var> parents;
  parents.reserve(m);
  for (std::size_t t = 0; t < m; ++t) {
    const Tensor& sv = steps[t].value();
    if (!sv.same_shape(first)) {
      throw ShapeError("stack_time: step " + std::to_string(t) + " shape " +
                       shape_str(sv.shape()) + " differs from " + shape_str(first.shape()));
    }
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < k; ++j) out[(i * m + t) * k + j] = sv[i * k + j];
    }
    parents.push_back(steps[t]);
  }
  return make_op("stack_time", std::move(out), std::move(parents), [b, m, k](Node& self) {
    for (std::size_t t = 0; t < m; ++t) {
      Tensor& gs = self.parents[t]->grad;
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < k; ++j) gs[i * k + j] += self.grad[(i * m + t) * k + j];
      }
    }
  });
}

// --- backward ----------------------------------------------------------------

namespace {

// Post-order over the DAG: every node appears after all of its parents.
// Throws on a cycle (impossible through the public API, checked anyway).
std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_map<Node*, std::uint8_t> state;  // 1 = on stack, 2 = done
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  state[root] = 1;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      auto it = state.find(parent);
      if (it == state.end()) {
        state[parent] = 1;
        stack.emplace_back(parent, 0);
      } else if (it->second == 1) {
        throw std::logic_error("backward: cycle detected in graph");
      }
    } else {
      state[node] = 2;
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

void backward(const Var& root) {
  if (!root) throw std::logic_error("backward: empty handle");
  Node* r = root.node().get();
  if (r->value.numel() != 1) {
    throw ShapeError("backward: root must be scalar, got " + shape_str(r->value.shape()));
  }
  if (r->backward_done) {
    throw std::logic_error("backward: already run on this root; call reset_gradients first");
  }
  std::vector<Node*> order = topo_order(r);
  for (Node* n : order) {
    n->grad = Tensor::zeros_like(n->value);
    n->grad_ready = true;
  }
  r->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop) (*it)->backprop(**it);
  }
  r->backward_done = true;
}

void reset_gradients(const Var& root) {
  if (!root) return;
  for (Node* n : topo_order(root.node().get())) {
    n->grad = Tensor();
    n->grad_ready = false;
    n->backward_done = false;
  }
}

// --- gradient checking ---------------------------------------------------------

GradCheckReport grad_check(const ScalarGraphBuilder& f, std::span<const Tensor> params,
                           double step, double tolerance) {
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(Var::leaf(p));
  Var root = f(leaves);
  if (root.value().numel() != 1) {
    throw ShapeError("grad_check: builder must return a scalar, got " +
                     shape_str(root.value().shape()));
  }
  backward(root);

  std::vector<Tensor> analytic;
  analytic.reserve(leaves.size());
  for (const Var& v : leaves) {
    analytic.push_back(v.grad_ready() ? v.grad() : Tensor::zeros_like(v.value()));
  }

  std::vector<Tensor> work(params.begin(), params.end());
  auto eval = [&]() {
    std::vector<Var> pts;
    pts.reserve(work.size());
    for (const Tensor& p : work) pts.push_back(Var::leaf(p));
    return f(pts).value()[0];
  };

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t p = 0; p < work.size(); ++p) {
    for (std::size_t i = 0; i < work[p].numel(); ++i) {
      const double orig = work[p][i];
      work[p][i] = orig + step;
      const double f_plus = eval();
      work[p][i] = orig - step;
      const double f_minus = eval();
      work[p][i] = orig;
      const double numeric = (f_plus - f_minus) / (2.0 * step);
      const double ana = analytic[p][i];
      const double denom = std::max({1.0, std::fabs(ana), std::fabs(numeric)});
      const double err = std::fabs(ana - numeric) / denom;
      if (err > report.max_rel_err) {
        report.max_rel_err = err;
        report.worst_param = p;
        report.worst_entry = i;
        report.analytic = ana;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace vburst
