#include "dppn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dppn {

namespace {

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + " needs a rank-2 operand, got " + shape_string(t.shape()));
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_broadcast_column(const Tensor& a, const Tensor& b, const char* op) {
  require_matrix(a, op);
  require_matrix(b, op);
  if (b.rows() != a.rows() || b.cols() != 1) {
    throw DimensionError(std::string(op) + ": cannot broadcast " + shape_string(b.shape()) + " over " +
                         shape_string(a.shape()));
  }
}

void accumulate(Node& parent, const Tensor& delta) {
  if (!parent.requires_grad) return;
  Tensor& g = parent.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

template <typename Fn>
Tensor map(const Tensor& a, Fn fn) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i]);
  return out;
}

}  // namespace

namespace kernel {

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner extents differ, " + shape_string(a.shape()) + " · " + shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out(i, j) += aip * b(p, j);
    }
  }
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: row extents differ, " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  Tensor out({m, n});
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t i = 0; i < m; ++i) {
      const double api = a(p, i);
      if (api == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out(i, j) += api * b(p, j);
    }
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: column extents differ, " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a(i, p) * b(j, p);
      out(i, j) = acc;
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  Tensor out({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Tensor softmax_cols(const Tensor& a) {
  require_matrix(a, "softmax_cols");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out({m, n});
  for (std::size_t j = 0; j < n; ++j) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) top = std::max(top, a(i, j));
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      out(i, j) = std::exp(a(i, j) - top);
      total += out(i, j);
    }
    for (std::size_t i = 0; i < m; ++i) out(i, j) /= total;
  }
  return out;
}

}  // namespace kernel

Var matmul(const Var& a, const Var& b) {
  Tensor out = kernel::matmul(a.value(), b.value());
  return Var::from_op(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) accumulate(pa, kernel::matmul_nt(self.grad, pb.value));
    if (pb.requires_grad) accumulate(pb, kernel::matmul_tn(pa.value, self.grad));
  });
}

Var transpose(const Var& a) {
  return Var::from_op(kernel::transpose(a.value()), {a},
                      [](Node& self) { accumulate(*self.parents[0], kernel::transpose(self.grad)); });
}

Var softmax_cols(const Var& a) {
  Tensor out = kernel::softmax_cols(a.value());
  return Var::from_op(std::move(out), {a}, [](Node& self) {
    const Tensor& s = self.value;
    const Tensor& g = self.grad;
    Tensor delta(s.shape());
    for (std::size_t j = 0; j < s.cols(); ++j) {
      double dot = 0.0;
      for (std::size_t i = 0; i < s.rows(); ++i) dot += s(i, j) * g(i, j);
      for (std::size_t i = 0; i < s.rows(); ++i) delta(i, j) = s(i, j) * (g(i, j) - dot);
    }
    accumulate(*self.parents[0], delta);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: empty list");
  const Shape& first = parts.front().shape();
  if (first.size() != 2 || first[1] != 1) {
    throw DimensionError("concat_cols: parts must be [d x 1], got " + shape_string(first));
  }
  const std::size_t d = first[0];
  Tensor out({d * parts.size(), 1});
  for (std::size_t p = 0; p < parts.size(); ++p) {
    if (parts[p].shape() != first) {
      throw DimensionError("concat_cols: ragged parts " + shape_string(first) + " and " +
                           shape_string(parts[p].shape()));
    }
    const Tensor& v = parts[p].value();
    std::copy(v.values().begin(), v.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(p * d));
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return Var::from_op(std::move(out), std::move(parents), [d](Node& self) {
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      Node& parent = *self.parents[p];
      if (!parent.requires_grad) continue;
      Tensor& g = parent.grad_buffer();
      for (std::size_t i = 0; i < d; ++i) g[i] += self.grad[p * d + i];
    }
  });
}

Var column(const Var& a, std::size_t index) {
  require_matrix(a.value(), "column");
  if (index >= a.cols()) {
    throw DimensionError("column: index " + std::to_string(index) + " out of range for " + shape_string(a.shape()));
  }
  return Var::from_op(a.value().col(index), {a}, [index](Node& self) {
    Node& parent = *self.parents[0];
    if (!parent.requires_grad) return;
    Tensor& g = parent.grad_buffer();
    for (std::size_t r = 0; r < self.grad.size(); ++r) g(r, index) += self.grad[r];
  });
}

Var relu(const Var& a) {
  return Var::from_op(map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }), {a}, [](Node& self) {
    const Tensor& x = self.parents[0]->value;
    Tensor delta(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) delta[i] = x[i] > 0.0 ? self.grad[i] : 0.0;
    accumulate(*self.parents[0], delta);
  });
}

Var sigmoid(const Var& a) {
  auto logistic = [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  };
  return Var::from_op(map(a.value(), logistic), {a}, [](Node& self) {
    const Tensor& s = self.value;
    Tensor delta(s.shape());
    for (std::size_t i = 0; i < s.size(); ++i) delta[i] = self.grad[i] * s[i] * (1.0 - s[i]);
    accumulate(*self.parents[0], delta);
  });
}

Var add(const Var& a, const Var& b) {
  require_same(a.value(), b.value(), "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return Var::from_op(std::move(out), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a.value(), b.value(), "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return Var::from_op(std::move(out), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], map(self.grad, [](double g) { return -g; }));
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a.value(), b.value(), "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return Var::from_op(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    Tensor da(self.grad.shape()), db(self.grad.shape());
    for (std::size_t i = 0; i < da.size(); ++i) {
      da[i] = self.grad[i] * pb.value[i];
      db[i] = self.grad[i] * pa.value[i];
    }
    accumulate(pa, da);
    accumulate(pb, db);
  });
}

Var scale(const Var& a, double factor) {
  return Var::from_op(map(a.value(), [factor](double x) { return x * factor; }), {a}, [factor](Node& self) {
    accumulate(*self.parents[0], map(self.grad, [factor](double g) { return g * factor; }));
  });
}

Var add_cols(const Var& a, const Var& b) {
  require_broadcast_column(a.value(), b.value(), "add_cols");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b.value()[i];
  return Var::from_op(std::move(out), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    Node& pb = *self.parents[1];
    if (!pb.requires_grad) return;
    Tensor& g = pb.grad_buffer();
    for (std::size_t i = 0; i < self.grad.rows(); ++i)
      for (std::size_t j = 0; j < self.grad.cols(); ++j) g[i] += self.grad(i, j);
  });
}

Var mul_cols(const Var& a, const Var& gate) {
  require_broadcast_column(a.value(), gate.value(), "mul_cols");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= gate.value()[i];
  return Var::from_op(std::move(out), {a, gate}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pg = *self.parents[1];
    const Tensor& g = self.grad;
    if (pa.requires_grad) {
      Tensor da(g.shape());
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) da(i, j) = g(i, j) * pg.value[i];
      accumulate(pa, da);
    }
    if (pg.requires_grad) {
      Tensor& dg = pg.grad_buffer();
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) dg[i] += g(i, j) * pa.value(i, j);
    }
  });
}

namespace {

Var reduce_cols(const Var& a, double factor, const char* op) {
  require_matrix(a.value(), op);
  const Tensor& x = a.value();
  Tensor out({x.rows(), 1});
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) acc += x(i, j);
    out[i] = acc * factor;
  }
  return Var::from_op(std::move(out), {a}, [factor](Node& self) {
    Node& parent = *self.parents[0];
    if (!parent.requires_grad) return;
    Tensor& g = parent.grad_buffer();
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) += self.grad[i] * factor;
  });
}

}  // namespace

Var mean_cols(const Var& a) { return reduce_cols(a, 1.0 / static_cast<double>(a.value().cols()), "mean_cols"); }

Var sum_cols(const Var& a) { return reduce_cols(a, 1.0, "sum_cols"); }

Var max_cols(const Var& a) {
  require_matrix(a.value(), "max_cols");
  const Tensor& x = a.value();
  Tensor out({x.rows(), 1});
  std::vector<std::size_t> arg(x.rows(), 0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 1; j < x.cols(); ++j)
      if (x(i, j) > x(i, arg[i])) arg[i] = j;
    out[i] = x(i, arg[i]);
  }
  return Var::from_op(std::move(out), {a}, [arg = std::move(arg)](Node& self) {
    Node& parent = *self.parents[0];
    if (!parent.requires_grad) return;
    Tensor& g = parent.grad_buffer();
    for (std::size_t i = 0; i < arg.size(); ++i) g(i, arg[i]) += self.grad[i];
  });
}

Var sum(std::span<const Var> scalars) {
  if (scalars.empty()) return Var::constant(Tensor::scalar(0.0));
  double total = 0.0;
  for (const Var& s : scalars) {
    if (s.value().size() != 1) throw DimensionError("sum: expected scalars, got " + shape_string(s.shape()));
    total += s.value()[0];
  }
  std::vector<Var> parents(scalars.begin(), scalars.end());
  return Var::from_op(Tensor::scalar(total), std::move(parents), [](Node& self) {
    for (auto& parent : self.parents)
      if (parent->requires_grad) parent->grad_buffer()[0] += self.grad[0];
  });
}

Var sq_l2(const Var& a, const Var& b) {
  require_same(a.value(), b.value(), "sq_l2");
  double total = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) {
    const double d = a.value()[i] - b.value()[i];
    total += d * d;
  }
  return Var::from_op(Tensor::scalar(total), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const double g = self.grad[0];
    Tensor delta(pa.value.shape());
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = 2.0 * g * (pa.value[i] - pb.value[i]);
    accumulate(pa, delta);
    if (pb.requires_grad) {
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = -delta[i];
      accumulate(pb, delta);
    }
  });
}

Var cross_entropy_logits(const Var& logits, std::size_t target) {
  const Tensor& z = logits.value();
  if (z.rank() != 2 || z.cols() != 1) {
    throw DimensionError("cross_entropy_logits: logits must be [n x 1], got " + shape_string(z.shape()));
  }
  if (target >= z.rows()) {
    throw std::out_of_range("cross_entropy_logits: target " + std::to_string(target) + " out of range for " +
                            std::to_string(z.rows()) + " classes");
  }
  const double top = *std::max_element(z.values().begin(), z.values().end());
  double total = 0.0;
  for (double v : z.values()) total += std::exp(v - top);
  const double log_norm = top + std::log(total);
  return Var::from_op(Tensor::scalar(log_norm - z[target]), {logits}, [target, log_norm](Node& self) {
    const Tensor& logit = self.parents[0]->value;
    Tensor delta(logit.shape());
    for (std::size_t i = 0; i < delta.size(); ++i) {
      delta[i] = self.grad[0] * (std::exp(logit[i] - log_norm) - (i == target ? 1.0 : 0.0));
    }
    accumulate(*self.parents[0], delta);
  });
}

}  // namespace dppn
