#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "entropg/autodiff.hpp"

namespace entropg::diff::ops {

namespace {

Tape* common_tape(std::initializer_list<const Tensor*> ts) {
  Tape* tape = nullptr;
  for (const Tensor* t : ts) {
    if (!t->defined()) throw std::invalid_argument("operation on undefined tensor");
    if (!t->on_tape()) continue;
    if (tape && tape != t->tape())
      throw std::invalid_argument("operands live on different tapes");
    tape = t->tape();
  }
  return tape;
}

Tensor emit(Tape* tape, Values values, std::vector<int> shape, Tape::BackwardFn fn) {
  if (!tape) return Tensor::constant(std::move(values), std::move(shape));
  return tape->record(std::move(values), std::move(shape), std::move(fn));
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void require_vector(const Tensor& t, const char* op) {
  require(t.is_vector() && t.size() > 0, std::string(op) + " requires a non-empty vector");
}

// Unary elementwise op with derivative expressed in terms of (input, output).
template <typename F, typename DF>
Tensor unary(const Tensor& x, F f, DF df) {
  Tape* tape = common_tape({&x});
  const Values& xv = x.values();
  Values out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  auto out_ptr = std::make_shared<const Values>(out);
  const int xn = x.node();
  ValuesPtr xp = x.values_ptr();
  return emit(tape, std::move(out), x.shape(),
              [xn, xp, out_ptr, df](Tape& t, const double* g) {
                if (xn < 0) return;
                double* gx = t.grad(xn);
                for (std::size_t i = 0; i < xp->size(); ++i)
                  gx[i] += g[i] * df((*xp)[i], (*out_ptr)[i]);
              });
}

}  // namespace

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.is_vector(), "linear: x must be a vector");
  require(w.is_matrix(), "linear: w must be a matrix");
  require(b.is_vector(), "linear: b must be a vector");
  const int m = w.rows(), n = w.cols();
  require(static_cast<int>(x.size()) == n,
          "linear: x has length " + std::to_string(x.size()) + ", expected " +
              std::to_string(n));
  require(static_cast<int>(b.size()) == m, "linear: bias length mismatch");

  Tape* tape = common_tape({&x, &w, &b});
  const Values& xv = x.values();
  const Values& wv = w.values();
  const Values& bv = b.values();
  Values out(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r) {
    double acc = bv[static_cast<std::size_t>(r)];
    const double* row = wv.data() + static_cast<std::size_t>(r) * n;
    for (int c = 0; c < n; ++c) acc += row[c] * xv[static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(r)] = acc;
  }

  const int xn = x.node(), wn = w.node(), bn = b.node();
  ValuesPtr xp = x.values_ptr(), wp = w.values_ptr();
  return emit(tape, std::move(out), {m},
              [xn, wn, bn, xp, wp, m, n](Tape& t, const double* g) {
                if (bn >= 0) {
                  double* gb = t.grad(bn);
                  for (int r = 0; r < m; ++r) gb[r] += g[r];
                }
                if (wn >= 0) {
                  double* gw = t.grad(wn);
                  for (int r = 0; r < m; ++r) {
                    double* grow = gw + static_cast<std::size_t>(r) * n;
                    const double gr = g[r];
                    for (int c = 0; c < n; ++c) grow[c] += gr * (*xp)[static_cast<std::size_t>(c)];
                  }
                }
                if (xn >= 0) {
                  double* gx = t.grad(xn);
                  for (int r = 0; r < m; ++r) {
                    const double* row = wp->data() + static_cast<std::size_t>(r) * n;
                    const double gr = g[r];
                    for (int c = 0; c < n; ++c) gx[c] += gr * row[c];
                  }
                }
              });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& x) {
  Tensor y = unary(x, [](double v) { return std::exp(v); },
                   [](double, double yv) { return yv; });
  for (double v : y.values())
    if (!std::isfinite(v)) throw NumericError("exp produced a non-finite value");
  return y;
}

Tensor log_clamped(const Tensor& x, double floor) {
  return unary(x, [floor](double v) { return std::log(std::max(v, floor)); },
               [floor](double v, double) { return v > floor ? 1.0 / v : 0.0; });
}

Tensor softmax(const Tensor& x) {
  require_vector(x, "softmax");
  Tape* tape = common_tape({&x});
  const Values& xv = x.values();
  const double mx = *std::max_element(xv.begin(), xv.end());
  Values out(xv.size());
  double z = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) z += out[i] = std::exp(xv[i] - mx);
  for (double& v : out) v /= z;
  auto yp = std::make_shared<const Values>(out);
  const int xn = x.node();
  return emit(tape, std::move(out), x.shape(), [xn, yp](Tape& t, const double* g) {
    if (xn < 0) return;
    double* gx = t.grad(xn);
    double gy = 0.0;
    for (std::size_t i = 0; i < yp->size(); ++i) gy += g[i] * (*yp)[i];
    for (std::size_t i = 0; i < yp->size(); ++i) gx[i] += (*yp)[i] * (g[i] - gy);
  });
}

Tensor log_softmax(const Tensor& x) {
  require_vector(x, "log_softmax");
  Tape* tape = common_tape({&x});
  const Values& xv = x.values();
  const double mx = *std::max_element(xv.begin(), xv.end());
  double z = 0.0;
  for (double v : xv) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  Values out(xv.size());
  Values p(xv.size());  // softmax, needed for the gradient
  for (std::size_t i = 0; i < xv.size(); ++i) {
    out[i] = xv[i] - lse;
    p[i] = std::exp(out[i]);
  }
  auto pp = std::make_shared<const Values>(std::move(p));
  const int xn = x.node();
  return emit(tape, std::move(out), x.shape(), [xn, pp](Tape& t, const double* g) {
    if (xn < 0) return;
    double* gx = t.grad(xn);
    double gsum = 0.0;
    for (std::size_t i = 0; i < pp->size(); ++i) gsum += g[i];
    for (std::size_t i = 0; i < pp->size(); ++i) gx[i] += g[i] - (*pp)[i] * gsum;
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: shape mismatch");
  Tape* tape = common_tape({&a, &b});
  Values out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  const int an = a.node(), bn = b.node();
  const std::size_t n = out.size();
  return emit(tape, std::move(out), a.shape(), [an, bn, n](Tape& t, const double* g) {
    if (an >= 0) {
      double* ga = t.grad(an);
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
    }
    if (bn >= 0) {
      double* gb = t.grad(bn);
      for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "sub: shape mismatch");
  Tape* tape = common_tape({&a, &b});
  Values out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  const int an = a.node(), bn = b.node();
  const std::size_t n = out.size();
  return emit(tape, std::move(out), a.shape(), [an, bn, n](Tape& t, const double* g) {
    if (an >= 0) {
      double* ga = t.grad(an);
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
    }
    if (bn >= 0) {
      double* gb = t.grad(bn);
      for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch");
  Tape* tape = common_tape({&a, &b});
  Values out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  const int an = a.node(), bn = b.node();
  ValuesPtr ap = a.values_ptr(), bp = b.values_ptr();
  return emit(tape, std::move(out), a.shape(), [an, bn, ap, bp](Tape& t, const double* g) {
    if (an >= 0) {
      double* ga = t.grad(an);
      for (std::size_t i = 0; i < ap->size(); ++i) ga[i] += g[i] * (*bp)[i];
    }
    if (bn >= 0) {
      double* gb = t.grad(bn);
      for (std::size_t i = 0; i < bp->size(); ++i) gb[i] += g[i] * (*ap)[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  Tape* tape = common_tape({&a});
  Values out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * c;
  const int an = a.node();
  const std::size_t n = out.size();
  return emit(tape, std::move(out), a.shape(), [an, c, n](Tape& t, const double* g) {
    if (an < 0) return;
    double* ga = t.grad(an);
    for (std::size_t i = 0; i < n; ++i) ga[i] += c * g[i];
  });
}

Tensor sum(const Tensor& x) {
  require(x.size() > 0, "sum of empty tensor");
  Tape* tape = common_tape({&x});
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i];
  const int xn = x.node();
  const std::size_t n = x.size();
  return emit(tape, {acc}, {1}, [xn, n](Tape& t, const double* g) {
    if (xn < 0) return;
    double* gx = t.grad(xn);
    for (std::size_t i = 0; i < n; ++i) gx[i] += g[0];
  });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "dot: shape mismatch");
  require(a.size() > 0, "dot of empty tensors");
  Tape* tape = common_tape({&a, &b});
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  const int an = a.node(), bn = b.node();
  ValuesPtr ap = a.values_ptr(), bp = b.values_ptr();
  return emit(tape, {acc}, {1}, [an, bn, ap, bp](Tape& t, const double* g) {
    if (an >= 0) {
      double* ga = t.grad(an);
      for (std::size_t i = 0; i < bp->size(); ++i) ga[i] += g[0] * (*bp)[i];
    }
    if (bn >= 0) {
      double* gb = t.grad(bn);
      for (std::size_t i = 0; i < ap->size(); ++i) gb[i] += g[0] * (*ap)[i];
    }
  });
}

Tensor concat(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat of zero tensors");
  Tape* tape = nullptr;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    require(p.is_vector(), "concat: all parts must be vectors");
    Tape* pt = common_tape({&p});
    if (pt) {
      require(!tape || tape == pt, "operands live on different tapes");
      tape = pt;
    }
    total += p.size();
  }
  Values out;
  out.reserve(total);
  std::vector<std::pair<int, std::size_t>> layout;  // (node, length)
  for (const Tensor& p : parts) {
    out.insert(out.end(), p.values().begin(), p.values().end());
    layout.emplace_back(p.node(), p.size());
  }
  return emit(tape, std::move(out), {static_cast<int>(total)},
              [layout = std::move(layout)](Tape& t, const double* g) {
                std::size_t off = 0;
                for (auto [node, len] : layout) {
                  if (node >= 0) {
                    double* gp = t.grad(node);
                    for (std::size_t i = 0; i < len; ++i) gp[i] += g[off + i];
                  }
                  off += len;
                }
              });
}

Tensor concat(const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat(std::span<const Tensor>(parts));
}

Tensor index(const Tensor& v, int i) {
  require_vector(v, "index");
  require(i >= 0 && i < static_cast<int>(v.size()), "index out of range");
  Tape* tape = common_tape({&v});
  const int vn = v.node();
  return emit(tape, {v[static_cast<std::size_t>(i)]}, {1}, [vn, i](Tape& t, const double* g) {
    if (vn >= 0) t.grad(vn)[i] += g[0];
  });
}

Tensor index_row(const Tensor& m, int r) {
  require(m.is_matrix(), "index_row requires a matrix");
  require(r >= 0 && r < m.rows(), "index_row out of range");
  Tape* tape = common_tape({&m});
  const int cols = m.cols();
  const Values& mv = m.values();
  Values out(mv.begin() + static_cast<std::size_t>(r) * cols,
             mv.begin() + static_cast<std::size_t>(r + 1) * cols);
  const int mn = m.node();
  return emit(tape, std::move(out), {cols}, [mn, r, cols](Tape& t, const double* g) {
    if (mn < 0) return;
    double* gm = t.grad(mn) + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) gm[c] += g[c];
  });
}

Tensor slice(const Tensor& v, int begin, int len) {
  require_vector(v, "slice");
  require(begin >= 0 && len > 0 && begin + len <= static_cast<int>(v.size()),
          "slice bounds out of range");
  Tape* tape = common_tape({&v});
  const Values& vv = v.values();
  Values out(vv.begin() + begin, vv.begin() + begin + len);
  const int vn = v.node();
  return emit(tape, std::move(out), {len}, [vn, begin, len](Tape& t, const double* g) {
    if (vn < 0) return;
    double* gv = t.grad(vn) + begin;
    for (int i = 0; i < len; ++i) gv[i] += g[i];
  });
}

Tensor detach(const Tensor& x) {
  return Tensor::constant(x.values(), x.shape());
}

}  // namespace entropg::diff::ops
