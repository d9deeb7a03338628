#include "sifr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace sifr {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch (" +
                         std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
  }
}

Tape* common_tape(const Tensor& a, const Tensor& b) {
  if (a.on_tape() && b.on_tape() && a.tape() != b.tape()) {
    throw DimensionError("operands recorded on different tapes");
  }
  return a.on_tape() ? a.tape() : b.tape();
}

// Attaches `out` to `tape` and registers the backward rule. No-op when the
// result does not participate in differentiation.
struct Recorder {
  Tape* tape;
  Tensor& out;
  int out_node = -1;

  Recorder(Tape* t, Tensor& o) : tape(t), out(o) {
    if (tape != nullptr) {
      out_node = tape->add_node(out.rows(), out.cols());
      Tape::bind(out, tape, out_node);
    }
  }
  void record(std::function<void(Tape&)> fn) {
    if (tape != nullptr) tape->record(std::move(fn));
  }
};

// y = op(a) with dy/da given per element by dfn(x, y).
template <typename F, typename G>
Tensor unary_elementwise(const Tensor& a, F&& fn, G&& dfn) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = fn(a.data()[i]);
  Recorder rec(a.tape(), out);
  if (rec.tape && a.node() >= 0) {
    const int an = a.node();
    const int on = rec.out_node;
    std::vector<double> x = a.data();
    std::vector<double> y = out.data();
    rec.record([an, on, x = std::move(x), y = std::move(y), dfn](Tape& t) {
      const auto& go = t.grad_buffer(on);
      auto& ga = t.grad_buffer(an);
      for (std::size_t i = 0; i < go.size(); ++i) {
        ga[i] += dfn(x[i], y[i]) * go[i];
      }
    });
  }
  return out;
}

// C[m,n] += A[m,k] * B[k,n], with optional transposes on A/B.
void gemm_acc(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t n, bool ta, bool tb) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ta ? a[p * m + i] : a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = tb ? nullptr : b + p * n;
      double* crow = c + i * n;
      if (!tb) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * b[j * k + p];
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Tape

Tensor Tape::leaf(const Tensor& t) {
  Tensor out = t;
  out.tape_ = this;
  out.node_ = add_node(t.rows(), t.cols());
  return out;
}

int Tape::add_node(std::size_t rows, std::size_t cols) {
  slots_.push_back({rows, cols, std::vector<double>(rows * cols, 0.0)});
  return static_cast<int>(slots_.size()) - 1;
}

void Tape::record(std::function<void(Tape&)> backprop) {
  ops_.push_back(std::move(backprop));
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape() != this || loss.node() < 0) {
    throw DimensionError("backward: loss is not recorded on this tape");
  }
  if (loss.size() != 1) {
    throw DimensionError("backward: loss must be a scalar");
  }
  if (!std::isfinite(loss.value())) {
    throw NumericError("backward: loss is not finite");
  }
  for (auto& s : slots_) std::fill(s.grad.begin(), s.grad.end(), 0.0);
  slots_[loss.node()].grad[0] = 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)(*this);
}

const std::vector<double>& Tape::grad(const Tensor& t) const {
  if (t.tape() != this || t.node() < 0) {
    throw DimensionError("grad: tensor is not recorded on this tape");
  }
  return slots_[t.node()].grad;
}

Tensor Tape::grad_tensor(const Tensor& t) const {
  return Tensor(t.rows(), t.cols(), grad(t));
}

// ---------------------------------------------------------------------------
// Binary elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.data()[i] = a.data()[i] + b.data()[i];
  }
  Recorder rec(common_tape(a, b), out);
  if (rec.tape) {
    const int an = a.node(), bn = b.node(), on = rec.out_node;
    rec.record([an, bn, on](Tape& t) {
      const auto& go = t.grad_buffer(on);
      if (an >= 0) {
        auto& g = t.grad_buffer(an);
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
      }
      if (bn >= 0) {
        auto& g = t.grad_buffer(bn);
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.data()[i] = a.data()[i] - b.data()[i];
  }
  Recorder rec(common_tape(a, b), out);
  if (rec.tape) {
    const int an = a.node(), bn = b.node(), on = rec.out_node;
    rec.record([an, bn, on](Tape& t) {
      const auto& go = t.grad_buffer(on);
      if (an >= 0) {
        auto& g = t.grad_buffer(an);
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
      }
      if (bn >= 0) {
        auto& g = t.grad_buffer(bn);
        for (std::size_t i = 0; i < go.size(); ++i) g[i] -= go[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.data()[i] = a.data()[i] * b.data()[i];
  }
  Recorder rec(common_tape(a, b), out);
  if (rec.tape) {
    const int an = a.node(), bn = b.node(), on = rec.out_node;
    std::vector<double> av = a.data(), bv = b.data();
    rec.record([an, bn, on, av = std::move(av), bv = std::move(bv)](Tape& t) {
      const auto& go = t.grad_buffer(on);
      if (an >= 0) {
        auto& g = t.grad_buffer(an);
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += bv[i] * go[i];
      }
      if (bn >= 0) {
        auto& g = t.grad_buffer(bn);
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += av[i] * go[i];
      }
    });
  }
  return out;
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "minimum");
  Tensor out(a.rows(), a.cols());
  std::vector<unsigned char> pick_b(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    pick_b[i] = b.data()[i] < a.data()[i];
    out.data()[i] = pick_b[i] ? b.data()[i] : a.data()[i];
  }
  Recorder rec(common_tape(a, b), out);
  if (rec.tape) {
    const int an = a.node(), bn = b.node(), on = rec.out_node;
    rec.record([an, bn, on, pick_b = std::move(pick_b)](Tape& t) {
      const auto& go = t.grad_buffer(on);
      for (std::size_t i = 0; i < go.size(); ++i) {
        const int dst = pick_b[i] ? bn : an;
        if (dst >= 0) t.grad_buffer(dst)[i] += go[i];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Unary elementwise

Tensor neg(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor relu(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_elementwise(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor cosine(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return std::cos(x); },
      [](double x, double) { return -std::sin(x); });
}

Tensor sine(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return std::sin(x); },
      [](double x, double) { return std::cos(x); });
}

Tensor square(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Tensor sqrt_elem(const Tensor& a) {
  for (double x : a.data()) {
    if (x < 0.0) throw NumericError("sqrt_elem: negative input");
  }
  // Subgradient 0 at the origin keeps norm-style losses finite when a
  // prediction lands exactly on its target.
  return unary_elementwise(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor huber(const Tensor& a, double delta) {
  return unary_elementwise(
      a,
      [delta](double x) {
        const double ax = std::abs(x);
        return ax <= delta ? 0.5 * x * x / delta : ax - 0.5 * delta;
      },
      [delta](double x, double) {
        return std::clamp(x / delta, -1.0, 1.0);
      });
}

Tensor scale(const Tensor& a, double c) {
  return unary_elementwise(
      a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor offset(const Tensor& a, double c) {
  return unary_elementwise(
      a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner extents differ (" +
                         std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + ")");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out(m, n);
  gemm_acc(a.data().data(), b.data().data(), out.data().data(), m, k, n, false,
           false);
  Recorder rec(common_tape(a, b), out);
  if (rec.tape) {
    const int an = a.node(), bn = b.node(), on = rec.out_node;
    std::vector<double> av = a.data(), bv = b.data();
    rec.record([an, bn, on, m, k, n, av = std::move(av),
                bv = std::move(bv)](Tape& t) {
      const auto& go = t.grad_buffer(on);
      if (an >= 0) {
        // dA = dC * B^T
        auto& ga = t.grad_buffer(an);
        gemm_acc(go.data(), bv.data(), ga.data(), m, n, k, false, true);
      }
      if (bn >= 0) {
        // dB = A^T * dC
        auto& gb = t.grad_buffer(bn);
        gemm_acc(av.data(), go.data(), gb.data(), k, m, n, true, false);
      }
    });
  }
  return out;
}

Tensor shared_mlp(const Tensor& x, const Tensor& w, const Tensor& b,
                  Activation act) {
  if (b.rows() != 1 || b.cols() != w.cols()) {
    throw DimensionError("shared_mlp: bias must be 1x" +
                         std::to_string(w.cols()));
  }
  Tensor y = add(matmul(x, w), broadcast_rows(b, x.rows()));
  switch (act) {
    case Activation::kLinear:
      return y;
    case Activation::kRelu:
      return relu(y);
    case Activation::kSigmoid:
      return sigmoid(y);
  }
  throw DimensionError("shared_mlp: unknown activation");
}

// ---------------------------------------------------------------------------
// Reductions

Tensor segment_max_rows(const Tensor& a, std::size_t seg_len,
                        std::vector<std::size_t>* argmax) {
  if (a.rows() == 0 || seg_len == 0) {
    throw EmptyInputError("segment_max_rows: empty input");
  }
  if (a.rows() % seg_len != 0) {
    throw DimensionError("segment_max_rows: rows not divisible by segment");
  }
  const std::size_t k = a.rows() / seg_len, c = a.cols();
  Tensor out(k, c);
  std::vector<std::size_t> arg(k * c);
  for (std::size_t s = 0; s < k; ++s) {
    for (std::size_t j = 0; j < c; ++j) {
      std::size_t best = s * seg_len;
      double bv = a.at(best, j);
      for (std::size_t r = 1; r < seg_len; ++r) {
        const double v = a.at(s * seg_len + r, j);
        if (v > bv) {  // ties keep the lowest row index
          bv = v;
          best = s * seg_len + r;
        }
      }
      out.at(s, j) = bv;
      arg[s * c + j] = best;
    }
  }
  if (argmax) *argmax = arg;
  Recorder rec(a.tape(), out);
  if (rec.tape && a.node() >= 0) {
    const int an = a.node(), on = rec.out_node;
    rec.record([an, on, c, arg = std::move(arg)](Tape& t) {
      const auto& go = t.grad_buffer(on);
      auto& ga = t.grad_buffer(an);
      for (std::size_t i = 0; i < go.size(); ++i) {
        ga[arg[i] * c + (i % c)] += go[i];
      }
    });
  }
  return out;
}

Tensor max_rows(const Tensor& a, std::vector<std::size_t>* argmax) {
  if (a.rows() == 0) throw EmptyInputError("max_rows: empty input");
  return segment_max_rows(a, a.rows(), argmax);
}

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  Tensor out = Tensor::scalar(s);
  Recorder rec(a.tape(), out);
  if (rec.tape && a.node() >= 0) {
    const int an = a.node(), on = rec.out_node;
    rec.record([an, on](Tape& t) {
      const double go = t.grad_buffer(on)[0];
      auto& ga = t.grad_buffer(an);
      for (double& g : ga) g += go;
    });
  }
  return out;
}

Tensor mean_all(const Tensor& a) {
  if (a.size() == 0) throw EmptyInputError("mean_all: empty input");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

Tensor sum_cols(const Tensor& a) {
  Tensor out(a.rows(), 1);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a.at(r, j);
    out.at(r, 0) = s;
  }
  Recorder rec(a.tape(), out);
  if (rec.tape && a.node() >= 0) {
    const int an = a.node(), on = rec.out_node;
    const std::size_t c = a.cols();
    rec.record([an, on, c](Tape& t) {
      const auto& go = t.grad_buffer(on);
      auto& ga = t.grad_buffer(an);
      for (std::size_t r = 0; r < go.size(); ++r) {
        for (std::size_t j = 0; j < c; ++j) ga[r * c + j] += go[r];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Structure

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("concat_cols: row counts differ");
  }
  const std::size_t n = a.rows(), ca = a.cols(), cb = b.cols();
  Tensor out(n, ca + cb);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < ca; ++j) out.at(r, j) = a.at(r, j);
    for (std::size_t j = 0; j < cb; ++j) out.at(r, ca + j) = b.at(r, j);
  }
  Recorder rec(common_tape(a, b), out);
  if (rec.tape) {
    const int an = a.node(), bn = b.node(), on = rec.out_node;
    rec.record([an, bn, on, n, ca, cb](Tape& t) {
      const auto& go = t.grad_buffer(on);
      for (std::size_t r = 0; r < n; ++r) {
        if (an >= 0) {
          auto& ga = t.grad_buffer(an);
          for (std::size_t j = 0; j < ca; ++j) {
            ga[r * ca + j] += go[r * (ca + cb) + j];
          }
        }
        if (bn >= 0) {
          auto& gb = t.grad_buffer(bn);
          for (std::size_t j = 0; j < cb; ++j) {
            gb[r * cb + j] += go[r * (ca + cb) + ca + j];
          }
        }
      }
    });
  }
  return out;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("concat_rows: column counts differ");
  }
  const std::size_t c = a.cols();
  Tensor out(a.rows() + b.rows(), c);
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(),
            out.data().begin() + static_cast<long>(a.size()));
  Recorder rec(common_tape(a, b), out);
  if (rec.tape) {
    const int an = a.node(), bn = b.node(), on = rec.out_node;
    const std::size_t asz = a.size();
    rec.record([an, bn, on, asz](Tape& t) {
      const auto& go = t.grad_buffer(on);
      if (an >= 0) {
        auto& ga = t.grad_buffer(an);
        for (std::size_t i = 0; i < asz; ++i) ga[i] += go[i];
      }
      if (bn >= 0) {
        auto& gb = t.grad_buffer(bn);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[asz + i];
      }
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
  if (c0 >= c1 || c1 > a.cols()) {
    throw DimensionError("slice_cols: invalid column range");
  }
  const std::size_t n = a.rows(), w = c1 - c0, c = a.cols();
  Tensor out(n, w);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < w; ++j) out.at(r, j) = a.at(r, c0 + j);
  }
  Recorder rec(a.tape(), out);
  if (rec.tape && a.node() >= 0) {
    const int an = a.node(), on = rec.out_node;
    rec.record([an, on, n, w, c, c0](Tape& t) {
      const auto& go = t.grad_buffer(on);
      auto& ga = t.grad_buffer(an);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < w; ++j) {
          ga[r * c + c0 + j] += go[r * w + j];
        }
      }
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& idx) {
  const std::size_t c = a.cols();
  Tensor out(idx.size(), c);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= a.rows()) throw DimensionError("gather_rows: index range");
    for (std::size_t j = 0; j < c; ++j) out.at(r, j) = a.at(idx[r], j);
  }
  Recorder rec(a.tape(), out);
  if (rec.tape && a.node() >= 0) {
    const int an = a.node(), on = rec.out_node;
    rec.record([an, on, c, idx](Tape& t) {
      const auto& go = t.grad_buffer(on);
      auto& ga = t.grad_buffer(an);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        for (std::size_t j = 0; j < c; ++j) {
          ga[idx[r] * c + j] += go[r * c + j];
        }
      }
    });
  }
  return out;
}

Tensor broadcast_rows(const Tensor& a, std::size_t n) {
  if (a.rows() != 1) throw DimensionError("broadcast_rows: need a row vector");
  const std::size_t c = a.cols();
  Tensor out(n, c);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < c; ++j) out.at(r, j) = a.at(0, j);
  }
  Recorder rec(a.tape(), out);
  if (rec.tape && a.node() >= 0) {
    const int an = a.node(), on = rec.out_node;
    rec.record([an, on, n, c](Tape& t) {
      const auto& go = t.grad_buffer(on);
      auto& ga = t.grad_buffer(an);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < c; ++j) ga[j] += go[r * c + j];
      }
    });
  }
  return out;
}

Tensor interpolate_rows(const Tensor& a,
                        const std::vector<std::array<std::size_t, 3>>& idx,
                        const std::vector<std::array<double, 3>>& w) {
  if (idx.size() != w.size()) {
    throw DimensionError("interpolate_rows: index/weight count mismatch");
  }
  const std::size_t c = a.cols();
  Tensor out(idx.size(), c);
  for (std::size_t m = 0; m < idx.size(); ++m) {
    for (int t = 0; t < 3; ++t) {
      if (idx[m][t] >= a.rows()) {
        throw DimensionError("interpolate_rows: index range");
      }
      for (std::size_t j = 0; j < c; ++j) {
        out.at(m, j) += w[m][t] * a.at(idx[m][t], j);
      }
    }
  }
  Recorder rec(a.tape(), out);
  if (rec.tape && a.node() >= 0) {
    const int an = a.node(), on = rec.out_node;
    rec.record([an, on, c, idx, w](Tape& t) {
      const auto& go = t.grad_buffer(on);
      auto& ga = t.grad_buffer(an);
      for (std::size_t m = 0; m < idx.size(); ++m) {
        for (int q = 0; q < 3; ++q) {
          for (std::size_t j = 0; j < c; ++j) {
            ga[idx[m][q] * c + j] += w[m][q] * go[m * c + j];
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Losses

Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels) {
  if (logits.rows() == 0) {
    throw EmptyInputError("softmax_cross_entropy: empty input");
  }
  if (labels.size() != logits.rows()) {
    throw DimensionError("softmax_cross_entropy: one label per row required");
  }
  const std::size_t n = logits.rows(), k = logits.cols();
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= k) {
      throw LabelError("softmax_cross_entropy: label " + std::to_string(l) +
                       " out of range [0, " + std::to_string(k) + ")");
    }
  }
  // probs[n*k] kept for the backward rule: d = (softmax - onehot) / n.
  std::vector<double> probs(n * k);
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double mx = logits.at(r, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits.at(r, j));
    double se = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      probs[r * k + j] = std::exp(logits.at(r, j) - mx);
      se += probs[r * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) probs[r * k + j] /= se;
    loss += mx + std::log(se) - logits.at(r, static_cast<std::size_t>(labels[r]));
  }
  Tensor out = Tensor::scalar(loss / static_cast<double>(n));
  Recorder rec(logits.tape(), out);
  if (rec.tape && logits.node() >= 0) {
    const int an = logits.node(), on = rec.out_node;
    rec.record([an, on, n, k, labels, probs = std::move(probs)](Tape& t) {
      const double go = t.grad_buffer(on)[0];
      auto& ga = t.grad_buffer(an);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < k; ++j) {
          double d = probs[r * k + j];
          if (j == static_cast<std::size_t>(labels[r])) d -= 1.0;
          ga[r * k + j] += go * d / static_cast<double>(n);
        }
      }
    });
  }
  return out;
}

Tensor smooth_l1(const Tensor& pred, const Tensor& target, double delta) {
  return mean_all(huber(sub(pred, target), delta));
}

std::vector<double> softmax_row_values(const Tensor& logits, std::size_t row) {
  const std::size_t k = logits.cols();
  std::vector<double> p(k);
  double mx = logits.at(row, 0);
  for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits.at(row, j));
  double se = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    p[j] = std::exp(logits.at(row, j) - mx);
    se += p[j];
  }
  for (std::size_t j = 0; j < k; ++j) p[j] /= se;
  return p;
}

// ---------------------------------------------------------------------------
// Gradient checking

double grad_check(const GradCheckFn& f, const std::vector<Tensor>& inputs,
                  double eps) {
  if (eps < 1e-7 || eps > 1e-4) {
    throw NumericError("grad_check: eps outside [1e-7, 1e-4]");
  }
  auto evaluate = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Tensor> leaves;
    leaves.reserve(xs.size());
    for (const auto& x : xs) leaves.push_back(tape.leaf(x));
    const Tensor y = f(tape, leaves);
    if (y.size() != 1) throw DimensionError("grad_check: f must be scalar");
    const double v = y.value();
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite value");
    return v;
  };

  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(inputs.size());
  for (const auto& x : inputs) leaves.push_back(tape.leaf(x));
  const Tensor y = f(tape, leaves);
  if (y.size() != 1) throw DimensionError("grad_check: f must be scalar");
  if (!std::isfinite(y.value())) {
    throw NumericError("grad_check: non-finite value");
  }
  tape.backward(y);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (const auto& l : leaves) analytic.push_back(tape.grad(l));

  double max_rel = 0.0;
  std::vector<Tensor> work = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const double x0 = work[i].data()[j];
      work[i].data()[j] = x0 + eps;
      const double fp = evaluate(work);
      work[i].data()[j] = x0 - eps;
      const double fm = evaluate(work);
      work[i].data()[j] = x0;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[i][j];
      const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

// ---------------------------------------------------------------------------
// Optimizer

void adam_step(std::vector<Parameter*>& params,
               const std::vector<std::vector<double>>& grads, std::size_t step,
               const AdamConfig& cfg) {
  if (grads.size() != params.size()) {
    throw DimensionError("adam_step: one gradient per parameter required");
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Parameter& par = *params[p];
    const std::vector<double>& g = grads[p];
    if (g.size() != par.value.size()) {
      throw DimensionError("adam_step: gradient shape mismatch for " +
                           par.name);
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      par.m[i] = cfg.beta1 * par.m[i] + (1.0 - cfg.beta1) * g[i];
      par.v[i] = cfg.beta2 * par.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = par.m[i] / bc1;
      const double vhat = par.v[i] / bc2;
      par.value.data()[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps_hat);
    }
  }
}

}  // namespace sifr
