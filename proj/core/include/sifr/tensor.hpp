#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "sifr/errors.hpp"

namespace sifr {

class Tape;

/// Dense 2-D row-major array of 64-bit floats. A Tensor may additionally be
/// recorded on a Tape, in which case gradients flow through it during
/// backward passes. Tensors not on a tape are plain values (constants).
///
/// Row vectors are 1xC tensors, scalars are 1x1. Operations never mutate
/// their inputs.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("tensor data length does not match shape");
    }
  }

  static Tensor row(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor(1, n, std::move(values));
  }
  static Tensor scalar(double v) { return Tensor(1, 1, {v}); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  std::vector<std::size_t> shape() const { return {rows_, cols_}; }

  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  /// Value of a 1x1 tensor.
  double value() const {
    if (size() != 1) throw DimensionError("value() requires a 1x1 tensor");
    return data_[0];
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool on_tape() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int node() const { return node_; }

 private:
  friend class Tape;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

/// Reverse-mode gradient tape. Operations append one backward rule each as
/// they execute; backward() replays the rules in exact reverse order of
/// recording. Gradient buffers are keyed by node id (tensor identity on this
/// tape), so tensors that never reach the loss keep zero gradients.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a differentiable leaf; returns a copy of `t` recorded on this
  /// tape. Gradients w.r.t. leaves are readable after backward().
  Tensor leaf(const Tensor& t);

  /// Runs the backward pass from a scalar recorded on this tape.
  void backward(const Tensor& loss);

  /// Gradient buffer of a tensor on this tape (valid after backward()).
  const std::vector<double>& grad(const Tensor& t) const;
  Tensor grad_tensor(const Tensor& t) const;

  // Recording surface used by the operation library. add_node allocates a
  // gradient slot for an op output, bind marks a tensor as that slot's value,
  // and record appends the op's backward rule.
  int add_node(std::size_t rows, std::size_t cols);
  static void bind(Tensor& t, Tape* tape, int node) {
    t.tape_ = tape;
    t.node_ = node;
  }
  void record(std::function<void(Tape&)> backprop);
  std::vector<double>& grad_buffer(int node) { return slots_[node].grad; }

  std::size_t num_nodes() const { return slots_.size(); }
  std::size_t num_ops() const { return ops_.size(); }

 private:
  struct Slot {
    std::size_t rows, cols;
    std::vector<double> grad;
  };
  std::vector<Slot> slots_;
  std::vector<std::function<void(Tape&)>> ops_;
};

enum class Activation { kLinear, kRelu, kSigmoid };

// ---- Elementwise and binary ops (shapes must match exactly) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// Elementwise min; gradient follows the smaller operand (ties go to `a`).
Tensor minimum(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor cosine(const Tensor& a);
Tensor sine(const Tensor& a);
Tensor square(const Tensor& a);
/// Elementwise sqrt; inputs must be non-negative.
Tensor sqrt_elem(const Tensor& a);
/// Smooth-L1 (huber) with knee `delta`: 0.5 x^2/delta inside, |x| - delta/2 outside.
Tensor huber(const Tensor& a, double delta);
Tensor scale(const Tensor& a, double c);
Tensor offset(const Tensor& a, double c);

// ---- Linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);
/// One shared affine layer applied to every row: act(x * w + b).
Tensor shared_mlp(const Tensor& x, const Tensor& w, const Tensor& b,
                  Activation act);

// ---- Reductions ----
/// Per-channel max over rows -> 1xC. Ties resolve to the lowest row index;
/// backward routes each channel's gradient to its argmax row only.
Tensor max_rows(const Tensor& a, std::vector<std::size_t>* argmax = nullptr);
/// Rows must be k*seg_len; per-channel max within each length-seg_len block.
Tensor segment_max_rows(const Tensor& a, std::size_t seg_len,
                        std::vector<std::size_t>* argmax = nullptr);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
/// Per-row sum -> Nx1.
Tensor sum_cols(const Tensor& a);

// ---- Structure ----
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1);
Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& idx);
Tensor broadcast_rows(const Tensor& a, std::size_t n);
/// Fixed linear combination of rows: out[m] = sum_j w[m][j] * a[idx[m][j]].
Tensor interpolate_rows(const Tensor& a,
                        const std::vector<std::array<std::size_t, 3>>& idx,
                        const std::vector<std::array<double, 3>>& w);

// ---- Losses ----
/// Mean softmax cross-entropy over rows; labels are class column indices.
Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels);
/// Mean elementwise smooth-L1 between prediction and target.
Tensor smooth_l1(const Tensor& pred, const Tensor& target, double delta);

/// Row-wise softmax as plain values (no gradient).
std::vector<double> softmax_row_values(const Tensor& logits, std::size_t row);

// ---- Gradient checking ----
/// f builds a scalar loss from leaves already registered on the given tape.
using GradCheckFn =
    std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

/// Max over all input coordinates of
/// |analytic - central difference| / max(1, |analytic|).
double grad_check(const GradCheckFn& f, const std::vector<Tensor>& inputs,
                  double eps);

// ---- Optimizer ----
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.95;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
};

/// Named trainable tensor plus its Adam moment buffers.
struct Parameter {
  std::string name;
  Tensor value;
  std::vector<double> m, v;  // first/second moments, same length as value

  Parameter() = default;
  Parameter(std::string n, Tensor t)
      : name(std::move(n)),
        value(std::move(t)),
        m(value.size(), 0.0),
        v(value.size(), 0.0) {}
};

/// One bias-corrected Adam update, applied in place. `step` is 1-based.
void adam_step(std::vector<Parameter*>& params,
               const std::vector<std::vector<double>>& grads, std::size_t step,
               const AdamConfig& cfg);

}  // namespace sifr
