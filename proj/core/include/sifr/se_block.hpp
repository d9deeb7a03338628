#pragma once

#include "sifr/pointops.hpp"
#include "sifr/tensor.hpp"

namespace sifr {

/// Squeeze-excitation bottleneck. Row-vector convention: the excitation is
/// Sigmoid(Relu(C_sq * w1 + b1) * w2 + b2), with w1: c x c/r and
/// w2: c/r x c. Biases are an implementation choice (initialized to zero by
/// the networks that own them).
struct SEParams {
  Tensor w1, b1;
  Tensor w2, b2;
  std::size_t r = 4;
};

/// Stage outputs kept for inspection and tests.
struct SEIntermediates {
  Tensor x;      // c_ex: the conv output being reweighted
  Tensor c_sq;   // 1xc squeezed descriptor
  Tensor scale;  // 1xc, strictly inside (0,1)
  Tensor x_se;   // Mxc reweighted features
  Tensor f_se;   // Mxc block output
};

/// Per-channel max over the M interest points -> 1xc.
Tensor squeeze(const Tensor& x);

/// Channel gate from the squeezed descriptor -> 1xc in (0,1).
Tensor excite(const Tensor& c_sq, const SEParams& p);

/// Multiplies column l of c_ex by scale[l].
Tensor scale_apply(const Tensor& scale, const Tensor& c_ex);

/// Residual bypass: f_se = x_se + x_star (shapes must match).
Tensor residual_se(const Tensor& x_se, const Tensor& x_star);

/// Full block: x = conv(x_star); f_se = excite(squeeze(x)) ⊙ x + x_star.
/// conv3 must preserve the channel count so the residual sum is well-typed.
Tensor se_forward(const Tensor& x_star, const SharedMLPParams& conv3,
                  const SEParams& se, SEIntermediates* inter = nullptr);

}  // namespace sifr
