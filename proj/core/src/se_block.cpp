#include "sifr/se_block.hpp"

namespace sifr {

namespace {

void check_se_shapes(std::size_t c, const SEParams& p) {
  if (p.r == 0 || c % p.r != 0) {
    throw DimensionError("se: reduction rate must divide channel count");
  }
  const std::size_t mid = c / p.r;
  if (p.w1.rows() != c || p.w1.cols() != mid || p.w2.rows() != mid ||
      p.w2.cols() != c) {
    throw DimensionError("se: weight shapes do not match channel count");
  }
}

}  // namespace

Tensor squeeze(const Tensor& x) {
  if (x.rows() == 0) throw EmptyInputError("squeeze: no interest points");
  return max_rows(x);
}

Tensor excite(const Tensor& c_sq, const SEParams& p) {
  if (c_sq.rows() != 1) throw DimensionError("excite: c_sq must be 1xc");
  check_se_shapes(c_sq.cols(), p);
  Tensor mid = shared_mlp(c_sq, p.w1, p.b1, Activation::kRelu);
  return shared_mlp(mid, p.w2, p.b2, Activation::kSigmoid);
}

Tensor scale_apply(const Tensor& scale, const Tensor& c_ex) {
  if (scale.rows() != 1 || scale.cols() != c_ex.cols()) {
    throw DimensionError("scale_apply: channel counts differ");
  }
  return mul(broadcast_rows(scale, c_ex.rows()), c_ex);
}

Tensor residual_se(const Tensor& x_se, const Tensor& x_star) {
  if (x_se.rows() != x_star.rows() || x_se.cols() != x_star.cols()) {
    throw DimensionError("residual_se: shapes differ");
  }
  return add(x_se, x_star);
}

Tensor se_forward(const Tensor& x_star, const SharedMLPParams& conv3,
                  const SEParams& se, SEIntermediates* inter) {
  Tensor x = run_shared_mlp(x_star, conv3);
  if (x.cols() != x_star.cols()) {
    throw DimensionError(
        "se_forward: conv must preserve width for the residual sum");
  }
  Tensor c_sq = squeeze(x);
  Tensor sc = excite(c_sq, se);
  Tensor x_se = scale_apply(sc, x);
  Tensor f_se = residual_se(x_se, x_star);
  if (inter) *inter = {x, c_sq, sc, x_se, f_se};
  return f_se;
}

}  // namespace sifr
