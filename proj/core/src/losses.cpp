#include "sifr/losses.hpp"

#include <cmath>

namespace sifr {

namespace {

double huber_value(double x, double delta) {
  const double ax = std::abs(x);
  return ax <= delta ? 0.5 * x * x / delta : ax - 0.5 * delta;
}

}  // namespace

Tensor BinMask::matrix() const {
  if (size_template >= ns || heading_bin >= nh) {
    throw LabelError("bin mask indices out of range");
  }
  Tensor m(ns, nh);
  m.at(size_template, heading_bin) = 1.0;
  return m;
}

Tensor seg_loss(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.cols() != 2) throw DimensionError("seg_loss: logits must be Nx2");
  for (int l : labels) {
    if (l != 0 && l != 1) {
      throw LabelError("seg_loss: labels must be 0 or 1");
    }
  }
  return softmax_cross_entropy(logits, labels);
}

Tensor center_loss(const Tensor& pred_center, const Point3& gt_center,
                   double delta) {
  if (pred_center.rows() != 1 || pred_center.cols() != 3) {
    throw DimensionError("center_loss: prediction must be 1x3");
  }
  Tensor gt(1, 3, {gt_center[0], gt_center[1], gt_center[2]});
  Tensor dist = sqrt_elem(sum_cols(square(sub(pred_center, gt))));
  return huber(dist, delta);
}

CenterLosses center_losses(const Tensor& tnet_center,
                           const Tensor& final_center, const Point3& gt_center,
                           double delta) {
  return {center_loss(tnet_center, gt_center, delta),
          center_loss(final_center, gt_center, delta)};
}

Tensor angle_reg_loss(const Tensor& theta_pred, const Tensor& theta_gt,
                      const BinMask& mask, double batch_size) {
  if (theta_pred.rows() != mask.ns || theta_pred.cols() != mask.nh ||
      theta_gt.rows() != mask.ns || theta_gt.cols() != mask.nh) {
    throw DimensionError("angle_reg_loss: grid shapes must be ns x nh");
  }
  if (!(batch_size > 0.0)) {
    throw InvalidInputError("angle_reg_loss: batch size must be positive");
  }
  // 2 - 2cos(delta) at every entry, then the mask keeps the gt one.
  Tensor dist =
      offset(scale(cosine(sub(theta_pred, theta_gt)), -2.0), 2.0);
  return scale(sum_all(mul(mask.matrix(), dist)), 1.0 / batch_size);
}

Tensor reconstructed_angles(const Tensor& heading_residuals,
                            const ClassTemplates& tpl) {
  if (heading_residuals.rows() != 1 || heading_residuals.cols() != tpl.nh) {
    throw DimensionError("reconstructed_angles: residuals must be 1 x nh");
  }
  Tensor centers(1, tpl.nh);
  for (std::size_t b = 0; b < tpl.nh; ++b) centers.at(0, b) = tpl.bin_center(b);
  return add(centers, heading_residuals);
}

Tensor naive_angle_loss(const Tensor& heading_residuals, std::size_t gt_bin,
                        double gt_residual, std::size_t nh) {
  if (heading_residuals.rows() != 1 || heading_residuals.cols() != nh) {
    throw DimensionError("naive_angle_loss: residuals must be 1 x nh");
  }
  if (gt_bin >= nh) throw LabelError("naive_angle_loss: bin out of range");
  const double k = static_cast<double>(nh) / kPi;  // 1 / half bin width
  Tensor pred = slice_cols(heading_residuals, gt_bin, gt_bin + 1);
  Tensor target = Tensor::scalar(gt_residual * k);
  return smooth_l1(scale(pred, k), target, 1.0);
}

Tensor angle_cls_loss(const Tensor& scores, std::size_t gt_bin) {
  if (scores.rows() != 1) {
    throw DimensionError("angle_cls_loss: scores must be one row");
  }
  return softmax_cross_entropy(scores, {static_cast<int>(gt_bin)});
}

Tensor size_cls_loss(const Tensor& scores, std::size_t gt_template) {
  if (scores.rows() != 1) {
    throw DimensionError("size_cls_loss: scores must be one row");
  }
  return softmax_cross_entropy(scores, {static_cast<int>(gt_template)});
}

Tensor size_reg_loss(const Tensor& residuals,
                     const std::array<double, 3>& gt_residual,
                     const BinMask& mask, double delta) {
  if (residuals.rows() != mask.ns || residuals.cols() != 3) {
    throw DimensionError("size_reg_loss: residuals must be ns x 3");
  }
  if (mask.size_template >= mask.ns) {
    throw LabelError("size_reg_loss: masked template out of range");
  }
  Tensor sel = gather_rows(residuals, {mask.size_template});
  Tensor gt(1, 3, {gt_residual[0], gt_residual[1], gt_residual[2]});
  return smooth_l1(sel, gt, delta);
}

double corner_loss(const Box3D& pred, const Box3D& gt, double delta) {
  return huber_value(corner_distance(pred, gt), delta);
}

namespace {

// Corners of (center, size, theta) as a differentiable 8x3 stack, using the
// same ordering as geometry::box_corners.
Tensor corner_stack(const Tensor& center, const Tensor& size,
                    const Tensor& cos_t, const Tensor& sin_t) {
  static constexpr double kLx[4] = {1.0, -1.0, -1.0, 1.0};
  static constexpr double kLy[4] = {1.0, 1.0, -1.0, -1.0};
  Tensor cx = slice_cols(center, 0, 1);
  Tensor cy = slice_cols(center, 1, 2);
  Tensor cz = slice_cols(center, 2, 3);
  Tensor hh = scale(slice_cols(size, 0, 1), 0.5);
  Tensor hw = scale(slice_cols(size, 1, 2), 0.5);
  Tensor hl = scale(slice_cols(size, 2, 3), 0.5);
  Tensor c_hl = mul(cos_t, hl), s_hw = mul(sin_t, hw);
  Tensor s_hl = mul(sin_t, hl), c_hw = mul(cos_t, hw);
  Tensor rows;
  for (int k = 0; k < 8; ++k) {
    const int f = k % 4;
    Tensor x = add(cx, sub(scale(c_hl, kLx[f]), scale(s_hw, kLy[f])));
    Tensor y = add(cy, add(scale(s_hl, kLx[f]), scale(c_hw, kLy[f])));
    Tensor z = add(cz, scale(hh, k < 4 ? 1.0 : -1.0));
    Tensor row = concat_cols(concat_cols(x, y), z);
    rows = k == 0 ? row : concat_rows(rows, row);
  }
  return rows;
}

Tensor mean_corner_dist(const Tensor& pred_corners, const Corners& gt) {
  Tensor g(8, 3);
  for (int k = 0; k < 8; ++k) {
    for (int d = 0; d < 3; ++d) g.at(k, d) = gt[k][d];
  }
  Tensor d = sqrt_elem(sum_cols(square(sub(pred_corners, g))));
  return mean_all(d);
}

}  // namespace

Tensor corner_loss_graph(const Tensor& center, const Tensor& size,
                         const Tensor& theta, const Box3D& gt, double delta) {
  if (center.rows() != 1 || center.cols() != 3 || size.rows() != 1 ||
      size.cols() != 3 || theta.size() != 1) {
    throw DimensionError("corner_loss_graph: need 1x3 center/size, scalar angle");
  }
  Tensor cos_t = cosine(theta);
  Tensor sin_t = sine(theta);
  Tensor pred = corner_stack(center, size, cos_t, sin_t);
  Box3D flipped = gt;
  flipped.theta = wrap_angle(gt.theta + kPi);
  Tensor d_direct = mean_corner_dist(pred, box_corners(gt));
  Tensor d_flip = mean_corner_dist(pred, box_corners(flipped));
  return huber(minimum(d_direct, d_flip), delta);
}

Tensor total_loss(const TotalLossInputs& parts, const LossWeights& w,
                  LossBreakdown* out) {
  if (w.lambda < 0.0 || w.gamma < 0.0) {
    throw InvalidInputError("total_loss: weights must be non-negative");
  }
  Tensor box_group = add(
      add(add(parts.center_reg, parts.angle_cls), parts.angle_reg),
      add(add(parts.size_cls, parts.size_reg), scale(parts.corner, w.gamma)));
  Tensor total = add(add(parts.seg, parts.tnet_center),
                     scale(box_group, w.lambda));
  if (out) {
    out->seg = parts.seg.value();
    out->tnet_center = parts.tnet_center.value();
    out->center_reg = parts.center_reg.value();
    out->angle_cls = parts.angle_cls.value();
    out->angle_reg = parts.angle_reg.value();
    out->size_cls = parts.size_cls.value();
    out->size_reg = parts.size_reg.value();
    out->corner = parts.corner.value();
    out->total = total.value();
  }
  return total;
}

}  // namespace sifr
