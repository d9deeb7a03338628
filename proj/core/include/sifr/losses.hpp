#pragma once

#include <array>
#include <vector>

#include "sifr/geometry.hpp"
#include "sifr/networks.hpp"
#include "sifr/tensor.hpp"

namespace sifr {

struct LossWeights {
  double lambda = 1.0;  // box-estimation group
  double gamma = 10.0;  // corner term inside the group
};

/// Indicator over the (size template, heading bin) grid with exactly one 1
/// at the ground-truth pair.
struct BinMask {
  std::size_t ns = 0;
  std::size_t nh = 0;
  std::size_t size_template = 0;
  std::size_t heading_bin = 0;

  Tensor matrix() const;  // ns x nh, single 1
};

struct LossBreakdown {
  double seg = 0.0, tnet_center = 0.0, center_reg = 0.0, angle_cls = 0.0,
         angle_reg = 0.0, size_cls = 0.0, size_reg = 0.0, corner = 0.0,
         total = 0.0;
};

/// Mean per-point cross-entropy; labels must be 0/1.
Tensor seg_loss(const Tensor& logits, const std::vector<int>& labels);

/// Smooth-L1 of the Euclidean distance between a predicted center (1x3) and
/// the ground truth.
Tensor center_loss(const Tensor& pred_center, const Point3& gt_center,
                   double delta = 1.0);

struct CenterLosses {
  Tensor tnet;  // on the T-Net center estimate
  Tensor reg;   // on the final composed center
};

CenterLosses center_losses(const Tensor& tnet_center,
                           const Tensor& final_center, const Point3& gt_center,
                           double delta = 1.0);

/// (1/B) sum_mn M_mn (2 - 2cos(theta_mn - theta*_mn)) over the bin grid.
/// theta_pred/theta_gt are ns x nh; only the masked entry contributes.
Tensor angle_reg_loss(const Tensor& theta_pred, const Tensor& theta_gt,
                      const BinMask& mask, double batch_size);

/// Reconstructed angle per heading bin: bin center + predicted residual
/// (1 x nh), for building the angle_reg_loss prediction matrix.
Tensor reconstructed_angles(const Tensor& heading_residuals,
                            const ClassTemplates& tpl);

/// Phase-1 baseline: smooth-L1 on the gt-bin residual, normalized by the
/// half bin width so the in-range target spans about [-1, 1].
Tensor naive_angle_loss(const Tensor& heading_residuals, std::size_t gt_bin,
                        double gt_residual, std::size_t nh);

Tensor angle_cls_loss(const Tensor& scores, std::size_t gt_bin);
Tensor size_cls_loss(const Tensor& scores, std::size_t gt_template);

/// Smooth-L1 on the masked template's normalized residual row (ns x 3),
/// averaged over the three dimensions.
Tensor size_reg_loss(const Tensor& residuals,
                     const std::array<double, 3>& gt_residual,
                     const BinMask& mask, double delta = 1.0);

/// Smooth-L1 of the flip-min mean corner distance (plain value).
double corner_loss(const Box3D& pred, const Box3D& gt, double delta = 1.0);

/// Differentiable corner loss: predicted box given as center (1x3),
/// size (1x3, h/w/l order) and heading (1x1) on a tape.
Tensor corner_loss_graph(const Tensor& center, const Tensor& size,
                         const Tensor& theta, const Box3D& gt,
                         double delta = 1.0);

struct TotalLossInputs {
  Tensor seg, tnet_center, center_reg, angle_cls, angle_reg, size_cls,
      size_reg, corner;  // 1x1 each, on one tape
};

/// total = seg + tnet + lambda*(center_reg + angle_cls + angle_reg +
/// size_cls + size_reg + gamma*corner). Fills `out` from the part values.
Tensor total_loss(const TotalLossInputs& parts, const LossWeights& w,
                  LossBreakdown* out = nullptr);

}  // namespace sifr
