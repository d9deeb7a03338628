#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "sifr/geometry.hpp"
#include "sifr/pointops.hpp"
#include "sifr/se_block.hpp"
#include "sifr/tensor.hpp"

namespace sifr {

/// Owns every trainable tensor by name. Networks register their parameters
/// here at construction; the optimizer and checkpoint code walk the store.
class ParamStore {
 public:
  Parameter* add(std::string name, std::size_t rows, std::size_t cols);
  Parameter* find(const std::string& name) const;
  std::vector<Parameter*> pointers() const;
  std::size_t total_values() const;

  /// He-style init for weights (normal, stddev sqrt(2/fan_in)), zero biases
  /// (any name containing ".b"). Deterministic in registration order.
  void init_random(std::uint64_t seed);

 private:
  std::vector<std::unique_ptr<Parameter>> owned_;
  std::unordered_map<std::string, Parameter*> by_name_;
};

/// Snapshot of the store onto one tape: every parameter becomes a leaf, so
/// one backward pass yields gradients for all of them. With tape == nullptr
/// the binding passes parameters through as constants (inference mode).
class TapeBinding {
 public:
  TapeBinding(Tape* tape, const std::vector<Parameter*>& params);
  const Tensor& operator()(const Parameter* p) const;
  /// Gradients aligned with the params vector given at construction.
  std::vector<std::vector<double>> grads() const;

 private:
  Tape* tape_;
  std::vector<Parameter*> order_;
  std::unordered_map<const Parameter*, std::size_t> index_;
  std::vector<Tensor> bound_;
};

/// Checkpoint container: magic "SIFR", version, named parameter list with
/// shapes and little-endian 64-bit floats. load_checkpoint validates that
/// names and shapes match the live store and names the offender if not.
void save_checkpoint(const std::string& path, const ParamStore& store);
void load_checkpoint(const std::string& path, ParamStore& store);

// ---------------------------------------------------------------------------
// Box discretization

/// Per class: NS size templates (h, w, l) spread around the class mean, and
/// NH heading-bin centers uniform over (-pi, pi], shared across classes.
struct ClassTemplates {
  std::size_t num_classes = 0;
  std::size_t ns = 0;
  std::size_t nh = 0;
  std::vector<std::array<double, 3>> sizes;  // [class * ns + t]

  static ClassTemplates from_class_means(
      const std::vector<std::array<double, 3>>& means, std::size_t ns,
      std::size_t nh);

  double bin_center(std::size_t bin) const;
  std::size_t heading_bin(double theta) const;
  const std::array<double, 3>& size_of(std::size_t class_id,
                                       std::size_t t) const;
  std::size_t nearest_template(std::size_t class_id,
                               const std::array<double, 3>& hwl) const;
};

/// Raw box-head output: [center(3) | size scores(NS) | size residuals(3*NS) |
/// heading scores(NH) | heading residuals(NH)], one row.
struct BoxPrediction {
  std::size_t ns = 0;
  std::size_t nh = 0;
  Tensor raw;

  std::size_t dim() const { return 3 + 4 * ns + 2 * nh; }
  std::size_t size_score_off() const { return 3; }
  std::size_t size_res_off() const { return 3 + ns; }
  std::size_t heading_score_off() const { return 3 + 4 * ns; }
  std::size_t heading_res_off() const { return 3 + 4 * ns + nh; }

  std::array<double, 3> center_residual() const;
  std::size_t argmax_size() const;     // ties to the lowest template
  std::size_t argmax_heading() const;  // ties to the lowest bin
  std::array<double, 3> size_residual(std::size_t t) const;
  double heading_residual(std::size_t bin) const;
};

/// center = centroid - tnet_delta + predicted residual; size = argmax
/// template grown by its residual (template * (1 + r)); theta = argmax bin
/// center plus its raw residual, wrapped.
Box3D decode_box(const BoxPrediction& pred, const Point3& mask_centroid,
                 const Point3& tnet_delta, const ClassTemplates& tpl,
                 std::size_t class_id);

/// Builds the raw vector that decode_box maps back onto gt exactly
/// (scores are one-hot at the gt template/bin).
BoxPrediction encode_box(const Box3D& gt, const Point3& mask_centroid,
                         const Point3& tnet_delta, const ClassTemplates& tpl,
                         std::size_t class_id);

/// Ground-truth discretization used by the loss terms.
struct BoxTargets {
  std::size_t size_template = 0;
  std::size_t heading_bin = 0;
  Point3 center{0.0, 0.0, 0.0};
  std::array<double, 3> size_residual{0.0, 0.0, 0.0};  // gt/template - 1
  double heading_residual = 0.0;                       // wrap(theta - bin center)
  double theta = 0.0;
};

BoxTargets make_box_targets(const Box3D& gt, const ClassTemplates& tpl,
                            std::size_t class_id);

// ---------------------------------------------------------------------------
// Point-UNet (segmentation)

struct PointUNetInput {
  Tensor points;         // N x 7: xyz, rgb, intensity
  Tensor one_hot;        // 1 x K, exactly one nonzero entry
  Tensor image_feature;  // 1 x image_feature_dim
};

struct SegmentationOutput {
  Tensor logits;                      // N x 2
  std::vector<double> probabilities;  // positive-class softmax per point
};

struct UNetConfig {
  std::size_t num_classes = 3;
  std::size_t image_feature_dim = 64;
  std::size_t sa1_centroids = 128;
  double sa1_radius = 0.2;
  std::size_t sa1_group = 32;
  std::vector<std::size_t> sa1_mlp{64, 64, 128};
  std::size_t sa2_centroids = 32;
  double sa2_radius = 0.4;
  std::size_t sa2_group = 32;
  std::vector<std::size_t> sa2_mlp{128, 128, 256};
  std::size_t sift_width = 256;
  std::vector<std::size_t> global_mlp{256, 512};
  std::vector<std::size_t> fp_widths{256, 128, 128};  // one layer per stage
  std::size_t head_hidden = 128;
};

class PointUNet {
 public:
  PointUNet(const UNetConfig& cfg, ParamStore& store);
  /// SA1 -> SA2 -> PointSIFT x2 -> global SA -> concat(one-hot, image
  /// feature) -> FP x3 with skips -> two per-point affine layers -> Nx2.
  /// Centroid counts are clamped to the cloud size so sparse inputs work.
  SegmentationOutput forward(const PointUNetInput& in,
                             const TapeBinding& bind) const;

 private:
  UNetConfig cfg_;
  std::vector<Parameter*> sa1_w_, sa1_b_, sa2_w_, sa2_b_;
  struct SiftP {
    Parameter *w1, *b1, *w2, *b2, *w3, *b3;
  } sift1_, sift2_;
  std::vector<Parameter*> glob_w_, glob_b_;
  std::vector<Parameter*> fp1_w_, fp1_b_, fp2_w_, fp2_b_, fp3_w_, fp3_b_;
  Parameter *head_w1_, *head_b1_, *head_w2_, *head_b2_;
  SiftP register_sift(ParamStore& store, const std::string& prefix,
                      std::size_t in_width) const;
  PointSIFTParams bind_sift(const SiftP& p, const TapeBinding& bind) const;
};

/// Interest-point selection: rows with probability > threshold as xyz +
/// intensity, plus their xyz centroid. Falls back to the single
/// highest-probability point when nothing passes, so M >= 1 always.
struct MaskSelection {
  std::vector<std::size_t> indices;
  Tensor interest;  // M x 4 (uncentered xyz, intensity)
  Point3 centroid{0.0, 0.0, 0.0};
};

MaskSelection mask_select(const Tensor& points,
                          const std::vector<double>& probabilities,
                          double threshold = 0.5);

// ---------------------------------------------------------------------------
// T-Net (residual translation)

struct TNetConfig {
  std::vector<std::size_t> sa_mlp{128, 256};
  std::size_t hidden = 128;
};

struct TNetOutput {
  Tensor delta;       // 1 x 3, the predicted negative center
  Tensor translated;  // M x 3, xyz + delta (gradient flows through delta)
};

class TNet {
 public:
  TNet(const TNetConfig& cfg, ParamStore& store);
  /// interest is M x 4, xyz already centered on the mask centroid. The
  /// implied center estimate is centroid - delta.
  TNetOutput forward(const Tensor& interest, const TapeBinding& bind) const;

 private:
  TNetConfig cfg_;
  std::vector<Parameter*> sa_w_, sa_b_;
  Parameter *w1_, *b1_, *w2_, *b2_;
};

// ---------------------------------------------------------------------------
// Point-SENet (box head)

struct SENetConfig {
  std::size_t conv1 = 128;
  std::size_t conv2 = 256;
  std::size_t conv3 = 256;  // SE width c; must equal conv2 for the residual
  std::size_t se_r = 4;
  std::size_t lift = 512;
  std::size_t fc1 = 512;
  std::size_t fc2 = 256;
  std::size_t ns = 8;
  std::size_t nh = 12;
};

class PointSENet {
 public:
  PointSENet(const SENetConfig& cfg, ParamStore& store);
  /// conv x2 -> X*; SE block -> F_SE; lift to high width -> channel max ->
  /// three affine layers -> raw box vector. Uses xyz only.
  BoxPrediction forward(const Tensor& translated, const TapeBinding& bind,
                        SEIntermediates* se_inter = nullptr) const;

 private:
  SENetConfig cfg_;
  std::vector<Parameter*> conv_w_, conv_b_;  // conv1, conv2
  Parameter *conv3_w_, *conv3_b_;
  Parameter *se_w1_, *se_b1_, *se_w2_, *se_b2_;
  Parameter *lift_w_, *lift_b_;
  Parameter *fc1_w_, *fc1_b_, *fc2_w_, *fc2_b_, *fc3_w_, *fc3_b_;
};

}  // namespace sifr
