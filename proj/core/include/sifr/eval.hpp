#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "sifr/geometry.hpp"

namespace sifr {

struct Detection {
  Box3D box;
  double score = 0.0;
  std::size_t class_id = 0;
};

struct GroundTruthBox {
  Box3D box;
  std::size_t class_id = 0;
};

using IouFn = std::function<double(const Box3D&, const Box3D&)>;

/// Greedy matching in descending score order (ties by input index). Each
/// ground truth is claimed at most once; a detection is a true positive iff
/// its best still-unclaimed IoU is strictly above the threshold.
struct MatchResult {
  std::vector<std::size_t> order;  // detection indices, score-sorted
  std::vector<bool> tp;            // aligned with `order`
  std::vector<int> matched_gt;     // gt index per sorted det, -1 for FP
};

MatchResult match_detections(const std::vector<Detection>& dets,
                             const std::vector<Box3D>& gts, const IouFn& iou,
                             double threshold);

/// Interpolated AP from score-ordered TP flags. 11-point grid by default
/// (recall 0.0..1.0), 40-point (recall 1/40..1.0) behind the flag.
/// num_gt == 0: AP is 0 when any detection exists, 1 when both are empty.
double average_precision(const std::vector<bool>& tp_flags, std::size_t num_gt,
                         bool forty_point = false);

struct SampleDetections {
  std::vector<Detection> detections;
  std::vector<GroundTruthBox> ground_truths;
};

enum class Metric { k3D, kBEV };

struct APResult {
  std::vector<double> per_class_ap;
  std::vector<std::size_t> num_gt;
  std::vector<std::size_t> num_det;
  double mean_ap = 0.0;
};

/// Per-class matching and AP over the whole set; class_thresholds also fixes
/// the number of classes. Matching runs per sample, AP pools detections
/// across samples sorted by score (ties by discovery order).
APResult evaluate(const std::vector<SampleDetections>& samples,
                  const std::vector<double>& class_thresholds, Metric metric,
                  bool forty_point = false);

/// Threshold presets: car-like 0.7, pedestrian-like 0.5, cyclist-like 0.5.
std::vector<double> kitti_thresholds();
/// Indoor preset: 0.25 for every class.
std::vector<double> sunrgbd_thresholds(std::size_t num_classes);

}  // namespace sifr
