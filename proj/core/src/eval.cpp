#include "sifr/eval.hpp"

#include <algorithm>
#include <numeric>

#include "sifr/errors.hpp"

namespace sifr {

MatchResult match_detections(const std::vector<Detection>& dets,
                             const std::vector<Box3D>& gts, const IouFn& iou,
                             double threshold) {
  MatchResult res;
  res.order.resize(dets.size());
  std::iota(res.order.begin(), res.order.end(), std::size_t{0});
  std::stable_sort(res.order.begin(), res.order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return dets[a].score > dets[b].score;
                   });
  res.tp.assign(dets.size(), false);
  res.matched_gt.assign(dets.size(), -1);

  std::vector<bool> claimed(gts.size(), false);
  for (std::size_t rank = 0; rank < res.order.size(); ++rank) {
    const Detection& det = dets[res.order[rank]];
    double best = 0.0;
    int best_gt = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (claimed[g]) continue;
      double overlap = iou(det.box, gts[g]);
      if (overlap > best) {
        best = overlap;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0 && best > threshold) {
      res.tp[rank] = true;
      res.matched_gt[rank] = best_gt;
      claimed[static_cast<std::size_t>(best_gt)] = true;
    }
  }
  return res;
}

double average_precision(const std::vector<bool>& tp_flags, std::size_t num_gt,
                         bool forty_point) {
  if (num_gt == 0) return tp_flags.empty() ? 1.0 : 0.0;

  // Precision/recall after each detection, in score order.
  std::vector<double> precision(tp_flags.size());
  std::vector<double> recall(tp_flags.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < tp_flags.size(); ++i) {
    if (tp_flags[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
  }

  // Interpolated precision at a recall level: best precision at or beyond it.
  auto interp = [&](double r) {
    double best = 0.0;
    for (std::size_t i = 0; i < recall.size(); ++i) {
      if (recall[i] >= r - 1e-12) best = std::max(best, precision[i]);
    }
    return best;
  };

  double sum = 0.0;
  if (forty_point) {
    for (int i = 1; i <= 40; ++i) sum += interp(i / 40.0);
    return sum / 40.0;
  }
  for (int i = 0; i <= 10; ++i) sum += interp(i / 10.0);
  return sum / 11.0;
}

APResult evaluate(const std::vector<SampleDetections>& samples,
                  const std::vector<double>& class_thresholds, Metric metric,
                  bool forty_point) {
  const std::size_t num_classes = class_thresholds.size();
  if (num_classes == 0) throw ConfigError("evaluate: no class thresholds");

  IouFn iou = metric == Metric::k3D ? IouFn(iou_3d) : IouFn(iou_bev);

  // Pooled (score, tp) pairs per class, gathered sample by sample.
  struct Scored {
    double score;
    bool tp;
  };
  std::vector<std::vector<Scored>> pooled(num_classes);
  std::vector<std::size_t> num_gt(num_classes, 0);

  for (const SampleDetections& s : samples) {
    for (const GroundTruthBox& g : s.ground_truths) {
      if (g.class_id >= num_classes)
        throw LabelError("evaluate: ground-truth class id " +
                         std::to_string(g.class_id) + " out of range");
      ++num_gt[g.class_id];
    }
    for (const Detection& d : s.detections) {
      if (d.class_id >= num_classes)
        throw LabelError("evaluate: detection class id " +
                         std::to_string(d.class_id) + " out of range");
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
      std::vector<Detection> dets;
      std::vector<Box3D> gts;
      for (const Detection& d : s.detections)
        if (d.class_id == c) dets.push_back(d);
      for (const GroundTruthBox& g : s.ground_truths)
        if (g.class_id == c) gts.push_back(g.box);
      if (dets.empty()) continue;
      MatchResult m = match_detections(dets, gts, iou, class_thresholds[c]);
      for (std::size_t rank = 0; rank < m.order.size(); ++rank) {
        pooled[c].push_back({dets[m.order[rank]].score, m.tp[rank]});
      }
    }
  }

  APResult res;
  res.per_class_ap.resize(num_classes);
  res.num_gt = num_gt;
  res.num_det.resize(num_classes);
  double total = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    // Stable sort keeps discovery order among equal scores.
    std::stable_sort(
        pooled[c].begin(), pooled[c].end(),
        [](const Scored& a, const Scored& b) { return a.score > b.score; });
    std::vector<bool> flags(pooled[c].size());
    for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = pooled[c][i].tp;
    res.num_det[c] = flags.size();
    res.per_class_ap[c] = average_precision(flags, num_gt[c], forty_point);
    total += res.per_class_ap[c];
  }
  res.mean_ap = total / static_cast<double>(num_classes);
  return res;
}

std::vector<double> kitti_thresholds() { return {0.7, 0.5, 0.5}; }

std::vector<double> sunrgbd_thresholds(std::size_t num_classes) {
  return std::vector<double>(num_classes, 0.25);
}

}  // namespace sifr
