#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sifr/config.hpp"
#include "sifr/data.hpp"
#include "sifr/eval.hpp"
#include "sifr/losses.hpp"
#include "sifr/networks.hpp"

namespace sifr {

/// The three sub-networks over one shared parameter store, plus the box
/// discretization derived from the configured class means.
struct Pipeline {
  RunConfig cfg;
  ParamStore store;
  PointUNet unet;
  TNet tnet;
  PointSENet senet;
  ClassTemplates templates;

  explicit Pipeline(const RunConfig& cfg);
  std::vector<Parameter*> params() const { return store.pointers(); }
};

/// One sample pushed through segment -> mask -> translate -> box head.
/// Tensors sit on whatever tape the binding carries (none for inference).
struct ForwardResult {
  SegmentationOutput seg;
  MaskSelection sel;
  Tensor tnet_delta;   // 1 x 3
  Tensor tnet_center;  // 1 x 3, centroid - delta
  BoxPrediction pred;
  Tensor final_center;  // 1 x 3, tnet_center + predicted residual
  Box3D decoded;        // frustum frame
  double score = 0.0;   // seg confidence x size confidence x heading confidence
};

ForwardResult forward_sample(const Pipeline& p, const TapeBinding& bind,
                             const FrustumSample& s);

/// Builds every term of the joint objective for one sample. The flag picks
/// the angle-regression definition (false: normalized smooth-L1 on the
/// gt-bin residual; true: the 2-2cos masked-bin form).
TotalLossInputs build_losses(const Pipeline& p, const ForwardResult& f,
                             const FrustumSample& s, bool fine_tune_angle);

/// Inference on one sample; detection and ground truth rotated back to world
/// coordinates via the stored frustum angle.
SampleDetections detect_sample(const Pipeline& p, const FrustumSample& s);

std::vector<double> resolve_thresholds(const RunConfig& cfg,
                                       std::size_t num_classes);

struct EvalSummary {
  APResult ap3d;
  APResult ap_bev;
  double seg_accuracy = 0.0;      // per-point, 0.5 probability cut
  double mean_angle_error = 0.0;  // mean |wrap(theta_pred - theta_gt)|
  std::size_t num_samples = 0;
};

EvalSummary evaluate_pipeline(const Pipeline& p,
                              const std::vector<FrustumSample>& samples);

struct StepLog {
  std::size_t step = 0;   // 1-based
  std::size_t epoch = 0;  // 0-based
  LossBreakdown mean;     // batch-mean values
};
using StepCallback = std::function<void(const StepLog&)>;

/// Adam over shuffled batches with the configured augmentation. Deterministic
/// given cfg + seed. Throws NumericError naming the step and dumping the
/// breakdown if the total goes non-finite. Returns the number of steps run.
std::size_t train_pipeline(Pipeline& p,
                           const std::vector<FrustumSample>& train,
                           const StepCallback& on_step = {});

// ---------------------------------------------------------------------------
// Gradient checking over live parameters.

struct GradCheckItem {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t coords = 0;  // coordinates compared
};

struct GradCheckReport {
  std::vector<GradCheckItem> items;
  double worst = 0.0;
};

/// Central-difference check of tape gradients against direct parameter
/// perturbation, one item per sub-network and per loss term (plus the SE
/// block in isolation). Parameters flowing through discrete selections
/// (masking, sampling) are only checked via terms that do not cross them.
/// inject_fault corrupts one analytic gradient to prove the check can fail.
GradCheckReport gradcheck_pipeline(const RunConfig& cfg, double eps = 1e-6,
                                   bool inject_fault = false);

}  // namespace sifr
