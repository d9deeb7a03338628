#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sifr/geometry.hpp"
#include "sifr/tensor.hpp"

namespace sifr {

// Width of the synthetic image-feature vector carried with every sample.
inline constexpr std::size_t kImageFeatureDim = 64;

/// One frustum crop. Points, labels and the box live in the frustum-normal
/// frame: depth along +x, lateral +y, up +z. frustum_angle is the world
/// azimuth of the frustum axis, kept so detections can be rotated back out
/// (see from_frustum_frame).
struct FrustumSample {
  Tensor points;         // N x 7: xyz, rgb, intensity
  Tensor one_hot;        // 1 x K, exactly one 1.0
  Tensor image_feature;  // 1 x kImageFeatureDim
  std::vector<int> seg_labels;  // N entries, 0/1
  Box3D gt_box;
  double frustum_angle = 0.0;

  std::size_t class_id() const;  // argmax of one_hot
};

enum class HeadingModel {
  kUniform,    // theta uniform over (-pi, pi]
  kAntipodal,  // theta clustered around the +/-pi seam
};

struct SyntheticClassSpec {
  std::string name;
  std::array<double, 3> mean_size;  // h, w, l
  std::array<double, 3> size_sigma;
  std::array<double, 3> color;  // rgb mean
  double intensity = 0.5;
};

/// Three stand-in classes with well-separated size and color distributions.
std::vector<SyntheticClassSpec> default_synthetic_classes();

struct SyntheticConfig {
  std::vector<SyntheticClassSpec> classes = default_synthetic_classes();
  std::size_t points_per_sample = 512;  // N, at least 8
  double clutter_fraction = 0.25;       // in [0, 1)
  double depth_min = 8.0;
  double depth_max = 16.0;
  double lateral_sigma = 0.6;   // box-center jitter across the frustum
  double vertical_sigma = 0.25;
  double front_face_boost = 0.35;  // extra surface mass on the heading face
  HeadingModel heading = HeadingModel::kUniform;
  double heading_sigma = 0.3;  // spread around the seam in antipodal mode
  std::uint64_t seed = 1;      // base seed; sample i uses seed + i
};

/// Draws a box from the class distribution inside a synthetic frustum, covers
/// it with surface points (strictly inside by a small inset) and fills the
/// remainder with clutter kept strictly outside, so labels survive the f32
/// quantization applied to everything stored in 32 bits.
FrustumSample generate_sample(const SyntheticConfig& cfg, std::size_t class_id,
                              std::mt19937_64& rng);

/// Checks every FrustumSample invariant (shapes, value ranges, one-hot, and
/// labels against an independent containment test with 1e-9 tolerance).
void validate_sample(const FrustumSample& s);

/// Mirror across the frustum's vertical center plane: lateral coordinates and
/// box heading negate, labels stay put.
FrustumSample augment_flip(const FrustumSample& s);

/// Shift points and box together along the depth axis (+x here) by a uniform
/// draw from [-max_shift, +max_shift].
FrustumSample augment_zshift(const FrustumSample& s, double max_shift,
                             std::mt19937_64& rng);

/// Keeps a random subset of n points (labels follow; original order kept).
/// n must be in [1, N].
FrustumSample subsample_points(const FrustumSample& s, std::size_t n,
                               std::mt19937_64& rng);

/// Binary sample format, little-endian: "FRUS", u16 version, u32 N, u16 K,
/// f32 arrays (points, one_hot, image_feature, seg_labels), then the box
/// 7-tuple and frustum_angle as f64. Read rejects bad magic, version skew,
/// truncation and trailing bytes with the offending byte offset.
void write_sample(const std::string& path, const FrustumSample& s);
FrustumSample read_sample(const std::string& path);

struct ManifestEntry {
  std::string path;  // relative to the dataset directory
  std::size_t class_id = 0;
  std::string split;  // "train" or "eval"
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> entries;
};

/// Manifest lives at <dir>/manifest.json and is written last (via a rename),
/// so its presence marks a complete dataset.
void write_manifest(const std::string& dir, const DatasetManifest& m);
DatasetManifest read_manifest(const std::string& dir);

/// Reads every sample of the manifest tagged with `split`, in manifest order.
std::vector<FrustumSample> load_split(const std::string& dir,
                                      const DatasetManifest& m,
                                      const std::string& split);

}  // namespace sifr
