#pragma once

#include <cstdint>
#include <vector>

#include "sifr/tensor.hpp"

namespace sifr {

/// A point cloud with per-point features. coords are plain values (Nx3);
/// features (NxC, C may be 0) can live on a tape so gradients flow through
/// feature space only.
struct PointSet {
  Tensor coords;
  Tensor features;
};

/// Stack of shared affine layers applied per row, relu after each.
struct SharedMLPParams {
  std::vector<Tensor> w;  // layer i: C_in x C_out
  std::vector<Tensor> b;  // layer i: 1 x C_out
};

Tensor run_shared_mlp(const Tensor& x, const SharedMLPParams& p);

struct SAConfig {
  std::size_t num_centroids = 0;
  double radius = 0.0;
  std::size_t max_group_size = 1;
  bool global = false;
  std::uint64_t seed = 0;  // picks the first FPS index
};

/// Greedy max-min farthest point sampling. The first index is seed % N; each
/// following pick maximizes the distance to the chosen set (ties to the
/// lowest index). All k indices are distinct.
std::vector<std::size_t> farthest_point_sample(const Tensor& coords,
                                               std::size_t k,
                                               std::uint64_t seed);

/// Neighbor indices within `radius` of each center, nearest-first. Groups are
/// always exactly max_group_size long: short groups are padded by repeating
/// the nearest in-radius index, and a center with nothing in radius repeats
/// the globally nearest point. Downstream pooling is max-based, so the
/// duplicates are inert.
std::vector<std::vector<std::size_t>> ball_query(const Tensor& coords,
                                                 const Tensor& centers,
                                                 double radius,
                                                 std::size_t max_group_size);

/// Set-abstraction layer: sample centroids (FPS), group (ball query), embed
/// center-relative coordinates concatenated with group features through a
/// shared MLP, then max-pool per group. With cfg.global the whole cloud forms
/// one group centered on the origin.
PointSet sa_module(const PointSet& ps, const SAConfig& cfg,
                   const SharedMLPParams& params);

/// Feature propagation: 3-nearest inverse-distance interpolation of coarse
/// features onto fine_coords (weights sum to 1; an exact-coincident coarse
/// point takes weight 1), concatenated with skip_features, then a shared MLP.
Tensor fp_module(const PointSet& coarse, const Tensor& fine_coords,
                 const Tensor& skip_features, const SharedMLPParams& params);

/// For each of the 8 sign-octants around coords[center_index], the nearest
/// point strictly inside that octant (coincident points never qualify; points
/// on a separating plane count toward the negative side; ties to the lowest
/// index). Empty octants fall back to center_index. Octant o is encoded as
/// bx*4 + by*2 + bz with bit 1 = positive side.
std::array<std::size_t, 8> octant_select(const Tensor& coords,
                                         std::size_t center_index);

/// Orientation-encoding parameters: three affine stages collapsing the
/// x-pair, y-pair and z-pair of the 2x2x2 octant stack, relu after each.
struct PointSIFTParams {
  Tensor w1, b1;  // 2C    x C1
  Tensor w2, b2;  // 2C1   x C2
  Tensor w3, b3;  // 2C2   x C3
};

/// Per point: gather the 8 octant neighbors' features and fold the 2x2x2
/// arrangement along x, then y, then z. Output keeps the input row order.
PointSet pointsift_module(const PointSet& ps, const PointSIFTParams& params);

}  // namespace sifr
