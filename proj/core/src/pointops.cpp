#include "sifr/pointops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sifr {

namespace {

double dist2(const Tensor& coords, std::size_t i, std::size_t j) {
  const double dx = coords.at(i, 0) - coords.at(j, 0);
  const double dy = coords.at(i, 1) - coords.at(j, 1);
  const double dz = coords.at(i, 2) - coords.at(j, 2);
  return dx * dx + dy * dy + dz * dz;
}

double dist2_to(const Tensor& coords, std::size_t i, const double* c) {
  const double dx = coords.at(i, 0) - c[0];
  const double dy = coords.at(i, 1) - c[1];
  const double dz = coords.at(i, 2) - c[2];
  return dx * dx + dy * dy + dz * dz;
}

void check_coords(const Tensor& coords, const char* op) {
  if (coords.cols() != 3) {
    throw DimensionError(std::string(op) + ": coords must be Nx3");
  }
}

}  // namespace

Tensor run_shared_mlp(const Tensor& x, const SharedMLPParams& p) {
  if (p.w.size() != p.b.size()) {
    throw DimensionError("run_shared_mlp: weight/bias layer count mismatch");
  }
  Tensor h = x;
  for (std::size_t i = 0; i < p.w.size(); ++i) {
    h = shared_mlp(h, p.w[i], p.b[i], Activation::kRelu);
  }
  return h;
}

std::vector<std::size_t> farthest_point_sample(const Tensor& coords,
                                               std::size_t k,
                                               std::uint64_t seed) {
  check_coords(coords, "farthest_point_sample");
  const std::size_t n = coords.rows();
  if (n == 0) throw EmptyInputError("farthest_point_sample: empty cloud");
  if (k < 1 || k > n) {
    throw CountError("farthest_point_sample: k=" + std::to_string(k) +
                     " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<std::size_t> picked;
  picked.reserve(k);
  picked.push_back(static_cast<std::size_t>(seed % n));
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  while (picked.size() < k) {
    const std::size_t last = picked.back();
    std::size_t best = 0;
    double best_d2 = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      min_d2[i] = std::min(min_d2[i], dist2(coords, i, last));
      if (min_d2[i] > best_d2) {  // ties keep the lowest index
        best_d2 = min_d2[i];
        best = i;
      }
    }
    picked.push_back(best);
  }
  return picked;
}

std::vector<std::vector<std::size_t>> ball_query(const Tensor& coords,
                                                 const Tensor& centers,
                                                 double radius,
                                                 std::size_t max_group_size) {
  check_coords(coords, "ball_query");
  check_coords(centers, "ball_query");
  if (coords.rows() == 0) throw EmptyInputError("ball_query: empty cloud");
  if (!(radius > 0.0)) throw InvalidInputError("ball_query: radius must be > 0");
  if (max_group_size < 1) {
    throw InvalidInputError("ball_query: max_group_size must be >= 1");
  }
  const std::size_t n = coords.rows();
  const double r2 = radius * radius;
  std::vector<std::vector<std::size_t>> groups(centers.rows());
  std::vector<std::pair<double, std::size_t>> hits;
  for (std::size_t g = 0; g < centers.rows(); ++g) {
    const double c[3] = {centers.at(g, 0), centers.at(g, 1), centers.at(g, 2)};
    hits.clear();
    double nearest_d2 = std::numeric_limits<double>::infinity();
    std::size_t nearest = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d2 = dist2_to(coords, i, c);
      if (d2 <= r2) hits.emplace_back(d2, i);
      if (d2 < nearest_d2) {
        nearest_d2 = d2;
        nearest = i;
      }
    }
    std::sort(hits.begin(), hits.end());
    auto& grp = groups[g];
    grp.reserve(max_group_size);
    for (std::size_t i = 0; i < hits.size() && i < max_group_size; ++i) {
      grp.push_back(hits[i].second);
    }
    if (grp.empty()) grp.push_back(nearest);
    while (grp.size() < max_group_size) grp.push_back(grp.front());
  }
  return groups;
}

PointSet sa_module(const PointSet& ps, const SAConfig& cfg,
                   const SharedMLPParams& params) {
  check_coords(ps.coords, "sa_module");
  if (ps.features.rows() != ps.coords.rows()) {
    throw DimensionError("sa_module: feature/coord row count mismatch");
  }
  const std::size_t n = ps.coords.rows();
  if (n == 0) throw EmptyInputError("sa_module: empty cloud");

  if (cfg.global) {
    // One group of everything, centered on the origin (inputs arrive
    // centered upstream).
    Tensor x = concat_cols(ps.coords, ps.features);
    Tensor pooled = max_rows(run_shared_mlp(x, params));
    return {Tensor(1, 3), pooled};
  }

  const auto centroid_idx =
      farthest_point_sample(ps.coords, cfg.num_centroids, cfg.seed);
  const std::size_t k = centroid_idx.size();
  Tensor centers(k, 3);
  for (std::size_t g = 0; g < k; ++g) {
    for (int d = 0; d < 3; ++d) {
      centers.at(g, d) = ps.coords.at(centroid_idx[g], d);
    }
  }
  const auto groups =
      ball_query(ps.coords, centers, cfg.radius, cfg.max_group_size);

  const std::size_t gs = cfg.max_group_size;
  std::vector<std::size_t> flat;
  flat.reserve(k * gs);
  Tensor rel(k * gs, 3);
  for (std::size_t g = 0; g < k; ++g) {
    for (std::size_t j = 0; j < gs; ++j) {
      const std::size_t p = groups[g][j];
      flat.push_back(p);
      for (int d = 0; d < 3; ++d) {
        rel.at(g * gs + j, d) = ps.coords.at(p, d) - centers.at(g, d);
      }
    }
  }
  Tensor x = concat_cols(rel, gather_rows(ps.features, flat));
  Tensor pooled = segment_max_rows(run_shared_mlp(x, params), gs);
  return {centers, pooled};
}

Tensor fp_module(const PointSet& coarse, const Tensor& fine_coords,
                 const Tensor& skip_features, const SharedMLPParams& params) {
  check_coords(coarse.coords, "fp_module");
  check_coords(fine_coords, "fp_module");
  const std::size_t nc = coarse.coords.rows();
  if (nc == 0) throw EmptyInputError("fp_module: empty coarse set");
  const std::size_t m = fine_coords.rows();
  if (skip_features.rows() != m) {
    throw DimensionError("fp_module: skip feature row count mismatch");
  }

  std::vector<std::array<std::size_t, 3>> idx(m, {0, 0, 0});
  std::vector<std::array<double, 3>> w(m, {0.0, 0.0, 0.0});
  std::vector<std::pair<double, std::size_t>> near;
  for (std::size_t i = 0; i < m; ++i) {
    const double c[3] = {fine_coords.at(i, 0), fine_coords.at(i, 1),
                         fine_coords.at(i, 2)};
    near.clear();
    for (std::size_t j = 0; j < nc; ++j) near.emplace_back(dist2_to(coarse.coords, j, c), j);
    std::sort(near.begin(), near.end());
    const std::size_t used = std::min<std::size_t>(3, nc);
    if (near[0].first == 0.0) {
      // Coincident coarse point: its feature is copied through untouched.
      idx[i] = {near[0].second, near[0].second, near[0].second};
      w[i] = {1.0, 0.0, 0.0};
      continue;
    }
    double wsum = 0.0;
    for (std::size_t t = 0; t < used; ++t) {
      idx[i][t] = near[t].second;
      w[i][t] = 1.0 / std::sqrt(near[t].first);
      wsum += w[i][t];
    }
    for (std::size_t t = 0; t < used; ++t) w[i][t] /= wsum;
  }

  Tensor interpolated = interpolate_rows(coarse.features, idx, w);
  return run_shared_mlp(concat_cols(interpolated, skip_features), params);
}

std::array<std::size_t, 8> octant_select(const Tensor& coords,
                                         std::size_t center_index) {
  check_coords(coords, "octant_select");
  const std::size_t n = coords.rows();
  if (n == 0) throw EmptyInputError("octant_select: empty cloud");
  if (center_index >= n) {
    throw DimensionError("octant_select: center index out of range");
  }
  const double c[3] = {coords.at(center_index, 0), coords.at(center_index, 1),
                       coords.at(center_index, 2)};
  std::array<std::size_t, 8> pick;
  pick.fill(center_index);
  std::array<double, 8> best_d2;
  best_d2.fill(std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = coords.at(i, 0) - c[0];
    const double dy = coords.at(i, 1) - c[1];
    const double dz = coords.at(i, 2) - c[2];
    if (dx == 0.0 && dy == 0.0 && dz == 0.0) continue;  // the center itself
    const int o = (dx > 0.0 ? 4 : 0) + (dy > 0.0 ? 2 : 0) + (dz > 0.0 ? 1 : 0);
    const double d2 = dx * dx + dy * dy + dz * dz;
    if (d2 < best_d2[o]) {  // ties keep the lowest index
      best_d2[o] = d2;
      pick[o] = i;
    }
  }
  return pick;
}

PointSet pointsift_module(const PointSet& ps, const PointSIFTParams& params) {
  check_coords(ps.coords, "pointsift_module");
  const std::size_t n = ps.coords.rows();
  if (n == 0) throw EmptyInputError("pointsift_module: empty cloud");
  if (ps.features.rows() != n || ps.features.cols() == 0) {
    throw DimensionError("pointsift_module: needs NxC features, C >= 1");
  }

  // Octant code o = bx*4 + by*2 + bz; stage q collapses the bx pair (o=q vs
  // o=q+4), then the by pair, then the bz pair.
  std::vector<std::size_t> neg1, pos1;
  neg1.reserve(4 * n);
  pos1.reserve(4 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto nbr = octant_select(ps.coords, i);
    for (std::size_t q = 0; q < 4; ++q) {
      neg1.push_back(nbr[q]);
      pos1.push_back(nbr[4 + q]);
    }
  }
  Tensor s1 = shared_mlp(
      concat_cols(gather_rows(ps.features, neg1), gather_rows(ps.features, pos1)),
      params.w1, params.b1, Activation::kRelu);

  std::vector<std::size_t> neg2, pos2;
  neg2.reserve(2 * n);
  pos2.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < 2; ++r) {
      neg2.push_back(i * 4 + r);
      pos2.push_back(i * 4 + 2 + r);
    }
  }
  Tensor s2 = shared_mlp(
      concat_cols(gather_rows(s1, neg2), gather_rows(s1, pos2)), params.w2,
      params.b2, Activation::kRelu);

  std::vector<std::size_t> neg3, pos3;
  neg3.reserve(n);
  pos3.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    neg3.push_back(i * 2);
    pos3.push_back(i * 2 + 1);
  }
  Tensor s3 = shared_mlp(
      concat_cols(gather_rows(s2, neg3), gather_rows(s2, pos3)), params.w3,
      params.b3, Activation::kRelu);

  return {ps.coords, s3};
}

}  // namespace sifr
