#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "sifr/pointops.hpp"

using namespace sifr;

namespace {

Tensor random_cloud(std::size_t n, std::mt19937_64& rng, double spread = 2.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  Tensor t(n, 3);
  for (double& v : t.data()) v = u(rng);
  return t;
}

double dist2(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t d = 0; d < 3; ++d) {
    const double dd = a.at(i, d) - b.at(j, d);
    s += dd * dd;
  }
  return s;
}

// Straightforward greedy max-min reference, recomputed from scratch each pick.
std::vector<std::size_t> fps_reference(const Tensor& coords, std::size_t k,
                                       std::uint64_t seed) {
  const std::size_t n = coords.rows();
  std::vector<std::size_t> picked{seed % n};
  std::vector<bool> taken(n, false);
  taken[seed % n] = true;
  while (picked.size() < k) {
    double best = -1.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t p : picked) d = std::min(d, dist2(coords, i, coords, p));
      if (d > best) {
        best = d;
        arg = i;
      }
    }
    picked.push_back(arg);
    taken[arg] = true;
  }
  return picked;
}

std::vector<std::size_t> ball_reference(const Tensor& coords,
                                        const Tensor& centers, std::size_t c,
                                        double radius, std::size_t cap) {
  std::vector<std::pair<double, std::size_t>> in;
  for (std::size_t i = 0; i < coords.rows(); ++i) {
    const double d = dist2(coords, i, centers, c);
    if (d <= radius * radius) in.push_back({d, i});
  }
  std::sort(in.begin(), in.end());
  std::vector<std::size_t> out;
  if (in.empty()) {
    // nothing in radius: the globally nearest point, repeated
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t i = 0; i < coords.rows(); ++i) {
      const double d = dist2(coords, i, centers, c);
      if (d < best) {
        best = d;
        arg = i;
      }
    }
    out.assign(cap, arg);
  } else {
    for (std::size_t i = 0; i < std::min(cap, in.size()); ++i) {
      out.push_back(in[i].second);
    }
    while (out.size() < cap) out.push_back(in[0].second);
  }
  return out;
}

std::array<std::size_t, 8> octant_reference(const Tensor& coords,
                                            std::size_t c) {
  std::array<std::size_t, 8> out;
  out.fill(c);
  std::array<double, 8> best;
  best.fill(std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < coords.rows(); ++i) {
    const double dx = coords.at(i, 0) - coords.at(c, 0);
    const double dy = coords.at(i, 1) - coords.at(c, 1);
    const double dz = coords.at(i, 2) - coords.at(c, 2);
    if (dx == 0.0 && dy == 0.0 && dz == 0.0) continue;  // coincident
    const std::size_t o = (dx > 0.0 ? 4 : 0) + (dy > 0.0 ? 2 : 0) +
                          (dz > 0.0 ? 1 : 0);
    const double d = dx * dx + dy * dy + dz * dz;
    if (d < best[o]) {
      best[o] = d;
      out[o] = i;
    }
  }
  return out;
}

SharedMLPParams identity_with_offset(std::size_t width, double off) {
  SharedMLPParams p;
  Tensor w(width, width);
  for (std::size_t i = 0; i < width; ++i) w.at(i, i) = 1.0;
  Tensor b(1, width);
  for (double& v : b.data()) v = off;
  p.w.push_back(w);
  p.b.push_back(b);
  return p;
}

}  // namespace

TEST_CASE("run_shared_mlp stacks affine layers with relu") {
  Tensor x(2, 2, {1.0, -1.0, 0.5, 2.0});
  SharedMLPParams p;
  p.w.push_back(Tensor(2, 2, {1, 0, 0, 1}));
  p.b.push_back(Tensor(1, 2, {0.0, 0.0}));
  p.w.push_back(Tensor(2, 1, {1, 1}));
  p.b.push_back(Tensor(1, 1, {-1.0}));
  Tensor y = run_shared_mlp(x, p);
  // layer 1 relu: (1,0), (0.5,2); layer 2: 1-1=0, 2.5-1=1.5
  CHECK(y.rows() == 2);
  CHECK(y.cols() == 1);
  CHECK(y.at(0, 0) == 0.0);
  CHECK(y.at(1, 0) == 1.5);
}

TEST_CASE("farthest point sampling matches the reference scan") {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t n = 4 + rng() % 60;
    const std::size_t k = 1 + rng() % n;
    const std::uint64_t seed = rng();
    Tensor cloud = random_cloud(n, rng);
    auto got = farthest_point_sample(cloud, k, seed);
    auto want = fps_reference(cloud, k, seed);
    REQUIRE(got.size() == k);
    CHECK(got == want);
  }
}

TEST_CASE("farthest point sampling edge cases") {
  std::mt19937_64 rng(43);
  Tensor cloud = random_cloud(10, rng);

  auto one = farthest_point_sample(cloud, 1, 23);
  CHECK(one == std::vector<std::size_t>{23 % 10});

  auto all = farthest_point_sample(cloud, 10, 7);
  std::set<std::size_t> uniq(all.begin(), all.end());
  CHECK(uniq.size() == 10);  // a permutation: every index exactly once

  CHECK_THROWS_AS(farthest_point_sample(cloud, 11, 0), CountError);
  CHECK_THROWS_AS(farthest_point_sample(Tensor(0, 3), 1, 0), EmptyInputError);
}

TEST_CASE("ball query matches the reference and always fills the group") {
  std::mt19937_64 rng(47);
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t n = 5 + rng() % 40;
    Tensor cloud = random_cloud(n, rng);
    Tensor centers = random_cloud(4, rng, 2.5);
    std::uniform_real_distribution<double> r(0.2, 2.0);
    const double radius = r(rng);
    const std::size_t cap = 1 + rng() % 8;
    auto groups = ball_query(cloud, centers, radius, cap);
    REQUIRE(groups.size() == 4);
    for (std::size_t c = 0; c < 4; ++c) {
      REQUIRE(groups[c].size() == cap);
      CHECK(groups[c] == ball_reference(cloud, centers, c, radius, cap));
    }
  }
  CHECK_THROWS_AS(ball_query(random_cloud(4, rng), random_cloud(1, rng), -1.0, 4),
                  InvalidInputError);
}

TEST_CASE("octant selection matches the reference") {
  std::mt19937_64 rng(53);
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t n = 2 + rng() % 30;
    Tensor cloud = random_cloud(n, rng);
    for (std::size_t c = 0; c < n; ++c) {
      auto got = octant_select(cloud, c);
      auto want = octant_reference(cloud, c);
      for (int o = 0; o < 8; ++o) CHECK(got[o] == want[o]);
    }
  }
}

TEST_CASE("octant selection hand cases") {
  // p1 sits strictly positive of p0 in all axes: octant 7 (bx*4+by*2+bz)
  Tensor cloud(2, 3, {0, 0, 0, 1.0, 0.5, 0.25});
  auto oct0 = octant_select(cloud, 0);
  for (int o = 0; o < 7; ++o) CHECK(oct0[o] == 0);  // empty: fall back to self
  CHECK(oct0[7] == 1);
  auto oct1 = octant_select(cloud, 1);
  CHECK(oct1[0] == 0);  // p0 is all-negative of p1
  for (int o = 1; o < 8; ++o) CHECK(oct1[o] == 1);

  // a coincident duplicate never qualifies as a neighbor
  Tensor dup(2, 3, {1, 1, 1, 1, 1, 1});
  auto oct = octant_select(dup, 0);
  for (int o = 0; o < 8; ++o) CHECK(oct[o] == 0);

  // points exactly on a separating plane count toward the negative side
  Tensor plane(2, 3, {0, 0, 0, 1.0, 0.0, 0.0});
  auto op = octant_select(plane, 0);
  CHECK(op[4] == 1);  // bx=1, by=bz=0
  CHECK(op[6] == 0);
}

TEST_CASE("set abstraction: global group pools the whole cloud at the origin") {
  std::mt19937_64 rng(59);
  Tensor coords = random_cloud(12, rng, 1.5);
  // keep everything positive so the relu identity trick is exact
  for (double& v : coords.data()) v = std::abs(v) + 0.1;
  Tensor feats(12, 2);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (double& v : feats.data()) v = u(rng);

  SAConfig cfg;
  cfg.global = true;
  PointSet out = sa_module({coords, feats}, cfg, identity_with_offset(5, 0.0));

  REQUIRE(out.coords.rows() == 1);
  CHECK(out.coords.at(0, 0) == 0.0);
  CHECK(out.coords.at(0, 1) == 0.0);
  CHECK(out.coords.at(0, 2) == 0.0);
  REQUIRE(out.features.rows() == 1);
  REQUIRE(out.features.cols() == 5);
  // identity mlp + max pool = per-column max of [coords | features]
  for (std::size_t col = 0; col < 5; ++col) {
    double want = -1e300;
    for (std::size_t i = 0; i < 12; ++i) {
      want = std::max(want, col < 3 ? coords.at(i, col)
                                    : feats.at(i, col - 3));
    }
    CHECK(out.features.at(0, col) == doctest::Approx(want));
  }
}

TEST_CASE("set abstraction: local groups follow FPS + ball query") {
  std::mt19937_64 rng(61);
  const std::size_t n = 20;
  Tensor coords = random_cloud(n, rng, 1.0);
  Tensor feats(n, 1);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (double& v : feats.data()) v = u(rng);

  SAConfig cfg;
  cfg.num_centroids = 4;
  cfg.radius = 1.2;
  cfg.max_group_size = 6;
  cfg.seed = 9;

  // +10 offset keeps every mlp input positive, so the "identity" layer is
  // exact and the pooled output is groupmax + 10
  PointSet out = sa_module({coords, feats}, cfg, identity_with_offset(4, 10.0));
  REQUIRE(out.coords.rows() == 4);
  REQUIRE(out.features.cols() == 4);

  auto centroids = fps_reference(coords, 4, 9);
  for (std::size_t g = 0; g < 4; ++g) {
    for (std::size_t d = 0; d < 3; ++d) {
      CHECK(out.coords.at(g, d) == coords.at(centroids[g], d));
    }
    Tensor centers = gather_rows(coords, centroids);
    auto group = ball_reference(coords, centers, g, 1.2, 6);
    for (std::size_t col = 0; col < 4; ++col) {
      double want = -1e300;
      for (std::size_t j : group) {
        const double rel = col < 3
                               ? coords.at(j, col) - coords.at(centroids[g], col)
                               : feats.at(j, col - 3);
        want = std::max(want, rel);
      }
      CHECK(out.features.at(g, col) == doctest::Approx(want + 10.0));
    }
  }
}

TEST_CASE("feature propagation weights sum to one") {
  std::mt19937_64 rng(67);
  Tensor coarse_coords = random_cloud(5, rng);
  Tensor coarse_feats(5, 1);
  for (double& v : coarse_feats.data()) v = 1.0;  // all ones
  Tensor fine = random_cloud(9, rng, 3.0);
  Tensor skip(9, 1);  // zeros

  SharedMLPParams p;
  p.w.push_back(Tensor(2, 1, {1.0, 1.0}));
  p.b.push_back(Tensor(1, 1, {0.0}));

  Tensor out = fp_module({coarse_coords, coarse_feats}, fine, skip, p);
  REQUIRE(out.rows() == 9);
  // ones interpolated with convex weights stay exactly one
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(std::abs(out.at(i, 0) - 1.0) < 1e-12);
  }
}

TEST_CASE("feature propagation: a coincident coarse point takes full weight") {
  Tensor coarse_coords(3, 3, {0, 0, 0, 4, 4, 4, -4, 4, 0});
  Tensor coarse_feats(3, 1, {7.0, 1.0, 1.0});
  Tensor fine(2, 3, {0, 0, 0, 3.9, 4.0, 4.1});
  Tensor skip(2, 1);
  SharedMLPParams p;
  p.w.push_back(Tensor(2, 1, {1.0, 1.0}));
  p.b.push_back(Tensor(1, 1, {0.0}));
  Tensor out = fp_module({coarse_coords, coarse_feats}, fine, skip, p);
  CHECK(out.at(0, 0) == doctest::Approx(7.0).epsilon(1e-12));
  // the other fine point gets a convex mix, so it stays within the hull
  CHECK(out.at(1, 0) <= 7.0);
  CHECK(out.at(1, 0) >= 1.0 - 1e-12);
}

TEST_CASE("pointsift with all-ones stages sums the octant features") {
  // with every weight 1 and positive features, the three directional folds
  // collapse to a plain sum over the 8 octant neighbors
  std::mt19937_64 rng(71);
  const std::size_t n = 10;
  Tensor coords = random_cloud(n, rng);
  Tensor feats(n, 2);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (double& v : feats.data()) v = u(rng);

  PointSIFTParams p;
  auto ones = [](std::size_t r, std::size_t c) {
    Tensor t(r, c);
    for (double& v : t.data()) v = 1.0;
    return t;
  };
  p.w1 = ones(4, 1);
  p.b1 = Tensor(1, 1);
  p.w2 = ones(2, 1);
  p.b2 = Tensor(1, 1);
  p.w3 = ones(2, 1);
  p.b3 = Tensor(1, 1);

  PointSet out = pointsift_module({coords, feats}, p);
  REQUIRE(out.features.rows() == n);
  REQUIRE(out.features.cols() == 1);
  CHECK(out.coords.rows() == n);

  for (std::size_t i = 0; i < n; ++i) {
    auto oct = octant_reference(coords, i);
    double want = 0.0;
    for (int o = 0; o < 8; ++o) {
      want += feats.at(oct[o], 0) + feats.at(oct[o], 1);
    }
    CHECK(out.features.at(i, 0) == doctest::Approx(want));
  }
}

TEST_CASE("pointsift is translation invariant") {
  std::mt19937_64 rng(73);
  Tensor coords = random_cloud(8, rng);
  Tensor feats(8, 2);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (double& v : feats.data()) v = u(rng);

  PointSIFTParams p;
  std::normal_distribution<double> g(0.0, 0.4);
  auto rand_t = [&](std::size_t r, std::size_t c) {
    Tensor t(r, c);
    for (double& v : t.data()) v = g(rng);
    return t;
  };
  p.w1 = rand_t(4, 3);
  p.b1 = rand_t(1, 3);
  p.w2 = rand_t(6, 3);
  p.b2 = rand_t(1, 3);
  p.w3 = rand_t(6, 2);
  p.b3 = rand_t(1, 2);

  PointSet base = pointsift_module({coords, feats}, p);
  Tensor shifted = coords;
  for (std::size_t i = 0; i < 8; ++i) {
    shifted.at(i, 0) += 5.0;
    shifted.at(i, 1) -= 3.0;
    shifted.at(i, 2) += 0.5;
  }
  PointSet moved = pointsift_module({shifted, feats}, p);
  for (std::size_t i = 0; i < base.features.size(); ++i) {
    CHECK(moved.features.data()[i] == base.features.data()[i]);
  }
}
