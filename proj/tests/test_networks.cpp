#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>

#include "doctest.h"
#include "sifr/networks.hpp"

using namespace sifr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("sifr_test_net_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

Box3D random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ctr(-3.0, 3.0), dim(0.5, 3.0),
      ang(-kPi, kPi);
  return Box3D(ctr(rng), ctr(rng), ctr(rng), dim(rng), dim(rng), dim(rng),
               ang(rng));
}

std::vector<std::array<double, 3>> demo_means() {
  return {{1.5, 1.7, 4.0}, {1.75, 0.6, 0.8}};
}

Tensor random_points7(std::size_t n, std::mt19937_64& rng) {
  Tensor t(n, 7);
  std::uniform_real_distribution<double> xyz(-2.0, 2.0), unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d) t.at(i, d) = xyz(rng);
    for (int d = 3; d < 7; ++d) t.at(i, d) = unit(rng);
  }
  return t;
}

}  // namespace

TEST_CASE("param store registration, lookup and init") {
  ParamStore store;
  Parameter* w = store.add("layer.w", 4, 3);
  Parameter* b = store.add("layer.b", 1, 3);
  CHECK(store.find("layer.w") == w);
  CHECK(store.find("missing") == nullptr);
  CHECK(store.total_values() == 15);
  CHECK(store.pointers().size() == 2);
  CHECK_THROWS_AS(store.add("layer.w", 2, 2), ConfigError);

  store.init_random(5);
  bool any_nonzero = false;
  for (double v : w->value.data()) any_nonzero |= (v != 0.0);
  CHECK(any_nonzero);
  for (double v : b->value.data()) CHECK(v == 0.0);  // ".b" names stay zero

  // deterministic per seed
  ParamStore s2;
  Parameter* w2 = s2.add("layer.w", 4, 3);
  s2.add("layer.b", 1, 3);
  s2.init_random(5);
  CHECK(w2->value.data() == w->value.data());
  s2.init_random(6);
  CHECK(w2->value.data() != w->value.data());
}

TEST_CASE("tape binding exposes parameters as leaves or constants") {
  ParamStore store;
  store.add("a.w", 2, 2);
  store.add("b.w", 1, 2);
  store.init_random(1);
  auto params = store.pointers();

  Tape tape;
  TapeBinding bound(&tape, params);
  const Tensor& t = bound(params[0]);
  CHECK(t.on_tape());

  Tensor loss = sum_all(mul(t, t));
  tape.backward(loss);
  auto grads = bound.grads();
  REQUIRE(grads.size() == 2);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(grads[0][i] ==
          doctest::Approx(2.0 * params[0]->value.data()[i]));
  }
  // untouched parameter keeps zero gradients
  CHECK(grads[1][0] == 0.0);
  CHECK(grads[1][1] == 0.0);

  TapeBinding constants(nullptr, params);
  CHECK(!constants(params[0]).on_tape());
  CHECK_THROWS_AS(constants.grads(), ConfigError);
}

TEST_CASE("checkpoint round trip restores every value") {
  TempDir tmp;
  ParamStore store;
  store.add("m.w", 3, 4);
  store.add("m.b", 1, 4);
  store.init_random(99);
  std::vector<double> before = store.find("m.w")->value.data();

  const std::string path = tmp.file("model.ckpt");
  save_checkpoint(path, store);
  store.init_random(123);  // scramble
  CHECK(store.find("m.w")->value.data() != before);
  load_checkpoint(path, store);
  CHECK(store.find("m.w")->value.data() == before);

  SUBCASE("shape mismatch names the parameter") {
    ParamStore other;
    other.add("m.w", 4, 3);  // transposed shape
    other.add("m.b", 1, 4);
    try {
      load_checkpoint(path, other);
      FAIL("expected a shape mismatch error");
    } catch (const DimensionError& e) {
      CHECK(std::string(e.what()).find("m.w") != std::string::npos);
    }
  }

  SUBCASE("unknown parameter in file is rejected") {
    ParamStore other;
    other.add("different.w", 3, 4);
    CHECK_THROWS_AS(load_checkpoint(path, other), DimensionError);
  }

  SUBCASE("bad magic is a format error at byte 0") {
    std::string bad = tmp.file("bad.ckpt");
    fs::copy_file(path, bad);
    FILE* f = std::fopen(bad.c_str(), "r+b");
    REQUIRE(f != nullptr);
    std::fputc('X', f);
    std::fclose(f);
    try {
      load_checkpoint(bad, store);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.byte_offset == 0);
    }
  }

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(tmp.file("nope.ckpt"), store), FormatError);
  }
}

TEST_CASE("class templates: bins cover the circle and sizes spread") {
  ClassTemplates tpl = ClassTemplates::from_class_means(demo_means(), 8, 12);
  CHECK(tpl.sizes.size() == 16);
  CHECK(tpl.num_classes == 2);

  // bin centers are fixed points of the bin assignment
  for (std::size_t b = 0; b < 12; ++b) {
    CHECK(tpl.heading_bin(tpl.bin_center(b)) == b);
  }
  // residuals to the assigned center stay within half a bin width
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  const double hw = kPi / 12.0;
  for (int i = 0; i < 500; ++i) {
    const double theta = u(rng);
    const std::size_t bin = tpl.heading_bin(theta);
    CHECK(std::abs(wrap_angle(theta - tpl.bin_center(bin))) <= hw + 1e-12);
  }

  // each template size is its own nearest template
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t t = 0; t < 8; ++t) {
      CHECK(tpl.nearest_template(c, tpl.size_of(c, t)) == t);
    }
  }
  CHECK_THROWS_AS(tpl.size_of(2, 0), LabelError);
  CHECK_THROWS_AS(tpl.bin_center(12), LabelError);
  CHECK_THROWS_AS(ClassTemplates::from_class_means({}, 8, 12),
                  InvalidInputError);
}

TEST_CASE("box prediction layout offsets") {
  BoxPrediction p;
  p.ns = 8;
  p.nh = 12;
  CHECK(p.dim() == 3 + 4 * 8 + 2 * 12);
  CHECK(p.size_score_off() == 3);
  CHECK(p.size_res_off() == 11);
  CHECK(p.heading_score_off() == 35);
  CHECK(p.heading_res_off() == 47);

  p.raw = Tensor(1, p.dim());
  p.raw.at(0, 3 + 2) = 5.0;  // size template 2 wins
  p.raw.at(0, 35 + 7) = 3.0;
  CHECK(p.argmax_size() == 2);
  CHECK(p.argmax_heading() == 7);
  p.raw.at(0, 3 + 0) = 5.0;  // tie: lowest index wins
  CHECK(p.argmax_size() == 0);
}

TEST_CASE("encode then decode reproduces the box exactly") {
  ClassTemplates tpl = ClassTemplates::from_class_means(demo_means(), 8, 12);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Box3D gt = random_box(rng);
    const std::size_t cls = i % 2;
    Point3 centroid{u(rng), u(rng), u(rng)};
    Point3 delta{u(rng), u(rng), u(rng)};
    BoxPrediction enc = encode_box(gt, centroid, delta, tpl, cls);
    Box3D dec = decode_box(enc, centroid, delta, tpl, cls);
    CHECK(std::abs(dec.cx - gt.cx) < 1e-9);
    CHECK(std::abs(dec.cy - gt.cy) < 1e-9);
    CHECK(std::abs(dec.cz - gt.cz) < 1e-9);
    CHECK(std::abs(dec.h - gt.h) < 1e-9);
    CHECK(std::abs(dec.w - gt.w) < 1e-9);
    CHECK(std::abs(dec.l - gt.l) < 1e-9);
    CHECK(std::abs(wrap_angle(dec.theta - gt.theta)) < 1e-9);
  }
}

TEST_CASE("box targets reconstruct the ground truth") {
  ClassTemplates tpl = ClassTemplates::from_class_means(demo_means(), 8, 12);
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    Box3D gt = random_box(rng);
    const std::size_t cls = i % 2;
    BoxTargets t = make_box_targets(gt, tpl, cls);
    CHECK(t.center[0] == gt.cx);
    CHECK(t.theta == gt.theta);
    const auto& base = tpl.size_of(cls, t.size_template);
    CHECK(base[0] * (1.0 + t.size_residual[0]) == doctest::Approx(gt.h));
    CHECK(base[1] * (1.0 + t.size_residual[1]) == doctest::Approx(gt.w));
    CHECK(base[2] * (1.0 + t.size_residual[2]) == doctest::Approx(gt.l));
    CHECK(wrap_angle(tpl.bin_center(t.heading_bin) + t.heading_residual) ==
          doctest::Approx(gt.theta));
    CHECK(std::abs(t.heading_residual) <= kPi / 12.0 + 1e-12);
  }
}

TEST_CASE("mask selection keeps the confident points") {
  Tensor pts(4, 7);
  for (std::size_t i = 0; i < 4; ++i) {
    pts.at(i, 0) = static_cast<double>(i);
    pts.at(i, 1) = 2.0 * static_cast<double>(i);
    pts.at(i, 2) = -1.0;
    pts.at(i, 6) = 0.25 * static_cast<double>(i);  // intensity
  }
  std::vector<double> probs{0.9, 0.2, 0.7, 0.4};
  MaskSelection sel = mask_select(pts, probs, 0.5);
  REQUIRE(sel.indices == std::vector<std::size_t>{0, 2});
  REQUIRE(sel.interest.rows() == 2);
  CHECK(sel.interest.cols() == 4);
  CHECK(sel.interest.at(1, 0) == 2.0);
  CHECK(sel.interest.at(1, 3) == 0.5);  // intensity travels along
  CHECK(sel.centroid[0] == doctest::Approx(1.0));
  CHECK(sel.centroid[1] == doctest::Approx(2.0));
  CHECK(sel.centroid[2] == doctest::Approx(-1.0));

  // nothing over the cut: fall back to the single best point
  MaskSelection fb = mask_select(pts, {0.1, 0.3, 0.2, 0.05}, 0.5);
  REQUIRE(fb.indices == std::vector<std::size_t>{1});
  CHECK(fb.centroid[0] == 1.0);
}

TEST_CASE("point-unet forward produces per-point logits") {
  UNetConfig cfg;
  cfg.num_classes = 2;
  cfg.image_feature_dim = 8;
  cfg.sa1_centroids = 8;
  cfg.sa1_radius = 0.8;
  cfg.sa1_group = 4;
  cfg.sa1_mlp = {8, 8};
  cfg.sa2_centroids = 4;
  cfg.sa2_radius = 1.6;
  cfg.sa2_group = 4;
  cfg.sa2_mlp = {8, 16};
  cfg.sift_width = 8;
  cfg.global_mlp = {16, 16};
  cfg.fp_widths = {16, 8, 8};
  cfg.head_hidden = 8;

  ParamStore store;
  PointUNet net(cfg, store);
  store.init_random(3);

  std::mt19937_64 rng(19);
  PointUNetInput in;
  in.points = random_points7(24, rng);
  in.one_hot = Tensor(1, 2, {0.0, 1.0});
  in.image_feature = Tensor(1, 8);

  TapeBinding bind(nullptr, store.pointers());
  SegmentationOutput out = net.forward(in, bind);
  REQUIRE(out.logits.rows() == 24);
  REQUIRE(out.logits.cols() == 2);
  REQUIRE(out.probabilities.size() == 24);
  for (std::size_t i = 0; i < 24; ++i) {
    auto p = softmax_row_values(out.logits, i);
    CHECK(out.probabilities[i] == doctest::Approx(p[1]));
    CHECK(out.probabilities[i] > 0.0);
    CHECK(out.probabilities[i] < 1.0);
  }

  // sparse clouds clamp the centroid counts instead of failing
  PointUNetInput tiny = in;
  tiny.points = random_points7(5, rng);
  SegmentationOutput sparse = net.forward(tiny, bind);
  CHECK(sparse.logits.rows() == 5);

  PointUNetInput bad = in;
  bad.one_hot = Tensor(1, 2, {1.0, 1.0});
  CHECK_THROWS_AS(net.forward(bad, bind), InvalidInputError);
}

TEST_CASE("t-net translates the interest points by its delta") {
  TNetConfig cfg;
  cfg.sa_mlp = {8, 16};
  cfg.hidden = 8;
  ParamStore store;
  TNet net(cfg, store);
  store.init_random(11);

  std::mt19937_64 rng(23);
  Tensor interest(6, 4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : interest.data()) v = u(rng);

  TapeBinding bind(nullptr, store.pointers());
  TNetOutput out = net.forward(interest, bind);
  REQUIRE(out.delta.rows() == 1);
  REQUIRE(out.delta.cols() == 3);
  REQUIRE(out.translated.rows() == 6);
  REQUIRE(out.translated.cols() == 3);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t d = 0; d < 3; ++d) {
      CHECK(out.translated.at(i, d) ==
            doctest::Approx(interest.at(i, d) + out.delta.at(0, d)));
    }
  }
}

TEST_CASE("point-senet emits the raw box vector") {
  SENetConfig cfg;
  cfg.conv1 = 8;
  cfg.conv2 = 16;
  cfg.conv3 = 16;
  cfg.se_r = 4;
  cfg.lift = 16;
  cfg.fc1 = 16;
  cfg.fc2 = 8;
  cfg.ns = 3;
  cfg.nh = 4;
  ParamStore store;
  PointSENet net(cfg, store);
  store.init_random(29);

  std::mt19937_64 rng(31);
  Tensor translated(10, 3);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (double& v : translated.data()) v = u(rng);

  TapeBinding bind(nullptr, store.pointers());
  SEIntermediates inter;
  BoxPrediction pred = net.forward(translated, bind, &inter);
  CHECK(pred.ns == 3);
  CHECK(pred.nh == 4);
  REQUIRE(pred.raw.rows() == 1);
  REQUIRE(pred.raw.cols() == 3 + 4 * 3 + 2 * 4);
  for (double s : inter.scale.data()) {
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }
  // all accessors stay in range
  CHECK(pred.argmax_size() < 3);
  CHECK(pred.argmax_heading() < 4);
  auto res = pred.size_residual(pred.argmax_size());
  CHECK(std::isfinite(res[0]));
  CHECK(std::isfinite(pred.heading_residual(pred.argmax_heading())));
}
