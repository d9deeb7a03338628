#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "sifr/data.hpp"
#include "sifr/errors.hpp"

using namespace sifr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("sifr_data_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

SyntheticConfig small_config(std::size_t n = 64) {
  SyntheticConfig cfg;
  cfg.points_per_sample = n;
  return cfg;
}

bool tensors_equal(const Tensor& a, const Tensor& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a.data() == b.data();
}

bool boxes_equal(const Box3D& a, const Box3D& b) {
  return a.cx == b.cx && a.cy == b.cy && a.cz == b.cz && a.h == b.h &&
         a.w == b.w && a.l == b.l && a.theta == b.theta;
}

std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
}

void write_bytes(const std::string& path,
                 const std::vector<unsigned char>& buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

}  // namespace

TEST_CASE("generated samples satisfy every invariant across seeds") {
  SyntheticConfig cfg = small_config(96);
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    for (std::size_t cls = 0; cls < cfg.classes.size(); ++cls) {
      std::mt19937_64 rng(seed);
      FrustumSample s = generate_sample(cfg, cls, rng);
      CHECK_NOTHROW(validate_sample(s));
      CHECK(s.class_id() == cls);
      REQUIRE(s.points.rows() == 96);
      REQUIRE(s.points.cols() == 7);

      // labels agree with an independent containment check, with margin to
      // spare on both sides
      std::size_t inside = 0;
      for (std::size_t i = 0; i < s.points.rows(); ++i) {
        const Point3 p = {s.points.at(i, 0), s.points.at(i, 1),
                          s.points.at(i, 2)};
        const bool in_strict = point_in_box(s.gt_box, p, -1e-9);
        const bool in_loose = point_in_box(s.gt_box, p, 1e-9);
        if (s.seg_labels[i] == 1) {
          CHECK(in_strict);
        } else {
          CHECK(!in_loose);
        }
        inside += static_cast<std::size_t>(s.seg_labels[i]);
      }
      // clutter fraction 0.25 leaves three quarters of the points on the box
      CHECK(inside == 96 - static_cast<std::size_t>(0.25 * 96));

      // everything stored in 32 bits must be exactly representable
      for (double v : s.points.data()) {
        CHECK(v == static_cast<double>(static_cast<float>(v)));
      }
      for (double v : s.image_feature.data()) {
        CHECK(v == static_cast<double>(static_cast<float>(v)));
      }
    }
  }
}

TEST_CASE("generation is deterministic in the rng state") {
  SyntheticConfig cfg = small_config();
  std::mt19937_64 a(42), b(42);
  FrustumSample s1 = generate_sample(cfg, 1, a);
  FrustumSample s2 = generate_sample(cfg, 1, b);
  CHECK(tensors_equal(s1.points, s2.points));
  CHECK(tensors_equal(s1.one_hot, s2.one_hot));
  CHECK(tensors_equal(s1.image_feature, s2.image_feature));
  CHECK(s1.seg_labels == s2.seg_labels);
  CHECK(boxes_equal(s1.gt_box, s2.gt_box));
  CHECK(s1.frustum_angle == s2.frustum_angle);

  // different draws diverge
  FrustumSample s3 = generate_sample(cfg, 1, a);
  CHECK(!tensors_equal(s1.points, s3.points));
}

TEST_CASE("antipodal headings cluster at the seam") {
  SyntheticConfig cfg = small_config(32);
  cfg.heading = HeadingModel::kAntipodal;
  cfg.heading_sigma = 0.3;
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    FrustumSample s = generate_sample(cfg, 0, rng);
    // distance to the seam, measured the wrapped way
    const double to_seam = kPi - std::fabs(s.gt_box.theta);
    CHECK(to_seam < 4.0 * cfg.heading_sigma);
  }
}

TEST_CASE("generation rejects bad configs") {
  std::mt19937_64 rng(1);
  SyntheticConfig cfg = small_config();
  CHECK_THROWS_AS(generate_sample(cfg, 99, rng), LabelError);

  SyntheticConfig no_classes = cfg;
  no_classes.classes.clear();
  CHECK_THROWS_AS(generate_sample(no_classes, 0, rng), ConfigError);

  SyntheticConfig tiny = cfg;
  tiny.points_per_sample = 7;
  CHECK_THROWS_AS(generate_sample(tiny, 0, rng), ConfigError);

  SyntheticConfig clutter = cfg;
  clutter.clutter_fraction = 1.0;
  CHECK_THROWS_AS(generate_sample(clutter, 0, rng), ConfigError);

  SyntheticConfig depth = cfg;
  depth.depth_max = depth.depth_min - 1.0;
  CHECK_THROWS_AS(generate_sample(depth, 0, rng), ConfigError);
}

TEST_CASE("flip mirrors the lateral axis and is an involution") {
  std::mt19937_64 rng(9);
  FrustumSample s = generate_sample(small_config(), 2, rng);
  FrustumSample f = augment_flip(s);

  CHECK_NOTHROW(validate_sample(f));
  CHECK(f.gt_box.cy == -s.gt_box.cy);
  CHECK(f.gt_box.theta == wrap_angle(-s.gt_box.theta));
  CHECK(f.seg_labels == s.seg_labels);
  for (std::size_t i = 0; i < s.points.rows(); ++i) {
    CHECK(f.points.at(i, 1) == -s.points.at(i, 1));
    CHECK(f.points.at(i, 0) == s.points.at(i, 0));
    CHECK(f.points.at(i, 2) == s.points.at(i, 2));
    CHECK(f.points.at(i, 5) == s.points.at(i, 5));
  }

  FrustumSample ff = augment_flip(f);
  CHECK(tensors_equal(ff.points, s.points));
  CHECK(boxes_equal(ff.gt_box, s.gt_box));
}

TEST_CASE("depth shift moves points and box together") {
  std::mt19937_64 rng(11);
  FrustumSample s = generate_sample(small_config(), 0, rng);

  std::mt19937_64 shift_rng(3);
  FrustumSample z = augment_zshift(s, 1.5, shift_rng);
  const double shift = z.gt_box.cx - s.gt_box.cx;
  CHECK(std::fabs(shift) <= 1.5);
  for (std::size_t i = 0; i < s.points.rows(); ++i) {
    CHECK(z.points.at(i, 0) == s.points.at(i, 0) + shift);
    CHECK(z.points.at(i, 1) == s.points.at(i, 1));
  }
  CHECK(z.seg_labels == s.seg_labels);
  CHECK(z.gt_box.cy == s.gt_box.cy);
  CHECK_NOTHROW(validate_sample(z));

  std::mt19937_64 rng0(3);
  FrustumSample frozen = augment_zshift(s, 0.0, rng0);
  CHECK(tensors_equal(frozen.points, s.points));

  CHECK_THROWS_AS(augment_zshift(s, -0.1, rng0), InvalidInputError);
}

TEST_CASE("subsampling keeps rows, order and metadata") {
  std::mt19937_64 rng(13);
  FrustumSample s = generate_sample(small_config(64), 1, rng);

  std::mt19937_64 pick(5);
  FrustumSample sub = subsample_points(s, 20, pick);
  REQUIRE(sub.points.rows() == 20);
  REQUIRE(sub.seg_labels.size() == 20);
  CHECK(tensors_equal(sub.one_hot, s.one_hot));
  CHECK(boxes_equal(sub.gt_box, s.gt_box));
  CHECK(sub.frustum_angle == s.frustum_angle);

  // every kept row is an input row, and the originals appear in order
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    bool found = false;
    for (; cursor < s.points.rows(); ++cursor) {
      bool same = true;
      for (std::size_t c = 0; c < 7; ++c)
        same = same && sub.points.at(i, c) == s.points.at(cursor, c);
      if (same && sub.seg_labels[i] == s.seg_labels[cursor]) {
        found = true;
        ++cursor;
        break;
      }
    }
    CHECK(found);
  }

  std::mt19937_64 pick2(5);
  FrustumSample all = subsample_points(s, s.points.rows(), pick2);
  CHECK(tensors_equal(all.points, s.points));

  CHECK_THROWS_AS(subsample_points(s, 0, pick), CountError);
  CHECK_THROWS_AS(subsample_points(s, 65, pick), CountError);
}

TEST_CASE("sample files round-trip bitwise") {
  TempDir dir;
  std::mt19937_64 rng(21);
  FrustumSample s = generate_sample(small_config(40), 2, rng);
  const std::string path = dir.file("sample.bin");
  write_sample(path, s);

  // size: 12-byte header, f32 block, 8 doubles for box + frustum angle
  const std::size_t n = 40, k = 3;
  CHECK(fs::file_size(path) == 12 + 4 * (8 * n + k + 64) + 64);

  FrustumSample r = read_sample(path);
  CHECK(tensors_equal(r.points, s.points));
  CHECK(tensors_equal(r.one_hot, s.one_hot));
  CHECK(tensors_equal(r.image_feature, s.image_feature));
  CHECK(r.seg_labels == s.seg_labels);
  CHECK(boxes_equal(r.gt_box, s.gt_box));
  CHECK(r.frustum_angle == s.frustum_angle);

  // writing the reread sample reproduces the file byte for byte
  const std::string copy = dir.file("copy.bin");
  write_sample(copy, r);
  CHECK(read_bytes(copy) == read_bytes(path));
}

TEST_CASE("every truncated prefix is rejected") {
  TempDir dir;
  std::mt19937_64 rng(22);
  SyntheticConfig cfg = small_config(8);
  FrustumSample s = generate_sample(cfg, 0, rng);
  const std::string path = dir.file("full.bin");
  write_sample(path, s);
  const std::vector<unsigned char> full = read_bytes(path);

  const std::string cut = dir.file("cut.bin");
  for (std::size_t len = 0; len < full.size(); ++len) {
    write_bytes(cut, {full.begin(), full.begin() + len});
    CHECK_THROWS_AS(read_sample(cut), FormatError);
  }
}

TEST_CASE("format violations report the failing byte offset") {
  TempDir dir;
  std::mt19937_64 rng(23);
  FrustumSample s = generate_sample(small_config(8), 0, rng);
  const std::string good = dir.file("good.bin");
  write_sample(good, s);
  const std::vector<unsigned char> full = read_bytes(good);
  const std::string bad = dir.file("bad.bin");

  auto offset_of = [&](const std::vector<unsigned char>& buf) {
    write_bytes(bad, buf);
    try {
      read_sample(bad);
    } catch (const FormatError& e) {
      return e.byte_offset;
    }
    FAIL("expected a FormatError");
    return std::size_t{0};
  };

  std::vector<unsigned char> magic = full;
  magic[1] ^= 0xff;
  CHECK(offset_of(magic) == 0);

  std::vector<unsigned char> version = full;
  version[4] = 2;
  CHECK(offset_of(version) == 4);

  std::vector<unsigned char> zero_n = full;
  zero_n[6] = zero_n[7] = zero_n[8] = zero_n[9] = 0;
  CHECK(offset_of(zero_n) == 6);

  std::vector<unsigned char> zero_k = full;
  zero_k[10] = zero_k[11] = 0;
  CHECK(offset_of(zero_k) == 10);

  std::vector<unsigned char> trailing = full;
  trailing.push_back(0);
  CHECK(offset_of(trailing) == full.size());

  CHECK_THROWS_AS(read_sample(dir.file("missing.bin")), FormatError);

  // a corrupted box extent surfaces as a format error at the box offset
  std::vector<unsigned char> bad_box = full;
  const std::size_t box_off = full.size() - 64;
  for (int b = 0; b < 8; ++b) bad_box[box_off + 24 + b] = 0;  // h = 0
  write_bytes(bad, bad_box);
  try {
    read_sample(bad);
    FAIL("expected a FormatError");
  } catch (const FormatError& e) {
    CHECK(e.byte_offset == box_off);
    CHECK(std::string(e.what()).find("bad box") != std::string::npos);
  }
}

TEST_CASE("manifest round-trips and drives split loading") {
  TempDir dir;
  std::mt19937_64 rng(31);
  SyntheticConfig cfg = small_config(16);

  DatasetManifest m;
  m.seed = 77;
  m.class_names = {"car-like", "pedestrian-like", "cyclist-like"};
  for (int i = 0; i < 4; ++i) {
    FrustumSample s = generate_sample(cfg, i % 3, rng);
    const std::string name = "s" + std::to_string(i) + ".bin";
    write_sample(dir.file(name), s);
    m.entries.push_back(
        {name, static_cast<std::size_t>(i % 3), i < 3 ? "train" : "eval"});
  }
  write_manifest(dir.path.string(), m);
  CHECK(fs::exists(dir.path / "manifest.json"));
  CHECK(!fs::exists(dir.path / "manifest.json.tmp"));

  DatasetManifest r = read_manifest(dir.path.string());
  CHECK(r.seed == 77);
  CHECK(r.class_names == m.class_names);
  REQUIRE(r.entries.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r.entries[i].path == m.entries[i].path);
    CHECK(r.entries[i].class_id == m.entries[i].class_id);
    CHECK(r.entries[i].split == m.entries[i].split);
  }

  CHECK(load_split(dir.path.string(), r, "train").size() == 3);
  CHECK(load_split(dir.path.string(), r, "eval").size() == 1);
  CHECK(load_split(dir.path.string(), r, "test").empty());
}

TEST_CASE("manifest errors") {
  TempDir dir;
  CHECK_THROWS_AS(read_manifest(dir.path.string()), FormatError);

  std::ofstream(dir.file("manifest.json")) << "{ not json";
  CHECK_THROWS_AS(read_manifest(dir.path.string()), FormatError);

  std::ofstream(dir.file("manifest.json"), std::ios::trunc)
      << R"({"version": 9, "seed": 0, "classes": [], "samples": []})";
  CHECK_THROWS_AS(read_manifest(dir.path.string()), FormatError);
}

TEST_CASE("default synthetic classes are three distinct shapes") {
  std::vector<SyntheticClassSpec> classes = default_synthetic_classes();
  REQUIRE(classes.size() == 3);
  for (const SyntheticClassSpec& c : classes) {
    CHECK(!c.name.empty());
    for (double v : c.mean_size) CHECK(v > 0.0);
    for (double v : c.size_sigma) CHECK(v > 0.0);
  }
  // the car-like class is much longer than the pedestrian-like one
  CHECK(classes[0].mean_size[2] > 3.0 * classes[1].mean_size[2]);
}
