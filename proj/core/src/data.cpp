#include "sifr/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "sifr/errors.hpp"

namespace sifr {
namespace {

static_assert(std::endian::native == std::endian::little,
              "sample files are little-endian and so must the host be");

// Everything stored in 32 bits goes through this at generation time, so the
// in-memory sample and its file round-trip are bit-identical.
double q32(double v) { return static_cast<double>(static_cast<float>(v)); }

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Surface points sit at least this far inside the box, clutter at least this
// far outside; both dwarf f32 rounding (~1e-5 at frustum depths) and the 1e-9
// containment tolerance, so quantization can never flip a label.
constexpr double kInsetLo = 2e-3;
constexpr double kInsetHi = 6e-3;
constexpr double kClutterMargin = 4e-3;

void rotate_z(double theta, double lx, double ly, double lz, double c[3]) {
  const double ct = std::cos(theta), st = std::sin(theta);
  c[0] = lx * ct - ly * st;
  c[1] = lx * st + ly * ct;
  c[2] = lz;
}

}  // namespace

std::size_t FrustumSample::class_id() const {
  std::size_t best = 0;
  for (std::size_t j = 1; j < one_hot.cols(); ++j)
    if (one_hot.at(0, j) > one_hot.at(0, best)) best = j;
  return best;
}

std::vector<SyntheticClassSpec> default_synthetic_classes() {
  return {
      {"car-like", {1.5, 1.7, 4.0}, {0.12, 0.12, 0.35}, {0.55, 0.10, 0.10},
       0.75},
      {"pedestrian-like", {1.75, 0.6, 0.8}, {0.10, 0.06, 0.08},
       {0.10, 0.50, 0.15}, 0.45},
      {"cyclist-like", {1.7, 0.6, 1.8}, {0.10, 0.06, 0.15},
       {0.15, 0.20, 0.60}, 0.60},
  };
}

FrustumSample generate_sample(const SyntheticConfig& cfg, std::size_t class_id,
                              std::mt19937_64& rng) {
  if (cfg.classes.empty()) throw ConfigError("generate_sample: no classes");
  if (class_id >= cfg.classes.size())
    throw LabelError("generate_sample: class id " + std::to_string(class_id) +
                     " out of range");
  if (cfg.points_per_sample < 8)
    throw ConfigError("generate_sample: need at least 8 points per sample");
  if (cfg.clutter_fraction < 0.0 || cfg.clutter_fraction >= 1.0)
    throw ConfigError("generate_sample: clutter fraction outside [0,1)");
  if (cfg.depth_min <= 0.0 || cfg.depth_max < cfg.depth_min)
    throw ConfigError("generate_sample: bad depth range");

  const SyntheticClassSpec& spec = cfg.classes[class_id];
  const std::size_t n = cfg.points_per_sample;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double frustum_angle = wrap_angle(-kPi + 2.0 * kPi * unit(rng));

  double size[3];  // h, w, l
  for (int d = 0; d < 3; ++d) {
    size[d] = spec.mean_size[d] + spec.size_sigma[d] * normal(rng);
    size[d] = std::max(size[d], 0.25 * spec.mean_size[d]);
  }

  const double cx = cfg.depth_min + (cfg.depth_max - cfg.depth_min) * unit(rng);
  double cy = cfg.lateral_sigma * normal(rng);
  cy = std::clamp(cy, -0.25 * cx, 0.25 * cx);  // stay inside the cone
  const double cz = cfg.vertical_sigma * normal(rng);

  double theta;
  if (cfg.heading == HeadingModel::kUniform) {
    theta = wrap_angle(-kPi + 2.0 * kPi * unit(rng));
  } else {
    theta = wrap_angle(kPi + cfg.heading_sigma * normal(rng));
  }

  const Box3D box(cx, cy, cz, size[0], size[1], size[2], theta);

  const std::size_t n_clutter =
      static_cast<std::size_t>(cfg.clutter_fraction * static_cast<double>(n));
  const std::size_t n_obj = n - n_clutter;

  const double hx = box.l / 2.0, hy = box.w / 2.0, hz = box.h / 2.0;
  // Face order: +x (heading), -x, +y, -y, +z, -z. Weighted by area, with the
  // heading face taking an extra front_face_boost share so depth-facing
  // structure survives even under sparse sampling.
  const double area[6] = {box.w * box.h, box.w * box.h, box.l * box.h,
                          box.l * box.h, box.l * box.w, box.l * box.w};
  const double area_sum = 2.0 * (area[0] + area[2] + area[4]);

  struct Raw {
    double p[3];
    double rgb[3];
    double intensity;
  };
  std::vector<Raw> raws(n);

  for (std::size_t i = 0; i < n_obj; ++i) {
    int face = 0;
    if (unit(rng) >= cfg.front_face_boost) {
      double pick = unit(rng) * area_sum;
      for (face = 0; face < 5; ++face) {
        pick -= area[face];
        if (pick <= 0.0) break;
      }
    }
    const double inset = kInsetLo + (kInsetHi - kInsetLo) * unit(rng);
    const double ex = std::max(hx - inset, 0.2 * hx);
    const double ey = std::max(hy - inset, 0.2 * hy);
    const double ez = std::max(hz - inset, 0.2 * hz);
    const double u = 2.0 * unit(rng) - 1.0;
    const double v = 2.0 * unit(rng) - 1.0;
    double local[3];
    switch (face) {
      case 0: local[0] = ex; local[1] = u * ey; local[2] = v * ez; break;
      case 1: local[0] = -ex; local[1] = u * ey; local[2] = v * ez; break;
      case 2: local[0] = u * ex; local[1] = ey; local[2] = v * ez; break;
      case 3: local[0] = u * ex; local[1] = -ey; local[2] = v * ez; break;
      case 4: local[0] = u * ex; local[1] = v * ey; local[2] = ez; break;
      default: local[0] = u * ex; local[1] = v * ey; local[2] = -ez; break;
    }
    Raw& r = raws[i];
    rotate_z(theta, local[0], local[1], local[2], r.p);
    r.p[0] += cx;
    r.p[1] += cy;
    r.p[2] += cz;
    for (int ch = 0; ch < 3; ++ch)
      r.rgb[ch] = clamp01(spec.color[ch] + 0.05 * normal(rng));
    r.intensity = clamp01(spec.intensity + 0.08 * normal(rng));
  }

  for (std::size_t i = n_obj; i < n; ++i) {
    Raw& r = raws[i];
    bool placed = false;
    for (int attempt = 0; attempt < 512 && !placed; ++attempt) {
      r.p[0] = 0.7 * cfg.depth_min +
               (1.15 * cfg.depth_max - 0.7 * cfg.depth_min) * unit(rng);
      r.p[1] = (2.0 * cfg.lateral_sigma + 0.4) * normal(rng);
      r.p[2] = (2.0 * cfg.vertical_sigma + 0.3) * normal(rng);
      placed = !point_in_box(box, {r.p[0], r.p[1], r.p[2]}, kClutterMargin);
    }
    if (!placed) {  // degenerate config; park it safely above the box
      r.p[0] = cx;
      r.p[1] = cy;
      r.p[2] = cz + hz + 1.0 + unit(rng);
    }
    for (int ch = 0; ch < 3; ++ch) r.rgb[ch] = clamp01(0.5 + 0.18 * normal(rng));
    r.intensity = clamp01(0.3 + 0.15 * normal(rng));
  }

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  FrustumSample s;
  s.points = Tensor(n, 7);
  s.seg_labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Raw& r = raws[perm[i]];
    for (int d = 0; d < 3; ++d) s.points.at(i, d) = q32(r.p[d]);
    for (int ch = 0; ch < 3; ++ch) s.points.at(i, 3 + ch) = q32(r.rgb[ch]);
    s.points.at(i, 6) = q32(r.intensity);
    const Point3 p = {s.points.at(i, 0), s.points.at(i, 1), s.points.at(i, 2)};
    s.seg_labels[i] = point_in_box(box, p) ? 1 : 0;
  }

  s.one_hot = Tensor(1, cfg.classes.size());
  s.one_hot.at(0, class_id) = 1.0;

  // Synthetic stand-in for an image backbone: a fixed per-class embedding
  // plus a little noise.
  s.image_feature = Tensor(1, kImageFeatureDim);
  for (std::size_t j = 0; j < kImageFeatureDim; ++j) {
    const double base =
        0.5 + 0.45 * std::sin(0.37 * static_cast<double>(j + 1) *
                              static_cast<double>(class_id + 1));
    s.image_feature.at(0, j) = q32(clamp01(base + 0.02 * normal(rng)));
  }

  s.gt_box = box;
  s.frustum_angle = frustum_angle;
  return s;
}

void validate_sample(const FrustumSample& s) {
  const std::size_t n = s.points.rows();
  if (n == 0) throw InvalidInputError("sample: no points");
  if (s.points.cols() != 7)
    throw InvalidInputError("sample: points must be N x 7");
  if (s.seg_labels.size() != n)
    throw InvalidInputError("sample: label count mismatch");
  if (s.one_hot.rows() != 1 || s.one_hot.cols() == 0)
    throw InvalidInputError("sample: one_hot must be 1 x K");
  if (s.image_feature.rows() != 1 ||
      s.image_feature.cols() != kImageFeatureDim)
    throw InvalidInputError("sample: image_feature must be 1 x " +
                            std::to_string(kImageFeatureDim));

  std::size_t ones = 0;
  for (std::size_t j = 0; j < s.one_hot.cols(); ++j) {
    const double v = s.one_hot.at(0, j);
    if (v == 1.0)
      ++ones;
    else if (v != 0.0)
      throw InvalidInputError("sample: one_hot entries must be 0 or 1");
  }
  if (ones != 1)
    throw InvalidInputError("sample: one_hot must contain exactly one 1");

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 3; c < 7; ++c) {
      const double v = s.points.at(i, c);
      if (!(v >= 0.0 && v <= 1.0))
        throw InvalidInputError("sample: rgb/intensity outside [0,1] at row " +
                                std::to_string(i));
    }
    if (s.seg_labels[i] != 0 && s.seg_labels[i] != 1)
      throw InvalidInputError("sample: label not binary at row " +
                              std::to_string(i));
    const Point3 p = {s.points.at(i, 0), s.points.at(i, 1), s.points.at(i, 2)};
    // A point decisively inside (outside) the box must carry label 1 (0);
    // the 1e-9 band in between is left to the generator's discretion.
    if (point_in_box(s.gt_box, p, -1e-9) && s.seg_labels[i] != 1)
      throw InvalidInputError("sample: interior point labeled 0 at row " +
                              std::to_string(i));
    if (!point_in_box(s.gt_box, p, 1e-9) && s.seg_labels[i] != 0)
      throw InvalidInputError("sample: exterior point labeled 1 at row " +
                              std::to_string(i));
  }
  if (!std::isfinite(s.frustum_angle))
    throw InvalidInputError("sample: non-finite frustum angle");
}

FrustumSample augment_flip(const FrustumSample& s) {
  FrustumSample out = s;
  for (std::size_t i = 0; i < out.points.rows(); ++i)
    out.points.at(i, 1) = -out.points.at(i, 1);
  out.gt_box.cy = -out.gt_box.cy;
  out.gt_box.theta = wrap_angle(-out.gt_box.theta);
  return out;
}

FrustumSample augment_zshift(const FrustumSample& s, double max_shift,
                             std::mt19937_64& rng) {
  if (max_shift < 0.0)
    throw InvalidInputError("augment_zshift: negative max_shift");
  FrustumSample out = s;
  std::uniform_real_distribution<double> dist(-max_shift, max_shift);
  const double shift = max_shift == 0.0 ? 0.0 : dist(rng);
  for (std::size_t i = 0; i < out.points.rows(); ++i)
    out.points.at(i, 0) += shift;  // depth axis
  out.gt_box.cx += shift;
  return out;
}

FrustumSample subsample_points(const FrustumSample& s, std::size_t n,
                               std::mt19937_64& rng) {
  const std::size_t total = s.points.rows();
  if (n == 0 || n > total)
    throw CountError("subsample_points: n = " + std::to_string(n) +
                     " outside [1, " + std::to_string(total) + "]");
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());  // keep the original relative order

  FrustumSample out = s;
  out.points = Tensor(n, 7);
  out.seg_labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 7; ++c)
      out.points.at(i, c) = s.points.at(idx[i], c);
    out.seg_labels[i] = s.seg_labels[idx[i]];
  }
  return out;
}

namespace {

void put_bytes(std::ofstream& out, const void* p, std::size_t n,
               std::size_t& offset, const std::string& path) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!out) throw FormatError(path + ": short write", offset);
  offset += n;
}

template <typename T>
void put(std::ofstream& out, T v, std::size_t& offset,
         const std::string& path) {
  put_bytes(out, &v, sizeof v, offset, path);
}

struct Cursor {
  const std::vector<unsigned char>& buf;
  const std::string& path;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) {
    if (buf.size() - pos < n)
      throw FormatError(path + ": truncated while reading " +
                            std::string(what),
                        pos);
  }
  template <typename T>
  T take(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
};

}  // namespace

void write_sample(const std::string& path, const FrustumSample& s) {
  const std::size_t n = s.points.rows();
  if (n == 0 || s.points.cols() != 7 || s.seg_labels.size() != n ||
      s.one_hot.rows() != 1 || s.image_feature.rows() != 1 ||
      s.image_feature.cols() != kImageFeatureDim)
    throw DimensionError("write_sample: malformed sample");
  if (s.one_hot.cols() == 0 || s.one_hot.cols() > 0xffff)
    throw DimensionError("write_sample: class count does not fit the format");
  if (n > 0xffffffffull)
    throw DimensionError("write_sample: too many points for the format");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  std::size_t offset = 0;
  if (!out) throw FormatError(path + ": cannot open for writing", offset);

  put_bytes(out, "FRUS", 4, offset, path);
  put<std::uint16_t>(out, 1, offset, path);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(n), offset, path);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(s.one_hot.cols()), offset,
                     path);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < 7; ++c)
      put<float>(out, static_cast<float>(s.points.at(i, c)), offset, path);
  for (std::size_t j = 0; j < s.one_hot.cols(); ++j)
    put<float>(out, static_cast<float>(s.one_hot.at(0, j)), offset, path);
  for (std::size_t j = 0; j < kImageFeatureDim; ++j)
    put<float>(out, static_cast<float>(s.image_feature.at(0, j)), offset,
               path);
  for (std::size_t i = 0; i < n; ++i)
    put<float>(out, static_cast<float>(s.seg_labels[i]), offset, path);

  const double boxed[7] = {s.gt_box.cx, s.gt_box.cy, s.gt_box.cz, s.gt_box.h,
                           s.gt_box.w,  s.gt_box.l,  s.gt_box.theta};
  for (double v : boxed) put<double>(out, v, offset, path);
  put<double>(out, s.frustum_angle, offset, path);
  out.close();
  if (!out) throw FormatError(path + ": close failed", offset);
}

FrustumSample read_sample(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open", 0);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  Cursor cur{buf, path};

  cur.need(4, "magic");
  if (std::memcmp(buf.data(), "FRUS", 4) != 0)
    throw FormatError(path + ": bad magic", 0);
  cur.pos = 4;
  const auto version = cur.take<std::uint16_t>("version");
  if (version != 1)
    throw FormatError(path + ": unsupported version " +
                          std::to_string(version),
                      4);
  const auto n = cur.take<std::uint32_t>("point count");
  const auto k = cur.take<std::uint16_t>("class count");
  if (n == 0) throw FormatError(path + ": zero points", 6);
  if (k == 0) throw FormatError(path + ": zero classes", 10);

  FrustumSample s;
  s.points = Tensor(n, 7);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < 7; ++c)
      s.points.at(i, c) = cur.take<float>("points");
  s.one_hot = Tensor(1, k);
  for (std::size_t j = 0; j < k; ++j)
    s.one_hot.at(0, j) = cur.take<float>("one_hot");
  s.image_feature = Tensor(1, kImageFeatureDim);
  for (std::size_t j = 0; j < kImageFeatureDim; ++j)
    s.image_feature.at(0, j) = cur.take<float>("image_feature");
  s.seg_labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float v = cur.take<float>("seg_labels");
    s.seg_labels[i] = v != 0.0f ? 1 : 0;
  }

  const std::size_t box_offset = cur.pos;
  double boxed[7];
  for (double& v : boxed) v = cur.take<double>("box");
  try {
    s.gt_box = Box3D(boxed[0], boxed[1], boxed[2], boxed[3], boxed[4],
                     boxed[5], boxed[6]);
  } catch (const std::exception& e) {
    throw FormatError(path + ": bad box: " + e.what(), box_offset);
  }
  const std::size_t angle_offset = cur.pos;
  s.frustum_angle = cur.take<double>("frustum_angle");
  if (!std::isfinite(s.frustum_angle))
    throw FormatError(path + ": non-finite frustum angle", angle_offset);

  if (cur.pos != buf.size())
    throw FormatError(path + ": trailing bytes", cur.pos);
  return s;
}

void write_manifest(const std::string& dir, const DatasetManifest& m) {
  nlohmann::json j;
  j["version"] = 1;
  j["seed"] = m.seed;
  j["classes"] = m.class_names;
  j["samples"] = nlohmann::json::array();
  for (const ManifestEntry& e : m.entries) {
    j["samples"].push_back(
        {{"path", e.path}, {"class", e.class_id}, {"split", e.split}});
  }

  namespace fs = std::filesystem;
  const fs::path final_path = fs::path(dir) / "manifest.json";
  const fs::path tmp_path = fs::path(dir) / "manifest.json.tmp";
  {
    std::ofstream out(tmp_path);
    if (!out)
      throw FormatError(tmp_path.string() + ": cannot open for writing", 0);
    out << j.dump(2) << '\n';
    out.close();
    if (!out) throw FormatError(tmp_path.string() + ": write failed", 0);
  }
  // Rename last: a visible manifest always describes a complete dataset.
  std::error_code ec;
  fs::rename(tmp_path, final_path, ec);
  if (ec)
    throw FormatError(final_path.string() + ": rename failed: " + ec.message(),
                      0);
}

DatasetManifest read_manifest(const std::string& dir) {
  namespace fs = std::filesystem;
  const std::string path = (fs::path(dir) / "manifest.json").string();
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open", 0);

  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what(), 0);
  }
  try {
    if (j.at("version").get<int>() != 1)
      throw FormatError(path + ": unsupported manifest version", 0);
    DatasetManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.class_names = j.at("classes").get<std::vector<std::string>>();
    for (const auto& e : j.at("samples")) {
      m.entries.push_back({e.at("path").get<std::string>(),
                           e.at("class").get<std::size_t>(),
                           e.at("split").get<std::string>()});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what(), 0);
  }
}

std::vector<FrustumSample> load_split(const std::string& dir,
                                      const DatasetManifest& m,
                                      const std::string& split) {
  namespace fs = std::filesystem;
  std::vector<FrustumSample> out;
  for (const ManifestEntry& e : m.entries) {
    if (e.split != split) continue;
    out.push_back(read_sample((fs::path(dir) / e.path).string()));
  }
  return out;
}

}  // namespace sifr
