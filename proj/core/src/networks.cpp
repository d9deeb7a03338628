#include "sifr/networks.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <fstream>
#include <random>

static_assert(std::endian::native == std::endian::little,
              "checkpoint and sample formats assume a little-endian host");

namespace sifr {

namespace {

std::string layer_name(const std::string& prefix, std::size_t i,
                       const char* kind) {
  return prefix + "." + std::to_string(i) + "." + kind;
}

void reg_mlp(ParamStore& s, const std::string& prefix, std::size_t in,
             const std::vector<std::size_t>& widths,
             std::vector<Parameter*>& ws, std::vector<Parameter*>& bs) {
  std::size_t cur = in;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    ws.push_back(s.add(layer_name(prefix, i, "w"), cur, widths[i]));
    bs.push_back(s.add(layer_name(prefix, i, "b"), 1, widths[i]));
    cur = widths[i];
  }
}

SharedMLPParams bind_mlp(const TapeBinding& bind,
                         const std::vector<Parameter*>& ws,
                         const std::vector<Parameter*>& bs) {
  SharedMLPParams p;
  p.w.reserve(ws.size());
  p.b.reserve(bs.size());
  for (std::size_t i = 0; i < ws.size(); ++i) {
    p.w.push_back(bind(ws[i]));
    p.b.push_back(bind(bs[i]));
  }
  return p;
}

Tensor xyz_of(const Tensor& points) {
  Tensor out(points.rows(), 3);
  for (std::size_t r = 0; r < points.rows(); ++r) {
    for (int d = 0; d < 3; ++d) out.at(r, d) = points.at(r, d);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// ParamStore / TapeBinding

Parameter* ParamStore::add(std::string name, std::size_t rows,
                           std::size_t cols) {
  if (by_name_.count(name)) {
    throw ConfigError("duplicate parameter name: " + name);
  }
  owned_.push_back(
      std::make_unique<Parameter>(name, Tensor(rows, cols)));
  Parameter* p = owned_.back().get();
  by_name_.emplace(std::move(name), p);
  return p;
}

Parameter* ParamStore::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

std::vector<Parameter*> ParamStore::pointers() const {
  std::vector<Parameter*> out;
  out.reserve(owned_.size());
  for (const auto& p : owned_) out.push_back(p.get());
  return out;
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& p : owned_) n += p->value.size();
  return n;
}

void ParamStore::init_random(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& p : owned_) {
    if (p->name.find(".b") != std::string::npos) {
      std::fill(p->value.data().begin(), p->value.data().end(), 0.0);
    } else {
      const double sd = std::sqrt(2.0 / static_cast<double>(p->value.rows()));
      for (double& v : p->value.data()) v = sd * normal(rng);
    }
    std::fill(p->m.begin(), p->m.end(), 0.0);
    std::fill(p->v.begin(), p->v.end(), 0.0);
  }
}

TapeBinding::TapeBinding(Tape* tape, const std::vector<Parameter*>& params)
    : tape_(tape), order_(params) {
  bound_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    index_.emplace(params[i], i);
    bound_.push_back(tape ? tape->leaf(params[i]->value) : params[i]->value);
  }
}

const Tensor& TapeBinding::operator()(const Parameter* p) const {
  auto it = index_.find(p);
  if (it == index_.end()) {
    throw ConfigError("parameter not bound: " + (p ? p->name : "<null>"));
  }
  return bound_[it->second];
}

std::vector<std::vector<double>> TapeBinding::grads() const {
  if (!tape_) throw ConfigError("gradients requested from a tape-less binding");
  std::vector<std::vector<double>> out;
  out.reserve(bound_.size());
  for (const auto& t : bound_) out.push_back(tape_->grad(t));
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'I', 'F', 'R'};
constexpr std::uint16_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open checkpoint for writing: " + path, 0);
  auto put = [&out](const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  };
  put(kCheckpointMagic, 4);
  put(&kCheckpointVersion, 2);
  const auto params = store.pointers();
  const std::uint32_t count = static_cast<std::uint32_t>(params.size());
  put(&count, 4);
  for (const Parameter* p : params) {
    const std::uint16_t nlen = static_cast<std::uint16_t>(p->name.size());
    put(&nlen, 2);
    put(p->name.data(), nlen);
    const std::uint32_t rows = static_cast<std::uint32_t>(p->value.rows());
    const std::uint32_t cols = static_cast<std::uint32_t>(p->value.cols());
    put(&rows, 4);
    put(&cols, 4);
    put(p->value.data().data(), 8 * p->value.size());
  }
  out.flush();
  if (!out) throw FormatError("short write to checkpoint: " + path, 0);
}

void load_checkpoint(const std::string& path, ParamStore& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path, 0);
  std::size_t offset = 0;
  auto get = [&in, &offset](void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
      throw FormatError("truncated checkpoint", offset);
    }
    offset += n;
  };
  char magic[4];
  get(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw FormatError("bad checkpoint magic", 0);
  }
  std::uint16_t version = 0;
  get(&version, 2);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " +
                          std::to_string(version),
                      4);
  }
  std::uint32_t count = 0;
  get(&count, 4);
  std::size_t loaded = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint16_t nlen = 0;
    get(&nlen, 2);
    std::string name(nlen, '\0');
    get(name.data(), nlen);
    std::uint32_t rows = 0, cols = 0;
    get(&rows, 4);
    get(&cols, 4);
    Parameter* p = store.find(name);
    if (!p) {
      throw DimensionError("checkpoint parameter not in model: " + name);
    }
    if (p->value.rows() != rows || p->value.cols() != cols) {
      throw DimensionError("checkpoint shape mismatch for " + name + ": file " +
                           std::to_string(rows) + "x" + std::to_string(cols) +
                           ", model " + std::to_string(p->value.rows()) + "x" +
                           std::to_string(p->value.cols()));
    }
    get(p->value.data().data(), 8 * p->value.size());
    ++loaded;
  }
  if (loaded != store.pointers().size()) {
    throw DimensionError("checkpoint covers " + std::to_string(loaded) +
                         " of " + std::to_string(store.pointers().size()) +
                         " model parameters");
  }
}

// ---------------------------------------------------------------------------
// Templates and box coding

ClassTemplates ClassTemplates::from_class_means(
    const std::vector<std::array<double, 3>>& means, std::size_t ns,
    std::size_t nh) {
  if (means.empty() || ns == 0 || nh == 0) {
    throw InvalidInputError("templates need >= 1 class, template and bin");
  }
  ClassTemplates t;
  t.num_classes = means.size();
  t.ns = ns;
  t.nh = nh;
  t.sizes.reserve(means.size() * ns);
  for (const auto& m : means) {
    for (std::size_t k = 0; k < ns; ++k) {
      // Spread templates around the class mean so the size classifier has
      // distinguishable targets.
      const double f =
          ns == 1 ? 1.0
                  : 0.7 + 0.6 * static_cast<double>(k) /
                              static_cast<double>(ns - 1);
      t.sizes.push_back({m[0] * f, m[1] * f, m[2] * f});
    }
  }
  return t;
}

double ClassTemplates::bin_center(std::size_t bin) const {
  if (bin >= nh) throw LabelError("heading bin out of range");
  return -kPi + (static_cast<double>(bin) + 0.5) * (2.0 * kPi / static_cast<double>(nh));
}

std::size_t ClassTemplates::heading_bin(double theta) const {
  const double w = wrap_angle(theta);
  const double width = 2.0 * kPi / static_cast<double>(nh);
  const double u = (w + kPi) / width;
  const auto bin = static_cast<std::size_t>(std::max(0.0, std::floor(u)));
  return std::min(bin, nh - 1);
}

const std::array<double, 3>& ClassTemplates::size_of(std::size_t class_id,
                                                     std::size_t t) const {
  if (class_id >= num_classes || t >= ns) {
    throw LabelError("template index out of range");
  }
  return sizes[class_id * ns + t];
}

std::size_t ClassTemplates::nearest_template(
    std::size_t class_id, const std::array<double, 3>& hwl) const {
  if (class_id >= num_classes) throw LabelError("class id out of range");
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < ns; ++t) {
    const auto& s = sizes[class_id * ns + t];
    const double dh = hwl[0] - s[0], dw = hwl[1] - s[1], dl = hwl[2] - s[2];
    const double d2 = dh * dh + dw * dw + dl * dl;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = t;
    }
  }
  return best;
}

namespace {

std::size_t argmax_span(const Tensor& raw, std::size_t off, std::size_t n) {
  std::size_t best = 0;
  double bv = raw.at(0, off);
  for (std::size_t i = 1; i < n; ++i) {
    if (raw.at(0, off + i) > bv) {
      bv = raw.at(0, off + i);
      best = i;
    }
  }
  return best;
}

}  // namespace

std::array<double, 3> BoxPrediction::center_residual() const {
  return {raw.at(0, 0), raw.at(0, 1), raw.at(0, 2)};
}

std::size_t BoxPrediction::argmax_size() const {
  return argmax_span(raw, size_score_off(), ns);
}

std::size_t BoxPrediction::argmax_heading() const {
  return argmax_span(raw, heading_score_off(), nh);
}

std::array<double, 3> BoxPrediction::size_residual(std::size_t t) const {
  const std::size_t off = size_res_off() + 3 * t;
  return {raw.at(0, off), raw.at(0, off + 1), raw.at(0, off + 2)};
}

double BoxPrediction::heading_residual(std::size_t bin) const {
  return raw.at(0, heading_res_off() + bin);
}

Box3D decode_box(const BoxPrediction& pred, const Point3& mask_centroid,
                 const Point3& tnet_delta, const ClassTemplates& tpl,
                 std::size_t class_id) {
  if (pred.ns != tpl.ns || pred.nh != tpl.nh) {
    throw DimensionError("decode_box: prediction/template bin counts differ");
  }
  if (pred.raw.rows() != 1 || pred.raw.cols() != pred.dim()) {
    throw DimensionError("decode_box: raw vector has wrong length");
  }
  const auto cr = pred.center_residual();
  const double cx = mask_centroid[0] - tnet_delta[0] + cr[0];
  const double cy = mask_centroid[1] - tnet_delta[1] + cr[1];
  const double cz = mask_centroid[2] - tnet_delta[2] + cr[2];
  const std::size_t t = pred.argmax_size();
  const auto& base = tpl.size_of(class_id, t);
  const auto sr = pred.size_residual(t);
  // Guard against wild residuals from an untrained head; a box must keep
  // positive extents.
  const double h = std::max(base[0] * (1.0 + sr[0]), 1e-3);
  const double w = std::max(base[1] * (1.0 + sr[1]), 1e-3);
  const double l = std::max(base[2] * (1.0 + sr[2]), 1e-3);
  const std::size_t bin = pred.argmax_heading();
  const double theta = tpl.bin_center(bin) + pred.heading_residual(bin);
  return Box3D(cx, cy, cz, h, w, l, theta);
}

BoxTargets make_box_targets(const Box3D& gt, const ClassTemplates& tpl,
                            std::size_t class_id) {
  BoxTargets t;
  t.center = {gt.cx, gt.cy, gt.cz};
  t.theta = gt.theta;
  t.size_template = tpl.nearest_template(class_id, {gt.h, gt.w, gt.l});
  const auto& base = tpl.size_of(class_id, t.size_template);
  t.size_residual = {gt.h / base[0] - 1.0, gt.w / base[1] - 1.0,
                     gt.l / base[2] - 1.0};
  t.heading_bin = tpl.heading_bin(gt.theta);
  t.heading_residual = wrap_angle(gt.theta - tpl.bin_center(t.heading_bin));
  return t;
}

BoxPrediction encode_box(const Box3D& gt, const Point3& mask_centroid,
                         const Point3& tnet_delta, const ClassTemplates& tpl,
                         std::size_t class_id) {
  const BoxTargets t = make_box_targets(gt, tpl, class_id);
  BoxPrediction pred;
  pred.ns = tpl.ns;
  pred.nh = tpl.nh;
  pred.raw = Tensor(1, pred.dim());
  for (int d = 0; d < 3; ++d) {
    pred.raw.at(0, d) =
        t.center[d] - (mask_centroid[d] - tnet_delta[d]);
  }
  pred.raw.at(0, pred.size_score_off() + t.size_template) = 1.0;
  for (int d = 0; d < 3; ++d) {
    pred.raw.at(0, pred.size_res_off() + 3 * t.size_template + d) =
        t.size_residual[d];
  }
  pred.raw.at(0, pred.heading_score_off() + t.heading_bin) = 1.0;
  pred.raw.at(0, pred.heading_res_off() + t.heading_bin) = t.heading_residual;
  return pred;
}

// ---------------------------------------------------------------------------
// Point-UNet

PointUNet::SiftP PointUNet::register_sift(ParamStore& store,
                                          const std::string& prefix,
                                          std::size_t in_width) const {
  const std::size_t w = cfg_.sift_width;
  SiftP p;
  p.w1 = store.add(prefix + ".x.w", 2 * in_width, w);
  p.b1 = store.add(prefix + ".x.b", 1, w);
  p.w2 = store.add(prefix + ".y.w", 2 * w, w);
  p.b2 = store.add(prefix + ".y.b", 1, w);
  p.w3 = store.add(prefix + ".z.w", 2 * w, w);
  p.b3 = store.add(prefix + ".z.b", 1, w);
  return p;
}

PointSIFTParams PointUNet::bind_sift(const SiftP& p,
                                     const TapeBinding& bind) const {
  return {bind(p.w1), bind(p.b1), bind(p.w2), bind(p.b2),
          bind(p.w3), bind(p.b3)};
}

PointUNet::PointUNet(const UNetConfig& cfg, ParamStore& store) : cfg_(cfg) {
  reg_mlp(store, "unet.sa1", 3 + 4, cfg_.sa1_mlp, sa1_w_, sa1_b_);
  reg_mlp(store, "unet.sa2", 3 + cfg_.sa1_mlp.back(), cfg_.sa2_mlp, sa2_w_,
          sa2_b_);
  sift1_ = register_sift(store, "unet.sift1", cfg_.sa2_mlp.back());
  sift2_ = register_sift(store, "unet.sift2", cfg_.sift_width);
  reg_mlp(store, "unet.global", 3 + cfg_.sift_width, cfg_.global_mlp, glob_w_,
          glob_b_);
  if (cfg_.fp_widths.size() != 3) {
    throw ConfigError("point-unet needs exactly three fp widths");
  }
  const std::size_t fused =
      cfg_.global_mlp.back() + cfg_.num_classes + cfg_.image_feature_dim;
  reg_mlp(store, "unet.fp1", fused + cfg_.sift_width, {cfg_.fp_widths[0]},
          fp1_w_, fp1_b_);
  reg_mlp(store, "unet.fp2", cfg_.fp_widths[0] + cfg_.sa1_mlp.back(),
          {cfg_.fp_widths[1]}, fp2_w_, fp2_b_);
  reg_mlp(store, "unet.fp3", cfg_.fp_widths[1] + 4, {cfg_.fp_widths[2]},
          fp3_w_, fp3_b_);
  head_w1_ = store.add("unet.head.0.w", cfg_.fp_widths[2], cfg_.head_hidden);
  head_b1_ = store.add("unet.head.0.b", 1, cfg_.head_hidden);
  head_w2_ = store.add("unet.head.1.w", cfg_.head_hidden, 2);
  head_b2_ = store.add("unet.head.1.b", 1, 2);
}

SegmentationOutput PointUNet::forward(const PointUNetInput& in,
                                      const TapeBinding& bind) const {
  const std::size_t n = in.points.rows();
  if (n == 0) throw EmptyInputError("point_unet_forward: no points");
  if (in.points.cols() != 7) {
    throw DimensionError("point_unet_forward: points must be Nx7");
  }
  if (in.one_hot.rows() != 1 || in.one_hot.cols() != cfg_.num_classes) {
    throw DimensionError("point_unet_forward: one-hot width mismatch");
  }
  std::size_t nonzero = 0;
  for (double v : in.one_hot.data()) nonzero += (v != 0.0);
  if (nonzero != 1) {
    throw InvalidInputError(
        "point_unet_forward: one-hot must have exactly one nonzero entry");
  }
  if (in.image_feature.rows() != 1 ||
      in.image_feature.cols() != cfg_.image_feature_dim) {
    throw DimensionError("point_unet_forward: image feature width mismatch");
  }

  Tensor coords = xyz_of(in.points);
  Tensor feats0(n, 4);
  for (std::size_t r = 0; r < n; ++r) {
    for (int d = 0; d < 4; ++d) feats0.at(r, d) = in.points.at(r, 3 + d);
  }

  SAConfig c1{std::min(cfg_.sa1_centroids, n), cfg_.sa1_radius,
              cfg_.sa1_group, false, 0};
  PointSet sa1 = sa_module({coords, feats0}, c1, bind_mlp(bind, sa1_w_, sa1_b_));
  SAConfig c2{std::min(cfg_.sa2_centroids, sa1.coords.rows()), cfg_.sa2_radius,
              cfg_.sa2_group, false, 0};
  PointSet sa2 = sa_module(sa1, c2, bind_mlp(bind, sa2_w_, sa2_b_));

  PointSet s1 = pointsift_module(sa2, bind_sift(sift1_, bind));
  PointSet s2 = pointsift_module(s1, bind_sift(sift2_, bind));

  SAConfig cg{0, 0.0, 1, true, 0};
  PointSet glob = sa_module(s2, cg, bind_mlp(bind, glob_w_, glob_b_));
  Tensor fused =
      concat_cols(concat_cols(glob.features, in.one_hot), in.image_feature);

  Tensor up1 = fp_module({glob.coords, fused}, s2.coords, s2.features,
                         bind_mlp(bind, fp1_w_, fp1_b_));
  Tensor up2 = fp_module({s2.coords, up1}, sa1.coords, sa1.features,
                         bind_mlp(bind, fp2_w_, fp2_b_));
  Tensor up3 = fp_module({sa1.coords, up2}, coords, feats0,
                         bind_mlp(bind, fp3_w_, fp3_b_));

  Tensor hidden =
      shared_mlp(up3, bind(head_w1_), bind(head_b1_), Activation::kRelu);
  Tensor logits =
      shared_mlp(hidden, bind(head_w2_), bind(head_b2_), Activation::kLinear);

  SegmentationOutput out;
  out.logits = logits;
  out.probabilities.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    out.probabilities[r] = softmax_row_values(logits, r)[1];
  }
  return out;
}

MaskSelection mask_select(const Tensor& points,
                          const std::vector<double>& probabilities,
                          double threshold) {
  if (points.cols() != 7) {
    throw DimensionError("mask_select: points must be Nx7");
  }
  if (probabilities.size() != points.rows()) {
    throw DimensionError("mask_select: one probability per point required");
  }
  MaskSelection sel;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (probabilities[i] > threshold) sel.indices.push_back(i);
  }
  if (sel.indices.empty() && points.rows() > 0) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probabilities.size(); ++i) {
      if (probabilities[i] > probabilities[best]) best = i;
    }
    sel.indices.push_back(best);
  }
  const std::size_t m = sel.indices.size();
  sel.interest = Tensor(m, 4);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t i = sel.indices[r];
    for (int d = 0; d < 3; ++d) {
      sel.interest.at(r, d) = points.at(i, d);
      sel.centroid[d] += points.at(i, d) / static_cast<double>(m);
    }
    sel.interest.at(r, 3) = points.at(i, 6);
  }
  return sel;
}

// ---------------------------------------------------------------------------
// T-Net

TNet::TNet(const TNetConfig& cfg, ParamStore& store) : cfg_(cfg) {
  reg_mlp(store, "tnet.sa", 3 + 1, cfg_.sa_mlp, sa_w_, sa_b_);
  w1_ = store.add("tnet.fc.0.w", cfg_.sa_mlp.back(), cfg_.hidden);
  b1_ = store.add("tnet.fc.0.b", 1, cfg_.hidden);
  w2_ = store.add("tnet.fc.1.w", cfg_.hidden, 3);
  b2_ = store.add("tnet.fc.1.b", 1, 3);
}

TNetOutput TNet::forward(const Tensor& interest,
                         const TapeBinding& bind) const {
  if (interest.rows() == 0) throw EmptyInputError("tnet_forward: no points");
  if (interest.cols() != 4) {
    throw DimensionError("tnet_forward: interest must be Mx4");
  }
  const std::size_t m = interest.rows();
  Tensor coords = xyz_of(interest);
  Tensor inten(m, 1);
  for (std::size_t r = 0; r < m; ++r) inten.at(r, 0) = interest.at(r, 3);

  SAConfig cg{0, 0.0, 1, true, 0};
  PointSet glob = sa_module({coords, inten}, cg, bind_mlp(bind, sa_w_, sa_b_));
  Tensor hidden =
      shared_mlp(glob.features, bind(w1_), bind(b1_), Activation::kRelu);
  Tensor delta = shared_mlp(hidden, bind(w2_), bind(b2_), Activation::kLinear);
  Tensor translated = add(coords, broadcast_rows(delta, m));
  return {delta, translated};
}

// ---------------------------------------------------------------------------
// Point-SENet

PointSENet::PointSENet(const SENetConfig& cfg, ParamStore& store) : cfg_(cfg) {
  if (cfg_.conv3 != cfg_.conv2) {
    throw ConfigError(
        "point-senet: conv3 width must equal conv2 width (residual sum)");
  }
  if (cfg_.se_r == 0 || cfg_.conv3 % cfg_.se_r != 0) {
    throw ConfigError("point-senet: reduction rate must divide conv3 width");
  }
  reg_mlp(store, "senet.conv", 3, {cfg_.conv1, cfg_.conv2}, conv_w_, conv_b_);
  conv3_w_ = store.add("senet.conv3.w", cfg_.conv2, cfg_.conv3);
  conv3_b_ = store.add("senet.conv3.b", 1, cfg_.conv3);
  const std::size_t mid = cfg_.conv3 / cfg_.se_r;
  se_w1_ = store.add("senet.se.0.w", cfg_.conv3, mid);
  se_b1_ = store.add("senet.se.0.b", 1, mid);
  se_w2_ = store.add("senet.se.1.w", mid, cfg_.conv3);
  se_b2_ = store.add("senet.se.1.b", 1, cfg_.conv3);
  lift_w_ = store.add("senet.lift.w", cfg_.conv3, cfg_.lift);
  lift_b_ = store.add("senet.lift.b", 1, cfg_.lift);
  const std::size_t out_dim = 3 + 4 * cfg_.ns + 2 * cfg_.nh;
  fc1_w_ = store.add("senet.fc.0.w", cfg_.lift, cfg_.fc1);
  fc1_b_ = store.add("senet.fc.0.b", 1, cfg_.fc1);
  fc2_w_ = store.add("senet.fc.1.w", cfg_.fc1, cfg_.fc2);
  fc2_b_ = store.add("senet.fc.1.b", 1, cfg_.fc2);
  fc3_w_ = store.add("senet.fc.2.w", cfg_.fc2, out_dim);
  fc3_b_ = store.add("senet.fc.2.b", 1, out_dim);
}

BoxPrediction PointSENet::forward(const Tensor& translated,
                                  const TapeBinding& bind,
                                  SEIntermediates* se_inter) const {
  if (translated.rows() == 0) {
    throw EmptyInputError("point_senet_forward: no points");
  }
  if (translated.cols() != 3) {
    throw DimensionError("point_senet_forward: input must be Mx3");
  }
  Tensor xstar = run_shared_mlp(translated, bind_mlp(bind, conv_w_, conv_b_));
  SharedMLPParams conv3{{bind(conv3_w_)}, {bind(conv3_b_)}};
  SEParams se{bind(se_w1_), bind(se_b1_), bind(se_w2_), bind(se_b2_),
              cfg_.se_r};
  Tensor fse = se_forward(xstar, conv3, se, se_inter);
  Tensor lifted =
      shared_mlp(fse, bind(lift_w_), bind(lift_b_), Activation::kRelu);
  Tensor pooled = max_rows(lifted);
  Tensor h1 = shared_mlp(pooled, bind(fc1_w_), bind(fc1_b_), Activation::kRelu);
  Tensor h2 = shared_mlp(h1, bind(fc2_w_), bind(fc2_b_), Activation::kRelu);
  Tensor raw = shared_mlp(h2, bind(fc3_w_), bind(fc3_b_), Activation::kLinear);
  BoxPrediction pred;
  pred.ns = cfg_.ns;
  pred.nh = cfg_.nh;
  pred.raw = raw;
  return pred;
}

}  // namespace sifr
