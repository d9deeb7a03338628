#include "sifr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "sifr/errors.hpp"

namespace sifr {
namespace {

RunConfig normalized(RunConfig cfg) {
  // The segmentation net's fused widths follow the data configuration.
  cfg.unet.num_classes = cfg.synth.classes.size();
  cfg.unet.image_feature_dim = kImageFeatureDim;
  return cfg;
}

ClassTemplates templates_for(const RunConfig& cfg) {
  std::vector<std::array<double, 3>> means;
  for (const SyntheticClassSpec& c : cfg.synth.classes)
    means.push_back(c.mean_size);
  return ClassTemplates::from_class_means(means, cfg.senet.ns, cfg.senet.nh);
}

}  // namespace

Pipeline::Pipeline(const RunConfig& config)
    : cfg(normalized(config)),
      store(),
      unet(cfg.unet, store),
      tnet(cfg.tnet, store),
      senet(cfg.senet, store),
      templates(templates_for(cfg)) {}

ForwardResult forward_sample(const Pipeline& p, const TapeBinding& bind,
                             const FrustumSample& s) {
  ForwardResult f;
  f.seg = p.unet.forward({s.points, s.one_hot, s.image_feature}, bind);
  f.sel = mask_select(s.points, f.seg.probabilities, p.cfg.mask_threshold);

  // Interest xyz re-expressed relative to the mask centroid (constant shift,
  // so no gradient is lost).
  Tensor centered = f.sel.interest;
  for (std::size_t i = 0; i < centered.rows(); ++i)
    for (std::size_t d = 0; d < 3; ++d)
      centered.at(i, d) -= f.sel.centroid[d];

  const TNetOutput tn = p.tnet.forward(centered, bind);
  f.tnet_delta = tn.delta;
  const Tensor centroid(
      1, 3, {f.sel.centroid[0], f.sel.centroid[1], f.sel.centroid[2]});
  f.tnet_center = sub(centroid, tn.delta);

  f.pred = p.senet.forward(tn.translated, bind);
  f.final_center = add(f.tnet_center, slice_cols(f.pred.raw, 0, 3));

  const std::size_t cls = s.class_id();
  const Point3 delta{f.tnet_delta.at(0, 0), f.tnet_delta.at(0, 1),
                     f.tnet_delta.at(0, 2)};
  f.decoded = decode_box(f.pred, f.sel.centroid, delta, p.templates, cls);

  // Confidence: mean mask probability times the two softmax peaks. Values
  // only, so the tape stays clean.
  double seg_conf = 0.0;
  for (std::size_t i : f.sel.indices) seg_conf += f.seg.probabilities[i];
  seg_conf /= static_cast<double>(f.sel.indices.size());
  Tensor size_scores(1, f.pred.ns);
  for (std::size_t t = 0; t < f.pred.ns; ++t)
    size_scores.at(0, t) = f.pred.raw.at(0, f.pred.size_score_off() + t);
  Tensor head_scores(1, f.pred.nh);
  for (std::size_t b = 0; b < f.pred.nh; ++b)
    head_scores.at(0, b) = f.pred.raw.at(0, f.pred.heading_score_off() + b);
  const std::vector<double> sp = softmax_row_values(size_scores, 0);
  const std::vector<double> hp = softmax_row_values(head_scores, 0);
  f.score = seg_conf * *std::max_element(sp.begin(), sp.end()) *
            *std::max_element(hp.begin(), hp.end());
  return f;
}

TotalLossInputs build_losses(const Pipeline& p, const ForwardResult& f,
                             const FrustumSample& s, bool fine_tune_angle) {
  const std::size_t cls = s.class_id();
  const BoxTargets t = make_box_targets(s.gt_box, p.templates, cls);
  const BinMask mask{p.templates.ns, p.templates.nh, t.size_template,
                     t.heading_bin};

  TotalLossInputs parts;
  parts.seg = seg_loss(f.seg.logits, s.seg_labels);

  const CenterLosses centers =
      center_losses(f.tnet_center, f.final_center, t.center);
  parts.tnet_center = centers.tnet;
  parts.center_reg = centers.reg;

  const Tensor& raw = f.pred.raw;
  const std::size_t ns = f.pred.ns;
  const std::size_t nh = f.pred.nh;
  parts.size_cls = size_cls_loss(
      slice_cols(raw, f.pred.size_score_off(), f.pred.size_score_off() + ns),
      t.size_template);
  parts.angle_cls = angle_cls_loss(
      slice_cols(raw, f.pred.heading_score_off(),
                 f.pred.heading_score_off() + nh),
      t.heading_bin);

  // Stack the per-template residual triples into the ns x 3 block the size
  // regression expects.
  const std::size_t sro = f.pred.size_res_off();
  Tensor size_res = slice_cols(raw, sro, sro + 3);
  for (std::size_t k = 1; k < ns; ++k)
    size_res =
        concat_rows(size_res, slice_cols(raw, sro + 3 * k, sro + 3 * k + 3));
  parts.size_reg = size_reg_loss(size_res, t.size_residual, mask);

  const std::size_t hro = f.pred.heading_res_off();
  const Tensor head_res = slice_cols(raw, hro, hro + nh);
  if (fine_tune_angle) {
    // Masked-bin 2-2cos over the (template, bin) grid; the per-batch mean
    // outside supplies the 1/B.
    const Tensor pred_grid =
        broadcast_rows(reconstructed_angles(head_res, p.templates), ns);
    Tensor gt_grid(ns, nh);
    for (std::size_t m = 0; m < ns; ++m)
      for (std::size_t n = 0; n < nh; ++n) gt_grid.at(m, n) = t.theta;
    parts.angle_reg = angle_reg_loss(pred_grid, gt_grid, mask, 1.0);
  } else {
    parts.angle_reg =
        naive_angle_loss(head_res, t.heading_bin, t.heading_residual, nh);
  }

  // The corner term decodes the box with the ground-truth template/bin, so
  // its gradients reach the same residual slots the other terms train.
  const std::array<double, 3>& tpl_sz =
      p.templates.size_of(cls, t.size_template);
  const Tensor tpl_tensor(1, 3, {tpl_sz[0], tpl_sz[1], tpl_sz[2]});
  const Tensor res_row = slice_cols(raw, sro + 3 * t.size_template,
                                    sro + 3 * t.size_template + 3);
  const Tensor size_tensor = mul(tpl_tensor, offset(res_row, 1.0));
  const Tensor theta_tensor =
      offset(slice_cols(raw, hro + t.heading_bin, hro + t.heading_bin + 1),
             p.templates.bin_center(t.heading_bin));
  parts.corner =
      corner_loss_graph(f.final_center, size_tensor, theta_tensor, s.gt_box);

  return parts;
}

namespace {

SampleDetections to_detections(const ForwardResult& f,
                               const FrustumSample& s) {
  const FrustumFrame frame{s.frustum_angle, {0.0, 0.0, 0.0}};
  SampleDetections out;
  out.detections.push_back(
      {from_frustum_frame(f.decoded, frame), f.score, s.class_id()});
  out.ground_truths.push_back(
      {from_frustum_frame(s.gt_box, frame), s.class_id()});
  return out;
}

}  // namespace

SampleDetections detect_sample(const Pipeline& p, const FrustumSample& s) {
  const TapeBinding bind(nullptr, p.params());
  return to_detections(forward_sample(p, bind, s), s);
}

std::vector<double> resolve_thresholds(const RunConfig& cfg,
                                       std::size_t num_classes) {
  if (cfg.eval_preset == "kitti") {
    if (num_classes != 3)
      throw ConfigError("kitti preset expects exactly 3 classes, got " +
                        std::to_string(num_classes));
    return kitti_thresholds();
  }
  if (cfg.eval_preset == "sunrgbd") return sunrgbd_thresholds(num_classes);
  return std::vector<double>(num_classes, cfg.eval_threshold);
}

EvalSummary evaluate_pipeline(const Pipeline& p,
                              const std::vector<FrustumSample>& samples) {
  const TapeBinding bind(nullptr, p.params());
  std::vector<SampleDetections> dets;
  dets.reserve(samples.size());
  double correct = 0.0, total = 0.0, angle_sum = 0.0;
  for (const FrustumSample& s : samples) {
    const ForwardResult f = forward_sample(p, bind, s);
    dets.push_back(to_detections(f, s));
    for (std::size_t i = 0; i < s.points.rows(); ++i) {
      const bool positive = f.seg.probabilities[i] > 0.5;
      if (positive == (s.seg_labels[i] == 1)) correct += 1.0;
      total += 1.0;
    }
    angle_sum += std::abs(wrap_angle(f.decoded.theta - s.gt_box.theta));
  }

  EvalSummary out;
  const std::vector<double> thr =
      resolve_thresholds(p.cfg, p.cfg.synth.classes.size());
  out.ap3d = evaluate(dets, thr, Metric::k3D, p.cfg.forty_point);
  out.ap_bev = evaluate(dets, thr, Metric::kBEV, p.cfg.forty_point);
  out.seg_accuracy = total > 0.0 ? correct / total : 0.0;
  out.mean_angle_error =
      samples.empty() ? 0.0 : angle_sum / static_cast<double>(samples.size());
  out.num_samples = samples.size();
  return out;
}

std::size_t train_pipeline(Pipeline& p,
                           const std::vector<FrustumSample>& train,
                           const StepCallback& on_step) {
  if (train.empty()) throw EmptyInputError("train_pipeline: no samples");
  std::vector<Parameter*> params = p.params();
  std::mt19937_64 rng(p.cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::size_t batch = std::max<std::size_t>(1, p.cfg.batch);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < p.cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const double bsz = static_cast<double>(stop - start);

      Tape tape;
      const TapeBinding bind(&tape, params);
      Tensor total;
      LossBreakdown mean;
      for (std::size_t bi = start; bi < stop; ++bi) {
        FrustumSample s = train[order[bi]];
        if (p.cfg.augment) {
          if (unit(rng) < p.cfg.flip_prob) s = augment_flip(s);
          if (p.cfg.zshift > 0.0) s = augment_zshift(s, p.cfg.zshift, rng);
        }
        const ForwardResult f = forward_sample(p, bind, s);
        const TotalLossInputs parts =
            build_losses(p, f, s, p.cfg.fine_tune_angle);
        LossBreakdown bd;
        const Tensor sample_total = total_loss(parts, p.cfg.weights, &bd);
        mean.seg += bd.seg / bsz;
        mean.tnet_center += bd.tnet_center / bsz;
        mean.center_reg += bd.center_reg / bsz;
        mean.angle_cls += bd.angle_cls / bsz;
        mean.angle_reg += bd.angle_reg / bsz;
        mean.size_cls += bd.size_cls / bsz;
        mean.size_reg += bd.size_reg / bsz;
        mean.corner += bd.corner / bsz;
        mean.total += bd.total / bsz;
        total = bi == start ? sample_total : add(total, sample_total);
      }
      const Tensor batch_total = scale(total, 1.0 / bsz);
      ++step;

      if (!std::isfinite(batch_total.at(0, 0))) {
        std::ostringstream msg;
        msg << "train step " << step << ": non-finite loss; breakdown"
            << " seg=" << mean.seg << " tnet_center=" << mean.tnet_center
            << " center_reg=" << mean.center_reg
            << " angle_cls=" << mean.angle_cls
            << " angle_reg=" << mean.angle_reg << " size_cls=" << mean.size_cls
            << " size_reg=" << mean.size_reg << " corner=" << mean.corner;
        throw NumericError(msg.str());
      }

      tape.backward(batch_total);
      adam_step(params, bind.grads(), step, p.cfg.adam);
      if (on_step) on_step({step, epoch, mean});
      if (p.cfg.max_steps != 0 && step >= p.cfg.max_steps) return step;
    }
  }
  return step;
}

// ---------------------------------------------------------------------------
// Gradient checking

namespace {

using TermFn = std::function<Tensor(const Pipeline&, const TapeBinding&,
                                    const FrustumSample&)>;

// Up to `cap` parameters under a name prefix, spread across the list so both
// shallow and deep layers get probed.
std::vector<Parameter*> prefixed(const Pipeline& p, const std::string& prefix,
                                 std::size_t cap) {
  std::vector<Parameter*> hit;
  for (Parameter* par : p.params())
    if (par->name.rfind(prefix, 0) == 0) hit.push_back(par);
  if (hit.size() <= cap) return hit;
  std::vector<Parameter*> out;
  for (std::size_t i = 0; i < cap; ++i) {
    Parameter* pick = hit[i * (hit.size() - 1) / (cap - 1)];
    if (out.empty() || out.back() != pick) out.push_back(pick);
  }
  return out;
}

std::vector<Parameter*> merge(std::vector<Parameter*> a,
                              const std::vector<Parameter*>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

GradCheckReport gradcheck_pipeline(const RunConfig& cfg, double eps,
                                   bool inject_fault) {
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw ConfigError("gradcheck: eps must be a positive finite number");

  Pipeline p(cfg);
  p.store.init_random(cfg.seed);
  std::mt19937_64 rng(cfg.seed + 17);
  const FrustumSample sample = generate_sample(cfg.synth, 0, rng);

  const std::vector<Parameter*> all = p.params();
  std::unordered_map<const Parameter*, std::size_t> index;
  for (std::size_t i = 0; i < all.size(); ++i) index[all[i]] = i;

  auto analytic = [&](const TermFn& fn) {
    Tape tape;
    const TapeBinding bind(&tape, all);
    const Tensor loss = fn(p, bind, sample);
    tape.backward(loss);
    return bind.grads();
  };
  auto value_of = [&](const TermFn& fn) {
    const TapeBinding bind(nullptr, all);
    return fn(p, bind, sample).at(0, 0);
  };

  auto term = [](Tensor TotalLossInputs::* member, bool fine_tune) {
    return TermFn([member, fine_tune](const Pipeline& pp,
                                      const TapeBinding& bind,
                                      const FrustumSample& s) {
      const ForwardResult f = forward_sample(pp, bind, s);
      return build_losses(pp, f, s, fine_tune).*member;
    });
  };
  const TermFn box_group = [](const Pipeline& pp, const TapeBinding& bind,
                              const FrustumSample& s) {
    const ForwardResult f = forward_sample(pp, bind, s);
    const TotalLossInputs parts = build_losses(pp, f, s, true);
    return add(add(add(parts.center_reg, parts.angle_cls),
                   add(parts.angle_reg, parts.size_cls)),
               add(parts.size_reg,
                   scale(parts.corner, pp.cfg.weights.gamma)));
  };

  struct Unit {
    std::string name;
    TermFn fn;
    std::vector<Parameter*> params;
  };
  // Segmentation parameters feed a discrete mask selection, so they are only
  // probed through the segmentation loss; everything downstream of the mask
  // is probed through parameters that leave the selection fixed.
  const std::vector<Unit> units = {
      {"point_unet", term(&TotalLossInputs::seg, true),
       prefixed(p, "unet.", 5)},
      {"tnet", term(&TotalLossInputs::tnet_center, true),
       prefixed(p, "tnet.", 4)},
      {"point_senet", box_group, prefixed(p, "senet.", 5)},
      {"loss.seg", term(&TotalLossInputs::seg, true),
       prefixed(p, "unet.head", 2)},
      {"loss.tnet_center", term(&TotalLossInputs::tnet_center, true),
       prefixed(p, "tnet.fc", 2)},
      {"loss.center_reg", term(&TotalLossInputs::center_reg, true),
       merge(prefixed(p, "senet.fc", 2), prefixed(p, "tnet.fc", 1))},
      {"loss.angle_cls", term(&TotalLossInputs::angle_cls, true),
       prefixed(p, "senet.fc", 2)},
      {"loss.angle_reg", term(&TotalLossInputs::angle_reg, true),
       prefixed(p, "senet.fc", 2)},
      {"loss.angle_reg_naive", term(&TotalLossInputs::angle_reg, false),
       prefixed(p, "senet.fc", 2)},
      {"loss.size_cls", term(&TotalLossInputs::size_cls, true),
       prefixed(p, "senet.fc", 2)},
      {"loss.size_reg", term(&TotalLossInputs::size_reg, true),
       prefixed(p, "senet.fc", 2)},
      {"loss.corner", term(&TotalLossInputs::corner, true),
       merge(prefixed(p, "senet.fc", 2), prefixed(p, "tnet.fc", 1))},
  };

  GradCheckReport rep;
  bool fault_pending = inject_fault;
  for (const Unit& u : units) {
    const auto grads = analytic(u.fn);
    GradCheckItem item{u.name, 0.0, 0};
    for (Parameter* par : u.params) {
      const std::vector<double>& g = grads[index[par]];
      const std::size_t size = par->value.rows() * par->value.cols();
      const std::size_t cols = par->value.cols();
      const std::size_t picks = std::min<std::size_t>(size, 6);
      std::size_t last = size;  // sentinel
      for (std::size_t k = 0; k < picks; ++k) {
        const std::size_t j =
            picks == 1 ? 0 : k * (size - 1) / (picks - 1);
        if (j == last) continue;
        last = j;
        double a = g[j];
        if (fault_pending) {
          a += 0.5 * (std::abs(a) + 1.0);
          fault_pending = false;
        }
        const std::size_t r = j / cols, c = j % cols;
        const double old = par->value.at(r, c);
        par->value.at(r, c) = old + eps;
        const double fp = value_of(u.fn);
        par->value.at(r, c) = old - eps;
        const double fm = value_of(u.fn);
        par->value.at(r, c) = old;
        const double numeric = (fp - fm) / (2.0 * eps);
        const double rel =
            std::abs(a - numeric) / std::max(1.0, std::abs(a));
        item.max_rel_err = std::max(item.max_rel_err, rel);
        ++item.coords;
      }
    }
    rep.items.push_back(item);
    rep.worst = std::max(rep.worst, item.max_rel_err);
  }

  // The SE block in isolation, via the generic leaf-tensor checker.
  {
    std::mt19937_64 serng(cfg.seed + 99);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t m = 5, c = 8, r = 4;
    auto rand_tensor = [&](std::size_t rows, std::size_t cols) {
      Tensor t(rows, cols);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
          t.at(i, j) = 0.5 * normal(serng);
      return t;
    };
    const std::vector<Tensor> inputs = {
        rand_tensor(m, c),      // x_star
        rand_tensor(c, c),      // conv w
        rand_tensor(1, c),      // conv b
        rand_tensor(c, c / r),  // se w1
        rand_tensor(1, c / r),  // se b1
        rand_tensor(c / r, c),  // se w2
        rand_tensor(1, c),      // se b2
    };
    const GradCheckFn f = [r](Tape&, const std::vector<Tensor>& in) {
      const SharedMLPParams conv{{in[1]}, {in[2]}};
      const SEParams se{in[3], in[4], in[5], in[6], r};
      return mean_all(se_forward(in[0], conv, se));
    };
    std::size_t coords = 0;
    for (const Tensor& t : inputs) coords += t.rows() * t.cols();
    const double err = grad_check(f, inputs, eps);
    rep.items.push_back({"se_block", err, coords});
    rep.worst = std::max(rep.worst, err);
  }

  return rep;
}

}  // namespace sifr
