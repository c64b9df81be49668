#include "tlnet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include "tlnet/errors.hpp"

namespace tlnet {

namespace {

struct Features {
    VarPtr c4;       // stride-16 map, widths[3] channels
    VarPtr fpn;      // stride-8 pyramid map, widths[3] channels
    VarPtr reduced;  // fpn reduced to rpn_channels by 1x1 conv
};

VarPtr conv_block(Tape& t, const ParamStore& s, const std::string& prefix, const VarPtr& x) {
    return maxpool2(t, relu(t, conv2d(t, x, s.get(prefix + ".w"), s.get(prefix + ".b"), 1, 1)));
}

Features run_backbone(Tape& t, const ParamStore& s, const DetectorConfig& cfg,
                      const Tensor4& image) {
    if (image.h % cfg.backbone_stride() != 0 || image.w % cfg.backbone_stride() != 0)
        throw ShapeMismatch("image dims must be divisible by the backbone stride");
    VarPtr x = t.leaf(image, false);
    x = conv_block(t, s, "backbone.block1", x);
    x = conv_block(t, s, "backbone.block2", x);
    VarPtr c3 = conv_block(t, s, "backbone.block3", x);
    VarPtr c4 = conv_block(t, s, "backbone.block4", c3);
    VarPtr lateral = conv2d(t, c3, s.get("fpn.lateral.w"), s.get("fpn.lateral.b"), 1, 0);
    Features f;
    f.c4 = c4;
    f.fpn = add(t, bilinear_upsample2(t, c4), lateral);
    f.reduced = conv2d(t, f.fpn, s.get("rpn.reduce.w"), s.get("rpn.reduce.b"), 1, 0);
    return f;
}

VarPtr frontview_logits(Tape& t, const ParamStore& s, const Features& f) {
    return conv2d(t, f.c4, s.get("frontview.w"), s.get("frontview.b"), 1, 0);
}

std::optional<Roi2D> feature_roi(const ProjectionMatrix& p, const OrientedBox3D& box,
                                 const StereoCalibration& calib, int stride) {
    Roi2D roi;
    try {
        roi = project_box(p, box, calib.width_px, calib.height_px);
    } catch (const BehindCamera&) {
        return std::nullopt;
    }
    roi.min.u /= stride;
    roi.min.v /= stride;
    roi.max.u /= stride;
    roi.max.v /= stride;
    if (roi.width() < 1e-2 || roi.height() < 1e-2) return std::nullopt;
    return roi;
}

/// RoIAlign the box in each available view and run the stage head.
std::optional<HeadOutput> box_head_forward(Tape& t, const ParamStore& s,
                                           const DetectorConfig& cfg, const FrameData& frame,
                                           const Features& left, const Features* right,
                                           const OrientedBox3D& box, bool refine_stage) {
    const VarPtr& left_map = refine_stage ? left.fpn : left.reduced;
    const auto roi_l =
        feature_roi(frame.calib.p_left, box, frame.calib, cfg.feature_stride());
    if (!roi_l) return std::nullopt;
    VarPtr crop_l = roi_align(t, left_map, *roi_l, cfg.roi_size, cfg.roi_size);
    const DetectionHead head = lookup_head(s, refine_stage ? "head.refine" : "head.rpn");
    VarPtr fused;
    if (right) {
        const VarPtr& right_map = refine_stage ? right->fpn : right->reduced;
        const auto roi_r =
            feature_roi(frame.calib.p_right, box, frame.calib, cfg.feature_stride());
        if (!roi_r) return std::nullopt;
        VarPtr crop_r = roi_align(t, right_map, *roi_r, cfg.roi_size, cfg.roi_size);
        fused = fuse(t, {crop_l, crop_r}, cfg.fusion, cfg.detach_scores);
    } else {
        fused = crop_l;
    }
    return head_forward(t, head, fused);
}

std::vector<OrientedBox3D> gt_boxes_of(const FrameData& frame) {
    std::vector<OrientedBox3D> out;
    for (const auto& lab : frame.labels)
        if (lab.class_name != "DontCare") out.push_back(label_to_box(lab));
    return out;
}

std::vector<double> predicted_foreground(const Tensor4& logits) {
    const Tensor4 probs = softmax_channels(logits);
    std::vector<double> fg(size_t(probs.h) * probs.w);
    for (int j = 0; j < probs.h; ++j)
        for (int i = 0; i < probs.w; ++i) fg[size_t(j) * probs.w + i] = probs.at(0, 1, j, i);
    return fg;
}

VarPtr sum_scaled(Tape& t, const std::vector<VarPtr>& terms, double k) {
    VarPtr acc = terms[0];
    for (size_t i = 1; i < terms.size(); ++i) acc = add(t, acc, terms[i]);
    return k == 1.0 ? acc : scale(t, acc, k);
}

uint64_t fnv1a(const std::string& text) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

void init_params(ParamStore& store, const DetectorConfig& cfg) {
    uint64_t seed = cfg.seed * 7919 + 13;
    auto next = [&]() { return ++seed; };
    int prev = 3;
    for (int i = 0; i < 4; ++i) {
        const std::string prefix = "backbone.block" + std::to_string(i + 1);
        store.create(prefix + ".w", xavier_init(next(), cfg.widths[i], prev, 3, 3));
        store.create(prefix + ".b", Tensor4(1, cfg.widths[i], 1, 1));
        prev = cfg.widths[i];
    }
    store.create("fpn.lateral.w", xavier_init(next(), cfg.widths[3], cfg.widths[2], 1, 1));
    store.create("fpn.lateral.b", Tensor4(1, cfg.widths[3], 1, 1));
    store.create("frontview.w", xavier_init(next(), 2, cfg.widths[3], 1, 1));
    store.create("frontview.b", Tensor4(1, 2, 1, 1));
    store.create("rpn.reduce.w", xavier_init(next(), cfg.rpn_channels, cfg.widths[3], 1, 1));
    store.create("rpn.reduce.b", Tensor4(1, cfg.rpn_channels, 1, 1));
    make_head(store, "head.rpn", cfg.rpn_head_in(), cfg.head_hidden, 2, next() * 31);
    make_head(store, "head.refine", cfg.refine_head_in(), cfg.head_hidden,
              cfg.num_class_logits_refine(), next() * 37);
}

RpnTargets assign_rpn_targets(const std::vector<Anchor>& anchors,
                              const std::vector<OrientedBox3D>& gts, double pos_iou,
                              double neg_iou) {
    RpnTargets t;
    t.labels.assign(anchors.size(), 0);
    t.offsets.resize(anchors.size());
    t.matched_gt.assign(anchors.size(), -1);
    std::vector<int> best_anchor_per_gt(gts.size(), -1);
    std::vector<double> best_iou_per_gt(gts.size(), 0.0);
    for (size_t ai = 0; ai < anchors.size(); ++ai) {
        double best = 0.0;
        int best_gt = -1;
        for (size_t gi = 0; gi < gts.size(); ++gi) {
            const double iou = iou_bev(anchors[ai].box, gts[gi]);
            if (iou > best) {
                best = iou;
                best_gt = (int)gi;
            }
            if (iou > best_iou_per_gt[gi]) {
                best_iou_per_gt[gi] = iou;
                best_anchor_per_gt[gi] = (int)ai;
            }
        }
        if (best >= pos_iou) {
            t.labels[ai] = 1;
            t.matched_gt[ai] = best_gt;
        } else if (best >= neg_iou) {
            t.labels[ai] = -1;
        }
    }
    // every gt keeps at least its best-overlap anchor as positive
    for (size_t gi = 0; gi < gts.size(); ++gi) {
        const int ai = best_anchor_per_gt[gi];
        if (ai >= 0 && best_iou_per_gt[gi] > 0.0) {
            t.labels[ai] = 1;
            t.matched_gt[ai] = (int)gi;
        }
    }
    for (size_t ai = 0; ai < anchors.size(); ++ai)
        if (t.labels[ai] == 1) t.offsets[ai] = encode_offsets(anchors[ai].box, gts[t.matched_gt[ai]]);
    return t;
}

std::vector<Proposal> forward_rpn(const FrameData& frame, const DetectorConfig& cfg,
                                  const ParamStore& store, bool use_gt_frontview) {
    Tape tape;
    const Features left = run_backbone(tape, store, cfg, frame.left_image);
    std::optional<Features> right;
    if (cfg.stereo) {
        if (!frame.right_image) throw MissingFile("stereo config but frame has no right image");
        right = run_backbone(tape, store, cfg, *frame.right_image);
    }
    const FrontViewGrid grid =
        make_grid(frame.calib.width_px, frame.calib.height_px, cfg.backbone_stride());
    std::vector<double> fg;
    if (use_gt_frontview) {
        const auto map = frontview_targets(gt_boxes_of(frame), frame.calib, grid);
        fg.assign(map.begin(), map.end());
    } else {
        fg = predicted_foreground(frontview_logits(tape, store, left)->value);
    }
    const auto pool =
        generate_anchor_pool(frame.calib, grid, cfg.anchor_interval_m, cfg.depth_near_m,
                             cfg.depth_far_m, cfg.ground_y, cfg.priors);
    const auto selected =
        select_potential_anchors(pool, fg, grid, use_gt_frontview ? 0.5 : cfg.fg_threshold);
    if (selected.empty())
        throw NoPotentialAnchors("no front-view cell passed the objectness threshold");

    std::vector<std::pair<OrientedBox3D, double>> scored;
    scored.reserve(selected.size());
    for (int idx : selected) {
        const auto out = box_head_forward(tape, store, cfg, frame, left,
                                          right ? &*right : nullptr, pool[idx].box, false);
        if (!out) continue;
        const Tensor4 probs = softmax_channels(out->class_logits->value);
        const OrientedBox3D box =
            decode_offsets(pool[idx].box, regression_to_offsets(out->regression->value));
        scored.push_back({box, probs.data[1]});
    }
    // pre-NMS top-N keeps the greedy suppression cheap
    std::vector<int> order(scored.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = (int)i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scored[a].second > scored[b].second; });
    if ((int)order.size() > cfg.pre_nms_top_n) order.resize(cfg.pre_nms_top_n);
    std::vector<std::pair<OrientedBox3D, double>> pre;
    for (int i : order) pre.push_back(scored[i]);
    const auto kept = nms_bev(pre, cfg.rpn_nms_iou, cfg.proposal_count);
    std::vector<Proposal> proposals;
    for (int k : kept) proposals.push_back({pre[k].first, pre[k].second});
    return proposals;
}

std::vector<Detection> forward_refine(const FrameData& frame,
                                      const std::vector<Proposal>& proposals,
                                      const DetectorConfig& cfg, const ParamStore& store) {
    if (proposals.empty()) return {};
    Tape tape;
    const Features left = run_backbone(tape, store, cfg, frame.left_image);
    std::optional<Features> right;
    if (cfg.stereo) right = run_backbone(tape, store, cfg, *frame.right_image);

    std::vector<std::pair<OrientedBox3D, double>> scored;
    std::vector<int> classes;
    for (const auto& prop : proposals) {
        const auto out = box_head_forward(tape, store, cfg, frame, left,
                                          right ? &*right : nullptr, prop.box, true);
        if (!out) continue;
        const Tensor4 probs = softmax_channels(out->class_logits->value);
        int best_cls = 1;
        for (int c = 2; c < probs.c; ++c)
            if (probs.data[c] > probs.data[best_cls]) best_cls = c;
        const double score = probs.data[best_cls];
        if (score < cfg.score_threshold) continue;
        const OrientedBox3D box =
            decode_offsets(prop.box, regression_to_offsets(out->regression->value));
        scored.push_back({box, score});
        classes.push_back(best_cls);
    }
    const auto kept = nms_bev(scored, cfg.final_nms_iou, cfg.proposal_count);
    std::vector<Detection> detections;
    for (int k : kept) {
        Detection det;
        det.box = scored[k].first;
        det.score = scored[k].second;
        det.class_name = cfg.priors[size_t(classes[k]) - 1].class_name;
        try {
            const Roi2D roi = project_box(frame.calib.p_left, det.box, frame.calib.width_px,
                                          frame.calib.height_px);
            det.bbox[0] = roi.min.u;
            det.bbox[1] = roi.min.v;
            det.bbox[2] = roi.max.u;
            det.bbox[3] = roi.max.v;
        } catch (const BehindCamera&) {
            continue;
        }
        detections.push_back(det);
    }
    return detections;
}

TrainResult train(const DetectorConfig& cfg, const std::vector<FrameData>& dataset,
                  ParamStore& store) {
    if (dataset.empty()) throw DatasetEmpty("training dataset is empty");
    init_params(store, cfg);
    std::mt19937_64 rng(cfg.seed);
    std::ostringstream log;
    log << "iter,stage,loss_total,loss_cls,loss_reg\n";

    const int total = cfg.stage1_iters + cfg.stage2_iters + cfg.stage3_iters + cfg.stage4_iters;
    for (int iter = 0; iter < total; ++iter) {
        const int stage = iter < cfg.stage1_iters                       ? 1
                          : iter < cfg.stage1_iters + cfg.stage2_iters  ? 2
                          : iter < total - cfg.stage4_iters             ? 3
                                                                        : 4;
        const FrameData& frame = dataset[rng() % dataset.size()];
        const std::vector<OrientedBox3D> gts = gt_boxes_of(frame);
        const FrontViewGrid grid =
            make_grid(frame.calib.width_px, frame.calib.height_px, cfg.backbone_stride());

        // proposals for the refinement stage come from a grad-free pass
        std::vector<Proposal> proposals;
        if (stage >= 3 && !gts.empty()) {
            try {
                proposals = forward_rpn(frame, cfg, store, true);
            } catch (const NoPotentialAnchors&) {
            }
        }

        store.zero_grad();
        Tape tape;
        const Features left = run_backbone(tape, store, cfg, frame.left_image);
        std::optional<Features> right;
        if (cfg.stereo) right = run_backbone(tape, store, cfg, *frame.right_image);

        std::vector<VarPtr> cls_terms, reg_terms;

        if (!(cfg.freeze_frontview && stage > 1)) {
            VarPtr logits = frontview_logits(tape, store, left);
            const auto fg = frontview_targets(gts, frame.calib, grid);
            Tensor4 one_hot(1, 2, grid.g_y, grid.g_x);
            for (int j = 0; j < grid.g_y; ++j)
                for (int i = 0; i < grid.g_x; ++i) {
                    const int is_fg = fg[size_t(j) * grid.g_x + i];
                    one_hot.at(0, is_fg ? 1 : 0, j, i) = 1.0;
                }
            cls_terms.push_back(softmax_cross_entropy(tape, logits, one_hot));
        }

        if (stage >= 2 && !gts.empty()) {
            const auto pool =
                generate_anchor_pool(frame.calib, grid, cfg.anchor_interval_m, cfg.depth_near_m,
                                     cfg.depth_far_m, cfg.ground_y, cfg.priors);
            const auto fg_map = frontview_targets(gts, frame.calib, grid);
            const std::vector<double> fg(fg_map.begin(), fg_map.end());
            const auto potential = select_potential_anchors(pool, fg, grid, 0.5);
            std::vector<Anchor> candidates;
            for (int idx : potential) candidates.push_back(pool[idx]);
            const RpnTargets targets =
                assign_rpn_targets(candidates, gts, cfg.rpn_pos_iou, cfg.rpn_neg_iou);
            std::vector<int> positives, negatives;
            for (size_t i = 0; i < candidates.size(); ++i) {
                if (targets.labels[i] == 1) positives.push_back((int)i);
                else if (targets.labels[i] == 0) negatives.push_back((int)i);
            }
            std::shuffle(positives.begin(), positives.end(), rng);
            std::shuffle(negatives.begin(), negatives.end(), rng);
            if ((int)positives.size() > cfg.rpn_sample / 4) positives.resize(cfg.rpn_sample / 4);
            const int neg_keep = cfg.rpn_sample - (int)positives.size();
            if ((int)negatives.size() > neg_keep) negatives.resize(neg_keep);

            std::vector<VarPtr> anchor_cls, anchor_reg;
            auto run_anchor = [&](int idx, bool positive) {
                const auto out =
                    box_head_forward(tape, store, cfg, frame, left, right ? &*right : nullptr,
                                     candidates[idx].box, false);
                if (!out) return;
                Tensor4 one_hot(1, 2, 1, 1);
                one_hot.data[positive ? 1 : 0] = 1.0;
                anchor_cls.push_back(softmax_cross_entropy(tape, out->class_logits, one_hot));
                if (positive)
                    anchor_reg.push_back(smooth_l1(tape, out->regression,
                                                   offsets_to_tensor(targets.offsets[idx])));
            };
            for (int idx : positives) run_anchor(idx, true);
            for (int idx : negatives) run_anchor(idx, false);
            if (!anchor_cls.empty())
                cls_terms.push_back(sum_scaled(tape, anchor_cls, 1.0 / anchor_cls.size()));
            if (!anchor_reg.empty())
                reg_terms.push_back(sum_scaled(tape, anchor_reg, 1.0 / anchor_reg.size()));
        }

        if (stage >= 3 && !proposals.empty() && !gts.empty()) {
            std::vector<std::pair<int, int>> samples;  // proposal idx, gt idx (-1 = background)
            for (size_t pi = 0; pi < proposals.size(); ++pi) {
                double best = 0.0;
                int best_gt = -1;
                for (size_t gi = 0; gi < gts.size(); ++gi) {
                    const double iou = iou_bev(proposals[pi].box, gts[gi]);
                    if (iou > best) {
                        best = iou;
                        best_gt = (int)gi;
                    }
                }
                if (best >= cfg.rpn_pos_iou) samples.push_back({(int)pi, best_gt});
                else if (best < cfg.rpn_neg_iou) samples.push_back({(int)pi, -1});
            }
            std::stable_sort(samples.begin(), samples.end(),
                             [](const auto& a, const auto& b) {
                                 return (a.second >= 0) > (b.second >= 0);
                             });
            if ((int)samples.size() > cfg.refine_sample) samples.resize(cfg.refine_sample);
            std::vector<VarPtr> ref_cls, ref_reg;
            for (const auto& [pi, gi] : samples) {
                const auto out =
                    box_head_forward(tape, store, cfg, frame, left, right ? &*right : nullptr,
                                     proposals[pi].box, true);
                if (!out) continue;
                Tensor4 one_hot(1, cfg.num_class_logits_refine(), 1, 1);
                one_hot.data[gi >= 0 ? 1 : 0] = 1.0;  // single-class: gt class index 1
                ref_cls.push_back(softmax_cross_entropy(tape, out->class_logits, one_hot));
                if (gi >= 0) {
                    const OffsetTarget target = encode_offsets(proposals[pi].box, gts[gi]);
                    ref_reg.push_back(
                        smooth_l1(tape, out->regression, offsets_to_tensor(target)));
                }
            }
            if (!ref_cls.empty())
                cls_terms.push_back(sum_scaled(tape, ref_cls, 1.0 / ref_cls.size()));
            if (!ref_reg.empty())
                reg_terms.push_back(sum_scaled(tape, ref_reg, 1.0 / ref_reg.size()));
        }

        VarPtr loss_cls = sum_scaled(tape, cls_terms, 1.0);
        VarPtr loss = loss_cls;
        double reg_value = 0.0;
        if (!reg_terms.empty()) {
            VarPtr loss_reg = sum_scaled(tape, reg_terms, 1.0);
            reg_value = loss_reg->value.data[0];
            loss = add(tape, loss_cls, scale(tape, loss_reg, cfg.reg_weight));
        }
        tape.backward(loss);
        store.step(stage == 4 ? OptimizerKind::sgd : OptimizerKind::adam, cfg.learning_rate,
                   cfg.l2_decay);

        char line[160];
        std::snprintf(line, sizeof(line), "%d,%d,%.6f,%.6f,%.6f\n", iter, stage,
                      loss->value.data[0], loss_cls->value.data[0], reg_value);
        log << line;
    }
    return {log.str()};
}

std::vector<Detection> infer(const FrameData& frame, const DetectorConfig& cfg,
                             const ParamStore& store) {
    if (store.get("head.rpn.fc1.w")->value.c != cfg.rpn_head_in() ||
        store.get("head.refine.fc1.w")->value.c != cfg.refine_head_in())
        throw CheckpointVersionMismatch("checkpoint head shapes do not match the config");
    std::vector<Proposal> proposals;
    try {
        proposals = forward_rpn(frame, cfg, store, false);
    } catch (const NoPotentialAnchors&) {
        return {};
    }
    return forward_refine(frame, proposals, cfg, store);
}

std::vector<GroundTruthLabel> detections_to_labels(const std::vector<Detection>& detections) {
    std::vector<GroundTruthLabel> out;
    for (const auto& det : detections) {
        GroundTruthLabel lab;
        lab.class_name = det.class_name;
        lab.h = det.box.h;
        lab.w = det.box.w;
        lab.l = det.box.l;
        lab.location = det.box.center;
        lab.rotation_y = det.box.yaw;
        lab.alpha = normalize_yaw(det.box.yaw - std::atan2(det.box.center.x, det.box.center.z));
        for (int i = 0; i < 4; ++i) lab.bbox[i] = det.bbox[i];
        lab.score = det.score;
        out.push_back(lab);
    }
    return out;
}

// -- config -------------------------------------------------------------------

namespace {
std::map<std::string, std::string> parse_kv(const std::string& text,
                                            std::vector<AnchorPrior>* priors) {
    std::map<std::string, std::string> kv;
    std::istringstream ss(text);
    std::string line;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(ss, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "prior") {
            std::istringstream vs(val);
            AnchorPrior p;
            if (!(vs >> p.class_name >> p.h >> p.w >> p.l))
                throw NonNumeric("bad prior: " + val);
            priors->push_back(p);
        } else {
            kv[key] = val;
        }
    }
    return kv;
}
}  // namespace

DetectorConfig parse_detector_config(const std::string& text) {
    DetectorConfig cfg;
    std::vector<AnchorPrior> priors;
    auto kv = parse_kv(text, &priors);
    if (!priors.empty()) cfg.priors = priors;
    auto getd = [&](const char* k, double d) {
        auto it = kv.find(k);
        return it == kv.end() ? d : std::stod(it->second);
    };
    auto geti = [&](const char* k, int d) {
        auto it = kv.find(k);
        return it == kv.end() ? d : std::stoi(it->second);
    };
    if (kv.count("mode")) cfg.stereo = kv["mode"] == "stereo";
    if (kv.count("fusion")) cfg.fusion = parse_fusion_mode(kv["fusion"]);
    cfg.detach_scores = geti("detach_scores", cfg.detach_scores);
    cfg.anchor_interval_m = getd("anchor_interval_m", cfg.anchor_interval_m);
    cfg.depth_near_m = getd("depth_near_m", cfg.depth_near_m);
    cfg.depth_far_m = getd("depth_far_m", cfg.depth_far_m);
    cfg.ground_y = getd("ground_y", cfg.ground_y);
    if (kv.count("widths")) {
        std::istringstream ws(kv["widths"]);
        for (int i = 0; i < 4; ++i)
            if (!(ws >> cfg.widths[i])) throw NonNumeric("widths needs 4 integers");
    }
    cfg.roi_size = geti("roi_size", cfg.roi_size);
    cfg.head_hidden = geti("head_hidden", cfg.head_hidden);
    cfg.rpn_channels = geti("rpn_channels", cfg.rpn_channels);
    cfg.fg_threshold = getd("fg_threshold", cfg.fg_threshold);
    cfg.rpn_pos_iou = getd("rpn_pos_iou", cfg.rpn_pos_iou);
    cfg.rpn_neg_iou = getd("rpn_neg_iou", cfg.rpn_neg_iou);
    cfg.rpn_nms_iou = getd("rpn_nms_iou", cfg.rpn_nms_iou);
    cfg.pre_nms_top_n = geti("pre_nms_top_n", cfg.pre_nms_top_n);
    cfg.proposal_count = geti("proposal_count", cfg.proposal_count);
    cfg.final_nms_iou = getd("final_nms_iou", cfg.final_nms_iou);
    cfg.score_threshold = getd("score_threshold", cfg.score_threshold);
    cfg.rpn_sample = geti("rpn_sample", cfg.rpn_sample);
    cfg.refine_sample = geti("refine_sample", cfg.refine_sample);
    cfg.stage1_iters = geti("stage1_iters", cfg.stage1_iters);
    cfg.stage2_iters = geti("stage2_iters", cfg.stage2_iters);
    cfg.stage3_iters = geti("stage3_iters", cfg.stage3_iters);
    cfg.stage4_iters = geti("stage4_iters", cfg.stage4_iters);
    cfg.learning_rate = getd("learning_rate", cfg.learning_rate);
    cfg.l2_decay = getd("l2_decay", cfg.l2_decay);
    cfg.reg_weight = getd("reg_weight", cfg.reg_weight);
    cfg.freeze_frontview = geti("freeze_frontview", cfg.freeze_frontview);
    cfg.seed = (uint64_t)getd("seed", (double)cfg.seed);
    return cfg;
}

std::string serialize_detector_config(const DetectorConfig& cfg) {
    std::ostringstream os;
    os << "mode = " << (cfg.stereo ? "stereo" : "mono") << "\n";
    os << "fusion = " << fusion_mode_name(cfg.fusion) << "\n";
    os << "detach_scores = " << (cfg.detach_scores ? 1 : 0) << "\n";
    os << "anchor_interval_m = " << cfg.anchor_interval_m << "\n";
    os << "depth_near_m = " << cfg.depth_near_m << "\n";
    os << "depth_far_m = " << cfg.depth_far_m << "\n";
    os << "ground_y = " << cfg.ground_y << "\n";
    for (const auto& p : cfg.priors)
        os << "prior = " << p.class_name << " " << p.h << " " << p.w << " " << p.l << "\n";
    os << "widths = " << cfg.widths[0] << " " << cfg.widths[1] << " " << cfg.widths[2] << " "
       << cfg.widths[3] << "\n";
    os << "roi_size = " << cfg.roi_size << "\n";
    os << "head_hidden = " << cfg.head_hidden << "\n";
    os << "rpn_channels = " << cfg.rpn_channels << "\n";
    os << "fg_threshold = " << cfg.fg_threshold << "\n";
    os << "rpn_pos_iou = " << cfg.rpn_pos_iou << "\n";
    os << "rpn_neg_iou = " << cfg.rpn_neg_iou << "\n";
    os << "rpn_nms_iou = " << cfg.rpn_nms_iou << "\n";
    os << "pre_nms_top_n = " << cfg.pre_nms_top_n << "\n";
    os << "proposal_count = " << cfg.proposal_count << "\n";
    os << "final_nms_iou = " << cfg.final_nms_iou << "\n";
    os << "score_threshold = " << cfg.score_threshold << "\n";
    os << "rpn_sample = " << cfg.rpn_sample << "\n";
    os << "refine_sample = " << cfg.refine_sample << "\n";
    os << "stage1_iters = " << cfg.stage1_iters << "\n";
    os << "stage2_iters = " << cfg.stage2_iters << "\n";
    os << "stage3_iters = " << cfg.stage3_iters << "\n";
    os << "stage4_iters = " << cfg.stage4_iters << "\n";
    os << "learning_rate = " << cfg.learning_rate << "\n";
    os << "l2_decay = " << cfg.l2_decay << "\n";
    os << "reg_weight = " << cfg.reg_weight << "\n";
    os << "freeze_frontview = " << (cfg.freeze_frontview ? 1 : 0) << "\n";
    os << "seed = " << cfg.seed << "\n";
    return os.str();
}

std::string config_hash(const DetectorConfig& cfg) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  (unsigned long long)fnv1a(serialize_detector_config(cfg)));
    return buf;
}

}  // namespace tlnet
