#pragma once

#include <array>
#include <string>
#include <vector>

#include "tlnet/dataset.hpp"
#include "tlnet/eval.hpp"
#include "tlnet/fusion.hpp"

namespace tlnet {

struct DetectorConfig {
    bool stereo = true;
    FusionMode fusion = FusionMode::reweight;
    bool detach_scores = false;

    // anchors
    double anchor_interval_m = 0.25;
    double depth_near_m = 0.5;
    double depth_far_m = 70.0;
    double ground_y = 1.65;
    std::vector<AnchorPrior> priors = {{"Car", 1.5, 1.7, 4.0}};

    // network
    std::array<int, 4> widths = {16, 32, 64, 64};
    int roi_size = 7;
    int head_hidden = 256;
    int rpn_channels = 4;

    // assignment / selection
    double fg_threshold = 0.5;
    double rpn_pos_iou = 0.5;
    double rpn_neg_iou = 0.35;
    double rpn_nms_iou = 0.8;
    int pre_nms_top_n = 512;
    int proposal_count = 1024;  // K
    double final_nms_iou = 0.1;
    double score_threshold = 0.05;
    int rpn_sample = 128;
    int refine_sample = 64;

    // training schedule (desk-scale defaults; the full-scale schedule is
    // 20000/40000/60000/20000 behind --full-schedule in the CLI)
    int stage1_iters = 200;
    int stage2_iters = 400;
    int stage3_iters = 600;
    int stage4_iters = 200;
    double learning_rate = 1e-4;
    double l2_decay = 5e-3;
    double reg_weight = 1.0;
    bool freeze_frontview = false;
    uint64_t seed = 1;

    int backbone_stride() const { return 16; }
    int feature_stride() const { return 8; }
    int num_class_logits_refine() const { return 1 + (int)priors.size(); }
    int rpn_head_in() const {
        const int base = rpn_channels * roi_size * roi_size;
        return (stereo && fusion == FusionMode::concat) ? 2 * base : base;
    }
    int refine_head_in() const {
        const int base = widths[3] * roi_size * roi_size;
        return (stereo && fusion == FusionMode::concat) ? 2 * base : base;
    }
};

DetectorConfig parse_detector_config(const std::string& text);
std::string serialize_detector_config(const DetectorConfig& cfg);
std::string config_hash(const DetectorConfig& cfg);

/// Creates every parameter the configured detector needs. Backbone names are
/// identical in mono and stereo mode; only the head widths differ.
void init_params(ParamStore& store, const DetectorConfig& cfg);

struct RpnTargets {
    std::vector<int> labels;  // 1 positive, 0 negative, -1 ignore
    std::vector<OffsetTarget> offsets;
    std::vector<int> matched_gt;
};

RpnTargets assign_rpn_targets(const std::vector<Anchor>& anchors,
                              const std::vector<OrientedBox3D>& gts, double pos_iou,
                              double neg_iou);

struct Proposal {
    OrientedBox3D box;
    double score = 0.0;
};

/// use_gt_frontview substitutes the ground-truth foreground map for the
/// predicted one (training-time teacher forcing).
std::vector<Proposal> forward_rpn(const FrameData& frame, const DetectorConfig& cfg,
                                  const ParamStore& store, bool use_gt_frontview = false);

std::vector<Detection> forward_refine(const FrameData& frame,
                                      const std::vector<Proposal>& proposals,
                                      const DetectorConfig& cfg, const ParamStore& store);

struct TrainResult {
    std::string loss_log;  // CSV: iter,stage,loss_total,loss_cls,loss_reg
};

TrainResult train(const DetectorConfig& cfg, const std::vector<FrameData>& dataset,
                  ParamStore& store);

std::vector<Detection> infer(const FrameData& frame, const DetectorConfig& cfg,
                             const ParamStore& store);

std::vector<GroundTruthLabel> detections_to_labels(const std::vector<Detection>& detections);

}  // namespace tlnet
