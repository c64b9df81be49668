#pragma once

#include <string>

#include "tlnet/anchor.hpp"
#include "tlnet/autodiff.hpp"
#include "tlnet/optim.hpp"

namespace tlnet {

enum class FusionMode { concat, add, reweight };

FusionMode parse_fusion_mode(const std::string& name);
std::string fusion_mode_name(FusionMode mode);

/// Left/right RoI crops of one 3D anchor, same dims on both sides.
struct RoiFeaturePair {
    VarPtr left;
    VarPtr right;
};

/// reweight: scale both sides by per-channel coherence, then add.
/// add: plain element-wise sum. concat: channel concatenation (2*C_roi).
/// detach_scores stops gradient flow through the coherence scores (ablation).
VarPtr fuse(Tape& t, const RoiFeaturePair& pair, FusionMode mode, bool detach_scores = false);

/// Two hidden FC layers then parallel class-logit and 8-value regression heads
/// (d_center 3, d_size 3, orientation 2).
struct DetectionHead {
    VarPtr fc1_w, fc1_b;
    VarPtr fc2_w, fc2_b;
    VarPtr cls_w, cls_b;
    VarPtr reg_w, reg_b;
    int in_len = 0;
    int num_classes = 0;
};

DetectionHead make_head(ParamStore& store, const std::string& prefix, int in_len, int hidden,
                        int num_class_logits, uint64_t seed);
DetectionHead lookup_head(const ParamStore& store, const std::string& prefix);

struct HeadOutput {
    VarPtr class_logits;  // (1, num_class_logits, 1, 1)
    VarPtr regression;    // (1, 8, 1, 1)
};

HeadOutput head_forward(Tape& t, const DetectionHead& head, const VarPtr& fused);

OffsetTarget regression_to_offsets(const Tensor4& reg);
Tensor4 offsets_to_tensor(const OffsetTarget& t);

}  // namespace tlnet
