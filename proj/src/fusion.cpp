#include "tlnet/fusion.hpp"

#include "tlnet/errors.hpp"

namespace tlnet {

FusionMode parse_fusion_mode(const std::string& name) {
    if (name == "concat") return FusionMode::concat;
    if (name == "add") return FusionMode::add;
    if (name == "reweight") return FusionMode::reweight;
    throw Error("unknown fusion mode: " + name);
}

std::string fusion_mode_name(FusionMode mode) {
    switch (mode) {
        case FusionMode::concat: return "concat";
        case FusionMode::add: return "add";
        case FusionMode::reweight: return "reweight";
    }
    return "?";
}

VarPtr fuse(Tape& t, const RoiFeaturePair& pair, FusionMode mode, bool detach_scores) {
    require_same_shape(pair.left->value, pair.right->value, "fuse: pair shape mismatch");
    switch (mode) {
        case FusionMode::add:
            return add(t, pair.left, pair.right);
        case FusionMode::concat:
            return concat_channels(t, pair.left, pair.right);
        case FusionMode::reweight: {
            VarPtr s = coherence_scores(t, pair.left, pair.right, 1e-8, detach_scores);
            return add(t, scale_channels(t, pair.left, s), scale_channels(t, pair.right, s));
        }
    }
    throw Error("fuse: bad mode");
}

DetectionHead make_head(ParamStore& store, const std::string& prefix, int in_len, int hidden,
                        int num_class_logits, uint64_t seed) {
    DetectionHead h;
    h.in_len = in_len;
    h.num_classes = num_class_logits;
    h.fc1_w = store.create(prefix + ".fc1.w", xavier_init(seed + 1, hidden, in_len, 1, 1));
    h.fc1_b = store.create(prefix + ".fc1.b", Tensor4(1, hidden, 1, 1));
    h.fc2_w = store.create(prefix + ".fc2.w", xavier_init(seed + 2, hidden, hidden, 1, 1));
    h.fc2_b = store.create(prefix + ".fc2.b", Tensor4(1, hidden, 1, 1));
    h.cls_w =
        store.create(prefix + ".cls.w", xavier_init(seed + 3, num_class_logits, hidden, 1, 1));
    h.cls_b = store.create(prefix + ".cls.b", Tensor4(1, num_class_logits, 1, 1));
    h.reg_w = store.create(prefix + ".reg.w", xavier_init(seed + 4, 8, hidden, 1, 1));
    h.reg_b = store.create(prefix + ".reg.b", Tensor4(1, 8, 1, 1));
    return h;
}

DetectionHead lookup_head(const ParamStore& store, const std::string& prefix) {
    DetectionHead h;
    h.fc1_w = store.get(prefix + ".fc1.w");
    h.fc1_b = store.get(prefix + ".fc1.b");
    h.fc2_w = store.get(prefix + ".fc2.w");
    h.fc2_b = store.get(prefix + ".fc2.b");
    h.cls_w = store.get(prefix + ".cls.w");
    h.cls_b = store.get(prefix + ".cls.b");
    h.reg_w = store.get(prefix + ".reg.w");
    h.reg_b = store.get(prefix + ".reg.b");
    h.in_len = h.fc1_w->value.c;
    h.num_classes = h.cls_w->value.n;
    return h;
}

HeadOutput head_forward(Tape& t, const DetectionHead& head, const VarPtr& fused) {
    const Tensor4& fv = fused->value;
    if (fv.c * fv.h * fv.w != head.in_len)
        throw ShapeMismatch("head input length " + std::to_string(fv.c * fv.h * fv.w) +
                            " != " + std::to_string(head.in_len));
    VarPtr h1 = relu(t, fully_connected(t, fused, head.fc1_w, head.fc1_b));
    VarPtr h2 = relu(t, fully_connected(t, h1, head.fc2_w, head.fc2_b));
    HeadOutput out;
    out.class_logits = fully_connected(t, h2, head.cls_w, head.cls_b);
    out.regression = fully_connected(t, h2, head.reg_w, head.reg_b);
    return out;
}

OffsetTarget regression_to_offsets(const Tensor4& reg) {
    if (reg.size() != 8) throw ShapeMismatch("regression tensor must have 8 values");
    OffsetTarget t;
    t.d_center = {reg.data[0], reg.data[1], reg.data[2]};
    t.d_size = {reg.data[3], reg.data[4], reg.data[5]};
    t.cos_theta = reg.data[6];
    t.sin_theta = reg.data[7];
    return t;
}

Tensor4 offsets_to_tensor(const OffsetTarget& t) {
    Tensor4 out(1, 8, 1, 1);
    out.data = {t.d_center.x, t.d_center.y, t.d_center.z, t.d_size.x,
                t.d_size.y,   t.d_size.z,   t.cos_theta,  t.sin_theta};
    return out;
}

}  // namespace tlnet
