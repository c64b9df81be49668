#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tlnet/box3d.hpp"
#include "tlnet/tensor.hpp"

namespace tlnet {

struct Var {
    Tensor4 value;
    Tensor4 grad;
    bool requires_grad = true;

    explicit Var(Tensor4 v, bool rg = true)
        : value(std::move(v)), grad(value.n, value.c, value.h, value.w), requires_grad(rg) {}
};

using VarPtr = std::shared_ptr<Var>;

/// Reverse-mode tape. Ops append backward closures in execution order;
/// backward() replays them in reverse. One tape per forward pass.
class Tape {
  public:
    VarPtr leaf(Tensor4 value, bool requires_grad = true) {
        return std::make_shared<Var>(std::move(value), requires_grad);
    }

    VarPtr record(Tensor4 out_value, std::function<void(Var&)> backward) {
        auto out = std::make_shared<Var>(std::move(out_value));
        ops_.push_back([out, fn = std::move(backward)]() { fn(*out); });
        return out;
    }

    void backward(const VarPtr& root);

    size_t num_ops() const { return ops_.size(); }

  private:
    std::vector<std::function<void()>> ops_;
};

// -- layers (each forward records its backward on the tape) -------------------

VarPtr conv2d(Tape& t, const VarPtr& x, const VarPtr& weight, const VarPtr& bias, int stride,
              int padding);
VarPtr relu(Tape& t, const VarPtr& x);
VarPtr maxpool2(Tape& t, const VarPtr& x);
VarPtr bilinear_upsample2(Tape& t, const VarPtr& x);
/// weight: (out, in, 1, 1); bias: (1, out, 1, 1); x flattened to length in.
VarPtr fully_connected(Tape& t, const VarPtr& x, const VarPtr& weight, const VarPtr& bias);
VarPtr add(Tape& t, const VarPtr& a, const VarPtr& b);
VarPtr scale(Tape& t, const VarPtr& x, double k);
VarPtr concat_channels(Tape& t, const VarPtr& a, const VarPtr& b);

/// roi is in feature-map coordinates; pixel i covers [i, i+1).
/// One bilinear sample per bin at the bin center.
VarPtr roi_align(Tape& t, const VarPtr& features, const Roi2D& roi, int out_h, int out_w);

/// Per-channel cosine similarity, flattening each channel to a vector.
/// Output shape (1, C, 1, 1). Denominator guarded by max(|l||r|, eps).
VarPtr coherence_scores(Tape& t, const VarPtr& left, const VarPtr& right, double eps = 1e-8,
                        bool detach = false);

/// out[n,c,:,:] = s[c] * x[n,c,:,:]; s has shape (1, C, 1, 1).
VarPtr scale_channels(Tape& t, const VarPtr& x, const VarPtr& s);

/// Per-location softmax over the channel axis vs a one-hot target,
/// mean-reduced over locations. Returns a (1,1,1,1) scalar.
VarPtr softmax_cross_entropy(Tape& t, const VarPtr& logits, const Tensor4& one_hot);

VarPtr smooth_l1(Tape& t, const VarPtr& pred, const Tensor4& target, double beta = 1.0);

VarPtr reduce_sum(Tape& t, const VarPtr& x);
/// dot(x, weights) with constant weights; handy for scalarizing fragments.
VarPtr weighted_sum(Tape& t, const VarPtr& x, const Tensor4& weights);

Tensor4 softmax_channels(const Tensor4& logits);

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)). Conv fans derive from
/// the kernel; 1x1 FC weights degenerate to (out, in).
Tensor4 xavier_init(uint64_t seed, int n, int c, int h, int w);

struct GradCheckReport {
    struct Entry {
        std::string name;
        double max_rel_err = 0.0;
    };
    std::vector<Entry> entries;
    double max_rel_err = 0.0;
    bool passed(double tolerance) const { return max_rel_err <= tolerance; }
};

/// Central finite differences (step 1e-5) against reverse-mode gradients for a
/// scalar-valued fragment rebuilt on a fresh tape per evaluation.
GradCheckReport gradient_check(
    const std::function<VarPtr(Tape&, const std::vector<VarPtr>&)>& fragment,
    const std::vector<std::pair<std::string, Tensor4>>& inputs, double step = 1e-5);

}  // namespace tlnet
