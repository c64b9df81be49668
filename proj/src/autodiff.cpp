#include "tlnet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace tlnet {

void Tape::backward(const VarPtr& root) {
    if (root->value.size() != 1) throw ShapeMismatch("backward root must be scalar");
    root->grad.fill(0.0);
    root->grad.data[0] = 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

VarPtr conv2d(Tape& t, const VarPtr& x, const VarPtr& weight, const VarPtr& bias, int stride,
              int padding) {
    const Tensor4& xv = x->value;
    const Tensor4& wv = weight->value;
    if (wv.c != xv.c) throw ShapeMismatch("conv2d: input channels != kernel channels");
    if (bias->value.c != wv.n || bias->value.size() != size_t(wv.n))
        throw ShapeMismatch("conv2d: bias shape");
    if (stride < 1) throw ShapeMismatch("conv2d: stride < 1");
    const int oh = (xv.h + 2 * padding - wv.h) / stride + 1;
    const int ow = (xv.w + 2 * padding - wv.w) / stride + 1;
    if (oh <= 0 || ow <= 0) throw ShapeMismatch("conv2d: empty output");

    Tensor4 out(xv.n, wv.n, oh, ow);
    for (int in = 0; in < xv.n; ++in)
        for (int oc = 0; oc < wv.n; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = bias->value.data[oc];
                    for (int ic = 0; ic < xv.c; ++ic)
                        for (int ky = 0; ky < wv.h; ++ky) {
                            const int iy = oy * stride - padding + ky;
                            if (iy < 0 || iy >= xv.h) continue;
                            for (int kx = 0; kx < wv.w; ++kx) {
                                const int ix = ox * stride - padding + kx;
                                if (ix < 0 || ix >= xv.w) continue;
                                acc += xv.at(in, ic, iy, ix) * wv.at(oc, ic, ky, kx);
                            }
                        }
                    out.at(in, oc, oy, ox) = acc;
                }

    return t.record(std::move(out), [x, weight, bias, stride, padding](Var& o) {
        const Tensor4& xv = x->value;
        const Tensor4& wv = weight->value;
        const int oh = o.value.h, ow = o.value.w;
        for (int in = 0; in < xv.n; ++in)
            for (int oc = 0; oc < wv.n; ++oc)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        const double g = o.grad.at(in, oc, oy, ox);
                        if (g == 0.0) continue;
                        bias->grad.data[oc] += g;
                        for (int ic = 0; ic < xv.c; ++ic)
                            for (int ky = 0; ky < wv.h; ++ky) {
                                const int iy = oy * stride - padding + ky;
                                if (iy < 0 || iy >= xv.h) continue;
                                for (int kx = 0; kx < wv.w; ++kx) {
                                    const int ix = ox * stride - padding + kx;
                                    if (ix < 0 || ix >= xv.w) continue;
                                    x->grad.at(in, ic, iy, ix) += g * wv.at(oc, ic, ky, kx);
                                    weight->grad.at(oc, ic, ky, kx) += g * xv.at(in, ic, iy, ix);
                                }
                            }
                    }
    });
}

VarPtr relu(Tape& t, const VarPtr& x) {
    Tensor4 out = x->value;
    for (double& v : out.data) v = std::max(0.0, v);
    return t.record(std::move(out), [x](Var& o) {
        for (size_t i = 0; i < x->value.size(); ++i)
            if (x->value.data[i] > 0.0) x->grad.data[i] += o.grad.data[i];
    });
}

VarPtr maxpool2(Tape& t, const VarPtr& x) {
    const Tensor4& xv = x->value;
    const int oh = xv.h / 2, ow = xv.w / 2;
    if (oh == 0 || ow == 0) throw ShapeMismatch("maxpool2: input too small");
    Tensor4 out(xv.n, xv.c, oh, ow);
    auto argmax = std::make_shared<std::vector<size_t>>(out.size());
    size_t oi = 0;
    for (int in = 0; in < xv.n; ++in)
        for (int ic = 0; ic < xv.c; ++ic)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox, ++oi) {
                    double best = -1e300;
                    size_t best_idx = 0;
                    // row-major scan: first maximizer wins ties
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const size_t idx =
                                ((size_t(in) * xv.c + ic) * xv.h + oy * 2 + dy) * xv.w + ox * 2 +
                                dx;
                            if (xv.data[idx] > best) {
                                best = xv.data[idx];
                                best_idx = idx;
                            }
                        }
                    out.data[oi] = best;
                    (*argmax)[oi] = best_idx;
                }
    return t.record(std::move(out), [x, argmax](Var& o) {
        for (size_t i = 0; i < o.grad.size(); ++i) x->grad.data[(*argmax)[i]] += o.grad.data[i];
    });
}

namespace {
struct Lerp {
    int lo, hi;
    double w_hi;
};
// align-corners-false source coordinate with border clamp
Lerp lerp_coords(int out_idx, int in_len) {
    double src = (out_idx + 0.5) / 2.0 - 0.5;
    src = std::clamp(src, 0.0, double(in_len - 1));
    const int lo = (int)std::floor(src);
    const int hi = std::min(lo + 1, in_len - 1);
    return {lo, hi, src - lo};
}
}  // namespace

VarPtr bilinear_upsample2(Tape& t, const VarPtr& x) {
    const Tensor4& xv = x->value;
    Tensor4 out(xv.n, xv.c, xv.h * 2, xv.w * 2);
    for (int in = 0; in < xv.n; ++in)
        for (int ic = 0; ic < xv.c; ++ic)
            for (int oy = 0; oy < out.h; ++oy) {
                const Lerp ly = lerp_coords(oy, xv.h);
                for (int ox = 0; ox < out.w; ++ox) {
                    const Lerp lx = lerp_coords(ox, xv.w);
                    out.at(in, ic, oy, ox) =
                        (1 - ly.w_hi) * ((1 - lx.w_hi) * xv.at(in, ic, ly.lo, lx.lo) +
                                         lx.w_hi * xv.at(in, ic, ly.lo, lx.hi)) +
                        ly.w_hi * ((1 - lx.w_hi) * xv.at(in, ic, ly.hi, lx.lo) +
                                   lx.w_hi * xv.at(in, ic, ly.hi, lx.hi));
                }
            }
    return t.record(std::move(out), [x](Var& o) {
        const Tensor4& xv = x->value;
        for (int in = 0; in < xv.n; ++in)
            for (int ic = 0; ic < xv.c; ++ic)
                for (int oy = 0; oy < o.grad.h; ++oy) {
                    const Lerp ly = lerp_coords(oy, xv.h);
                    for (int ox = 0; ox < o.grad.w; ++ox) {
                        const Lerp lx = lerp_coords(ox, xv.w);
                        const double g = o.grad.at(in, ic, oy, ox);
                        x->grad.at(in, ic, ly.lo, lx.lo) += g * (1 - ly.w_hi) * (1 - lx.w_hi);
                        x->grad.at(in, ic, ly.lo, lx.hi) += g * (1 - ly.w_hi) * lx.w_hi;
                        x->grad.at(in, ic, ly.hi, lx.lo) += g * ly.w_hi * (1 - lx.w_hi);
                        x->grad.at(in, ic, ly.hi, lx.hi) += g * ly.w_hi * lx.w_hi;
                    }
                }
    });
}

VarPtr fully_connected(Tape& t, const VarPtr& x, const VarPtr& weight, const VarPtr& bias) {
    const Tensor4& xv = x->value;
    const Tensor4& wv = weight->value;
    if (xv.n != 1) throw ShapeMismatch("fully_connected: batch must be 1");
    const int in_len = xv.c * xv.h * xv.w;
    if (wv.c != in_len || wv.h != 1 || wv.w != 1)
        throw ShapeMismatch("fully_connected: weight (out, in, 1, 1) mismatch");
    if (bias->value.size() != size_t(wv.n)) throw ShapeMismatch("fully_connected: bias");
    Tensor4 out(1, wv.n, 1, 1);
    for (int o = 0; o < wv.n; ++o) {
        double acc = bias->value.data[o];
        const double* wrow = &wv.data[size_t(o) * in_len];
        for (int i = 0; i < in_len; ++i) acc += wrow[i] * xv.data[i];
        out.data[o] = acc;
    }
    return t.record(std::move(out), [x, weight, bias, in_len](Var& o) {
        const int out_len = weight->value.n;
        for (int oi = 0; oi < out_len; ++oi) {
            const double g = o.grad.data[oi];
            if (g == 0.0) continue;
            bias->grad.data[oi] += g;
            const double* wrow = &weight->value.data[size_t(oi) * in_len];
            double* gwrow = &weight->grad.data[size_t(oi) * in_len];
            for (int i = 0; i < in_len; ++i) {
                x->grad.data[i] += g * wrow[i];
                gwrow[i] += g * x->value.data[i];
            }
        }
    });
}

VarPtr add(Tape& t, const VarPtr& a, const VarPtr& b) {
    require_same_shape(a->value, b->value, "add: shape mismatch");
    Tensor4 out = a->value;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] += b->value.data[i];
    return t.record(std::move(out), [a, b](Var& o) {
        for (size_t i = 0; i < o.grad.size(); ++i) {
            a->grad.data[i] += o.grad.data[i];
            b->grad.data[i] += o.grad.data[i];
        }
    });
}

VarPtr scale(Tape& t, const VarPtr& x, double k) {
    Tensor4 out = x->value;
    for (double& v : out.data) v *= k;
    return t.record(std::move(out), [x, k](Var& o) {
        for (size_t i = 0; i < o.grad.size(); ++i) x->grad.data[i] += k * o.grad.data[i];
    });
}

VarPtr concat_channels(Tape& t, const VarPtr& a, const VarPtr& b) {
    const Tensor4& av = a->value;
    const Tensor4& bv = b->value;
    if (av.n != bv.n || av.h != bv.h || av.w != bv.w)
        throw ShapeMismatch("concat_channels: spatial/batch mismatch");
    Tensor4 out(av.n, av.c + bv.c, av.h, av.w);
    const size_t plane = size_t(av.h) * av.w;
    for (int in = 0; in < av.n; ++in) {
        std::copy(av.data.begin() + size_t(in) * av.c * plane,
                  av.data.begin() + size_t(in + 1) * av.c * plane,
                  out.data.begin() + size_t(in) * out.c * plane);
        std::copy(bv.data.begin() + size_t(in) * bv.c * plane,
                  bv.data.begin() + size_t(in + 1) * bv.c * plane,
                  out.data.begin() + size_t(in) * out.c * plane + size_t(av.c) * plane);
    }
    return t.record(std::move(out), [a, b, plane](Var& o) {
        const int ac = a->value.c, bc = b->value.c;
        for (int in = 0; in < a->value.n; ++in) {
            const size_t base = size_t(in) * (ac + bc) * plane;
            for (size_t i = 0; i < size_t(ac) * plane; ++i)
                a->grad.data[size_t(in) * ac * plane + i] += o.grad.data[base + i];
            for (size_t i = 0; i < size_t(bc) * plane; ++i)
                b->grad.data[size_t(in) * bc * plane + i] += o.grad.data[base + size_t(ac) * plane + i];
        }
    });
}

namespace {
struct Sample {
    int x0, x1, y0, y1;
    double wx, wy;
};
// pixel i covers [i, i+1): continuous (u, v) -> index-space bilinear weights
Sample sample_at(double u, double v, int width, int height) {
    double fx = std::clamp(u - 0.5, 0.0, double(width - 1));
    double fy = std::clamp(v - 0.5, 0.0, double(height - 1));
    Sample s;
    s.x0 = (int)std::floor(fx);
    s.y0 = (int)std::floor(fy);
    s.x1 = std::min(s.x0 + 1, width - 1);
    s.y1 = std::min(s.y0 + 1, height - 1);
    s.wx = fx - s.x0;
    s.wy = fy - s.y0;
    return s;
}
}  // namespace

VarPtr roi_align(Tape& t, const VarPtr& features, const Roi2D& roi, int out_h, int out_w) {
    const Tensor4& fv = features->value;
    if (fv.n != 1) throw ShapeMismatch("roi_align: batch must be 1");
    if (roi.width() < 1e-3 || roi.height() < 1e-3)
        throw DegenerateRoi("roi smaller than 1e-3 feature px");
    const double bin_w = roi.width() / out_w;
    const double bin_h = roi.height() / out_h;
    Tensor4 out(1, fv.c, out_h, out_w);
    for (int oy = 0; oy < out_h; ++oy) {
        const double v = roi.min.v + (oy + 0.5) * bin_h;
        for (int ox = 0; ox < out_w; ++ox) {
            const double u = roi.min.u + (ox + 0.5) * bin_w;
            const Sample s = sample_at(u, v, fv.w, fv.h);
            for (int ic = 0; ic < fv.c; ++ic) {
                out.at(0, ic, oy, ox) =
                    (1 - s.wy) * ((1 - s.wx) * fv.at(0, ic, s.y0, s.x0) +
                                  s.wx * fv.at(0, ic, s.y0, s.x1)) +
                    s.wy * ((1 - s.wx) * fv.at(0, ic, s.y1, s.x0) +
                            s.wx * fv.at(0, ic, s.y1, s.x1));
            }
        }
    }
    return t.record(std::move(out), [features, roi, out_h, out_w, bin_w, bin_h](Var& o) {
        const Tensor4& fv = features->value;
        for (int oy = 0; oy < out_h; ++oy) {
            const double v = roi.min.v + (oy + 0.5) * bin_h;
            for (int ox = 0; ox < out_w; ++ox) {
                const double u = roi.min.u + (ox + 0.5) * bin_w;
                const Sample s = sample_at(u, v, fv.w, fv.h);
                for (int ic = 0; ic < fv.c; ++ic) {
                    const double g = o.grad.at(0, ic, oy, ox);
                    features->grad.at(0, ic, s.y0, s.x0) += g * (1 - s.wy) * (1 - s.wx);
                    features->grad.at(0, ic, s.y0, s.x1) += g * (1 - s.wy) * s.wx;
                    features->grad.at(0, ic, s.y1, s.x0) += g * s.wy * (1 - s.wx);
                    features->grad.at(0, ic, s.y1, s.x1) += g * s.wy * s.wx;
                }
            }
        }
    });
}

VarPtr coherence_scores(Tape& t, const VarPtr& left, const VarPtr& right, double eps,
                        bool detach) {
    const Tensor4& lv = left->value;
    const Tensor4& rv = right->value;
    require_same_shape(lv, rv, "coherence_scores: shape mismatch");
    const int channels = lv.c;
    const size_t plane = size_t(lv.h) * lv.w;
    Tensor4 out(1, channels, 1, 1);
    for (int ic = 0; ic < channels; ++ic) {
        const double* l = &lv.data[ic * plane];
        const double* r = &rv.data[ic * plane];
        double dot = 0, nl2 = 0, nr2 = 0;
        for (size_t i = 0; i < plane; ++i) {
            dot += l[i] * r[i];
            nl2 += l[i] * l[i];
            nr2 += r[i] * r[i];
        }
        out.data[ic] = dot / std::max(std::sqrt(nl2) * std::sqrt(nr2), eps);
    }
    if (detach) return t.leaf(std::move(out), false);
    return t.record(std::move(out), [left, right, eps, plane](Var& o) {
        const Tensor4& lv = left->value;
        const Tensor4& rv = right->value;
        for (int ic = 0; ic < lv.c; ++ic) {
            const double g = o.grad.data[ic];
            if (g == 0.0) continue;
            const double* l = &lv.data[ic * plane];
            const double* r = &rv.data[ic * plane];
            double* gl = &left->grad.data[ic * plane];
            double* gr = &right->grad.data[ic * plane];
            double dot = 0, nl2 = 0, nr2 = 0;
            for (size_t i = 0; i < plane; ++i) {
                dot += l[i] * r[i];
                nl2 += l[i] * l[i];
                nr2 += r[i] * r[i];
            }
            const double nl = std::sqrt(nl2), nr = std::sqrt(nr2);
            if (nl * nr > eps) {
                const double den = nl * nr;
                const double s = dot / den;
                for (size_t i = 0; i < plane; ++i) {
                    gl[i] += g * (r[i] / den - s * l[i] / nl2);
                    gr[i] += g * (l[i] / den - s * r[i] / nr2);
                }
            } else {
                // inside the guard the denominator is the constant eps
                for (size_t i = 0; i < plane; ++i) {
                    gl[i] += g * r[i] / eps;
                    gr[i] += g * l[i] / eps;
                }
            }
        }
    });
}

VarPtr scale_channels(Tape& t, const VarPtr& x, const VarPtr& s) {
    const Tensor4& xv = x->value;
    if (s->value.c != xv.c || s->value.size() != size_t(xv.c))
        throw ShapeMismatch("scale_channels: scores must be (1, C, 1, 1)");
    Tensor4 out = xv;
    const size_t plane = size_t(xv.h) * xv.w;
    for (int in = 0; in < xv.n; ++in)
        for (int ic = 0; ic < xv.c; ++ic) {
            double* o = &out.data[(size_t(in) * xv.c + ic) * plane];
            const double k = s->value.data[ic];
            for (size_t i = 0; i < plane; ++i) o[i] *= k;
        }
    return t.record(std::move(out), [x, s, plane](Var& o) {
        const Tensor4& xv = x->value;
        for (int in = 0; in < xv.n; ++in)
            for (int ic = 0; ic < xv.c; ++ic) {
                const size_t base = (size_t(in) * xv.c + ic) * plane;
                const double k = s->value.data[ic];
                double ds = 0;
                for (size_t i = 0; i < plane; ++i) {
                    x->grad.data[base + i] += k * o.grad.data[base + i];
                    ds += xv.data[base + i] * o.grad.data[base + i];
                }
                s->grad.data[ic] += ds;
            }
    });
}

Tensor4 softmax_channels(const Tensor4& logits) {
    Tensor4 out = logits;
    for (int in = 0; in < logits.n; ++in)
        for (int iy = 0; iy < logits.h; ++iy)
            for (int ix = 0; ix < logits.w; ++ix) {
                double m = -1e300;
                for (int ic = 0; ic < logits.c; ++ic)
                    m = std::max(m, logits.at(in, ic, iy, ix));
                double z = 0;
                for (int ic = 0; ic < logits.c; ++ic)
                    z += std::exp(logits.at(in, ic, iy, ix) - m);
                for (int ic = 0; ic < logits.c; ++ic)
                    out.at(in, ic, iy, ix) = std::exp(logits.at(in, ic, iy, ix) - m) / z;
            }
    return out;
}

VarPtr softmax_cross_entropy(Tape& t, const VarPtr& logits, const Tensor4& one_hot) {
    require_same_shape(logits->value, one_hot, "softmax_cross_entropy: shape mismatch");
    const Tensor4 probs = softmax_channels(logits->value);
    const int locations = logits->value.h * logits->value.w * logits->value.n;
    double loss = 0;
    for (size_t i = 0; i < probs.size(); ++i)
        if (one_hot.data[i] != 0.0)
            loss -= one_hot.data[i] * std::log(std::max(probs.data[i], 1e-300));
    Tensor4 out(1, 1, 1, 1);
    out.data[0] = loss / locations;
    auto probs_cache = std::make_shared<Tensor4>(probs);
    auto target_cache = std::make_shared<Tensor4>(one_hot);
    return t.record(std::move(out), [logits, probs_cache, target_cache, locations](Var& o) {
        const double g = o.grad.data[0] / locations;
        const Tensor4& p = *probs_cache;
        const Tensor4& tg = *target_cache;
        // per-location: d = (sum(target) * softmax - target)
        for (int in = 0; in < p.n; ++in)
            for (int iy = 0; iy < p.h; ++iy)
                for (int ix = 0; ix < p.w; ++ix) {
                    double tsum = 0;
                    for (int ic = 0; ic < p.c; ++ic) tsum += tg.at(in, ic, iy, ix);
                    for (int ic = 0; ic < p.c; ++ic)
                        logits->grad.at(in, ic, iy, ix) +=
                            g * (tsum * p.at(in, ic, iy, ix) - tg.at(in, ic, iy, ix));
                }
    });
}

VarPtr smooth_l1(Tape& t, const VarPtr& pred, const Tensor4& target, double beta) {
    require_same_shape(pred->value, target, "smooth_l1: shape mismatch");
    const size_t count = pred->value.size();
    double loss = 0;
    for (size_t i = 0; i < count; ++i) {
        const double x = std::abs(pred->value.data[i] - target.data[i]);
        loss += x < beta ? 0.5 * x * x / beta : x - 0.5 * beta;
    }
    Tensor4 out(1, 1, 1, 1);
    out.data[0] = loss / count;
    auto target_cache = std::make_shared<Tensor4>(target);
    return t.record(std::move(out), [pred, target_cache, beta, count](Var& o) {
        const double g = o.grad.data[0] / count;
        for (size_t i = 0; i < count; ++i) {
            const double x = pred->value.data[i] - target_cache->data[i];
            const double d = std::abs(x) < beta ? x / beta : (x > 0 ? 1.0 : -1.0);
            pred->grad.data[i] += g * d;
        }
    });
}

VarPtr reduce_sum(Tape& t, const VarPtr& x) {
    Tensor4 out(1, 1, 1, 1);
    for (double v : x->value.data) out.data[0] += v;
    return t.record(std::move(out), [x](Var& o) {
        for (double& g : x->grad.data) g += o.grad.data[0];
    });
}

VarPtr weighted_sum(Tape& t, const VarPtr& x, const Tensor4& weights) {
    require_same_shape(x->value, weights, "weighted_sum: shape mismatch");
    Tensor4 out(1, 1, 1, 1);
    for (size_t i = 0; i < weights.size(); ++i) out.data[0] += x->value.data[i] * weights.data[i];
    auto w = std::make_shared<Tensor4>(weights);
    return t.record(std::move(out), [x, w](Var& o) {
        for (size_t i = 0; i < w->size(); ++i) x->grad.data[i] += o.grad.data[0] * w->data[i];
    });
}

Tensor4 xavier_init(uint64_t seed, int n, int c, int h, int w) {
    const long fan_in = long(c) * h * w;
    const long fan_out = long(n) * h * w;
    if (fan_in + fan_out <= 0) throw Error("xavier_init: zero fan");
    const double a = std::sqrt(6.0 / double(fan_in + fan_out));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-a, a);
    Tensor4 out(n, c, h, w);
    for (double& v : out.data) v = dist(rng);
    return out;
}

GradCheckReport gradient_check(
    const std::function<VarPtr(Tape&, const std::vector<VarPtr>&)>& fragment,
    const std::vector<std::pair<std::string, Tensor4>>& inputs, double step) {
    auto evaluate = [&](const std::vector<Tensor4>& tensors) {
        Tape tape;
        std::vector<VarPtr> leaves;
        for (const auto& ten : tensors) leaves.push_back(tape.leaf(ten));
        VarPtr out = fragment(tape, leaves);
        if (out->value.size() != 1) throw ShapeMismatch("gradient_check: fragment not scalar");
        return out->value.data[0];
    };

    std::vector<Tensor4> base;
    for (const auto& [name, ten] : inputs) base.push_back(ten);

    // analytic pass
    Tape tape;
    std::vector<VarPtr> leaves;
    for (const auto& ten : base) leaves.push_back(tape.leaf(ten));
    VarPtr out = fragment(tape, leaves);
    tape.backward(out);

    GradCheckReport report;
    for (size_t k = 0; k < base.size(); ++k) {
        double worst = 0.0;
        for (size_t i = 0; i < base[k].size(); ++i) {
            std::vector<Tensor4> plus = base, minus = base;
            plus[k].data[i] += step;
            minus[k].data[i] -= step;
            const double numeric = (evaluate(plus) - evaluate(minus)) / (2.0 * step);
            const double analytic = leaves[k]->grad.data[i];
            const double err = std::abs(analytic - numeric) /
                               std::max({std::abs(analytic), std::abs(numeric), 1e-3});
            worst = std::max(worst, err);
        }
        report.entries.push_back({inputs[k].first, worst});
        report.max_rel_err = std::max(report.max_rel_err, worst);
    }
    return report;
}

}  // namespace tlnet
