#include "tlnet/gradcheck_suite.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "tlnet/autodiff.hpp"

namespace tlnet {

namespace {

Tensor4 random_tensor(std::mt19937_64& rng, int n, int c, int h, int w, double scale = 1.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    Tensor4 out(n, c, h, w);
    for (double& v : out.data) v = dist(rng);
    return out;
}

using Inputs = std::vector<std::pair<std::string, Tensor4>>;
using Fragment = std::function<VarPtr(Tape&, const std::vector<VarPtr>&)>;

struct Check {
    std::string name;
    double tolerance;
    // builds one randomized configuration
    std::function<void(std::mt19937_64&, Inputs*, Fragment*)> build;
};

}  // namespace

SuiteResult run_gradient_suite(int configs_per_op, double tol_single, double tol_composed,
                               uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto pick = [&rng](int lo, int hi) {
        return lo + int(rng() % uint64_t(hi - lo + 1));
    };

    std::vector<Check> checks;

    checks.push_back({"conv2d", tol_single, [&](std::mt19937_64& r, Inputs* in, Fragment* fr) {
        const int ci = pick(1, 3), co = pick(1, 3), k = pick(1, 3) == 2 ? 1 : 3;
        const int h = pick(4, 6), w = pick(4, 6);
        const int stride = pick(1, 2), pad = pick(0, 1);
        in->push_back({"x", random_tensor(r, 1, ci, h, w)});
        in->push_back({"w", random_tensor(r, co, ci, k, k)});
        in->push_back({"b", random_tensor(r, 1, co, 1, 1)});
        const int oh = (h + 2 * pad - k) / stride + 1, ow = (w + 2 * pad - k) / stride + 1;
        Tensor4 red = random_tensor(r, 1, co, oh, ow);
        *fr = [stride, pad, red](Tape& t, const std::vector<VarPtr>& v) {
            return weighted_sum(t, conv2d(t, v[0], v[1], v[2], stride, pad), red);
        };
    }});

    checks.push_back({"relu", tol_single, [&](std::mt19937_64& r, Inputs* in, Fragment* fr) {
        in->push_back({"x", random_tensor(r, 1, pick(1, 3), pick(2, 5), pick(2, 5))});
        const auto& x = in->back().second;
        Tensor4 red = random_tensor(r, x.n, x.c, x.h, x.w);
        *fr = [red](Tape& t, const std::vector<VarPtr>& v) {
            return weighted_sum(t, relu(t, v[0]), red);
        };
    }});

    checks.push_back({"maxpool2", tol_single, [&](std::mt19937_64& r, Inputs* in, Fragment* fr) {
        const int c = pick(1, 3), h = 2 * pick(1, 3), w = 2 * pick(1, 3);
        Tensor4 x = random_tensor(r, 1, c, h, w);
        // keep entries well separated so the step cannot flip the argmax
        for (size_t i = 0; i < x.size(); ++i) x.data[i] += 1e-3 * double(i % 97);
        in->push_back({"x", x});
        Tensor4 red = random_tensor(r, 1, c, h / 2, w / 2);
        *fr = [red](Tape& t, const std::vector<VarPtr>& v) {
            return weighted_sum(t, maxpool2(t, v[0]), red);
        };
    }});

    checks.push_back({"bilinear_upsample2", tol_single,
                      [&](std::mt19937_64& r, Inputs* in, Fragment* fr) {
        const int c = pick(1, 3), h = pick(2, 4), w = pick(2, 4);
        in->push_back({"x", random_tensor(r, 1, c, h, w)});
        Tensor4 red = random_tensor(r, 1, c, 2 * h, 2 * w);
        *fr = [red](Tape& t, const std::vector<VarPtr>& v) {
            return weighted_sum(t, bilinear_upsample2(t, v[0]), red);
        };
    }});

    checks.push_back({"fully_connected", tol_single,
                      [&](std::mt19937_64& r, Inputs* in, Fragment* fr) {
        const int c = pick(2, 6), out = pick(1, 4);
        in->push_back({"x", random_tensor(r, 1, c, 1, 1)});
        in->push_back({"w", random_tensor(r, out, c, 1, 1)});
        in->push_back({"b", random_tensor(r, 1, out, 1, 1)});
        Tensor4 red = random_tensor(r, 1, out, 1, 1);
        *fr = [red](Tape& t, const std::vector<VarPtr>& v) {
            return weighted_sum(t, fully_connected(t, v[0], v[1], v[2]), red);
        };
    }});

    checks.push_back({"roi_align", tol_single, [&](std::mt19937_64& r, Inputs* in, Fragment* fr) {
        const int c = pick(1, 3), h = pick(5, 8), w = pick(5, 8);
        in->push_back({"features", random_tensor(r, 1, c, h, w)});
        std::uniform_real_distribution<double> u(0.3, 1.0);
        Roi2D roi;
        roi.min = {u(r) * w * 0.3, u(r) * h * 0.3};
        roi.max = {roi.min.u + 1.0 + u(r) * (w - roi.min.u - 1.0),
                   roi.min.v + 1.0 + u(r) * (h - roi.min.v - 1.0)};
        const int oh = pick(2, 4), ow = pick(2, 4);
        Tensor4 red = random_tensor(r, 1, c, oh, ow);
        *fr = [roi, oh, ow, red](Tape& t, const std::vector<VarPtr>& v) {
            return weighted_sum(t, roi_align(t, v[0], roi, oh, ow), red);
        };
    }});

    checks.push_back({"coherence_scores", tol_single,
                      [&](std::mt19937_64& r, Inputs* in, Fragment* fr) {
        const int c = pick(2, 4), h = pick(2, 4), w = pick(2, 4);
        in->push_back({"left", random_tensor(r, 1, c, h, w)});
        in->push_back({"right", random_tensor(r, 1, c, h, w)});
        Tensor4 red = random_tensor(r, 1, c, 1, 1);
        *fr = [red](Tape& t, const std::vector<VarPtr>& v) {
            return weighted_sum(t, coherence_scores(t, v[0], v[1]), red);
        };
    }});

    checks.push_back({"reweight", tol_single, [&](std::mt19937_64& r, Inputs* in, Fragment* fr) {
        const int c = pick(2, 4), h = pick(2, 4), w = pick(2, 4);
        in->push_back({"left", random_tensor(r, 1, c, h, w)});
        in->push_back({"right", random_tensor(r, 1, c, h, w)});
        Tensor4 red = random_tensor(r, 1, c, h, w);
        *fr = [red](Tape& t, const std::vector<VarPtr>& v) {
            VarPtr s = coherence_scores(t, v[0], v[1]);
            return weighted_sum(t, scale_channels(t, v[0], s), red);
        };
    }});

    checks.push_back({"softmax_cross_entropy", tol_single,
                      [&](std::mt19937_64& r, Inputs* in, Fragment* fr) {
        const int c = pick(2, 5), h = pick(1, 3), w = pick(1, 3);
        in->push_back({"logits", random_tensor(r, 1, c, h, w, 2.0)});
        Tensor4 one_hot(1, c, h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                one_hot.at(0, int(r() % uint64_t(c)), y, x) = 1.0;
        *fr = [one_hot](Tape& t, const std::vector<VarPtr>& v) {
            return softmax_cross_entropy(t, v[0], one_hot);
        };
    }});

    checks.push_back({"smooth_l1", tol_single, [&](std::mt19937_64& r, Inputs* in, Fragment* fr) {
        const int c = pick(2, 6);
        in->push_back({"pred", random_tensor(r, 1, c, 1, 1, 2.0)});
        Tensor4 target = random_tensor(r, 1, c, 1, 1, 2.0);
        *fr = [target](Tape& t, const std::vector<VarPtr>& v) {
            return smooth_l1(t, v[0], target);
        };
    }});

    checks.push_back({"coherence_reweight_add_head", tol_composed,
                      [&](std::mt19937_64& r, Inputs* in, Fragment* fr) {
        const int c = pick(2, 3), h = 3, w = 3, hidden = 5;
        const int in_len = c * h * w;
        in->push_back({"left", random_tensor(r, 1, c, h, w)});
        in->push_back({"right", random_tensor(r, 1, c, h, w)});
        in->push_back({"fc_w", random_tensor(r, hidden, in_len, 1, 1, 0.5)});
        in->push_back({"fc_b", random_tensor(r, 1, hidden, 1, 1, 0.3)});
        in->push_back({"cls_w", random_tensor(r, 2, hidden, 1, 1, 0.5)});
        in->push_back({"cls_b", random_tensor(r, 1, 2, 1, 1, 0.3)});
        Tensor4 one_hot(1, 2, 1, 1);
        one_hot.data[r() % 2] = 1.0;
        *fr = [one_hot](Tape& t, const std::vector<VarPtr>& v) {
            VarPtr s = coherence_scores(t, v[0], v[1]);
            VarPtr fused =
                add(t, scale_channels(t, v[0], s), scale_channels(t, v[1], s));
            VarPtr hid = relu(t, fully_connected(t, fused, v[2], v[3]));
            VarPtr logits = fully_connected(t, hid, v[4], v[5]);
            return softmax_cross_entropy(t, logits, one_hot);
        };
    }});

    SuiteResult result;
    result.ok = true;
    char line[160];
    for (const auto& check : checks) {
        double worst = 0.0;
        for (int k = 0; k < configs_per_op; ++k) {
            Inputs inputs;
            Fragment fragment;
            check.build(rng, &inputs, &fragment);
            const GradCheckReport rep = gradient_check(fragment, inputs);
            worst = std::max(worst, rep.max_rel_err);
        }
        const bool ok = worst <= check.tolerance;
        result.ok = result.ok && ok;
        std::snprintf(line, sizeof(line), "%-28s max_rel_err %.3e (tol %.0e) %s\n",
                      check.name.c_str(), worst, check.tolerance, ok ? "pass" : "FAIL");
        result.report += line;
    }
    return result;
}

}  // namespace tlnet
