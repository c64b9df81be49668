#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "tlnet/eval.hpp"

using namespace tlnet;

namespace {

GroundTruthLabel make_gt(double x, double z, double yaw, int occ = 0, double trunc = 0.0,
                         double bbox_h = 50.0, const std::string& cls = "Car") {
    GroundTruthLabel lab;
    lab.class_name = cls;
    lab.occlusion = occ;
    lab.truncation = trunc;
    lab.bbox[0] = 100;
    lab.bbox[1] = 100;
    lab.bbox[2] = 140;
    lab.bbox[3] = 100 + bbox_h;
    lab.h = 1.5;
    lab.w = 1.7;
    lab.l = 4.0;
    lab.location = {x, 1.65, z};
    lab.rotation_y = yaw;
    return lab;
}

Detection make_det(const GroundTruthLabel& gt, double score, double dx = 0, double dz = 0) {
    Detection det;
    det.box = label_to_box(gt);
    det.box.center.x += dx;
    det.box.center.z += dz;
    det.score = score;
    det.class_name = "Car";
    for (int i = 0; i < 4; ++i) det.bbox[i] = gt.bbox[i];
    return det;
}

// Independent evaluator: recomputes matching and precision/recall from scratch
// at every distinct score threshold, nothing shared with the library path.
double oracle_ap(const std::vector<FrameAnnotations>& frames, const MatchCriterion& crit,
                 Difficulty regime, const std::string& cls, ApInterpolation interp) {
    auto quality = [&](const Detection& d, const GroundTruthLabel& g) {
        const OrientedBox3D gb = label_to_box(g);
        if (crit.kind == MatchKind::iou3d) {
            const double v = iou_3d(d.box, gb);
            return v >= crit.threshold ? v : std::nan("");
        }
        if (crit.kind == MatchKind::ioubev) {
            const double v = iou_bev(d.box, gb);
            return v >= crit.threshold ? v : std::nan("");
        }
        const double dist = std::sqrt(std::pow(d.box.center.x - gb.center.x, 2) +
                                      std::pow(d.box.center.y - gb.center.y, 2) +
                                      std::pow(d.box.center.z - gb.center.z, 2));
        return dist < crit.threshold ? -dist : std::nan("");
    };
    auto in_regime = [&](const GroundTruthLabel& g) {
        return g.class_name == cls && (int)difficulty_of(g) <= (int)regime;
    };
    auto iou2d = [](const double a[4], const double b[4]) {
        const double iw = std::min(a[2], b[2]) - std::max(a[0], b[0]);
        const double ih = std::min(a[3], b[3]) - std::max(a[1], b[1]);
        if (iw <= 0 || ih <= 0) return 0.0;
        const double inter = iw * ih;
        return inter / ((a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter);
    };

    long total_gt = 0;
    std::vector<double> scores;
    for (const auto& f : frames) {
        for (const auto& g : f.gts) total_gt += in_regime(g);
        for (const auto& d : f.detections)
            if (d.class_name == cls) scores.push_back(d.score);
    }
    if (total_gt == 0) return 0.0;
    std::sort(scores.begin(), scores.end(), std::greater<double>());
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());

    struct Point {
        double recall, precision;
    };
    std::vector<Point> points;
    for (double threshold : scores) {
        long tp = 0, fp = 0;
        for (const auto& f : frames) {
            std::vector<const Detection*> dets;
            for (const auto& d : f.detections)
                if (d.class_name == cls && d.score >= threshold) dets.push_back(&d);
            std::stable_sort(dets.begin(), dets.end(),
                             [](const Detection* a, const Detection* b) {
                                 return a->score > b->score;
                             });
            std::vector<bool> used(f.gts.size(), false);
            for (const Detection* d : dets) {
                int pick = -1;
                double best = -1e30;
                for (size_t gi = 0; gi < f.gts.size(); ++gi) {
                    if (used[gi] || !in_regime(f.gts[gi])) continue;
                    const double q = quality(*d, f.gts[gi]);
                    if (!std::isnan(q) && q > best) {
                        best = q;
                        pick = (int)gi;
                    }
                }
                if (pick >= 0) {
                    used[pick] = true;
                    ++tp;
                    continue;
                }
                bool absorbed = false;
                for (const auto& g : f.gts) {
                    if (g.class_name == cls && !in_regime(g) && !std::isnan(quality(*d, g)))
                        absorbed = true;
                    else if (g.class_name == "DontCare" && iou2d(d->bbox, g.bbox) >= 0.5)
                        absorbed = true;
                    if (absorbed) break;
                }
                if (!absorbed) ++fp;
            }
        }
        if (tp + fp > 0)
            points.push_back({double(tp) / double(total_gt), double(tp) / double(tp + fp)});
    }

    const int n = interp == ApInterpolation::eleven_point ? 11 : 40;
    double sum = 0;
    for (int k = 0; k < n; ++k) {
        const double r = interp == ApInterpolation::eleven_point ? k / 10.0 : (k + 1) / 40.0;
        double best = 0;
        for (const auto& p : points)
            if (p.recall >= r - 1e-12) best = std::max(best, p.precision);
        sum += best;
    }
    return sum / n;
}

std::vector<FrameAnnotations> random_fixture(uint64_t seed, int n_frames) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> xd(-15, 15), zd(8, 60), yawd(-M_PI, M_PI);
    std::uniform_real_distribution<double> noise(-1.5, 1.5), sc(0.05, 0.99);
    std::uniform_int_distribution<int> count(0, 4), occd(0, 3), extra(0, 2);
    std::uniform_real_distribution<double> truncd(0.0, 0.6), bhd(20, 60);
    std::vector<FrameAnnotations> frames;
    for (int f = 0; f < n_frames; ++f) {
        FrameAnnotations fa;
        const int n_gt = count(rng);
        for (int i = 0; i < n_gt; ++i) {
            auto gt = make_gt(xd(rng), zd(rng), yawd(rng), occd(rng), truncd(rng), bhd(rng));
            fa.gts.push_back(gt);
            // A detection near most gts, with varying displacement and score.
            if (i % 4 != 3)
                fa.detections.push_back(make_det(gt, sc(rng), noise(rng) * 0.6, noise(rng)));
        }
        if (f % 5 == 0) fa.gts.push_back(make_gt(0, 30, 0, 0, 0, 30, "DontCare"));
        for (int i = extra(rng); i-- > 0;)  // pure false positives
            fa.detections.push_back(make_det(make_gt(xd(rng), zd(rng), yawd(rng)), sc(rng)));
        frames.push_back(std::move(fa));
    }
    return frames;
}

}  // namespace

TEST_CASE("matching trivial cases") {
    const auto gt = make_gt(2, 20, 0.3);
    const MatchCriterion iou{MatchKind::iou3d, 0.5};

    CHECK(match({make_det(gt, 0.9)}, {gt}, iou, Difficulty::hard, "Car") ==
          std::vector<int>{1});

    // Two detections on one gt: higher score wins, the other is a fp.
    CHECK(match({make_det(gt, 0.5), make_det(gt, 0.8)}, {gt}, iou, Difficulty::hard, "Car") ==
          std::vector<int>{0, 1});

    // Distance criterion branches at the threshold.
    const auto near = make_det(gt, 0.9, 0.6, 0.0);
    CHECK(match({near}, {gt}, {MatchKind::distance, 0.5}, Difficulty::hard, "Car") ==
          std::vector<int>{0});
    CHECK(match({near}, {gt}, {MatchKind::distance, 1.0}, Difficulty::hard, "Car") ==
          std::vector<int>{1});
}

TEST_CASE("out-of-regime and DontCare gts absorb false positives") {
    auto occluded = make_gt(2, 20, 0.0, 3);  // excluded everywhere
    const auto det = make_det(occluded, 0.9);
    const auto flags =
        match({det}, {occluded}, {MatchKind::iou3d, 0.5}, Difficulty::hard, "Car");
    CHECK(flags == std::vector<int>{-1});

    auto dc = make_gt(0, 30, 0, 0, 0, 50, "DontCare");
    Detection loose;
    loose.class_name = "Car";
    loose.score = 0.7;
    loose.box = {{50, 1.65, 60}, 1.5, 1.7, 4.0, 0};  // matches nothing in 3D
    for (int i = 0; i < 4; ++i) loose.bbox[i] = dc.bbox[i];  // but overlaps the region
    CHECK(match({loose}, {dc}, {MatchKind::iou3d, 0.5}, Difficulty::hard, "Car") ==
          std::vector<int>{-1});
}

TEST_CASE("pr curve and 11-point interpolation closed forms") {
    // 5 tps over 5 gts at descending scores: precision 1 everywhere.
    std::vector<std::pair<double, int>> flags;
    for (int i = 0; i < 5; ++i) flags.push_back({0.9 - i * 0.1, 1});
    auto curve = pr_curve(flags, 5);
    for (const auto& p : curve) CHECK(p.precision == doctest::Approx(1.0));
    CHECK(average_precision(curve, ApInterpolation::eleven_point) == doctest::Approx(1.0));

    // Half the gts recalled at precision 1, then nothing: 11-point AP = 6/11.
    std::vector<std::pair<double, int>> half;
    for (int i = 0; i < 5; ++i) half.push_back({0.9 - i * 0.1, 1});
    auto hc = pr_curve(half, 10);
    CHECK(average_precision(hc, ApInterpolation::eleven_point) ==
          doctest::Approx(6.0 / 11.0).epsilon(1e-12));

    CHECK(pr_curve({}, 0).empty());
    CHECK(average_precision({}, ApInterpolation::eleven_point) == doctest::Approx(0.0));

    // Hand staircase: flags (by score desc) tp, fp, tp, fp over 2 gts.
    // Recalls .5,.5,1,1; raw precisions 1,.5,2/3,.5; smoothed 1,2/3,2/3,.5.
    std::vector<std::pair<double, int>> mix = {
        {0.9, 1}, {0.8, 0}, {0.7, 1}, {0.6, 0}};
    auto mc = pr_curve(mix, 2);
    REQUIRE(mc.size() == 4);
    CHECK(mc[0].precision == doctest::Approx(1.0));
    CHECK(mc[1].precision == doctest::Approx(2.0 / 3.0));
    CHECK(mc[2].precision == doctest::Approx(2.0 / 3.0));
    CHECK(mc[3].precision == doctest::Approx(0.5));
    // AP: recalls 0-0.5 interpolate precision 1 (6 points), 0.6-1.0 get 2/3.
    CHECK(average_precision(mc, ApInterpolation::eleven_point) ==
          doctest::Approx((6 * 1.0 + 5 * 2.0 / 3.0) / 11.0).epsilon(1e-12));
}

TEST_CASE("perfect detections score AP 1 on every cell with gts") {
    auto frames = random_fixture(77, 10);
    for (auto& f : frames) {
        f.detections.clear();
        for (const auto& g : f.gts)
            if (g.class_name == "Car") f.detections.push_back(make_det(g, 0.9));
    }
    const auto report = evaluate(frames, "Car");
    for (const auto& cell : report.cells) {
        if (cell.gt_count == 0) continue;
        CHECK(cell.ap == doctest::Approx(1.0));
        CHECK(cell.fp == 0);
    }
}

TEST_CASE("library AP equals the brute-force oracle on a 20-frame fixture") {
    const auto frames = random_fixture(123, 20);
    for (auto interp : {ApInterpolation::eleven_point, ApInterpolation::forty_point}) {
        const auto report = evaluate(frames, "Car", interp);
        REQUIRE(report.cells.size() == 27);
        for (const auto& cell : report.cells) {
            const double expected =
                oracle_ap(frames, cell.criterion, cell.regime, "Car", interp);
            CHECK(std::abs(cell.ap - expected) < 1e-12);
        }
    }
}

TEST_CASE("stricter thresholds never increase AP") {
    for (uint64_t seed : {1u, 2u, 3u, 4u}) {
        const auto report = evaluate(random_fixture(seed, 12), "Car");
        for (auto kind : {MatchKind::iou3d, MatchKind::ioubev})
            for (auto regime : {Difficulty::easy, Difficulty::moderate, Difficulty::hard}) {
                const double a3 = report.find(kind, 0.3, regime)->ap;
                const double a5 = report.find(kind, 0.5, regime)->ap;
                const double a7 = report.find(kind, 0.7, regime)->ap;
                CHECK(a7 <= a5 + 1e-12);
                CHECK(a5 <= a3 + 1e-12);
            }
        for (auto regime : {Difficulty::easy, Difficulty::moderate, Difficulty::hard}) {
            const double l2 = report.find(MatchKind::distance, 2.0, regime)->ap;
            const double l1 = report.find(MatchKind::distance, 1.0, regime)->ap;
            const double l05 = report.find(MatchKind::distance, 0.5, regime)->ap;
            CHECK(l05 <= l1 + 1e-12);
            CHECK(l1 <= l2 + 1e-12);
        }
    }
}

TEST_CASE("evaluation is invariant to frame and detection order") {
    auto frames = random_fixture(55, 8);
    const auto base = evaluate(frames, "Car");
    std::mt19937_64 rng(5);
    std::shuffle(frames.begin(), frames.end(), rng);
    for (auto& f : frames) std::shuffle(f.detections.begin(), f.detections.end(), rng);
    const auto shuffled = evaluate(frames, "Car");
    REQUIRE(base.cells.size() == shuffled.cells.size());
    for (size_t i = 0; i < base.cells.size(); ++i)
        CHECK(base.cells[i].ap == doctest::Approx(shuffled.cells[i].ap).epsilon(1e-12));
}

TEST_CASE("replacing a false positive with a true positive never lowers AP") {
    auto frames = random_fixture(31, 6);
    // Find an unmatched gt and a pure fp; move the fp onto the gt.
    const auto before = evaluate(frames, "Car");
    for (auto& f : frames) {
        for (const auto& g : f.gts) {
            if (g.class_name != "Car" || difficulty_of(g) == Difficulty::excluded) continue;
            bool covered = false;
            for (const auto& d : f.detections)
                if (iou_3d(d.box, label_to_box(g)) >= 0.5) covered = true;
            if (!covered && !f.detections.empty()) {
                f.detections.back().box = label_to_box(g);
                goto done;
            }
        }
    }
done:
    const auto after = evaluate(frames, "Car");
    for (size_t i = 0; i < before.cells.size(); ++i)
        CHECK(after.cells[i].ap >= before.cells[i].ap - 1e-12);
}

TEST_CASE("report csv shape") {
    const auto report = evaluate(random_fixture(9, 4), "Car");
    const auto csv = report_csv(report);
    CHECK(csv.rfind("criterion,threshold,regime,ap,gt_count,tp,fp\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 28);  // header + 27 cells
    CHECK(curve_svg(report.cells[0]).find("<svg") != std::string::npos);
}
