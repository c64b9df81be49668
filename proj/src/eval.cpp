#include "tlnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include "tlnet/errors.hpp"

namespace fs = std::filesystem;

namespace tlnet {

const char* difficulty_name(Difficulty d) {
    switch (d) {
        case Difficulty::easy: return "easy";
        case Difficulty::moderate: return "moderate";
        case Difficulty::hard: return "hard";
        case Difficulty::excluded: return "excluded";
    }
    return "?";
}

const char* match_kind_name(MatchKind k) {
    switch (k) {
        case MatchKind::iou3d: return "iou3d";
        case MatchKind::ioubev: return "ioubev";
        case MatchKind::distance: return "distance";
    }
    return "?";
}

const EvalCell* EvalReport::find(MatchKind kind, double threshold, Difficulty regime) const {
    for (const auto& c : cells)
        if (c.criterion.kind == kind && std::abs(c.criterion.threshold - threshold) < 1e-12 &&
            c.regime == regime)
            return &c;
    return nullptr;
}

namespace {

bool regime_includes(Difficulty gt_difficulty, Difficulty regime) {
    return (int)gt_difficulty <= (int)regime;
}

// criterion quality; higher is better. NaN when the criterion is not met.
double criterion_quality(const Detection& det, const GroundTruthLabel& gt,
                         const MatchCriterion& crit, bool loc_bev) {
    const OrientedBox3D gt_box = label_to_box(gt);
    switch (crit.kind) {
        case MatchKind::iou3d: {
            const double v = iou_3d(det.box, gt_box);
            return v >= crit.threshold ? v : std::nan("");
        }
        case MatchKind::ioubev: {
            const double v = iou_bev(det.box, gt_box);
            return v >= crit.threshold ? v : std::nan("");
        }
        case MatchKind::distance: {
            const double dx = det.box.center.x - gt_box.center.x;
            const double dy = loc_bev ? 0.0 : det.box.center.y - gt_box.center.y;
            const double dz = det.box.center.z - gt_box.center.z;
            const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
            return d < crit.threshold ? -d : std::nan("");
        }
    }
    return std::nan("");
}

double iou_2d(const double a[4], const double b[4]) {
    const double iw = std::min(a[2], b[2]) - std::max(a[0], b[0]);
    const double ih = std::min(a[3], b[3]) - std::max(a[1], b[1]);
    if (iw <= 0 || ih <= 0) return 0.0;
    const double inter = iw * ih;
    const double ua = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter;
    return ua <= 0 ? 0.0 : inter / ua;
}

std::vector<int> match_impl(const std::vector<Detection>& dets,
                            const std::vector<GroundTruthLabel>& gts,
                            const MatchCriterion& crit, Difficulty regime,
                            const std::string& class_name, bool loc_bev) {
    std::vector<int> order(dets.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = (int)i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return dets[a].score > dets[b].score; });

    std::vector<bool> gt_used(gts.size(), false);
    std::vector<int> flags(dets.size(), 0);
    for (int di : order) {
        const Detection& det = dets[di];
        if (det.class_name != class_name) {
            flags[di] = -1;  // other classes are outside this evaluation
            continue;
        }
        int best_gt = -1;
        double best_q = -1e30;
        for (size_t gi = 0; gi < gts.size(); ++gi) {
            const GroundTruthLabel& gt = gts[gi];
            if (gt_used[gi] || gt.class_name != class_name) continue;
            if (!regime_includes(difficulty_of(gt), regime)) continue;
            const double q = criterion_quality(det, gt, crit, loc_bev);
            if (!std::isnan(q) && q > best_q) {
                best_q = q;
                best_gt = (int)gi;
            }
        }
        if (best_gt >= 0) {
            gt_used[best_gt] = true;
            flags[di] = 1;
            continue;
        }
        // don't-care: out-of-regime same-class gts (by the criterion) and
        // DontCare regions (2D IoU >= 0.5) absorb would-be false positives
        bool dont_care = false;
        for (const GroundTruthLabel& gt : gts) {
            if (gt.class_name == class_name && !regime_includes(difficulty_of(gt), regime)) {
                if (!std::isnan(criterion_quality(det, gt, crit, loc_bev))) {
                    dont_care = true;
                    break;
                }
            } else if (gt.class_name == "DontCare") {
                if (iou_2d(det.bbox, gt.bbox) >= 0.5) {
                    dont_care = true;
                    break;
                }
            }
        }
        flags[di] = dont_care ? -1 : 0;
    }
    return flags;
}

}  // namespace

std::vector<int> match(const std::vector<Detection>& dets,
                       const std::vector<GroundTruthLabel>& gts, const MatchCriterion& criterion,
                       Difficulty regime, const std::string& class_name) {
    return match_impl(dets, gts, criterion, regime, class_name, false);
}

long count_relevant_gts(const std::vector<GroundTruthLabel>& gts, Difficulty regime,
                        const std::string& class_name) {
    long n = 0;
    for (const auto& gt : gts)
        if (gt.class_name == class_name && regime_includes(difficulty_of(gt), regime)) ++n;
    return n;
}

std::vector<PrPoint> pr_curve(const std::vector<std::pair<double, int>>& score_flags,
                              long total_gt) {
    if (total_gt <= 0) return {};
    std::vector<std::pair<double, int>> sf;
    for (const auto& [s, f] : score_flags)
        if (f >= 0) sf.push_back({s, f});
    std::stable_sort(sf.begin(), sf.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<PrPoint> curve;
    long tp = 0, fp = 0;
    for (size_t i = 0; i < sf.size(); ++i) {
        if (sf[i].second == 1) ++tp;
        else ++fp;
        // emit one sample per distinct score threshold
        if (i + 1 < sf.size() && sf[i + 1].first == sf[i].first) continue;
        curve.push_back({double(tp) / double(total_gt), double(tp) / double(tp + fp)});
    }
    // standard smoothing: precision becomes the max over recalls >= r
    for (size_t i = curve.size(); i-- > 1;)
        curve[i - 1].precision = std::max(curve[i - 1].precision, curve[i].precision);
    return curve;
}

double average_precision(const std::vector<PrPoint>& curve, ApInterpolation interp) {
    const int points = interp == ApInterpolation::eleven_point ? 11 : 40;
    double sum = 0.0;
    for (int k = 0; k < points; ++k) {
        const double r = interp == ApInterpolation::eleven_point ? k / 10.0 : (k + 1) / 40.0;
        double p = 0.0;
        for (const auto& pt : curve)
            if (pt.recall >= r - 1e-12) {
                p = pt.precision;  // smoothed curve: first sample at recall >= r is the max
                break;
            }
        sum += p;
    }
    return sum / points;
}

EvalReport evaluate(const std::vector<FrameAnnotations>& frames, const std::string& class_name,
                    ApInterpolation interp, bool loc_bev_distance) {
    std::vector<MatchCriterion> criteria = {
        {MatchKind::iou3d, 0.3},    {MatchKind::iou3d, 0.5},    {MatchKind::iou3d, 0.7},
        {MatchKind::ioubev, 0.3},   {MatchKind::ioubev, 0.5},   {MatchKind::ioubev, 0.7},
        {MatchKind::distance, 2.0}, {MatchKind::distance, 1.0}, {MatchKind::distance, 0.5}};
    EvalReport report;
    for (const auto& crit : criteria)
        for (Difficulty regime : {Difficulty::easy, Difficulty::moderate, Difficulty::hard}) {
            EvalCell cell;
            cell.criterion = crit;
            cell.regime = regime;
            std::vector<std::pair<double, int>> score_flags;
            for (const auto& frame : frames) {
                const auto flags = match_impl(frame.detections, frame.gts, crit, regime,
                                              class_name, loc_bev_distance);
                for (size_t i = 0; i < flags.size(); ++i)
                    score_flags.push_back({frame.detections[i].score, flags[i]});
                cell.gt_count += count_relevant_gts(frame.gts, regime, class_name);
            }
            for (const auto& [s, f] : score_flags) {
                if (f == 1) ++cell.tp;
                else if (f == 0) ++cell.fp;
            }
            cell.curve = pr_curve(score_flags, cell.gt_count);
            cell.ap = cell.gt_count == 0 ? 0.0 : average_precision(cell.curve, interp);
            report.cells.push_back(std::move(cell));
        }
    return report;
}

EvalReport evaluate_dirs(const std::string& det_dir, const std::string& gt_dir,
                         const std::string& class_name, ApInterpolation interp) {
    auto list_ids = [](const std::string& dir) {
        if (!fs::exists(dir)) throw MissingFile("missing directory " + dir);
        std::set<std::string> ids;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".txt") ids.insert(e.path().stem().string());
        return ids;
    };
    const auto gt_ids = list_ids(gt_dir);
    const auto det_ids = list_ids(det_dir);
    if (gt_ids != det_ids)
        throw IdMismatch("detection and ground-truth frame ids differ (" +
                         std::to_string(det_ids.size()) + " vs " +
                         std::to_string(gt_ids.size()) + " files)");
    std::vector<FrameAnnotations> frames;
    for (const auto& id : gt_ids) {
        FrameAnnotations fa;
        fa.gts = read_labels((fs::path(gt_dir) / (id + ".txt")).string());
        for (const auto& lab : read_labels((fs::path(det_dir) / (id + ".txt")).string())) {
            Detection det;
            det.box = label_to_box(lab);
            det.score = lab.score.value_or(1.0);
            det.class_name = lab.class_name;
            for (int i = 0; i < 4; ++i) det.bbox[i] = lab.bbox[i];
            fa.detections.push_back(det);
        }
        frames.push_back(std::move(fa));
    }
    return evaluate(frames, class_name, interp);
}

std::string report_csv(const EvalReport& report) {
    std::string out = "criterion,threshold,regime,ap,gt_count,tp,fp\n";
    char buf[160];
    for (const auto& c : report.cells) {
        std::snprintf(buf, sizeof(buf), "%s,%g,%s,%.6f,%ld,%ld,%ld\n",
                      match_kind_name(c.criterion.kind), c.criterion.threshold,
                      difficulty_name(c.regime), c.ap, c.gt_count, c.tp, c.fp);
        out += buf;
    }
    return out;
}

std::string report_table(const EvalReport& report) {
    std::ostringstream os;
    os << "criterion        easy     moderate hard\n";
    for (size_t i = 0; i + 2 < report.cells.size(); i += 3) {
        const auto& c = report.cells[i];
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-8s @%-5g  %7.4f  %7.4f  %7.4f\n",
                      match_kind_name(c.criterion.kind), c.criterion.threshold,
                      report.cells[i].ap, report.cells[i + 1].ap, report.cells[i + 2].ap);
        os << buf;
    }
    return os.str();
}

std::string curve_csv(const EvalCell& cell) {
    std::string out = "recall,precision\n";
    char buf[80];
    for (const auto& p : cell.curve) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f\n", p.recall, p.precision);
        out += buf;
    }
    return out;
}

std::string curve_svg(const EvalCell& cell) {
    const int W = 420, H = 420, M = 40;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\">\n";
    os << "<rect x=\"" << M << "\" y=\"" << M << "\" width=\"" << W - 2 * M << "\" height=\""
       << H - 2 * M << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\">recall</text>\n";
    os << "<text x=\"12\" y=\"" << H / 2 << "\" transform=\"rotate(-90 12 " << H / 2
       << ")\" text-anchor=\"middle\">precision</text>\n";
    if (!cell.curve.empty()) {
        os << "<polyline fill=\"none\" stroke=\"#c22\" stroke-width=\"1.5\" points=\"";
        for (const auto& p : cell.curve) {
            const double x = M + p.recall * (W - 2 * M);
            const double y = H - M - p.precision * (H - 2 * M);
            os << x << "," << y << " ";
        }
        os << "\"/>\n";
    }
    char title[160];
    std::snprintf(title, sizeof(title), "%s@%g %s AP=%.4f", match_kind_name(cell.criterion.kind),
                  cell.criterion.threshold, difficulty_name(cell.regime), cell.ap);
    os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace tlnet
