#pragma once

#include <string>
#include <vector>

#include "tlnet/box3d.hpp"
#include "tlnet/dataset.hpp"

namespace tlnet {

struct Detection {
    OrientedBox3D box;
    double score = 0.0;
    std::string class_name;
    double bbox[4] = {0, 0, 0, 0};  // projected 2D box, used for DontCare overlap
};

enum class MatchKind { iou3d, ioubev, distance };

struct MatchCriterion {
    MatchKind kind = MatchKind::iou3d;
    double threshold = 0.5;  // IoU in (0,1] or meters
};

enum class ApInterpolation { eleven_point, forty_point };

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

struct EvalCell {
    MatchCriterion criterion;
    Difficulty regime = Difficulty::easy;
    double ap = 0.0;
    long gt_count = 0;
    long tp = 0;
    long fp = 0;
    std::vector<PrPoint> curve;
};

struct EvalReport {
    std::vector<EvalCell> cells;
    const EvalCell* find(MatchKind kind, double threshold, Difficulty regime) const;
};

struct FrameAnnotations {
    std::vector<GroundTruthLabel> gts;
    std::vector<Detection> detections;
};

/// Per-detection flags: 1 = tp, 0 = fp, -1 = matched to a don't-care gt.
std::vector<int> match(const std::vector<Detection>& dets,
                       const std::vector<GroundTruthLabel>& gts, const MatchCriterion& criterion,
                       Difficulty regime, const std::string& class_name);

long count_relevant_gts(const std::vector<GroundTruthLabel>& gts, Difficulty regime,
                        const std::string& class_name);

/// Staircase PR curve over every distinct score threshold, precision made
/// monotone non-increasing right to left.
std::vector<PrPoint> pr_curve(const std::vector<std::pair<double, int>>& score_flags,
                              long total_gt);

double average_precision(const std::vector<PrPoint>& curve, ApInterpolation interp);

/// Full grid: {IoU3D 0.3/0.5/0.7, IoUBEV 0.3/0.5/0.7, LOC 2m/1m/0.5m} x
/// {easy, moderate, hard}.
EvalReport evaluate(const std::vector<FrameAnnotations>& frames, const std::string& class_name,
                    ApInterpolation interp = ApInterpolation::eleven_point,
                    bool loc_bev_distance = false);

EvalReport evaluate_dirs(const std::string& det_dir, const std::string& gt_dir,
                         const std::string& class_name,
                         ApInterpolation interp = ApInterpolation::eleven_point);

std::string report_csv(const EvalReport& report);
std::string report_table(const EvalReport& report);
std::string curve_csv(const EvalCell& cell);
std::string curve_svg(const EvalCell& cell);

const char* difficulty_name(Difficulty d);
const char* match_kind_name(MatchKind k);

}  // namespace tlnet
