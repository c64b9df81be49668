#pragma once

#include <string>
#include <vector>

#include "tlnet/box3d.hpp"

namespace tlnet {

/// Coarse image grid whose cells predict front-view objectness.
struct FrontViewGrid {
    int g_x = 0;
    int g_y = 0;
    double cell_w_px = 0.0;
    double cell_h_px = 0.0;
};

FrontViewGrid make_grid(int width_px, int height_px, int stride);

struct AnchorPrior {
    std::string class_name;
    double h = 0.0, w = 0.0, l = 0.0;
};

struct Anchor {
    OrientedBox3D box;
    int prior_index = 0;
    int cell_i = 0;  // column
    int cell_j = 0;  // row
};

struct OffsetTarget {
    Vec3 d_center;            // (gt - anchor) / anchor BEV diagonal
    Vec3 d_size;              // log(gt / anchor) componentwise, (h, w, l)
    double cos_theta = 1.0;   // orientation in the anchor-local frame
    double sin_theta = 0.0;
};

/// Row-major g_y x g_x binary foreground map. A cell is foreground iff the
/// least pixel distance from its center to any projected GT 3D-box center is
/// below 1.8 cell widths.
std::vector<uint8_t> frontview_targets(const std::vector<OrientedBox3D>& gts,
                                       const StereoCalibration& calib,
                                       const FrontViewGrid& grid);

struct SizeSample {
    std::string class_name;
    double h = 0.0, w = 0.0, l = 0.0;
};

std::vector<AnchorPrior> compute_prior_sizes(const std::vector<SizeSample>& samples,
                                             const std::vector<std::string>& classes);

std::string serialize_priors(const std::vector<AnchorPrior>& priors);
std::vector<AnchorPrior> parse_priors(const std::string& text);

/// Ground-plane lattice at grid_interval_m spacing within the frustum and
/// (near, far] depth, two yaw orientations (0, pi/2) per prior per point.
/// Anchors whose projected box center leaves the image are dropped (no cell
/// can be tagged for them).
std::vector<Anchor> generate_anchor_pool(const StereoCalibration& calib,
                                         const FrontViewGrid& grid, double grid_interval_m,
                                         double near_m, double far_m, double ground_y,
                                         const std::vector<AnchorPrior>& priors);

std::vector<int> select_potential_anchors(const std::vector<Anchor>& pool,
                                          const std::vector<double>& objectness_map,
                                          const FrontViewGrid& grid, double threshold);

OffsetTarget encode_offsets(const OrientedBox3D& anchor, const OrientedBox3D& gt);
OrientedBox3D decode_offsets(const OrientedBox3D& anchor, const OffsetTarget& t);

}  // namespace tlnet
