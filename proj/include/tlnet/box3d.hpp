#pragma once

#include <array>
#include <utility>
#include <vector>

#include "tlnet/geometry.hpp"

namespace tlnet {

/// Gravity-aligned 3D box. center.y is the bottom-face vertical coordinate
/// (KITTI label convention); the box spans [center.y - h, center.y].
struct OrientedBox3D {
    Vec3 center;
    double h = 0.0;
    double w = 0.0;
    double l = 0.0;
    double yaw = 0.0;  // rotation about the camera y-axis, in (-pi, pi]
};

struct Roi2D {
    Vec2 min;
    Vec2 max;
    double width() const { return max.u - min.u; }
    double height() const { return max.v - min.v; }
    Vec2 center() const { return {0.5 * (min.u + max.u), 0.5 * (min.v + max.v)}; }
};

double normalize_yaw(double yaw);

// Bottom face counterclockwise in BEV starting at local (+l/2, +w/2),
// then the top face in the same order.
std::array<Vec3, 8> corners(const OrientedBox3D& box);

/// Bottom-face footprint in the (x, z) ground plane, counterclockwise.
std::array<Vec2, 4> bev_polygon(const OrientedBox3D& box);

double polygon_area(const std::vector<Vec2>& poly);

double iou_bev(const OrientedBox3D& a, const OrientedBox3D& b);
double iou_3d(const OrientedBox3D& a, const OrientedBox3D& b);

Roi2D project_box(const ProjectionMatrix& p, const OrientedBox3D& box, int width_px,
                  int height_px);

std::vector<int> nms_bev(const std::vector<std::pair<OrientedBox3D, double>>& detections,
                         double iou_threshold, int max_keep);

}  // namespace tlnet
