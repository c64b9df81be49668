#pragma once

#include <array>
#include <string>

namespace tlnet {

struct Vec2 {
    double u = 0.0;
    double v = 0.0;
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double k, const Vec3& a) { return {k * a.x, k * a.y, k * a.z}; }

/// 3x4 camera projection, KITTI rectified convention (bottom row 0 0 1 t).
struct ProjectionMatrix {
    double m[3][4] = {{0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}};
};

struct StereoCalibration {
    ProjectionMatrix p_left;
    ProjectionMatrix p_right;
    double focal_px = 0.0;
    Vec2 principal_point;
    double baseline_m = 0.0;
    int width_px = 0;
    int height_px = 0;
};

// Camera frame: x right, y down, z forward; all lengths in meters.
Vec2 project(const ProjectionMatrix& p, const Vec3& point);

/// Build a rectified rig directly from intrinsics, bypassing text formats.
StereoCalibration make_rig(double focal_px, double cx, double cy, double baseline_m,
                           int width_px, int height_px);

// Reads a KITTI calib file; consumes P2/P3 (or P0/P1 when use_gray_pair).
// The file carries no image size, so the caller supplies it.
StereoCalibration parse_calibration(const std::string& text, int width_px = 1242,
                                    int height_px = 375, bool use_gray_pair = false);

std::string serialize_calibration(const StereoCalibration& calib);

bool in_frustum(const StereoCalibration& calib, const Vec3& point, double near_m, double far_m);

}  // namespace tlnet
