#include "tlnet/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

#include "tlnet/errors.hpp"

namespace tlnet {

Vec2 project(const ProjectionMatrix& p, const Vec3& point) {
    if (point.z <= 1e-6)
        throw NonPositiveDepth("point depth " + std::to_string(point.z) + " <= 1e-6");
    const double* r0 = p.m[0];
    const double* r1 = p.m[1];
    const double* r2 = p.m[2];
    const double hx = r0[0] * point.x + r0[1] * point.y + r0[2] * point.z + r0[3];
    const double hy = r1[0] * point.x + r1[1] * point.y + r1[2] * point.z + r1[3];
    const double hw = r2[0] * point.x + r2[1] * point.y + r2[2] * point.z + r2[3];
    return {hx / hw, hy / hw};
}

StereoCalibration make_rig(double focal_px, double cx, double cy, double baseline_m,
                           int width_px, int height_px) {
    if (focal_px <= 0.0 || baseline_m <= 0.0)
        throw DegenerateRig("focal and baseline must be positive");
    StereoCalibration c;
    c.p_left.m[0][0] = focal_px;
    c.p_left.m[0][2] = cx;
    c.p_left.m[1][1] = focal_px;
    c.p_left.m[1][2] = cy;
    c.p_left.m[2][2] = 1.0;
    c.p_right = c.p_left;
    c.p_right.m[0][3] = -focal_px * baseline_m;
    c.focal_px = focal_px;
    c.principal_point = {cx, cy};
    c.baseline_m = baseline_m;
    c.width_px = width_px;
    c.height_px = height_px;
    return c;
}

namespace {

bool parse_matrix_line(const std::string& line, const std::string& key, ProjectionMatrix* out) {
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) return false;
    if (tag != key + ":") return false;
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (vals.size() != 12)
        throw MalformedMatrix(key + " line has " + std::to_string(vals.size()) +
                              " values, expected 12");
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) out->m[r][c] = vals[r * 4 + c];
    return true;
}

}  // namespace

StereoCalibration parse_calibration(const std::string& text, int width_px, int height_px,
                                    bool use_gray_pair) {
    const std::string left_key = use_gray_pair ? "P0" : "P2";
    const std::string right_key = use_gray_pair ? "P1" : "P3";
    ProjectionMatrix pl, pr;
    bool have_l = false, have_r = false;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (!have_l && parse_matrix_line(line, left_key, &pl)) have_l = true;
        else if (!have_r && parse_matrix_line(line, right_key, &pr)) have_r = true;
    }
    if (!have_l) throw MissingMatrix("no " + left_key + " line in calibration text");
    if (!have_r) throw MissingMatrix("no " + right_key + " line in calibration text");

    StereoCalibration c;
    c.p_left = pl;
    c.p_right = pr;
    c.focal_px = pl.m[0][0];
    c.principal_point = {pl.m[0][2], pl.m[1][2]};
    if (c.focal_px <= 0.0) throw DegenerateRig("non-positive focal length");
    c.baseline_m = (pl.m[0][3] - pr.m[0][3]) / c.focal_px;
    if (c.baseline_m <= 0.0)
        throw DegenerateRig("baseline " + std::to_string(c.baseline_m) + " <= 0");
    c.width_px = width_px;
    c.height_px = height_px;
    return c;
}

std::string serialize_calibration(const StereoCalibration& calib) {
    auto row_major = [](const ProjectionMatrix& p, const char* key) {
        std::string s = key;
        s += ":";
        char buf[64];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c) {
                std::snprintf(buf, sizeof(buf), " %.17g", p.m[r][c]);
                s += buf;
            }
        s += "\n";
        return s;
    };
    return row_major(calib.p_left, "P2") + row_major(calib.p_right, "P3");
}

bool in_frustum(const StereoCalibration& calib, const Vec3& point, double near_m, double far_m) {
    if (point.z <= near_m || point.z > far_m) return false;
    if (point.z <= 1e-6) return false;
    const Vec2 px = project(calib.p_left, point);
    return px.u >= 0.0 && px.u < calib.width_px && px.v >= 0.0 && px.v < calib.height_px;
}

}  // namespace tlnet
