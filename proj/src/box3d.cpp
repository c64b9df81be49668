#include "tlnet/box3d.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tlnet/errors.hpp"

namespace tlnet {

namespace {
constexpr double kDegenerateArea = 1e-12;
}

double normalize_yaw(double yaw) {
    const double two_pi = 2.0 * M_PI;
    yaw = std::fmod(yaw, two_pi);
    if (yaw <= -M_PI) yaw += two_pi;
    if (yaw > M_PI) yaw -= two_pi;
    return yaw;
}

std::array<Vec3, 8> corners(const OrientedBox3D& box) {
    const double c = std::cos(box.yaw);
    const double s = std::sin(box.yaw);
    // Local x along length, local z along width; CCW in the (x, z) plane.
    const double lx[4] = {+box.l / 2, -box.l / 2, -box.l / 2, +box.l / 2};
    const double lz[4] = {+box.w / 2, +box.w / 2, -box.w / 2, -box.w / 2};
    std::array<Vec3, 8> out;
    for (int i = 0; i < 4; ++i) {
        const double x = box.center.x + lx[i] * c + lz[i] * s;
        const double z = box.center.z - lx[i] * s + lz[i] * c;
        out[i] = {x, box.center.y, z};
        out[i + 4] = {x, box.center.y - box.h, z};
    }
    return out;
}

std::array<Vec2, 4> bev_polygon(const OrientedBox3D& box) {
    const auto cs = corners(box);
    std::array<Vec2, 4> poly;
    for (int i = 0; i < 4; ++i) poly[i] = {cs[i].x, cs[i].z};
    return poly;
}

double polygon_area(const std::vector<Vec2>& poly) {
    double a = 0.0;
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        a += p.u * q.v - q.u * p.v;
    }
    return 0.5 * std::abs(a);
}

namespace {

// Sutherland-Hodgman: clip subject against one half-plane of the convex clip
// polygon. Inside test uses the clip polygon's winding (CCW -> left of edge).
std::vector<Vec2> clip_halfplane(const std::vector<Vec2>& subject, const Vec2& a, const Vec2& b) {
    std::vector<Vec2> out;
    out.reserve(subject.size() + 1);
    const double ex = b.u - a.u;
    const double ey = b.v - a.v;
    auto side = [&](const Vec2& p) { return ex * (p.v - a.v) - ey * (p.u - a.u); };
    const size_t n = subject.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& cur = subject[i];
        const Vec2& nxt = subject[(i + 1) % n];
        const double sc = side(cur);
        const double sn = side(nxt);
        if (sc <= 0.0) out.push_back(cur);
        if ((sc < 0.0 && sn > 0.0) || (sc > 0.0 && sn < 0.0)) {
            const double t = sc / (sc - sn);
            out.push_back({cur.u + t * (nxt.u - cur.u), cur.v + t * (nxt.v - cur.v)});
        }
    }
    return out;
}

std::vector<Vec2> convex_intersection(const std::array<Vec2, 4>& pa, const std::array<Vec2, 4>& pb) {
    std::vector<Vec2> poly(pa.begin(), pa.end());
    for (int i = 0; i < 4 && !poly.empty(); ++i)
        poly = clip_halfplane(poly, pb[i], pb[(i + 1) % 4]);
    return poly;
}

// bev_polygon winds CCW in (x, z) but clip_halfplane keeps the clockwise side,
// so feed the clip polygon reversed.
double bev_intersection_area(const OrientedBox3D& a, const OrientedBox3D& b) {
    const auto pa = bev_polygon(a);
    auto pb = bev_polygon(b);
    std::reverse(pb.begin(), pb.end());
    const auto inter = convex_intersection(pa, pb);
    if (inter.size() < 3) return 0.0;
    const double area = polygon_area(inter);
    return area < kDegenerateArea ? 0.0 : area;
}

}  // namespace

double iou_bev(const OrientedBox3D& a, const OrientedBox3D& b) {
    const double inter = bev_intersection_area(a, b);
    if (inter <= 0.0) return 0.0;
    const double area_a = a.w * a.l;
    const double area_b = b.w * b.l;
    const double uni = area_a + area_b - inter;
    if (uni < kDegenerateArea) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const OrientedBox3D& a, const OrientedBox3D& b) {
    // y points down: box occupies [y - h, y].
    const double y_overlap =
        std::max(0.0, std::min(a.center.y, b.center.y) -
                          std::max(a.center.y - a.h, b.center.y - b.h));
    if (y_overlap <= 0.0) return 0.0;
    const double inter = bev_intersection_area(a, b) * y_overlap;
    if (inter <= 0.0) return 0.0;
    const double vol_a = a.w * a.l * a.h;
    const double vol_b = b.w * b.l * b.h;
    const double uni = vol_a + vol_b - inter;
    if (uni < kDegenerateArea) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

Roi2D project_box(const ProjectionMatrix& p, const OrientedBox3D& box, int width_px,
                  int height_px) {
    const auto cs = corners(box);
    Roi2D roi;
    roi.min = {1e30, 1e30};
    roi.max = {-1e30, -1e30};
    int visible = 0;
    for (const Vec3& c : cs) {
        if (c.z <= 1e-6) continue;
        const Vec2 px = project(p, c);
        roi.min.u = std::min(roi.min.u, px.u);
        roi.min.v = std::min(roi.min.v, px.v);
        roi.max.u = std::max(roi.max.u, px.u);
        roi.max.v = std::max(roi.max.v, px.v);
        ++visible;
    }
    if (visible == 0) throw BehindCamera("all box corners have depth <= 0");
    roi.min.u = std::clamp(roi.min.u, 0.0, double(width_px));
    roi.max.u = std::clamp(roi.max.u, 0.0, double(width_px));
    roi.min.v = std::clamp(roi.min.v, 0.0, double(height_px));
    roi.max.v = std::clamp(roi.max.v, 0.0, double(height_px));
    return roi;
}

std::vector<int> nms_bev(const std::vector<std::pair<OrientedBox3D, double>>& detections,
                         double iou_threshold, int max_keep) {
    std::vector<int> order(detections.size());
    std::iota(order.begin(), order.end(), 0);
    // Descending score, lower input index wins ties.
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return detections[a].second > detections[b].second;
    });
    std::vector<int> kept;
    for (int idx : order) {
        if ((int)kept.size() >= max_keep) break;
        bool suppressed = false;
        for (int k : kept) {
            if (iou_bev(detections[idx].first, detections[k].first) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(idx);
    }
    return kept;
}

}  // namespace tlnet
