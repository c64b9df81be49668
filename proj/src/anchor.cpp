#include "tlnet/anchor.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "tlnet/errors.hpp"

namespace tlnet {

FrontViewGrid make_grid(int width_px, int height_px, int stride) {
    FrontViewGrid g;
    g.g_x = width_px / stride;
    g.g_y = height_px / stride;
    g.cell_w_px = double(width_px) / g.g_x;
    g.cell_h_px = double(height_px) / g.g_y;
    return g;
}

namespace {
Vec3 box_center_3d(const OrientedBox3D& box) {
    return {box.center.x, box.center.y - box.h / 2.0, box.center.z};
}
}  // namespace

std::vector<uint8_t> frontview_targets(const std::vector<OrientedBox3D>& gts,
                                       const StereoCalibration& calib,
                                       const FrontViewGrid& grid) {
    std::vector<uint8_t> map(size_t(grid.g_y) * grid.g_x, 0);
    std::vector<Vec2> centers;
    for (const auto& gt : gts) {
        const Vec3 c = box_center_3d(gt);
        if (c.z <= 1e-6) continue;
        centers.push_back(project(calib.p_left, c));
    }
    if (centers.empty()) return map;
    const double radius = 1.8 * grid.cell_w_px;
    for (int j = 0; j < grid.g_y; ++j)
        for (int i = 0; i < grid.g_x; ++i) {
            const double cu = (i + 0.5) * grid.cell_w_px;
            const double cv = (j + 0.5) * grid.cell_h_px;
            double best = 1e30;
            for (const Vec2& p : centers)
                best = std::min(best, std::hypot(p.u - cu, p.v - cv));
            if (best < radius) map[size_t(j) * grid.g_x + i] = 1;
        }
    return map;
}

std::vector<AnchorPrior> compute_prior_sizes(const std::vector<SizeSample>& samples,
                                             const std::vector<std::string>& classes) {
    std::map<std::string, std::array<double, 4>> acc;  // h, w, l, count
    for (const auto& s : samples) {
        auto& a = acc[s.class_name];
        a[0] += s.h;
        a[1] += s.w;
        a[2] += s.l;
        a[3] += 1.0;
    }
    std::vector<AnchorPrior> out;
    for (const auto& cls : classes) {
        auto it = acc.find(cls);
        if (it == acc.end() || it->second[3] == 0.0)
            throw EmptyClass("no size samples for class " + cls);
        const auto& a = it->second;
        out.push_back({cls, a[0] / a[3], a[1] / a[3], a[2] / a[3]});
    }
    return out;
}

std::string serialize_priors(const std::vector<AnchorPrior>& priors) {
    std::string out;
    char buf[128];
    for (const auto& p : priors) {
        std::snprintf(buf, sizeof(buf), "%s %.6f %.6f %.6f\n", p.class_name.c_str(), p.h, p.w,
                      p.l);
        out += buf;
    }
    return out;
}

std::vector<AnchorPrior> parse_priors(const std::string& text) {
    std::vector<AnchorPrior> out;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        AnchorPrior p;
        if (!(ls >> p.class_name >> p.h >> p.w >> p.l))
            throw NonNumeric("bad prior line: " + line);
        out.push_back(p);
    }
    return out;
}

std::vector<Anchor> generate_anchor_pool(const StereoCalibration& calib,
                                         const FrontViewGrid& grid, double grid_interval_m,
                                         double near_m, double far_m, double ground_y,
                                         const std::vector<AnchorPrior>& priors) {
    if (grid_interval_m <= 0.0) throw Error("anchor grid interval must be positive");
    std::vector<Anchor> pool;
    const int n_min = (int)std::ceil(near_m / grid_interval_m);
    const int n_max = (int)std::floor(far_m / grid_interval_m);
    for (int n = n_min; n <= n_max; ++n) {
        const double z = n * grid_interval_m;
        if (z <= near_m || z > far_m) continue;
        // lateral extent of the frustum at this depth, padded one cell
        const double half = (calib.width_px * z / calib.focal_px) / 2.0 + grid_interval_m;
        const int m_max = (int)std::floor(half / grid_interval_m);
        for (int m = -m_max; m <= m_max; ++m) {
            const double x = m * grid_interval_m;
            const Vec3 ground_pt{x, ground_y, z};
            if (!in_frustum(calib, ground_pt, near_m, far_m)) continue;
            for (size_t pi = 0; pi < priors.size(); ++pi) {
                const AnchorPrior& prior = priors[pi];
                for (double yaw : {0.0, M_PI / 2.0}) {
                    Anchor a;
                    a.box = {{x, ground_y, z}, prior.h, prior.w, prior.l, yaw};
                    a.prior_index = (int)pi;
                    const Vec3 c = box_center_3d(a.box);
                    const Vec2 px = project(calib.p_left, c);
                    if (px.u < 0 || px.u >= calib.width_px || px.v < 0 ||
                        px.v >= calib.height_px)
                        continue;
                    a.cell_i = std::min((int)(px.u / grid.cell_w_px), grid.g_x - 1);
                    a.cell_j = std::min((int)(px.v / grid.cell_h_px), grid.g_y - 1);
                    pool.push_back(a);
                }
            }
        }
    }
    return pool;
}

std::vector<int> select_potential_anchors(const std::vector<Anchor>& pool,
                                          const std::vector<double>& objectness_map,
                                          const FrontViewGrid& grid, double threshold) {
    if (objectness_map.size() != size_t(grid.g_x) * grid.g_y)
        throw ShapeMismatch("objectness map shape does not match grid");
    std::vector<int> out;
    for (size_t k = 0; k < pool.size(); ++k) {
        const Anchor& a = pool[k];
        if (objectness_map[size_t(a.cell_j) * grid.g_x + a.cell_i] >= threshold)
            out.push_back((int)k);
    }
    return out;
}

OffsetTarget encode_offsets(const OrientedBox3D& anchor, const OrientedBox3D& gt) {
    const double diag = std::hypot(anchor.w, anchor.l);
    OffsetTarget t;
    t.d_center = {(gt.center.x - anchor.center.x) / diag, (gt.center.y - anchor.center.y) / diag,
                  (gt.center.z - anchor.center.z) / diag};
    t.d_size = {std::log(gt.h / anchor.h), std::log(gt.w / anchor.w), std::log(gt.l / anchor.l)};
    const double local = gt.yaw - anchor.yaw;
    t.cos_theta = std::cos(local);
    t.sin_theta = std::sin(local);
    return t;
}

OrientedBox3D decode_offsets(const OrientedBox3D& anchor, const OffsetTarget& t) {
    const double diag = std::hypot(anchor.w, anchor.l);
    OrientedBox3D out;
    out.center = {anchor.center.x + t.d_center.x * diag, anchor.center.y + t.d_center.y * diag,
                  anchor.center.z + t.d_center.z * diag};
    out.h = anchor.h * std::exp(t.d_size.x);
    out.w = anchor.w * std::exp(t.d_size.y);
    out.l = anchor.l * std::exp(t.d_size.z);
    out.yaw = normalize_yaw(std::atan2(t.sin_theta, t.cos_theta) + anchor.yaw);
    return out;
}

}  // namespace tlnet
