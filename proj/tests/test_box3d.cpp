#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "tlnet/box3d.hpp"
#include "tlnet/errors.hpp"

using namespace tlnet;

namespace {

OrientedBox3D random_box(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> xd(-4, 4), yd(-1, 1), zd(-4, 4);
    std::uniform_real_distribution<double> sd(0.5, 4.0), yaw(-M_PI, M_PI);
    return {{xd(rng), yd(rng), zd(rng)}, sd(rng), sd(rng), sd(rng), yaw(rng)};
}

bool inside_bev(const OrientedBox3D& b, double x, double z) {
    const double dx = x - b.center.x, dz = z - b.center.z;
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    // Inverse of the corner rotation: local = R^T * world offset.
    const double lx = dx * c - dz * s;
    const double lz = dx * s + dz * c;
    return std::abs(lx) <= b.l / 2 && std::abs(lz) <= b.w / 2;
}

double mc_iou_bev(const OrientedBox3D& a, const OrientedBox3D& b, int samples,
                  std::mt19937_64& rng) {
    double lo_x = std::min(a.center.x, b.center.x) - 6, hi_x = std::max(a.center.x, b.center.x) + 6;
    double lo_z = std::min(a.center.z, b.center.z) - 6, hi_z = std::max(a.center.z, b.center.z) + 6;
    std::uniform_real_distribution<double> xd(lo_x, hi_x), zd(lo_z, hi_z);
    long in_a = 0, in_b = 0, in_both = 0;
    for (int i = 0; i < samples; ++i) {
        const double x = xd(rng), z = zd(rng);
        const bool pa = inside_bev(a, x, z), pb = inside_bev(b, x, z);
        in_a += pa;
        in_b += pb;
        in_both += pa && pb;
    }
    const double uni = double(in_a + in_b - in_both);
    return uni > 0 ? in_both / uni : 0.0;
}

double mc_iou_3d(const OrientedBox3D& a, const OrientedBox3D& b, int samples,
                 std::mt19937_64& rng) {
    double lo_x = std::min(a.center.x, b.center.x) - 6, hi_x = std::max(a.center.x, b.center.x) + 6;
    double lo_z = std::min(a.center.z, b.center.z) - 6, hi_z = std::max(a.center.z, b.center.z) + 6;
    double lo_y = std::min(a.center.y - a.h, b.center.y - b.h) - 1;
    double hi_y = std::max(a.center.y, b.center.y) + 1;
    std::uniform_real_distribution<double> xd(lo_x, hi_x), zd(lo_z, hi_z), yd(lo_y, hi_y);
    auto inside = [](const OrientedBox3D& box, double x, double y, double z) {
        return y <= box.center.y && y >= box.center.y - box.h && inside_bev(box, x, z);
    };
    long in_a = 0, in_b = 0, in_both = 0;
    for (int i = 0; i < samples; ++i) {
        const double x = xd(rng), y = yd(rng), z = zd(rng);
        const bool pa = inside(a, x, y, z), pb = inside(b, x, y, z);
        in_a += pa;
        in_b += pb;
        in_both += pa && pb;
    }
    const double uni = double(in_a + in_b - in_both);
    return uni > 0 ? in_both / uni : 0.0;
}

}  // namespace

TEST_CASE("corner order and rotation convention") {
    const OrientedBox3D cube{{0, 0, 0}, 1, 1, 1, 0};
    const auto cs = corners(cube);
    CHECK(cs[0].x == doctest::Approx(0.5));
    CHECK(cs[0].y == doctest::Approx(0.0));
    CHECK(cs[0].z == doctest::Approx(0.5));
    for (int i = 0; i < 4; ++i) {
        CHECK(cs[i].y == doctest::Approx(0.0));
        CHECK(cs[i + 4].y == doctest::Approx(-1.0));
        CHECK(cs[i + 4].x == doctest::Approx(cs[i].x));
    }

    const OrientedBox3D rot{{0, 0, 0}, 1, 2, 4, M_PI / 4};
    const auto rc = corners(rot);
    CHECK(rc[0].x == doctest::Approx(3 * std::sqrt(2.0) / 2));
    CHECK(rc[0].y == doctest::Approx(0.0));
    CHECK(rc[0].z == doctest::Approx(-std::sqrt(2.0) / 2));
}

TEST_CASE("quarter-turn of a square footprint permutes corners") {
    const OrientedBox3D a{{1, 0, 2}, 1, 3, 3, 0};
    OrientedBox3D b = a;
    b.yaw = M_PI / 2;
    auto ca = corners(a);
    auto cb = corners(b);
    for (const auto& p : ca) {
        const bool found = std::any_of(cb.begin(), cb.end(), [&](const Vec3& q) {
            return std::abs(p.x - q.x) + std::abs(p.y - q.y) + std::abs(p.z - q.z) < 1e-9;
        });
        CHECK(found);
    }
}

TEST_CASE("bev polygon and shoelace area") {
    const OrientedBox3D box{{1, 0, 10}, 1, 2, 4, 0};
    const auto poly = bev_polygon(box);
    for (const auto& p : poly) {
        CHECK(p.u >= doctest::Approx(-1.0));
        CHECK(p.u <= doctest::Approx(3.0));
        CHECK(p.v >= doctest::Approx(9.0));
        CHECK(p.v <= doctest::Approx(11.0));
    }
    CHECK(polygon_area({poly.begin(), poly.end()}) == doctest::Approx(8.0));

    std::mt19937_64 rng(3);
    for (int i = 0; i < 10000; ++i) {
        const auto b = random_box(rng);
        const auto pl = bev_polygon(b);
        CHECK(polygon_area({pl.begin(), pl.end()}) == doctest::Approx(b.w * b.l).epsilon(1e-9));
    }
}

TEST_CASE("iou_bev closed forms") {
    const OrientedBox3D sq{{0, 0, 0}, 1, 2, 2, 0};
    CHECK(iou_bev(sq, sq) == doctest::Approx(1.0));
    OrientedBox3D shifted = sq;
    shifted.center.x = 1.0;
    CHECK(iou_bev(sq, shifted) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));

    const OrientedBox3D unit{{0, 0, 0}, 1, 1, 1, 0};
    OrientedBox3D rot = unit;
    rot.yaw = M_PI / 4;
    // Intersection is a regular octagon of area 2(sqrt(2)-1); the quotient
    // against the union 2 - 2(sqrt(2)-1) collapses to exactly 1/sqrt(2).
    CHECK(iou_bev(unit, rot) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(5e-3));
}

TEST_CASE("iou_3d closed forms") {
    const OrientedBox3D cube{{0, 0, 0}, 1, 1, 1, 0};
    CHECK(iou_3d(cube, cube) == doctest::Approx(1.0));
    OrientedBox3D lifted = cube;
    lifted.center.y = 0.5;
    CHECK(iou_3d(cube, lifted) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    lifted.center.y = 2.5;  // no vertical overlap
    CHECK(iou_3d(cube, lifted) == doctest::Approx(0.0));
}

TEST_CASE("iou matches Monte-Carlo oracle on random pairs") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 60; ++i) {
        auto a = random_box(rng);
        auto b = random_box(rng);
        b.center.x = a.center.x + std::uniform_real_distribution<double>(-2, 2)(rng);
        b.center.z = a.center.z + std::uniform_real_distribution<double>(-2, 2)(rng);
        b.center.y = a.center.y + std::uniform_real_distribution<double>(-1, 1)(rng);
        const double mc_b = mc_iou_bev(a, b, 400000, rng);
        CHECK(std::abs(iou_bev(a, b) - mc_b) < 2e-2);
        const double mc_3 = mc_iou_3d(a, b, 400000, rng);
        CHECK(std::abs(iou_3d(a, b) - mc_3) < 2e-2);
    }
}

TEST_CASE("iou invariances") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> td(-10, 10), yawd(-M_PI, M_PI);
    for (int i = 0; i < 300; ++i) {
        auto a = random_box(rng);
        auto b = random_box(rng);
        b.center = a.center + Vec3{td(rng) * 0.2, td(rng) * 0.05, td(rng) * 0.2};
        const double bev = iou_bev(a, b), full = iou_3d(a, b);
        CHECK(bev == doctest::Approx(iou_bev(b, a)).epsilon(1e-12));
        CHECK(full == doctest::Approx(iou_3d(b, a)).epsilon(1e-12));
        CHECK(bev >= 0.0);
        CHECK(bev <= 1.0 + 1e-12);
        CHECK(full >= 0.0);
        CHECK(full <= 1.0 + 1e-12);

        const Vec3 t{td(rng), td(rng), td(rng)};
        OrientedBox3D at = a, bt = b;
        at.center = at.center + t;
        bt.center = bt.center + t;
        CHECK(iou_bev(at, bt) == doctest::Approx(bev).epsilon(1e-9));
        CHECK(iou_3d(at, bt) == doctest::Approx(full).epsilon(1e-9));

        // Common yaw about the shared origin: rotate centers and yaws together.
        const double phi = yawd(rng), c = std::cos(phi), s = std::sin(phi);
        auto spin = [&](OrientedBox3D box) {
            const double x = box.center.x * c + box.center.z * s;
            const double z = -box.center.x * s + box.center.z * c;
            box.center.x = x;
            box.center.z = z;
            box.yaw = normalize_yaw(box.yaw + phi);
            return box;
        };
        CHECK(iou_bev(spin(a), spin(b)) == doctest::Approx(bev).epsilon(1e-6));
    }
}

TEST_CASE("project_box clamps and errors") {
    const auto rig = make_rig(100.0, 50.0, 30.0, 0.5, 100, 60);
    const OrientedBox3D centered{{0, 0.5, 10}, 1, 1, 1, 0};
    const auto roi = project_box(rig.p_left, centered, 100, 60);
    CHECK(roi.center().u == doctest::Approx(50.0));

    OrientedBox3D behind = centered;
    behind.center.z = -10;
    CHECK_THROWS_AS(project_box(rig.p_left, behind, 100, 60), BehindCamera);

    // Distant box: left/right RoI horizontal shift approximates f*b/z.
    const OrientedBox3D far_box{{0, 0.5, 25}, 1.5, 1.7, 4.0, 0.3};
    const auto l = project_box(rig.p_left, far_box, 100, 60);
    const auto r = project_box(rig.p_right, far_box, 100, 60);
    const double expected = rig.focal_px * rig.baseline_m / far_box.center.z;
    CHECK(l.center().u - r.center().u == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("nms_bev basics and permutation invariance") {
    const OrientedBox3D b{{0, 0, 10}, 1.5, 1.7, 4.0, 0};
    OrientedBox3D d = b;
    d.center.x = 20;
    std::vector<std::pair<OrientedBox3D, double>> dets = {{b, 0.9}, {b, 0.8}, {d, 0.7}};
    auto kept = nms_bev(dets, 0.5, 100);
    CHECK(kept == std::vector<int>{0, 2});

    CHECK(nms_bev({{b, 0.5}, {d, 0.4}}, 0.5, 1) == std::vector<int>{0});

    std::mt19937_64 rng(5);
    std::vector<std::pair<OrientedBox3D, double>> pool;
    for (int i = 0; i < 200; ++i) {
        auto box = random_box(rng);
        box.center.x *= 4;
        box.center.z = std::abs(box.center.z) * 4 + 5;
        pool.push_back({box, 1.0 - i * 1e-3});  // distinct scores
    }
    auto baseline = nms_bev(pool, 0.4, 50);
    std::vector<OrientedBox3D> baseline_boxes;
    for (int idx : baseline) baseline_boxes.push_back(pool[idx].first);

    auto shuffled = pool;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto kept2 = nms_bev(shuffled, 0.4, 50);
    REQUIRE(kept2.size() == baseline.size());
    for (size_t i = 0; i < kept2.size(); ++i) {
        const auto& x = shuffled[kept2[i]].first;
        const auto& y = baseline_boxes[i];
        CHECK(x.center.x == doctest::Approx(y.center.x));
        CHECK(x.center.z == doctest::Approx(y.center.z));
    }
}

TEST_CASE("nms_bev caps at max_keep on a large disjoint pool") {
    std::vector<std::pair<OrientedBox3D, double>> pool;
    for (int i = 0; i < 5000; ++i) {
        OrientedBox3D b{{double(i % 100) * 10.0, 0, double(i / 100) * 10.0 + 5}, 1.5, 1.7, 4.0, 0};
        pool.push_back({b, 1.0 / (1 + i)});
    }
    CHECK(nms_bev(pool, 0.5, 1024).size() == 1024);
}

TEST_CASE("yaw normalization") {
    CHECK(normalize_yaw(0.0) == doctest::Approx(0.0));
    CHECK(normalize_yaw(3 * M_PI) == doctest::Approx(M_PI));
    CHECK(normalize_yaw(-M_PI) == doctest::Approx(M_PI));
    CHECK(normalize_yaw(-3.5 * M_PI) == doctest::Approx(0.5 * M_PI));
}
