#include "tlnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "tlnet/errors.hpp"

namespace fs = std::filesystem;

namespace tlnet {

GroundTruthLabel parse_label_line(const std::string& text) {
    std::istringstream ss(text);
    std::vector<std::string> fields;
    std::string f;
    while (ss >> f) fields.push_back(f);
    if (fields.size() != 15 && fields.size() != 16)
        throw FieldCount("label line has " + std::to_string(fields.size()) + " fields");
    auto num = [&](size_t i) {
        try {
            size_t pos = 0;
            const double v = std::stod(fields[i], &pos);
            if (pos != fields[i].size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw NonNumeric("field " + std::to_string(i) + " is not numeric: " + fields[i]);
        }
    };
    GroundTruthLabel lab;
    lab.class_name = fields[0];
    lab.truncation = num(1);
    lab.occlusion = (int)num(2);
    lab.alpha = num(3);
    for (int i = 0; i < 4; ++i) lab.bbox[i] = num(4 + i);
    lab.h = num(8);
    lab.w = num(9);
    lab.l = num(10);
    lab.location = {num(11), num(12), num(13)};
    lab.rotation_y = num(14);
    if (fields.size() == 16) lab.score = num(15);
    return lab;
}

std::string serialize_label(const GroundTruthLabel& lab) {
    char buf[512];
    int n = std::snprintf(buf, sizeof(buf),
                          "%s %.2f %d %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f",
                          lab.class_name.c_str(), lab.truncation, lab.occlusion, lab.alpha,
                          lab.bbox[0], lab.bbox[1], lab.bbox[2], lab.bbox[3], lab.h, lab.w, lab.l,
                          lab.location.x, lab.location.y, lab.location.z, lab.rotation_y);
    std::string out(buf, size_t(n));
    if (lab.score) {
        std::snprintf(buf, sizeof(buf), " %.6f", *lab.score);
        out += buf;
    }
    return out;
}

OrientedBox3D label_to_box(const GroundTruthLabel& lab) {
    return {lab.location, lab.h, lab.w, lab.l, normalize_yaw(lab.rotation_y)};
}

Difficulty difficulty_of(const GroundTruthLabel& lab) {
    const double height = lab.bbox[3] - lab.bbox[1];
    if (height >= 40.0 && lab.occlusion <= 0 && lab.truncation <= 0.15) return Difficulty::easy;
    if (height >= 25.0 && lab.occlusion <= 1 && lab.truncation <= 0.30)
        return Difficulty::moderate;
    if (height >= 25.0 && lab.occlusion <= 2 && lab.truncation <= 0.50) return Difficulty::hard;
    return Difficulty::excluded;
}

StereoCalibration scene_rig(const SceneSpec& spec) {
    return make_rig(spec.focal_px, spec.width_px / 2.0, spec.height_px / 2.0, spec.baseline_m,
                    spec.width_px, spec.height_px);
}

namespace {

double hash01(uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return double(x >> 11) / double(1ULL << 53);
}

struct RayHit {
    double t = 1e30;
    int face = -1;        // 0/1: +-x local, 2/3: +-y, 4/5: +-z
    double fu = 0, fv = 0;  // face-local texture coordinates (meters)
};

// Ray-slab intersection in the box-local frame. Box local extents:
// x in [-l/2, l/2], y in [-h, 0], z in [-w/2, w/2]; origin at bottom center.
bool ray_box(const Vec3& origin, const Vec3& dir, const OrientedBox3D& box, RayHit* hit) {
    const double c = std::cos(box.yaw), s = std::sin(box.yaw);
    // world -> local: inverse of the corner rotation in box3d.cpp
    auto to_local = [&](const Vec3& p) {
        const Vec3 d = p - box.center;
        return Vec3{d.x * c - d.z * s, d.y, d.x * s + d.z * c};
    };
    const Vec3 o = to_local(origin);
    const Vec3 dd{dir.x * c - dir.z * s, dir.y, dir.x * s + dir.z * c};
    const double lo[3] = {-box.l / 2, -box.h, -box.w / 2};
    const double hi[3] = {box.l / 2, 0.0, box.w / 2};
    const double ov[3] = {o.x, o.y, o.z};
    const double dv[3] = {dd.x, dd.y, dd.z};
    double t_enter = -1e30, t_exit = 1e30;
    int enter_axis = -1, enter_side = 0;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(dv[a]) < 1e-12) {
            if (ov[a] < lo[a] || ov[a] > hi[a]) return false;
            continue;
        }
        double t0 = (lo[a] - ov[a]) / dv[a];
        double t1 = (hi[a] - ov[a]) / dv[a];
        int side = 0;
        if (t0 > t1) {
            std::swap(t0, t1);
            side = 1;
        }
        if (t0 > t_enter) {
            t_enter = t0;
            enter_axis = a;
            enter_side = side;
        }
        t_exit = std::min(t_exit, t1);
        if (t_enter > t_exit) return false;
    }
    if (enter_axis < 0 || t_enter <= 1e-6) return false;
    hit->t = t_enter;
    hit->face = enter_axis * 2 + enter_side;
    const Vec3 p{o.x + t_enter * dd.x, o.y + t_enter * dd.y, o.z + t_enter * dd.z};
    switch (enter_axis) {
        case 0: hit->fu = p.z; hit->fv = p.y; break;
        case 1: hit->fu = p.x; hit->fv = p.z; break;
        default: hit->fu = p.x; hit->fv = p.y; break;
    }
    return true;
}

Vec3 face_normal_world(const OrientedBox3D& box, int face) {
    // local outward normals; entry through the low slab faces -x/-y/-z when
    // side==0? side records which slab bound was crossed first along the ray.
    static const double local[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                       {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
    const double c = std::cos(box.yaw), s = std::sin(box.yaw);
    const double lx = local[face][0], ly = local[face][1], lz = local[face][2];
    return {lx * c + lz * s, ly, -lx * s + lz * c};
}

struct SceneObject {
    OrientedBox3D box;
    double albedo[3];
    uint64_t tex_seed;
};

void render_view(Tensor4* image, const Vec3& cam_origin, double f, double cx, double cy,
                 const std::vector<SceneObject>& objects, const SceneSpec& spec,
                 std::vector<int>* hit_index) {
    const int W = image->w, H = image->h;
    const Vec3 light{0.35, -0.8, 0.49};
    const double light_norm = std::sqrt(light.x * light.x + light.y * light.y + light.z * light.z);
    const Vec3 ld{light.x / light_norm, light.y / light_norm, light.z / light_norm};
    for (int py = 0; py < H; ++py)
        for (int px = 0; px < W; ++px) {
            const double u = px + 0.5, v = py + 0.5;
            const Vec3 dir{(u - cx) / f, (v - cy) / f, 1.0};
            RayHit best;
            int best_obj = -1;
            for (size_t oi = 0; oi < objects.size(); ++oi) {
                RayHit h;
                if (ray_box(cam_origin, dir, objects[oi].box, &h) && h.t < best.t) {
                    best = h;
                    best_obj = (int)oi;
                }
            }
            double rgb[3];
            if (best_obj < 0) {
                // distant backdrop: pure image-space, identical in both views
                const double g = double(py) / H;
                rgb[0] = 0.55 - 0.20 * g;
                rgb[1] = 0.62 - 0.28 * g;
                rgb[2] = 0.78 - 0.45 * g;
                const double n =
                    0.06 * (hash01(uint64_t(py) * 92821 + px * 7 + 12345) - 0.5);
                for (double& ch : rgb) ch += n;
            } else {
                const SceneObject& obj = objects[best_obj];
                const Vec3 n = face_normal_world(obj.box, best.face);
                const double lambert =
                    spec.ambient +
                    spec.diffuse * std::max(0.0, -(n.x * ld.x + n.y * ld.y + n.z * ld.z));
                // texture keyed to the 3D surface so both views see the same
                // pattern at the same physical point
                const long qu = (long)std::floor(best.fu * 10.0);
                const long qv = (long)std::floor(best.fv * 10.0);
                const double tex =
                    1.0 + spec.texture_amp * (hash01(obj.tex_seed ^ (uint64_t(best.face) << 40) ^
                                                     (uint64_t(qu & 0xfffff) << 20) ^
                                                     uint64_t(qv & 0xfffff)) -
                                              0.5);
                for (int ch = 0; ch < 3; ++ch)
                    rgb[ch] = std::clamp(obj.albedo[ch] * lambert * tex, 0.0, 1.0);
            }
            for (int ch = 0; ch < 3; ++ch)
                image->at(0, ch, py, px) = std::round(rgb[ch] * 255.0) / 255.0;
            if (hit_index) (*hit_index)[size_t(py) * W + px] = best_obj;
        }
}

}  // namespace

FrameData generate_scene(const SceneSpec& spec, int frame_index) {
    const StereoCalibration calib = scene_rig(spec);
    std::mt19937_64 rng(spec.seed * 0x9e3779b97f4a7c15ULL + uint64_t(frame_index) + 1);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    const int target =
        spec.min_objects + int(uni(rng) * (spec.max_objects - spec.min_objects + 1));
    std::vector<SceneObject> objects;
    for (int k = 0; k < target; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            const AnchorPrior& shape = spec.shapes[size_t(uni(rng) * spec.shapes.size()) %
                                                  spec.shapes.size()];
            const double z = spec.z_min + uni(rng) * (spec.z_max - spec.z_min);
            const double half = spec.lateral_margin * (spec.width_px * z / spec.focal_px) / 2.0;
            const double x = (2.0 * uni(rng) - 1.0) * half;
            const double scale = 1.0 + spec.size_jitter * (2.0 * uni(rng) - 1.0);
            const double dim_jit = spec.size_jitter / 3.0;
            OrientedBox3D box;
            box.center = {x, spec.ground_y, z};
            box.h = shape.h * scale * (1.0 + dim_jit * (2.0 * uni(rng) - 1.0));
            box.w = shape.w * scale * (1.0 + dim_jit * (2.0 * uni(rng) - 1.0));
            box.l = shape.l * scale * (1.0 + dim_jit * (2.0 * uni(rng) - 1.0));
            const double base_yaw = uni(rng) < 0.5 ? 0.0 : M_PI / 2.0;
            box.yaw = normalize_yaw(base_yaw + spec.yaw_jitter * (2.0 * uni(rng) - 1.0));
            if (!in_frustum(calib, box.center, spec.z_min * 0.5, spec.z_max * 1.5)) continue;
            bool overlaps = false;
            for (const auto& other : objects)
                if (iou_bev(box, other.box) > 0.0) {
                    overlaps = true;
                    break;
                }
            if (overlaps) continue;
            SceneObject obj;
            obj.box = box;
            for (double& a : obj.albedo) a = 0.30 + 0.55 * uni(rng);
            obj.tex_seed = rng();
            objects.push_back(obj);
            placed = true;
        }
        if (!placed && (int)objects.size() < spec.min_objects && k == target - 1)
            throw PlacementFailure("could not place the minimum object count");
    }

    FrameData frame;
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "%06d", frame_index);
    frame.id = idbuf;
    frame.calib = calib;
    frame.left_image = Tensor4(1, 3, spec.height_px, spec.width_px);
    frame.right_image = Tensor4(1, 3, spec.height_px, spec.width_px);

    const double cx = calib.principal_point.u, cy = calib.principal_point.v;
    std::vector<int> left_hits(size_t(spec.width_px) * spec.height_px, -1);
    render_view(&frame.left_image, {0, 0, 0}, spec.focal_px, cx, cy, objects, spec, &left_hits);
    render_view(&*frame.right_image, {spec.baseline_m, 0, 0}, spec.focal_px, cx, cy, objects,
                spec, nullptr);

    // per-object occlusion from hidden-silhouette fraction in the left view
    for (size_t oi = 0; oi < objects.size(); ++oi) {
        const SceneObject& obj = objects[oi];
        std::vector<int> alone_hits(left_hits.size(), -1);
        Tensor4 scratch(1, 3, spec.height_px, spec.width_px);
        render_view(&scratch, {0, 0, 0}, spec.focal_px, cx, cy, {obj}, spec, &alone_hits);
        long alone = 0, visible = 0;
        for (size_t i = 0; i < left_hits.size(); ++i) {
            if (alone_hits[i] == 0) {
                ++alone;
                if (left_hits[i] == (int)oi) ++visible;
            }
        }
        const double hidden = alone == 0 ? 1.0 : 1.0 - double(visible) / double(alone);

        GroundTruthLabel lab;
        lab.class_name = spec.shapes.size() == 1 ? spec.shapes[0].class_name : "Car";
        lab.h = obj.box.h;
        lab.w = obj.box.w;
        lab.l = obj.box.l;
        lab.location = obj.box.center;
        lab.rotation_y = obj.box.yaw;
        lab.alpha = normalize_yaw(obj.box.yaw - std::atan2(obj.box.center.x, obj.box.center.z));
        const Roi2D roi = project_box(calib.p_left, obj.box, spec.width_px, spec.height_px);
        lab.bbox[0] = roi.min.u;
        lab.bbox[1] = roi.min.v;
        lab.bbox[2] = roi.max.u;
        lab.bbox[3] = roi.max.v;
        // truncation from the unclipped projected hull
        {
            Roi2D full;
            full.min = {1e30, 1e30};
            full.max = {-1e30, -1e30};
            for (const Vec3& c : corners(obj.box)) {
                if (c.z <= 1e-6) continue;
                const Vec2 px = project(calib.p_left, c);
                full.min.u = std::min(full.min.u, px.u);
                full.min.v = std::min(full.min.v, px.v);
                full.max.u = std::max(full.max.u, px.u);
                full.max.v = std::max(full.max.v, px.v);
            }
            const double full_area = full.width() * full.height();
            const double vis_area = std::max(0.0, roi.width()) * std::max(0.0, roi.height());
            lab.truncation =
                full_area <= 0 ? 1.0 : std::clamp(1.0 - vis_area / full_area, 0.0, 1.0);
        }
        lab.occlusion = hidden <= 0.01 ? 0 : hidden < 0.3 ? 1 : hidden < 0.7 ? 2 : 3;
        frame.labels.push_back(lab);
    }
    return frame;
}

FrameData resize_frame(const FrameData& frame, int target_w, int target_h) {
    const double sx = double(target_w) / frame.calib.width_px;
    const double sy = double(target_h) / frame.calib.height_px;
    auto resize_image = [&](const Tensor4& src) {
        if (src.w == target_w && src.h == target_h) return src;
        Tensor4 out(1, src.c, target_h, target_w);
        for (int ic = 0; ic < src.c; ++ic)
            for (int oy = 0; oy < target_h; ++oy)
                for (int ox = 0; ox < target_w; ++ox) {
                    const double fy =
                        std::clamp((oy + 0.5) / sy - 0.5, 0.0, double(src.h - 1));
                    const double fx =
                        std::clamp((ox + 0.5) / sx - 0.5, 0.0, double(src.w - 1));
                    const int y0 = (int)fy, x0 = (int)fx;
                    const int y1 = std::min(y0 + 1, src.h - 1), x1 = std::min(x0 + 1, src.w - 1);
                    const double wy = fy - y0, wx = fx - x0;
                    out.at(0, ic, oy, ox) =
                        (1 - wy) * ((1 - wx) * src.at(0, ic, y0, x0) + wx * src.at(0, ic, y0, x1)) +
                        wy * ((1 - wx) * src.at(0, ic, y1, x0) + wx * src.at(0, ic, y1, x1));
                }
        return out;
    };
    FrameData out = frame;
    out.left_image = resize_image(frame.left_image);
    if (frame.right_image) out.right_image = resize_image(*frame.right_image);
    for (int col = 0; col < 4; ++col) {
        out.calib.p_left.m[0][col] *= sx;
        out.calib.p_left.m[1][col] *= sy;
        out.calib.p_right.m[0][col] *= sx;
        out.calib.p_right.m[1][col] *= sy;
    }
    out.calib.focal_px = out.calib.p_left.m[0][0];
    out.calib.principal_point = {out.calib.p_left.m[0][2], out.calib.p_left.m[1][2]};
    out.calib.width_px = target_w;
    out.calib.height_px = target_h;
    return out;
}

void write_ppm(const std::string& path, const Tensor4& image) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw MissingFile("cannot open " + path + " for writing");
    os << "P6\n" << image.w << " " << image.h << "\n255\n";
    for (int py = 0; py < image.h; ++py)
        for (int px = 0; px < image.w; ++px)
            for (int ch = 0; ch < 3; ++ch) {
                const double v = std::clamp(image.at(0, ch, py, px), 0.0, 1.0);
                os.put((char)(unsigned char)std::lround(v * 255.0));
            }
}

Tensor4 read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingFile("cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    is >> magic >> w >> h >> maxval;
    if (magic != "P6" || maxval != 255 || w <= 0 || h <= 0)
        throw MalformedMatrix("unsupported ppm header in " + path);
    is.get();  // single whitespace after maxval
    Tensor4 out(1, 3, h, w);
    for (int py = 0; py < h; ++py)
        for (int px = 0; px < w; ++px)
            for (int ch = 0; ch < 3; ++ch) {
                const int v = is.get();
                if (v < 0) throw MissingFile("truncated ppm " + path);
                out.at(0, ch, py, px) = v / 255.0;
            }
    return out;
}

void write_labels(const std::string& path, const std::vector<GroundTruthLabel>& labels) {
    std::ofstream os(path);
    if (!os) throw MissingFile("cannot open " + path + " for writing");
    for (const auto& lab : labels) os << serialize_label(lab) << "\n";
}

std::vector<GroundTruthLabel> read_labels(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw MissingFile("cannot open " + path);
    std::vector<GroundTruthLabel> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        out.push_back(parse_label_line(line));
    }
    return out;
}

void write_frame(const std::string& root, const FrameData& frame) {
    for (const char* sub : {"image_2", "image_3", "calib", "label_2"})
        fs::create_directories(fs::path(root) / sub);
    write_ppm((fs::path(root) / "image_2" / (frame.id + ".ppm")).string(), frame.left_image);
    if (frame.right_image)
        write_ppm((fs::path(root) / "image_3" / (frame.id + ".ppm")).string(),
                  *frame.right_image);
    std::ofstream cs((fs::path(root) / "calib" / (frame.id + ".txt")).string());
    cs << serialize_calibration(frame.calib);
    write_labels((fs::path(root) / "label_2" / (frame.id + ".txt")).string(), frame.labels);
}

FrameData read_frame(const std::string& root, const std::string& id, bool stereo) {
    FrameData frame;
    frame.id = id;
    frame.left_image = read_ppm((fs::path(root) / "image_2" / (id + ".ppm")).string());
    if (stereo) {
        const auto rp = (fs::path(root) / "image_3" / (id + ".ppm")).string();
        if (!fs::exists(rp)) throw MissingFile("stereo frame missing right image: " + rp);
        frame.right_image = read_ppm(rp);
    }
    std::ifstream cs((fs::path(root) / "calib" / (id + ".txt")).string());
    if (!cs) throw MissingFile("missing calib for frame " + id);
    std::stringstream buf;
    buf << cs.rdbuf();
    frame.calib =
        parse_calibration(buf.str(), frame.left_image.w, frame.left_image.h);
    const auto lp = (fs::path(root) / "label_2" / (id + ".txt")).string();
    if (fs::exists(lp)) frame.labels = read_labels(lp);
    return frame;
}

std::vector<std::string> list_frame_ids(const std::string& root) {
    const fs::path dir = fs::path(root) / "image_2";
    if (!fs::exists(dir)) throw MissingFile("missing directory " + dir.string());
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".ppm") ids.push_back(entry.path().stem().string());
    std::sort(ids.begin(), ids.end());
    return ids;
}

SceneSpec parse_scene_spec(const std::string& text) {
    SceneSpec spec;
    std::istringstream ss(text);
    std::string line;
    std::map<std::string, std::string> kv;
    std::vector<AnchorPrior> shapes;
    while (std::getline(ss, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "shape") {
            std::istringstream vs(val);
            AnchorPrior p;
            if (!(vs >> p.class_name >> p.h >> p.w >> p.l))
                throw NonNumeric("bad shape line: " + val);
            shapes.push_back(p);
        } else {
            kv[key] = val;
        }
    }
    auto get = [&](const char* key, double dflt) {
        auto it = kv.find(key);
        return it == kv.end() ? dflt : std::stod(it->second);
    };
    spec.seed = (uint64_t)get("seed", (double)spec.seed);
    spec.min_objects = (int)get("min_objects", spec.min_objects);
    spec.max_objects = (int)get("max_objects", spec.max_objects);
    spec.size_jitter = get("size_jitter", spec.size_jitter);
    spec.yaw_jitter = get("yaw_jitter", spec.yaw_jitter);
    spec.z_min = get("z_min", spec.z_min);
    spec.z_max = get("z_max", spec.z_max);
    spec.lateral_margin = get("lateral_margin", spec.lateral_margin);
    spec.ground_y = get("ground_y", spec.ground_y);
    spec.focal_px = get("focal_px", spec.focal_px);
    spec.baseline_m = get("baseline_m", spec.baseline_m);
    spec.width_px = (int)get("width_px", spec.width_px);
    spec.height_px = (int)get("height_px", spec.height_px);
    spec.ambient = get("ambient", spec.ambient);
    spec.diffuse = get("diffuse", spec.diffuse);
    spec.texture_amp = get("texture_amp", spec.texture_amp);
    if (!shapes.empty()) spec.shapes = shapes;
    return spec;
}

}  // namespace tlnet
