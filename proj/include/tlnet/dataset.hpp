#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tlnet/anchor.hpp"
#include "tlnet/box3d.hpp"
#include "tlnet/tensor.hpp"

namespace tlnet {

/// One KITTI label row (15 fields, 16 with score).
struct GroundTruthLabel {
    std::string class_name;
    double truncation = 0.0;
    int occlusion = 0;
    double alpha = 0.0;
    double bbox[4] = {0, 0, 0, 0};  // left, top, right, bottom px
    double h = 0.0, w = 0.0, l = 0.0;
    Vec3 location;  // bottom-face center, camera frame
    double rotation_y = 0.0;
    std::optional<double> score;
};

GroundTruthLabel parse_label_line(const std::string& text);
std::string serialize_label(const GroundTruthLabel& label);

OrientedBox3D label_to_box(const GroundTruthLabel& label);

enum class Difficulty { easy, moderate, hard, excluded };

/// KITTI devkit cutoffs on 2D box height / occlusion / truncation.
Difficulty difficulty_of(const GroundTruthLabel& label);

struct FrameData {
    std::string id;
    Tensor4 left_image;  // (1, 3, H, W) in [0, 1]
    std::optional<Tensor4> right_image;
    StereoCalibration calib;
    std::vector<GroundTruthLabel> labels;
};

struct SceneSpec {
    uint64_t seed = 1;
    int min_objects = 1;
    int max_objects = 3;
    double size_jitter = 0.12;      // one scale factor per object, uniform +-
    double yaw_jitter = 0.3;        // radians around base yaw in {0, pi/2}
    double z_min = 6.0;
    double z_max = 20.0;
    double lateral_margin = 0.85;   // fraction of the frustum half-width used
    double ground_y = 1.0;
    double focal_px = 140.0;
    double baseline_m = 0.8;
    int width_px = 192;
    int height_px = 64;
    double ambient = 0.35;
    double diffuse = 0.65;
    double texture_amp = 0.45;
    std::vector<AnchorPrior> shapes = {{"Car", 1.5, 1.7, 4.0}};
};

StereoCalibration scene_rig(const SceneSpec& spec);

/// Deterministic per (spec.seed, frame_index). Boxes are disjoint in BEV and
/// inside the frustum; cuboids are ray-cast into both views with hash-noise
/// face textures so stereo correspondence is learnable.
FrameData generate_scene(const SceneSpec& spec, int frame_index);

FrameData resize_frame(const FrameData& frame, int target_w, int target_h);

// -- file layout: image_2/<id>.ppm, image_3/, calib/<id>.txt, label_2/<id>.txt
void write_ppm(const std::string& path, const Tensor4& image);
Tensor4 read_ppm(const std::string& path);

void write_frame(const std::string& root, const FrameData& frame);
FrameData read_frame(const std::string& root, const std::string& id, bool stereo);
std::vector<std::string> list_frame_ids(const std::string& root);

void write_labels(const std::string& path, const std::vector<GroundTruthLabel>& labels);
std::vector<GroundTruthLabel> read_labels(const std::string& path);

SceneSpec parse_scene_spec(const std::string& text);

}  // namespace tlnet
