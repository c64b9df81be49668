// Command-line driver: priors | synth | train | infer | eval | ablate |
// gradcheck | plot. Numeric hyperparameters live in config files; flags only
// select files and modes.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tlnet/eval.hpp"
#include "tlnet/gradcheck_suite.hpp"
#include "tlnet/pipeline.hpp"

namespace fs = std::filesystem;
using namespace tlnet;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw MissingFile("cannot open " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

void spit(const std::string& path, const std::string& text) {
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    std::ofstream os(path);
    if (!os) throw MissingFile("cannot open " + path + " for writing");
    os << text;
}

DetectorConfig load_config(const std::string& path, bool full_schedule) {
    DetectorConfig cfg = path.empty() ? DetectorConfig{} : parse_detector_config(slurp(path));
    if (full_schedule) {
        cfg.stage1_iters = 20000;
        cfg.stage2_iters = 40000;
        cfg.stage3_iters = 60000;
        cfg.stage4_iters = 20000;
    }
    return cfg;
}

std::vector<FrameData> load_dataset(const std::string& root, bool stereo,
                                    const std::string& split_file) {
    std::vector<std::string> ids;
    if (!split_file.empty()) {
        std::istringstream ss(slurp(split_file));
        std::string id;
        while (ss >> id) ids.push_back(id);
    } else {
        ids = list_frame_ids(root);
    }
    std::vector<FrameData> frames;
    for (const auto& id : ids) frames.push_back(read_frame(root, id, stereo));
    return frames;
}

int cmd_priors(const std::string& label_dir, const std::string& classes_csv,
               const std::string& out_path) {
    std::vector<std::string> classes;
    std::stringstream cs(classes_csv);
    std::string cls;
    while (std::getline(cs, cls, ',')) classes.push_back(cls);
    std::vector<SizeSample> samples;
    for (const auto& entry : fs::directory_iterator(label_dir)) {
        if (entry.path().extension() != ".txt") continue;
        for (const auto& lab : read_labels(entry.path().string()))
            samples.push_back({lab.class_name, lab.h, lab.w, lab.l});
    }
    const auto priors = compute_prior_sizes(samples, classes);
    const std::string table = serialize_priors(priors);
    if (out_path.empty()) std::cout << table;
    else spit(out_path, table);
    return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir, int frames, int start,
              bool mono) {
    const SceneSpec spec = parse_scene_spec(slurp(spec_path));
    for (int i = start; i < start + frames; ++i) {
        FrameData frame = generate_scene(spec, i);
        if (mono) frame.right_image.reset();
        write_frame(out_dir, frame);
    }
    std::cout << "wrote " << frames << " frames to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_ckpt, const std::string& loss_log, bool full_schedule) {
    const DetectorConfig cfg = load_config(config_path, full_schedule);
    const auto dataset = load_dataset(data_dir, cfg.stereo, "");
    ParamStore store;
    const TrainResult result = train(cfg, dataset, store);
    store.save_file(out_ckpt);
    if (!loss_log.empty())
        spit(loss_log, "# config_hash=" + config_hash(cfg) + "\n" + result.loss_log);
    std::cout << "checkpoint: " << out_ckpt << " (config " << config_hash(cfg) << ")\n";
    return 0;
}

int cmd_infer(const std::string& config_path, const std::string& ckpt,
              const std::string& data_dir, const std::string& out_dir) {
    const DetectorConfig cfg = load_config(config_path, false);
    ParamStore store;
    store.load_file(ckpt);
    fs::create_directories(out_dir);
    for (const auto& id : list_frame_ids(data_dir)) {
        const FrameData frame = read_frame(data_dir, id, cfg.stereo);
        const auto detections = infer(frame, cfg, store);
        write_labels((fs::path(out_dir) / (id + ".txt")).string(),
                     detections_to_labels(detections));
    }
    return 0;
}

int cmd_eval(const std::string& det_dir, const std::string& gt_dir, const std::string& cls,
             const std::string& out_csv, const std::string& curve_dir, bool forty_point) {
    const auto interp =
        forty_point ? ApInterpolation::forty_point : ApInterpolation::eleven_point;
    const EvalReport report = evaluate_dirs(det_dir, gt_dir, cls, interp);
    std::cout << report_table(report);
    if (!out_csv.empty()) spit(out_csv, report_csv(report));
    if (!curve_dir.empty()) {
        fs::create_directories(curve_dir);
        for (const auto& cell : report.cells) {
            char stem[128];
            std::snprintf(stem, sizeof(stem), "%s_%g_%s", match_kind_name(cell.criterion.kind),
                          cell.criterion.threshold, difficulty_name(cell.regime));
            spit((fs::path(curve_dir) / (std::string(stem) + ".csv")).string(),
                 curve_csv(cell));
            spit((fs::path(curve_dir) / (std::string(stem) + ".svg")).string(),
                 curve_svg(cell));
        }
    }
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& train_dir,
               const std::string& eval_dir, const std::string& out_path) {
    const DetectorConfig base = load_config(config_path, false);
    auto eval_frames = load_dataset(eval_dir, true, "");

    struct Variant {
        std::string name;
        bool stereo;
        FusionMode fusion;
    };
    const std::vector<Variant> variants = {{"mono", false, FusionMode::add},
                                           {"concat", true, FusionMode::concat},
                                           {"add", true, FusionMode::add},
                                           {"reweight", true, FusionMode::reweight}};
    std::ostringstream table;
    table << "# AP3D per fusion variant (config " << config_hash(base) << ")\n";
    table << "variant   iou0.3   iou0.5   iou0.7\n";
    for (const auto& variant : variants) {
        DetectorConfig cfg = base;
        cfg.stereo = variant.stereo;
        cfg.fusion = variant.fusion;
        const auto train_frames = load_dataset(train_dir, cfg.stereo, "");
        ParamStore store;
        train(cfg, train_frames, store);
        std::vector<FrameAnnotations> frames;
        for (const auto& fd : eval_frames) {
            FrameData frame = fd;
            if (!cfg.stereo) frame.right_image.reset();
            FrameAnnotations fa;
            fa.gts = frame.labels;
            fa.detections = infer(frame, cfg, store);
            frames.push_back(std::move(fa));
        }
        const EvalReport report =
            evaluate(frames, base.priors.front().class_name);
        char row[160];
        std::snprintf(row, sizeof(row), "%-9s %7.4f  %7.4f  %7.4f\n", variant.name.c_str(),
                      report.find(MatchKind::iou3d, 0.3, Difficulty::moderate)->ap,
                      report.find(MatchKind::iou3d, 0.5, Difficulty::moderate)->ap,
                      report.find(MatchKind::iou3d, 0.7, Difficulty::moderate)->ap);
        table << row;
        std::cout << row;
    }
    if (!out_path.empty()) spit(out_path, table.str());
    return 0;
}

int cmd_plot(const std::string& curve_csv_path, const std::string& out_svg) {
    std::istringstream is(slurp(curve_csv_path));
    std::string line;
    std::getline(is, line);  // header
    EvalCell cell;
    while (std::getline(is, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        cell.curve.push_back(
            {std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    }
    cell.ap = average_precision(cell.curve, ApInterpolation::eleven_point);
    spit(out_svg, curve_svg(cell));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stereo 3D detector: anchor triangulation with coherence reweighting"};
    app.require_subcommand(1);

    std::string root = ".";
    app.add_option("--root", root, "base directory for relative paths");

    auto* priors = app.add_subcommand("priors", "per-class mean sizes from a label directory");
    std::string label_dir, classes = "Car", out_path;
    priors->add_option("--labels", label_dir, "label directory")->required();
    priors->add_option("--classes", classes, "comma-separated class list");
    priors->add_option("--out", out_path, "output table path (default stdout)");

    auto* synth = app.add_subcommand("synth", "generate a synthetic stereo dataset");
    std::string spec_path, synth_out;
    int frames = 10, start = 0;
    bool mono_frames = false;
    synth->add_option("--spec", spec_path, "scene spec file")->required();
    synth->add_option("--out", synth_out, "output dataset directory")->required();
    synth->add_option("--frames", frames, "number of frames");
    synth->add_option("--start", start, "first frame index");
    synth->add_flag("--mono", mono_frames, "omit right images");

    auto* train_cmd = app.add_subcommand("train", "train a detector");
    std::string config_path, data_dir, ckpt = "model.tlnt", loss_log;
    bool full_schedule = false;
    train_cmd->add_option("--config", config_path, "detector config file");
    train_cmd->add_option("--data", data_dir, "training dataset directory")->required();
    train_cmd->add_option("--out", ckpt, "checkpoint output path");
    train_cmd->add_option("--loss-log", loss_log, "loss CSV output path");
    train_cmd->add_flag("--full-schedule", full_schedule,
                        "20K/40K/60K/20K iterations instead of the desk-scale default");

    auto* infer_cmd = app.add_subcommand("infer", "run inference over a dataset");
    std::string infer_out = "detections";
    infer_cmd->add_option("--config", config_path, "detector config file");
    infer_cmd->add_option("--checkpoint", ckpt, "checkpoint path")->required();
    infer_cmd->add_option("--data", data_dir, "dataset directory")->required();
    infer_cmd->add_option("--out", infer_out, "detection label output directory");

    auto* eval_cmd = app.add_subcommand("eval", "KITTI-style AP evaluation");
    std::string det_dir, gt_dir, eval_csv, curve_dir, eval_class = "Car";
    bool forty_point = false;
    eval_cmd->add_option("--det", det_dir, "detection label directory")->required();
    eval_cmd->add_option("--gt", gt_dir, "ground-truth label directory")->required();
    eval_cmd->add_option("--class", eval_class, "class to evaluate");
    eval_cmd->add_option("--out", eval_csv, "report CSV path");
    eval_cmd->add_option("--curves", curve_dir, "PR curve output directory");
    eval_cmd->add_flag("--forty-point", forty_point, "40-point AP interpolation");

    auto* ablate = app.add_subcommand("ablate", "mono vs concat/add/reweight comparison");
    std::string ablate_eval_dir, ablate_out;
    ablate->add_option("--config", config_path, "base detector config");
    ablate->add_option("--data", data_dir, "training dataset directory")->required();
    ablate->add_option("--eval-data", ablate_eval_dir, "held-out dataset directory")->required();
    ablate->add_option("--out", ablate_out, "comparison table output path");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    int gc_configs = 20;
    gradcheck->add_option("--configs", gc_configs, "random configurations per operation");

    auto* plot = app.add_subcommand("plot", "render a PR-curve CSV as SVG");
    std::string plot_in, plot_out = "curve.svg";
    plot->add_option("--curve", plot_in, "recall,precision CSV")->required();
    plot->add_option("--out", plot_out, "output SVG path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    std::error_code ec;
    std::filesystem::current_path(root, ec);
    if (ec) {
        std::cerr << "bad --root: " << root << "\n";
        return 2;
    }

    try {
        if (priors->parsed()) return cmd_priors(label_dir, classes, out_path);
        if (synth->parsed()) return cmd_synth(spec_path, synth_out, frames, start, mono_frames);
        if (train_cmd->parsed())
            return cmd_train(config_path, data_dir, ckpt, loss_log, full_schedule);
        if (infer_cmd->parsed()) return cmd_infer(config_path, ckpt, data_dir, infer_out);
        if (eval_cmd->parsed())
            return cmd_eval(det_dir, gt_dir, eval_class, eval_csv, curve_dir, forty_point);
        if (ablate->parsed())
            return cmd_ablate(config_path, data_dir, ablate_eval_dir, ablate_out);
        if (gradcheck->parsed()) {
            const SuiteResult result = run_gradient_suite(gc_configs);
            std::cout << result.report;
            return result.ok ? 0 : 1;
        }
        if (plot->parsed()) return cmd_plot(plot_in, plot_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
