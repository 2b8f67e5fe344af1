// Command-line front end for the keyframe-guided face restoration engine.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kfr/fusion.hpp"
#include "kfr/image_io.hpp"
#include "kfr/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<std::string> list_dir_sorted(const std::string& dir) {
    if (!fs::is_directory(dir)) throw kfr::MissingFile(dir + ": not a directory");
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    return files;
}

void write_or_print(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw kfr::IoError(out_path + ": cannot write");
    out << text;
}

struct ConfigOverrides {
    std::string config_path;
    std::string policy;
    long max_cardinality = -1;
    int crop_size = -1;
    std::string weights;
    std::string extractor;
    long long extractor_seed = -1;
    long long weights_seed = -1;
    int grid_step = -1;
    double landmark_radius = -1.0;
    std::string template_path;
    std::string out_format;
    double feather = -1.0;
    bool timing = false;
};

void add_override_flags(CLI::App* cmd, ConfigOverrides& ov) {
    cmd->add_option("--config", ov.config_path, "Config file (key=value lines)");
    cmd->add_option("--policy", ov.policy, "Keyframe policy: lfu or maxdist");
    cmd->add_option("--max-cardinality", ov.max_cardinality, "Keyframe set bound");
    cmd->add_option("--crop-size", ov.crop_size, "Aligned crop size (multiple of 16)");
    cmd->add_option("--weights", ov.weights, "Weight file (.kfrw)");
    cmd->add_option("--extractor", ov.extractor, "Feature extractor: test or file");
    cmd->add_option("--extractor-seed", ov.extractor_seed, "Seed for the test extractor");
    cmd->add_option("--weights-seed", ov.weights_seed,
                    "Seed for generated decoder weights (no weight file)");
    cmd->add_option("--grid-step", ov.grid_step, "MLS evaluation grid spacing");
    cmd->add_option("--landmark-radius", ov.landmark_radius, "Landmark mask dot radius");
    cmd->add_option("--template", ov.template_path, "Landmark template file");
    cmd->add_option("--out-format", ov.out_format, "Output raster format: ppm or pfm");
    cmd->add_option("--feather", ov.feather, "Feather width for crop paste-back");
    cmd->add_flag("--timing", ov.timing, "Include per-frame timing in the report");
}

kfr::PipelineConfig resolve_config(const ConfigOverrides& ov) {
    kfr::PipelineConfig cfg;
    if (!ov.config_path.empty()) cfg = kfr::load_config(ov.config_path);
    if (!ov.policy.empty()) kfr::apply_config_entry(cfg, "policy", ov.policy);
    if (ov.max_cardinality > 0)
        cfg.max_cardinality = static_cast<std::size_t>(ov.max_cardinality);
    if (ov.crop_size > 0) cfg.crop_size = ov.crop_size;
    if (!ov.weights.empty()) cfg.weights_path = ov.weights;
    if (!ov.extractor.empty()) cfg.extractor = ov.extractor;
    if (ov.extractor_seed >= 0)
        cfg.extractor_seed = static_cast<std::uint64_t>(ov.extractor_seed);
    if (ov.weights_seed >= 0) cfg.weights_seed = static_cast<std::uint64_t>(ov.weights_seed);
    if (ov.grid_step > 0) cfg.grid_step = ov.grid_step;
    if (ov.landmark_radius >= 0.0) cfg.landmark_radius = ov.landmark_radius;
    if (!ov.template_path.empty()) cfg.template_path = ov.template_path;
    if (!ov.out_format.empty()) cfg.out_format = ov.out_format;
    if (ov.feather >= 0.0) cfg.feather = ov.feather;
    if (ov.timing) cfg.report_timing = true;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Keyframe-guided face restoration over GOP-structured streams"};
    app.require_subcommand(1);

    auto* restore = app.add_subcommand("restore", "Restore a manifest-described stream");
    std::string manifest, out_dir;
    ConfigOverrides ov;
    restore->add_option("--manifest", manifest, "Frame manifest")->required();
    restore->add_option("--out", out_dir, "Output directory")->required();
    add_override_flags(restore, ov);

    auto* sim = app.add_subcommand("simulate-policy",
                                   "Run only the keyframe store over a stream");
    std::string sim_manifest, sim_out;
    ConfigOverrides sim_ov;
    sim->add_option("--manifest", sim_manifest, "Frame manifest")->required();
    sim->add_option("--out", sim_out, "Trace output file (stdout when omitted)");
    add_override_flags(sim, sim_ov);

    auto* warp = app.add_subcommand("warp", "MLS-warp an image between landmark sets");
    std::string warp_src, warp_src_lms, warp_dst_lms, warp_out;
    int warp_grid = 1;
    warp->add_option("--src", warp_src, "Source image")->required();
    warp->add_option("--src-landmarks", warp_src_lms, "Source landmarks")->required();
    warp->add_option("--dst-landmarks", warp_dst_lms, "Target landmarks")->required();
    warp->add_option("--out", warp_out, "Output image")->required();
    warp->add_option("--grid-step", warp_grid, "Evaluation grid spacing");

    auto* pair = app.add_subcommand("pair", "Emit reference/degraded training pairs");
    std::string raw_dir, degraded_dir, pair_out;
    int offset = 5, stride = 5;
    pair->add_option("--raw-dir", raw_dir, "Directory of raw frames")->required();
    pair->add_option("--degraded-dir", degraded_dir, "Directory of degraded frames")
        ->required();
    pair->add_option("--offset", offset, "Reference-to-degraded frame offset");
    pair->add_option("--stride", stride, "Sampling stride");
    pair->add_option("--out", pair_out, "Output manifest (stdout when omitted)");

    auto* mkw = app.add_subcommand("make-weights", "Write a seeded weight file");
    std::string mkw_out;
    long long mkw_seed = 0;
    bool mkw_zero = false, mkw_extractor = false;
    mkw->add_option("--out", mkw_out, "Weight file path")->required();
    mkw->add_option("--seed", mkw_seed, "Generator seed");
    mkw->add_flag("--zero-residual", mkw_zero, "Zero the residual output conv");
    mkw->add_flag("--with-extractor", mkw_extractor, "Include extractor tensors");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*restore) {
            const kfr::PipelineConfig cfg = resolve_config(ov);
            const auto records = kfr::load_manifest(manifest, kfr::ManifestCheck::All);
            const kfr::RunReport report = kfr::run_stream(records, cfg, out_dir);
            std::cout << report.serialize(cfg.report_timing);
        } else if (*sim) {
            const kfr::PipelineConfig cfg = resolve_config(sim_ov);
            const auto records =
                kfr::load_manifest(sim_manifest, kfr::ManifestCheck::LandmarksOnly);
            const kfr::PolicyTrace trace = kfr::simulate_policy(records, cfg);
            write_or_print(sim_out, kfr::serialize_trace(trace));
        } else if (*warp) {
            const kfr::ImageBuffer src = kfr::io::load_image(warp_src);
            const kfr::LandmarkSet src_lms = kfr::io::load_landmarks(warp_src_lms);
            const kfr::LandmarkSet dst_lms = kfr::io::load_landmarks(warp_dst_lms);
            const kfr::DeformationField field = kfr::mls_build_field(
                src_lms.points, dst_lms.points, src.width, src.height, warp_grid);
            kfr::io::save_image(warp_out, kfr::warp_image(src, field));
        } else if (*pair) {
            const auto raw = list_dir_sorted(raw_dir);
            const auto degraded = list_dir_sorted(degraded_dir);
            const auto pairs = kfr::pair_training_frames(raw, degraded, offset, stride);
            std::string text;
            for (const kfr::TrainingPair& p : pairs)
                text += "reference=" + p.reference + " degraded=" + p.degraded + "\n";
            write_or_print(pair_out, text);
        } else if (*mkw) {
            const auto ex = kfr::make_test_extractor(0);
            const kfr::WeightStore w =
                kfr::make_test_weights(static_cast<std::uint64_t>(mkw_seed),
                                       ex->channels(), mkw_zero, mkw_extractor);
            w.save(mkw_out);
            std::cout << "wrote " << w.size() << " tensors to " << mkw_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
