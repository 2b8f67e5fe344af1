#include "kfr/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kfr/fusion.hpp"
#include "kfr/image_io.hpp"
#include "kfr/metrics.hpp"

namespace kfr {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v, const char* fmt = "%.10g") {
    char buf[48];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

// Splits "key=value" tokens of a manifest/config line.
bool split_kv(const std::string& token, std::string& key, std::string& value) {
    const std::size_t eq = token.find('=');
    if (eq == std::string::npos || eq == 0) return false;
    key = token.substr(0, eq);
    value = token.substr(eq + 1);
    return true;
}

LandmarkSet template_for(const PipelineConfig& cfg) {
    if (!cfg.template_path.empty()) {
        LandmarkSet t = io::load_landmarks(cfg.template_path);
        return t;
    }
    return scaled_template(cfg.crop_size);
}

// Blends the restored crop back into the frame through the inverse
// alignment, feathering toward the crop border. The delta form keeps
// untouched pixels bit-identical when the crop reproduces the source.
ImageBuffer paste_crop(const ImageBuffer& frame, const ImageBuffer& crop,
                       const Similarity& to_crop, double feather) {
    ImageBuffer out = frame;
    const int cs = crop.width;
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            const Point2 c = to_crop.apply({static_cast<double>(x), static_cast<double>(y)});
            if (c.x < 0.0 || c.y < 0.0 || c.x > cs - 1 || c.y > cs - 1) continue;
            const double border =
                std::min(std::min(c.x, c.y), std::min(cs - 1 - c.x, cs - 1 - c.y));
            const double m = feather > 0.0 ? std::min(1.0, border / feather) : 1.0;

            const int x0 = static_cast<int>(c.x);
            const int y0 = static_cast<int>(c.y);
            const int x1 = std::min(x0 + 1, cs - 1);
            const int y1 = std::min(y0 + 1, cs - 1);
            const double fx = c.x - x0;
            const double fy = c.y - y0;
            for (int ch = 0; ch < frame.channels; ++ch) {
                const double top = (1.0 - fx) * crop.at(x0, y0, ch) + fx * crop.at(x1, y0, ch);
                const double bot = (1.0 - fx) * crop.at(x0, y1, ch) + fx * crop.at(x1, y1, ch);
                const double v = (1.0 - fy) * top + fy * bot;
                const float orig = out.at(x, y, ch);
                out.at(x, y, ch) =
                    static_cast<float>(orig + m * (v - static_cast<double>(orig)));
            }
        }
    }
    return out;
}

struct LoadedFrame {
    ImageBuffer image;
    LandmarkSet landmarks;
    bool landmarks_ok = false;
};

}  // namespace

void PipelineConfig::validate() const {
    if (max_cardinality == 0) throw Error("config: max_cardinality must be positive");
    if (crop_size < 16 || crop_size % 16 != 0)
        throw Error("config: crop_size must be a positive multiple of 16");
    if (grid_step < 1) throw Error("config: grid_step must be >= 1");
    if (landmark_radius < 0.0) throw Error("config: landmark_radius must be >= 0");
    if (extractor != "test" && extractor != "file")
        throw Error("config: extractor must be 'test' or 'file'");
    if (extractor == "file" && weights_path.empty())
        throw Error("config: extractor 'file' requires a weight file");
    if (out_format != "ppm" && out_format != "pfm")
        throw Error("config: out_format must be 'ppm' or 'pfm'");
    if (feather < 0.0) throw Error("config: feather must be >= 0");
    if (reference_offset < 0) throw Error("config: reference_offset must be >= 0");
}

void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                        const std::string& value) {
    auto as_int = [&](long lo, long hi) {
        const long v = std::stol(value);
        if (v < lo || v > hi) throw ParseError("config: " + key + " out of range");
        return v;
    };
    if (key == "max_cardinality")
        cfg.max_cardinality = static_cast<std::size_t>(as_int(1, 1 << 20));
    else if (key == "policy") {
        if (value == "lfu")
            cfg.policy = Policy::LfuDecay;
        else if (value == "maxdist")
            cfg.policy = Policy::MaxDistance;
        else
            throw ParseError("config: policy must be 'lfu' or 'maxdist'");
    } else if (key == "crop_size")
        cfg.crop_size = static_cast<int>(as_int(16, 1 << 14));
    else if (key == "weights")
        cfg.weights_path = value;
    else if (key == "extractor")
        cfg.extractor = value;
    else if (key == "extractor_seed")
        cfg.extractor_seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "weights_seed")
        cfg.weights_seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "grid_step")
        cfg.grid_step = static_cast<int>(as_int(1, 1 << 12));
    else if (key == "landmark_radius")
        cfg.landmark_radius = std::stod(value);
    else if (key == "reference_offset")
        cfg.reference_offset = static_cast<int>(as_int(0, 1 << 20));
    else if (key == "template")
        cfg.template_path = value;
    else if (key == "out_format")
        cfg.out_format = value;
    else if (key == "feather")
        cfg.feather = std::stod(value);
    else if (key == "timing")
        cfg.report_timing = value == "1" || value == "true";
    else
        throw ParseError("config: unknown key '" + key + "'");
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFile(path + ": cannot open");
    PipelineConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        std::string key, value;
        if (!split_kv(line.substr(start), key, value))
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected key=value");
        try {
            apply_config_entry(cfg, key, value);
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    // resolve relative paths against the config location
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](std::string& p) {
        if (!p.empty() && fs::path(p).is_relative()) p = (base / p).string();
    };
    resolve(cfg.weights_path);
    resolve(cfg.template_path);
    return cfg;
}

std::vector<FrameRecord> load_manifest(const std::string& path, ManifestCheck check) {
    std::ifstream in(path);
    if (!in) throw MissingFile(path + ": cannot open");
    const fs::path base = fs::path(path).parent_path();

    std::vector<FrameRecord> records;
    std::string line;
    int lineno = 0;
    bool have_prev = false;
    std::int64_t prev_index = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;

        FrameRecord rec;
        bool have_frame = false;
        std::istringstream ls(line);
        std::string token;
        const std::string where = path + ":" + std::to_string(lineno);
        while (ls >> token) {
            std::string key, value;
            if (!split_kv(token, key, value))
                throw ParseError(where + ": expected key=value, got '" + token + "'");
            if (key == "frame") {
                rec.frame_index = std::stoll(value);
                have_frame = true;
            } else if (key == "image")
                rec.image_path = value;
            else if (key == "landmarks")
                rec.landmarks_path = value;
            else if (key == "keyframe")
                rec.is_keyframe = value == "1" || value == "true";
            else if (key == "gt")
                rec.gt_path = value;
            else
                throw ParseError(where + ": unknown field '" + key + "'");
        }
        if (!have_frame) throw ParseError(where + ": missing frame=");
        if (rec.image_path.empty()) throw ParseError(where + ": missing image=");
        if (rec.landmarks_path.empty()) throw ParseError(where + ": missing landmarks=");
        if (have_prev && rec.frame_index <= prev_index)
            throw ParseError(where + ": frame index " + std::to_string(rec.frame_index) +
                             " is not strictly increasing");
        prev_index = rec.frame_index;
        have_prev = true;

        auto resolve = [&](std::string& p) {
            if (!p.empty() && fs::path(p).is_relative()) p = (base / p).string();
        };
        resolve(rec.image_path);
        resolve(rec.landmarks_path);
        resolve(rec.gt_path);

        if (!fs::exists(rec.landmarks_path))
            throw MissingFile(where + ": landmarks file not found: " + rec.landmarks_path);
        if (check == ManifestCheck::All) {
            if (!fs::exists(rec.image_path))
                throw MissingFile(where + ": image file not found: " + rec.image_path);
            if (!rec.gt_path.empty() && !fs::exists(rec.gt_path))
                throw MissingFile(where + ": gt file not found: " + rec.gt_path);
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::string RunReport::serialize(bool with_timing) const {
    std::string out;
    for (const FrameReport& f : frames) {
        out += "frame=" + std::to_string(f.frame_index);
        out += " status=";
        switch (f.status) {
            case FrameStatus::Restored: out += "restored"; break;
            case FrameStatus::PassthroughEmptyStore: out += "passthrough_empty_store"; break;
            case FrameStatus::InvalidLandmarks: out += "invalid_landmarks"; break;
        }
        if (f.status == FrameStatus::Restored) {
            out += " selected=" + std::to_string(f.selected_arrival);
            out += " distance=" + fmt_double(f.distance);
        }
        out += " psnr=" + (f.psnr ? fmt_double(*f.psnr) : std::string("null"));
        out += " ssim=" + (f.ssim ? fmt_double(*f.ssim) : std::string("null"));
        if (with_timing) out += " time_ms=" + fmt_double(f.time_ms, "%.3f");
        if (!f.out_path.empty()) out += " out=" + f.out_path;
        out += '\n';
    }
    out += "aggregate keyframes=" + std::to_string(keyframe_count);
    out += " restored=" + std::to_string(restored_count);
    out += " mean_psnr=" + (mean_psnr ? fmt_double(*mean_psnr) : std::string("null"));
    out += " mean_ssim=" + (mean_ssim ? fmt_double(*mean_ssim) : std::string("null"));
    out += '\n';
    return out;
}

RunReport run_stream(const std::vector<FrameRecord>& records,
                     const PipelineConfig& config, const std::string& out_dir) {
    config.validate();
    fs::create_directories(out_dir);

    const LandmarkSet templ = template_for(config);
    templ.validate();

    WeightStore weights;
    std::unique_ptr<FeatureExtractor> extractor;
    if (config.extractor == "file") {
        weights = WeightStore::load(config.weights_path);
        extractor = make_file_extractor(weights);
    } else {
        extractor = make_test_extractor(config.extractor_seed);
        if (!config.weights_path.empty())
            weights = WeightStore::load(config.weights_path);
        else
            weights = make_test_weights(config.weights_seed, extractor->channels());
    }

    KeyframeStore store(config.max_cardinality, config.policy);
    RunReport report;
    double psnr_sum = 0.0, ssim_sum = 0.0;
    std::size_t metric_count = 0;

    for (const FrameRecord& rec : records) {
        const auto t0 = std::chrono::steady_clock::now();
        const ImageBuffer frame = io::load_image(rec.image_path);

        LoadedFrame lf;
        lf.image = frame;
        try {
            lf.landmarks = io::load_landmarks(rec.landmarks_path);
            lf.landmarks.validate();
            lf.landmarks_ok = true;
        } catch (const Error&) {
            lf.landmarks_ok = false;
        }

        char name[32];
        std::snprintf(name, sizeof(name), "frame_%06lld.%s",
                      static_cast<long long>(rec.frame_index), config.out_format.c_str());
        const std::string out_path = (fs::path(out_dir) / name).string();

        if (!lf.landmarks_ok) {
            // pass the frame through untouched and keep going
            if (!rec.is_keyframe) {
                io::save_image(out_path, frame);
                FrameReport fr;
                fr.frame_index = rec.frame_index;
                fr.status = FrameStatus::InvalidLandmarks;
                fr.out_path = name;
                fr.time_ms = std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();
                report.frames.push_back(std::move(fr));
            }
            continue;
        }

        const AlignResult aligned = align_face(frame, lf.landmarks, templ, config.crop_size);

        if (rec.is_keyframe) {
            store.insert_keyframe(aligned.image, aligned.landmarks, rec.frame_index);
            ++report.keyframe_count;
            continue;
        }

        FrameReport fr;
        fr.frame_index = rec.frame_index;
        fr.out_path = name;

        ImageBuffer crop;
        if (store.empty()) {
            fr.status = FrameStatus::PassthroughEmptyStore;
            crop = aligned.image;
            io::save_image(out_path, frame);
        } else {
            fr.status = FrameStatus::Restored;
            auto [entry, idx] = store.select_reference(aligned.landmarks, rec.frame_index);
            fr.selected_arrival = static_cast<std::int64_t>(entry->arrival_index);
            fr.distance = landmark_distance(entry->landmarks, aligned.landmarks);
            (void)idx;

            const DeformationField field =
                mls_build_field(entry->landmarks.points, aligned.landmarks.points,
                                config.crop_size, config.crop_size, config.grid_step);
            const ImageBuffer warped = warp_image(entry->image, field);
            const ImageBuffer mask =
                render_landmark_mask(aligned.landmarks, config.crop_size,
                                     config.crop_size, config.landmark_radius);
            crop = restore_forward(aligned.image, warped, mask, *extractor, weights);
            ++report.restored_count;

            const ImageBuffer full = paste_crop(frame, crop, aligned.transform,
                                                config.feather);
            io::save_image(out_path, full);
        }

        if (!rec.gt_path.empty()) {
            const ImageBuffer gt = io::load_image(rec.gt_path);
            const ImageBuffer gt_crop =
                resample_similarity(gt, aligned.transform, config.crop_size);
            fr.psnr = psnr(crop, gt_crop);
            fr.ssim = ssim(crop, gt_crop);
            psnr_sum += *fr.psnr;
            ssim_sum += *fr.ssim;
            ++metric_count;
        }
        fr.time_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
        report.frames.push_back(std::move(fr));
    }

    if (metric_count > 0) {
        report.mean_psnr = psnr_sum / static_cast<double>(metric_count);
        report.mean_ssim = ssim_sum / static_cast<double>(metric_count);
    }

    std::ofstream rep(fs::path(out_dir) / "report.txt");
    rep << report.serialize(config.report_timing);
    return report;
}

PolicyTrace simulate_policy(const std::vector<FrameRecord>& records,
                            const PipelineConfig& config) {
    config.validate();
    const LandmarkSet templ = template_for(config);
    templ.validate();

    KeyframeStore store(config.max_cardinality, config.policy);
    for (const FrameRecord& rec : records) {
        const LandmarkSet lms = io::load_landmarks(rec.landmarks_path);
        const Similarity t = fit_similarity(lms.points, templ.points);
        LandmarkSet aligned;
        aligned.points.reserve(lms.points.size());
        for (const Point2& p : lms.points) aligned.points.push_back(t.apply(p));

        if (rec.is_keyframe)
            store.insert_keyframe(ImageBuffer{}, aligned, rec.frame_index);
        else if (!store.empty())
            store.select_reference(aligned, rec.frame_index);
    }
    return store.export_trace();
}

std::vector<TrainingPair> pair_training_frames(const std::vector<std::string>& raw,
                                               const std::vector<std::string>& degraded,
                                               int offset, int stride) {
    if (offset < 0) throw Error("pair_training_frames: negative offset");
    if (stride < 1) throw Error("pair_training_frames: stride must be >= 1");
    std::vector<TrainingPair> pairs;
    for (std::size_t i = 0; i < raw.size(); i += static_cast<std::size_t>(stride)) {
        const std::size_t j = i + static_cast<std::size_t>(offset);
        if (j >= degraded.size()) break;
        pairs.push_back({raw[i], degraded[j]});
    }
    return pairs;
}

}  // namespace kfr
