#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kfr/keyframe_store.hpp"

namespace kfr {

struct FrameRecord {
    std::int64_t frame_index = 0;
    std::string image_path;
    std::string landmarks_path;
    bool is_keyframe = false;
    std::string gt_path;  // empty when absent
};

struct PipelineConfig {
    std::size_t max_cardinality = 10;
    Policy policy = Policy::LfuDecay;
    int crop_size = 512;
    std::string weights_path;       // empty: seeded test weights
    std::string extractor = "test";  // "test" or "file"
    std::uint64_t extractor_seed = 0;
    std::uint64_t weights_seed = 0;
    int grid_step = 4;
    double landmark_radius = 1.0;
    int reference_offset = 5;
    std::string template_path;  // empty: built-in canonical template
    std::string out_format = "ppm";  // "ppm" or "pfm"
    double feather = 16.0;
    bool report_timing = false;  // timing lines make reports run-dependent

    void validate() const;
};

// key=value per line, '#' comments. Unknown keys are ParseErrors.
PipelineConfig load_config(const std::string& path);
void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                        const std::string& value);

enum class FrameStatus { Restored, PassthroughEmptyStore, InvalidLandmarks };

struct FrameReport {
    std::int64_t frame_index = 0;
    FrameStatus status = FrameStatus::Restored;
    std::int64_t selected_arrival = -1;
    double distance = 0.0;
    std::optional<double> psnr;
    std::optional<double> ssim;
    double time_ms = 0.0;
    std::string out_path;
};

struct RunReport {
    std::vector<FrameReport> frames;  // one record per non-keyframe frame
    std::size_t keyframe_count = 0;
    std::size_t restored_count = 0;
    std::optional<double> mean_psnr;
    std::optional<double> mean_ssim;

    std::string serialize(bool with_timing) const;
};

// Which referenced files load_manifest verifies exist on disk.
enum class ManifestCheck { All, LandmarksOnly };

// Line-delimited records: frame=N image=PATH landmarks=PATH [keyframe=0|1]
// [gt=PATH]; paths are resolved relative to the manifest location and
// frame indices must be strictly increasing.
std::vector<FrameRecord> load_manifest(const std::string& path,
                                       ManifestCheck check = ManifestCheck::All);

// Full per-frame orchestration: align, maintain the keyframe set, warp the
// selected reference, run the restoration forward pass, composite the crop
// back and write outputs under out_dir.
RunReport run_stream(const std::vector<FrameRecord>& records,
                     const PipelineConfig& config, const std::string& out_dir);

// Store policy only (landmark files suffice); deterministic trace.
PolicyTrace simulate_policy(const std::vector<FrameRecord>& records,
                            const PipelineConfig& config);

struct TrainingPair {
    std::string reference;
    std::string degraded;
};

// Pairs raw[i] with degraded[i + offset] for i = 0, stride, 2*stride, ...
std::vector<TrainingPair> pair_training_frames(const std::vector<std::string>& raw,
                                               const std::vector<std::string>& degraded,
                                               int offset, int stride);

}  // namespace kfr
