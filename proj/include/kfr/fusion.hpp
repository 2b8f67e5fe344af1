#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>

#include "kfr/tensor.hpp"
#include "kfr/weights.hpp"

namespace kfr {

// Multi-scale feature source. Implementations must be deterministic for
// fixed weights: the same input always yields an identical pyramid.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual FeaturePyramid extract(const ImageBuffer& image) const = 0;
    virtual std::array<int, FeaturePyramid::kLevels> channels() const = 0;
};

// Small seeded conv stack (channels {8,16,32,32}) standing in for a
// pretrained backbone during tests and desk-scale runs.
std::unique_ptr<FeatureExtractor> make_test_extractor(std::uint64_t seed);

// Extractor whose conv weights come from "extractor.convK.{weight,bias}"
// tensors; the tensor shapes declare the channel widths.
std::unique_ptr<FeatureExtractor> make_file_extractor(const WeightStore& weights);

// Re-standardizes guide to the per-channel spatial mean/std of degraded:
// sigma(d) * (g - mu(g)) / max(sigma(g), eps) + mu(d), eps = 1e-5.
FeatureMap adain(const FeatureMap& guide, const FeatureMap& degraded);

// alpha ⊙ restored + beta, elementwise.
FeatureMap sft_modulate(const FeatureMap& restored, const FeatureMap& alpha,
                        const FeatureMap& beta);

// Attention-mask fusion: mask = logistic(conv(lrelu(conv(concat(restored,
// guide_aligned, landmark_feats))))); output blends guide and restored
// features through the mask. Weights: asff.level{L}.conv{1,2}.{weight,bias}.
FeatureMap asff_fuse(const FeatureMap& restored, const FeatureMap& guide_aligned,
                     const FeatureMap& landmark_feats, const WeightStore& weights,
                     int level);

// Standard cross-correlation with zero padding; kernel is
// out_c x in_c x kh x kw, bias optional (empty span).
FeatureMap conv2d(const FeatureMap& input, std::span<const float> kernel, int out_c,
                  int kh, int kw, std::span<const float> bias, int stride = 1,
                  int dilation = 1, int pad = 0);

FeatureMap leaky_relu(const FeatureMap& input, float slope = 0.2f);
FeatureMap logistic(const FeatureMap& input);
FeatureMap upsample2x_nearest(const FeatureMap& input);
FeatureMap concat_channels(std::span<const FeatureMap* const> maps);

struct MatrixF {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;  // row-major
};

struct SpectralNormResult {
    MatrixF normalized;
    double sigma = 0.0;
};

// Estimates the largest singular value by power iteration on WᵀW and
// returns W / sigma together with the estimate.
SpectralNormResult spectral_normalize(const MatrixF& weight, int power_iters);

// Full restoration forward pass: residual decoder over the degraded
// features with per-level AdaIN -> ASFF -> SFT fusion coarse to fine, then
// output = clamp(degraded + residual, 0, 1). Image dimensions must be
// divisible by 16.
ImageBuffer restore_forward(const ImageBuffer& degraded, const ImageBuffer& warped_ref,
                            const ImageBuffer& landmark_mask,
                            const FeatureExtractor& extractor,
                            const WeightStore& weights);

// Seeded weight set for the decoder (and optionally the file extractor)
// sized for the given per-level channels. zero_residual zeroes the final
// residual conv so the forward pass reproduces its input exactly.
WeightStore make_test_weights(std::uint64_t seed,
                              const std::array<int, FeaturePyramid::kLevels>& channels,
                              bool zero_residual = false,
                              bool include_extractor = false);

inline constexpr float kAdainEps = 1e-5f;
inline constexpr float kLeakySlope = 0.2f;

}  // namespace kfr
