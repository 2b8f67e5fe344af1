#pragma once

#include <array>
#include <vector>

#include "kfr/tensor.hpp"

namespace kfr {

// Trade-off parameters of the total loss; defaults are the tuned values
// (per-scale adversarial weights ordered for factors {1,2,4,8}).
struct LossWeights {
    double mse = 300.0;
    double perceptual = 10.0;
    double style = 1.0;
    double adversarial = 2.0;
    std::array<double, 4> adv_per_scale = {4.0, 2.0, 1.0, 1.0};
};

struct LossParts {
    double mse = 0.0;
    double perceptual = 0.0;
    double style = 0.0;
    double adversarial_g = 0.0;
    std::array<double, 4> adv_per_scale_terms{};
};

struct LossBreakdown {
    double mse = 0.0;
    double perceptual = 0.0;
    double style = 0.0;
    double adversarial_g = 0.0;
    std::array<double, 4> adv_per_scale_terms{};
    double total = 0.0;
};

struct MseResult {
    double loss = 0.0;
    std::vector<float> grad;  // d loss / d restored, same layout as the image
};

// (1/CHW) * ||restored - gt||^2 with its analytic gradient.
MseResult mse_loss(const ImageBuffer& restored, const ImageBuffer& gt);

// Sum over the 4 levels of (1/C_l H_l W_l) * ||a_l - b_l||^2.
double perceptual_loss(const FeaturePyramid& a, const FeaturePyramid& b);

// Channel-by-channel inner products over the flattened spatial dim.
struct GramMatrix {
    int channels = 0;
    std::vector<double> data;  // channels x channels, row-major

    double at(int i, int j) const {
        return data[static_cast<std::size_t>(i) * channels + j];
    }
};

GramMatrix gram(const FeatureMap& f);

// Sum over levels of (1/C_l H_l W_l) * ||G(a_l) - G(b_l)||_F^2.
double style_loss(const FeaturePyramid& a, const FeaturePyramid& b);

// Multi-scale hinge losses over per-scale score tensors (factors {1,2,4,8},
// exactly 4 scales). Expectations are means over each score tensor.
using ScaleScores = std::vector<std::vector<float>>;

double hinge_d_loss(const ScaleScores& real_scores, const ScaleScores& fake_scores);

struct HingeGResult {
    double total = 0.0;
    std::array<double, 4> per_scale{};  // -lambda_r * mean(fake_r)
};

HingeGResult hinge_g_terms(const ScaleScores& fake_scores, const LossWeights& weights);
double hinge_g_loss(const ScaleScores& fake_scores, const LossWeights& weights);

// Single-discriminator specialization used by the ablation path.
struct HingePair {
    double d_loss = 0.0;
    double g_loss = 0.0;
};

HingePair hinge_single_scale(const std::vector<float>& real, const std::vector<float>& fake);

// Weighted combination; throws NonFiniteInput on non-finite parts.
LossBreakdown total_loss(const LossParts& parts, const LossWeights& weights);

// Average pooling by an integer factor (dims must divide evenly); the
// downsampling operator feeding the per-scale discriminators.
ImageBuffer downsample_avg(const ImageBuffer& img, int factor);

}  // namespace kfr
