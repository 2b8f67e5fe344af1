#include "kfr/losses.hpp"

#include <algorithm>
#include <cmath>

#include "kfr/errors.hpp"
#include "kfr/kernels/kernels.hpp"

namespace kfr {

namespace {

constexpr std::size_t kScaleCount = 4;

double mean_of(const std::vector<float>& v) {
    if (v.empty()) throw Error("hinge loss: empty score tensor");
    return kernels::active().sum(v.data(), v.size()) / static_cast<double>(v.size());
}

double hinge_real_term(const std::vector<float>& scores) {
    if (scores.empty()) throw Error("hinge loss: empty score tensor");
    double s = 0.0;
    for (float x : scores) s += std::min(0.0, -1.0 + static_cast<double>(x));
    return s / static_cast<double>(scores.size());
}

double hinge_fake_term(const std::vector<float>& scores) {
    if (scores.empty()) throw Error("hinge loss: empty score tensor");
    double s = 0.0;
    for (float x : scores) s += std::min(0.0, -1.0 - static_cast<double>(x));
    return s / static_cast<double>(scores.size());
}

void check_levels(const FeaturePyramid& a, const FeaturePyramid& b) {
    for (int l = 0; l < FeaturePyramid::kLevels; ++l)
        if (!a.levels[l].same_shape(b.levels[l]))
            throw PyramidMismatch("pyramids differ at level " + std::to_string(l));
}

}  // namespace

MseResult mse_loss(const ImageBuffer& restored, const ImageBuffer& gt) {
    if (restored.width != gt.width || restored.height != gt.height ||
        restored.channels != gt.channels)
        throw ShapeMismatch("mse_loss: image shapes differ");
    const std::size_t n = restored.data.size();
    if (n == 0) throw ShapeMismatch("mse_loss: empty images");

    MseResult res;
    res.loss = kernels::active().sum_sq_diff(restored.data.data(), gt.data.data(), n) /
               static_cast<double>(n);
    res.grad.resize(n);
    const float scale = static_cast<float>(2.0 / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        res.grad[i] = scale * (restored.data[i] - gt.data[i]);
    return res;
}

double perceptual_loss(const FeaturePyramid& a, const FeaturePyramid& b) {
    check_levels(a, b);
    double total = 0.0;
    for (int l = 0; l < FeaturePyramid::kLevels; ++l) {
        const FeatureMap& fa = a.levels[l];
        const FeatureMap& fb = b.levels[l];
        total += kernels::active().sum_sq_diff(fa.data.data(), fb.data.data(),
                                               fa.data.size()) /
                 static_cast<double>(fa.data.size());
    }
    return total;
}

GramMatrix gram(const FeatureMap& f) {
    GramMatrix g;
    g.channels = f.channels;
    g.data.assign(static_cast<std::size_t>(f.channels) * f.channels, 0.0);
    const std::size_t n = f.plane_size();
    const auto& ops = kernels::active();
    for (int i = 0; i < f.channels; ++i) {
        for (int j = i; j < f.channels; ++j) {
            const double v = ops.dot(f.plane(i), f.plane(j), n);
            g.data[static_cast<std::size_t>(i) * f.channels + j] = v;
            g.data[static_cast<std::size_t>(j) * f.channels + i] = v;
        }
    }
    return g;
}

double style_loss(const FeaturePyramid& a, const FeaturePyramid& b) {
    check_levels(a, b);
    double total = 0.0;
    for (int l = 0; l < FeaturePyramid::kLevels; ++l) {
        const GramMatrix ga = gram(a.levels[l]);
        const GramMatrix gb = gram(b.levels[l]);
        double frob = 0.0;
        for (std::size_t i = 0; i < ga.data.size(); ++i) {
            const double d = ga.data[i] - gb.data[i];
            frob += d * d;
        }
        total += frob / static_cast<double>(a.levels[l].data.size());
    }
    return total;
}

double hinge_d_loss(const ScaleScores& real_scores, const ScaleScores& fake_scores) {
    if (real_scores.size() != kScaleCount || fake_scores.size() != kScaleCount)
        throw ScaleCountMismatch("hinge_d_loss: expected scores at 4 scales");
    double total = 0.0;
    for (std::size_t r = 0; r < kScaleCount; ++r)
        total += hinge_real_term(real_scores[r]) + hinge_fake_term(fake_scores[r]);
    return -total;
}

HingeGResult hinge_g_terms(const ScaleScores& fake_scores, const LossWeights& weights) {
    if (fake_scores.size() != kScaleCount)
        throw ScaleCountMismatch("hinge_g_loss: expected scores at 4 scales");
    HingeGResult res;
    for (std::size_t r = 0; r < kScaleCount; ++r) {
        res.per_scale[r] = -weights.adv_per_scale[r] * mean_of(fake_scores[r]);
        res.total += res.per_scale[r];
    }
    return res;
}

double hinge_g_loss(const ScaleScores& fake_scores, const LossWeights& weights) {
    return hinge_g_terms(fake_scores, weights).total;
}

HingePair hinge_single_scale(const std::vector<float>& real,
                             const std::vector<float>& fake) {
    HingePair p;
    p.d_loss = -(hinge_real_term(real) + hinge_fake_term(fake));
    p.g_loss = -mean_of(fake);
    return p;
}

LossBreakdown total_loss(const LossParts& parts, const LossWeights& weights) {
    const double vals[] = {parts.mse, parts.perceptual, parts.style, parts.adversarial_g};
    for (double v : vals)
        if (!std::isfinite(v)) throw NonFiniteInput("total_loss: non-finite loss part");
    for (double v : parts.adv_per_scale_terms)
        if (!std::isfinite(v)) throw NonFiniteInput("total_loss: non-finite per-scale term");

    LossBreakdown out;
    out.mse = parts.mse;
    out.perceptual = parts.perceptual;
    out.style = parts.style;
    out.adversarial_g = parts.adversarial_g;
    out.adv_per_scale_terms = parts.adv_per_scale_terms;
    out.total = weights.mse * parts.mse + weights.perceptual * parts.perceptual +
                weights.style * parts.style + weights.adversarial * parts.adversarial_g;
    return out;
}

ImageBuffer downsample_avg(const ImageBuffer& img, int factor) {
    if (factor < 1) throw Error("downsample_avg: factor must be >= 1");
    if (factor == 1) return img;
    if (img.width % factor != 0 || img.height % factor != 0)
        throw ShapeMismatch("downsample_avg: dims not divisible by factor");
    ImageBuffer out = ImageBuffer::make(img.width / factor, img.height / factor,
                                        img.channels);
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                double s = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        s += img.at(x * factor + dx, y * factor + dy, c);
                out.at(x, y, c) = static_cast<float>(s * inv);
            }
        }
    }
    return out;
}

}  // namespace kfr
