#include "kfr/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "kfr/errors.hpp"
#include "kfr/kernels/kernels.hpp"
#include "kfr/parallel.hpp"

namespace kfr {

namespace {

// Deterministic generator for seeded weights and power-iteration starts;
// identical sequences on every platform, unlike std:: distributions.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        state += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    float uniform(float lo, float hi) {
        return lo + (hi - lo) * static_cast<float>(unit());
    }
};

std::string level_name(const char* block, int level, const char* leaf) {
    return std::string(block) + ".level" + std::to_string(level) + "." + leaf;
}

FeatureMap conv_from_store(const FeatureMap& input, const WeightStore& w,
                           const std::string& base, int out_c, int stride = 1,
                           int dilation = 1, int pad = 1) {
    const Tensor& k = w.get(base + ".weight",
                            std::array<std::uint32_t, 4>{
                                static_cast<std::uint32_t>(out_c),
                                static_cast<std::uint32_t>(input.channels), 3, 3});
    const Tensor& b = w.get(base + ".bias",
                            std::array<std::uint32_t, 1>{static_cast<std::uint32_t>(out_c)});
    return conv2d(input, k.data, out_c, 3, 3, b.data, stride, dilation, pad);
}

void add_inplace(FeatureMap& x, const FeatureMap& y) {
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += y.data[i];
}

FeatureMap replicate3(const ImageBuffer& img) {
    if (img.channels == 3) return image_to_feature(img);
    if (img.channels != 1)
        throw ShapeMismatch("extractor input must have 1 or 3 channels");
    FeatureMap m = FeatureMap::make(3, img.height, img.width);
    const std::size_t plane = m.plane_size();
    for (int c = 0; c < 3; ++c)
        std::memcpy(m.plane(c), img.data.data(), plane * sizeof(float));
    return m;
}

// Shared conv stack for both extractors: four stride-2 3x3 convs with
// leaky-ReLU taps after each, giving factors {2,4,8,16}.
struct ConvStackExtractor final : FeatureExtractor {
    std::array<std::vector<float>, 4> kernels;
    std::array<std::vector<float>, 4> biases;
    std::array<int, 4> widths{};

    FeaturePyramid extract(const ImageBuffer& image) const override {
        FeatureMap x = replicate3(image);
        FeaturePyramid pyr;
        int in_c = 3;
        for (int k = 0; k < FeaturePyramid::kLevels; ++k) {
            x = conv2d(x, kernels[k], widths[k], 3, 3, biases[k], 2, 1, 1);
            kernels::active().leaky_relu(x.data.data(), x.data.data(), x.data.size(),
                                         kLeakySlope);
            pyr.levels[k] = x;
            in_c = widths[k];
        }
        (void)in_c;
        return pyr;
    }

    std::array<int, FeaturePyramid::kLevels> channels() const override { return widths; }
};

void fill_uniform(SplitMix64& rng, std::vector<float>& v, float bound) {
    for (float& x : v) x = rng.uniform(-bound, bound);
}

void add_conv_tensors(WeightStore& store, SplitMix64& rng, const std::string& base,
                      int out_c, int in_c, bool zero = false) {
    std::vector<float> w(static_cast<std::size_t>(out_c) * in_c * 9);
    std::vector<float> b(static_cast<std::size_t>(out_c));
    if (!zero) {
        const float bound = std::sqrt(3.0f / (static_cast<float>(in_c) * 9.0f));
        fill_uniform(rng, w, bound);
        fill_uniform(rng, b, 0.01f);
    }
    store.add(base + ".weight",
              {static_cast<std::uint32_t>(out_c), static_cast<std::uint32_t>(in_c), 3, 3},
              std::move(w));
    store.add(base + ".bias", {static_cast<std::uint32_t>(out_c)}, std::move(b));
}

}  // namespace

FeatureMap conv2d(const FeatureMap& input, std::span<const float> kernel, int out_c,
                  int kh, int kw, std::span<const float> bias, int stride,
                  int dilation, int pad) {
    if (input.data.empty()) throw ShapeMismatch("conv2d: empty input");
    if (out_c <= 0 || kh <= 0 || kw <= 0 || stride < 1 || dilation < 1 || pad < 0)
        throw ShapeMismatch("conv2d: invalid kernel geometry");
    const std::size_t want =
        static_cast<std::size_t>(out_c) * input.channels * kh * kw;
    if (kernel.size() != want)
        throw ShapeMismatch("conv2d: kernel size does not match declared shape");
    if (!bias.empty() && bias.size() != static_cast<std::size_t>(out_c))
        throw ShapeMismatch("conv2d: bias size does not match output channels");

    const int out_h = (input.height + 2 * pad - dilation * (kh - 1) - 1) / stride + 1;
    const int out_w = (input.width + 2 * pad - dilation * (kw - 1) - 1) / stride + 1;
    if (out_h <= 0 || out_w <= 0)
        throw ShapeMismatch("conv2d: kernel does not fit the input");

    FeatureMap out = FeatureMap::make(out_c, out_h, out_w);
    const auto& ops = kernels::active();
    const std::size_t per_channel_work =
        static_cast<std::size_t>(out_h) * out_w * input.channels * kh * kw;
    const std::size_t grain =
        std::max<std::size_t>(1, (1u << 20) / std::max<std::size_t>(per_channel_work, 1));

    parallel_for(0, static_cast<std::size_t>(out_c), [&](std::size_t c0, std::size_t c1) {
        kernels::ConvArgs args;
        args.input = input.data.data();
        args.in_c = input.channels;
        args.in_h = input.height;
        args.in_w = input.width;
        args.kernel = kernel.data() + c0 * input.channels * kh * kw;
        args.bias = bias.empty() ? nullptr : bias.data() + c0;
        args.out_c = static_cast<int>(c1 - c0);
        args.kh = kh;
        args.kw = kw;
        args.stride = stride;
        args.dilation = dilation;
        args.pad = pad;
        args.output = out.data.data() + c0 * out.plane_size();
        args.out_h = out_h;
        args.out_w = out_w;
        ops.conv2d(args);
    }, grain);
    return out;
}

FeatureMap adain(const FeatureMap& guide, const FeatureMap& degraded) {
    if (!guide.same_shape(degraded)) throw ShapeMismatch("adain: shapes differ");
    FeatureMap out = FeatureMap::make(guide.channels, guide.height, guide.width);
    const auto& ops = kernels::active();
    const std::size_t n = guide.plane_size();
    const double dn = static_cast<double>(n);
    for (int c = 0; c < guide.channels; ++c) {
        const float* g = guide.plane(c);
        const float* d = degraded.plane(c);
        const double mu_g = ops.sum(g, n) / dn;
        const double var_g = std::max(0.0, ops.sum_sq(g, n) / dn - mu_g * mu_g);
        const double mu_d = ops.sum(d, n) / dn;
        const double var_d = std::max(0.0, ops.sum_sq(d, n) / dn - mu_d * mu_d);
        const double sigma_g = std::sqrt(var_g);
        const double sigma_d = std::sqrt(var_d);
        // Degenerate guide channels collapse to the degraded mean; healthy
        // channels are rescaled exactly so the moment contract holds.
        const double scale =
            sigma_g > static_cast<double>(kAdainEps) ? sigma_d / sigma_g : 0.0;
        ops.normalize_affine(out.plane(c), g, n, static_cast<float>(mu_g),
                             static_cast<float>(scale), static_cast<float>(mu_d));
    }
    return out;
}

FeatureMap sft_modulate(const FeatureMap& restored, const FeatureMap& alpha,
                        const FeatureMap& beta) {
    if (!restored.same_shape(alpha) || !restored.same_shape(beta))
        throw ShapeMismatch("sft_modulate: shapes differ");
    FeatureMap out = FeatureMap::make(restored.channels, restored.height, restored.width);
    kernels::active().affine_mod(out.data.data(), restored.data.data(),
                                 alpha.data.data(), beta.data.data(), out.data.size());
    return out;
}

FeatureMap leaky_relu(const FeatureMap& input, float slope) {
    FeatureMap out = FeatureMap::make(input.channels, input.height, input.width);
    kernels::active().leaky_relu(out.data.data(), input.data.data(), out.data.size(),
                                 slope);
    return out;
}

FeatureMap logistic(const FeatureMap& input) {
    FeatureMap out = FeatureMap::make(input.channels, input.height, input.width);
    for (std::size_t i = 0; i < input.data.size(); ++i)
        out.data[i] =
            static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(input.data[i]))));
    return out;
}

FeatureMap upsample2x_nearest(const FeatureMap& input) {
    FeatureMap out = FeatureMap::make(input.channels, input.height * 2, input.width * 2);
    for (int c = 0; c < input.channels; ++c) {
        const float* src = input.plane(c);
        float* dst = out.plane(c);
        for (int y = 0; y < out.height; ++y) {
            const float* srow = src + static_cast<std::size_t>(y / 2) * input.width;
            float* drow = dst + static_cast<std::size_t>(y) * out.width;
            for (int x = 0; x < out.width; ++x) drow[x] = srow[x / 2];
        }
    }
    return out;
}

FeatureMap concat_channels(std::span<const FeatureMap* const> maps) {
    if (maps.empty()) throw ShapeMismatch("concat_channels: no inputs");
    int total_c = 0;
    for (const FeatureMap* m : maps) {
        if (m->height != maps[0]->height || m->width != maps[0]->width)
            throw ShapeMismatch("concat_channels: spatial dims differ");
        total_c += m->channels;
    }
    FeatureMap out = FeatureMap::make(total_c, maps[0]->height, maps[0]->width);
    float* dst = out.data.data();
    for (const FeatureMap* m : maps) {
        std::memcpy(dst, m->data.data(), m->data.size() * sizeof(float));
        dst += m->data.size();
    }
    return out;
}

FeatureMap asff_fuse(const FeatureMap& restored, const FeatureMap& guide_aligned,
                     const FeatureMap& landmark_feats, const WeightStore& weights,
                     int level) {
    if (!restored.same_shape(guide_aligned))
        throw ShapeMismatch("asff_fuse: restored/guide shapes differ");
    if (landmark_feats.height != restored.height ||
        landmark_feats.width != restored.width)
        throw ShapeMismatch("asff_fuse: landmark feature dims differ");

    const FeatureMap* parts[3] = {&restored, &guide_aligned, &landmark_feats};
    const FeatureMap cat = concat_channels(parts);
    FeatureMap h = conv_from_store(cat, weights, level_name("asff", level, "conv1"),
                                   restored.channels);
    kernels::active().leaky_relu(h.data.data(), h.data.data(), h.data.size(), kLeakySlope);
    h = conv_from_store(h, weights, level_name("asff", level, "conv2"), restored.channels);
    const FeatureMap mask = logistic(h);

    FeatureMap out = FeatureMap::make(restored.channels, restored.height, restored.width);
    kernels::active().blend_mask(out.data.data(), restored.data.data(),
                                 guide_aligned.data.data(), mask.data.data(),
                                 out.data.size());
    return out;
}

SpectralNormResult spectral_normalize(const MatrixF& weight, int power_iters) {
    if (power_iters < 1) throw Error("spectral_normalize: power_iters must be >= 1");
    if (weight.rows <= 0 || weight.cols <= 0 ||
        weight.data.size() != static_cast<std::size_t>(weight.rows) * weight.cols)
        throw ShapeMismatch("spectral_normalize: malformed matrix");
    bool nonzero = false;
    for (float v : weight.data)
        if (v != 0.0f) {
            nonzero = true;
            break;
        }
    if (!nonzero) throw ZeroMatrix("spectral_normalize: all-zero matrix");

    const int rows = weight.rows;
    const int cols = weight.cols;
    auto w_at = [&](int r, int c) {
        return static_cast<double>(weight.data[static_cast<std::size_t>(r) * cols + c]);
    };

    SplitMix64 rng(0x5eedf00d1234abcdull + static_cast<std::uint64_t>(rows) * 131 +
                   static_cast<std::uint64_t>(cols));
    std::vector<double> v(cols), u(rows), t(cols);
    auto randomize = [&] {
        double norm = 0.0;
        for (double& x : v) {
            x = rng.unit() - 0.5;
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    };
    randomize();

    // Rayleigh quotients lambda_k = |W v_k|^2 increase geometrically toward
    // sigma_max^2; keep the last two for Aitken extrapolation.
    double lam1 = 0.0, lam0 = 0.0;
    for (int it = 0; it < power_iters; ++it) {
        double lam = 0.0;
        for (int r = 0; r < rows; ++r) {
            double s = 0.0;
            for (int c = 0; c < cols; ++c) s += w_at(r, c) * v[c];
            u[r] = s;
            lam += s * s;
        }
        lam1 = lam0;
        lam0 = lam;
        double norm = 0.0;
        for (int c = 0; c < cols; ++c) {
            double s = 0.0;
            for (int r = 0; r < rows; ++r) s += w_at(r, c) * u[r];
            t[c] = s;
            norm += s * s;
        }
        norm = std::sqrt(norm);
        if (norm < 1e-300) {
            // start vector fell into the null space; draw a fresh one
            randomize();
            continue;
        }
        for (int c = 0; c < cols; ++c) v[c] = t[c] / norm;
    }

    double sigma_sq = 0.0;
    for (int r = 0; r < rows; ++r) {
        double s = 0.0;
        for (int c = 0; c < cols; ++c) s += w_at(r, c) * v[c];
        sigma_sq += s * s;
    }
    if (power_iters >= 2) {
        // Aitken's delta-squared on the geometric tail; guarded so a
        // converged or irregular sequence keeps the plain estimate.
        const double den = sigma_sq - 2.0 * lam0 + lam1;
        if (std::abs(den) > 1e-12 * sigma_sq) {
            const double diff = sigma_sq - lam0;
            const double accel = sigma_sq - diff * diff / den;
            if (accel >= sigma_sq && accel <= 1.1 * sigma_sq) sigma_sq = accel;
        }
    }
    const double sigma = std::sqrt(sigma_sq);
    if (sigma < 1e-300) throw ZeroMatrix("spectral_normalize: numerically zero spectrum");

    SpectralNormResult res;
    res.sigma = sigma;
    res.normalized.rows = rows;
    res.normalized.cols = cols;
    res.normalized.data.resize(weight.data.size());
    const float inv = static_cast<float>(1.0 / sigma);
    for (std::size_t i = 0; i < weight.data.size(); ++i)
        res.normalized.data[i] = weight.data[i] * inv;
    return res;
}

ImageBuffer restore_forward(const ImageBuffer& degraded, const ImageBuffer& warped_ref,
                            const ImageBuffer& landmark_mask,
                            const FeatureExtractor& extractor,
                            const WeightStore& weights) {
    if (degraded.width != warped_ref.width || degraded.height != warped_ref.height ||
        degraded.width != landmark_mask.width || degraded.height != landmark_mask.height)
        throw ShapeMismatch("restore_forward: input images differ in size");
    if (degraded.channels != 3 || warped_ref.channels != 3)
        throw ShapeMismatch("restore_forward: degraded and reference must be 3-channel");
    if (degraded.width % 16 != 0 || degraded.height % 16 != 0)
        throw ShapeMismatch("restore_forward: dimensions must be divisible by 16");

    const auto ch = extractor.channels();
    const FeaturePyramid pd = extractor.extract(degraded);
    const FeaturePyramid pr = extractor.extract(warped_ref);
    const FeaturePyramid pl = extractor.extract(landmark_mask);

    // Coarsest level through the dilated residual blocks.
    FeatureMap x = pd.levels[3];
    for (int rb = 0; rb < 4; ++rb) {
        const int dil = 1 << rb;
        const std::string base = "decoder.resblock" + std::to_string(rb);
        FeatureMap h = conv_from_store(x, weights, base + ".conv1", ch[3], 1, dil, dil);
        kernels::active().leaky_relu(h.data.data(), h.data.data(), h.data.size(),
                                     kLeakySlope);
        h = conv_from_store(h, weights, base + ".conv2", ch[3], 1, dil, dil);
        add_inplace(x, h);
    }

    // Coarse-to-fine: AdaIN-align the guide, fuse, modulate, upsample.
    for (int level = FeaturePyramid::kLevels - 1; level >= 0; --level) {
        const FeatureMap ga = adain(pr.levels[level], pd.levels[level]);
        const FeatureMap fused = asff_fuse(x, ga, pl.levels[level], weights, level);
        FeatureMap a = conv_from_store(fused, weights, level_name("sft", level, "alpha1"),
                                       ch[level]);
        kernels::active().leaky_relu(a.data.data(), a.data.data(), a.data.size(),
                                     kLeakySlope);
        a = conv_from_store(a, weights, level_name("sft", level, "alpha2"), ch[level]);
        FeatureMap b = conv_from_store(fused, weights, level_name("sft", level, "beta1"),
                                       ch[level]);
        kernels::active().leaky_relu(b.data.data(), b.data.data(), b.data.size(),
                                     kLeakySlope);
        b = conv_from_store(b, weights, level_name("sft", level, "beta2"), ch[level]);
        x = sft_modulate(x, a, b);
        if (level > 0) {
            x = conv_from_store(upsample2x_nearest(x), weights,
                                "decoder.up" + std::to_string(level), ch[level - 1]);
            kernels::active().leaky_relu(x.data.data(), x.data.data(), x.data.size(),
                                         kLeakySlope);
        }
    }

    x = conv_from_store(upsample2x_nearest(x), weights, "decoder.head", ch[0]);
    kernels::active().leaky_relu(x.data.data(), x.data.data(), x.data.size(), kLeakySlope);
    const FeatureMap residual = conv_from_store(x, weights, "decoder.out", 3);

    if (residual.height != degraded.height || residual.width != degraded.width)
        throw ShapeMismatch("restore_forward: residual dims diverged from input");

    // Interleave the residual and add it onto the degraded input.
    ImageBuffer out = ImageBuffer::make(degraded.width, degraded.height, 3);
    std::vector<float> res_interleaved(out.data.size());
    const std::size_t plane = residual.plane_size();
    for (std::size_t p = 0; p < plane; ++p)
        for (int c = 0; c < 3; ++c)
            res_interleaved[p * 3 + c] = residual.data[static_cast<std::size_t>(c) * plane + p];
    kernels::active().add_clamp01(out.data.data(), degraded.data.data(),
                                  res_interleaved.data(), out.data.size());
    return out;
}

std::unique_ptr<FeatureExtractor> make_test_extractor(std::uint64_t seed) {
    auto ex = std::make_unique<ConvStackExtractor>();
    ex->widths = {8, 16, 32, 32};
    SplitMix64 rng(seed ^ 0xc0ffee1234567890ull);
    int in_c = 3;
    for (int k = 0; k < FeaturePyramid::kLevels; ++k) {
        const int out_c = ex->widths[k];
        ex->kernels[k].resize(static_cast<std::size_t>(out_c) * in_c * 9);
        ex->biases[k].resize(static_cast<std::size_t>(out_c));
        const float bound = std::sqrt(3.0f / (static_cast<float>(in_c) * 9.0f));
        fill_uniform(rng, ex->kernels[k], bound);
        fill_uniform(rng, ex->biases[k], 0.01f);
        in_c = out_c;
    }
    return ex;
}

std::unique_ptr<FeatureExtractor> make_file_extractor(const WeightStore& weights) {
    auto ex = std::make_unique<ConvStackExtractor>();
    int in_c = 3;
    for (int k = 0; k < FeaturePyramid::kLevels; ++k) {
        const std::string base = "extractor.conv" + std::to_string(k);
        const Tensor& w = weights.get(base + ".weight");
        if (w.dims.size() != 4 || w.dims[1] != static_cast<std::uint32_t>(in_c) ||
            w.dims[2] != 3 || w.dims[3] != 3)
            throw ShapeMismatch(base + ".weight: expected [C," + std::to_string(in_c) +
                                ",3,3]");
        const int out_c = static_cast<int>(w.dims[0]);
        const Tensor& b = weights.get(
            base + ".bias", std::array<std::uint32_t, 1>{w.dims[0]});
        ex->widths[k] = out_c;
        ex->kernels[k] = w.data;
        ex->biases[k] = b.data;
        in_c = out_c;
    }
    return ex;
}

WeightStore make_test_weights(std::uint64_t seed,
                              const std::array<int, FeaturePyramid::kLevels>& channels,
                              bool zero_residual, bool include_extractor) {
    WeightStore store;
    SplitMix64 rng(seed ^ 0x9d2c5680aa11ff33ull);
    for (int rb = 0; rb < 4; ++rb)
        for (const char* leaf : {".conv1", ".conv2"})
            add_conv_tensors(store, rng, "decoder.resblock" + std::to_string(rb) + leaf,
                             channels[3], channels[3]);
    for (int level = FeaturePyramid::kLevels - 1; level >= 0; --level) {
        add_conv_tensors(store, rng, level_name("asff", level, "conv1"), channels[level],
                         channels[level] * 3);
        add_conv_tensors(store, rng, level_name("asff", level, "conv2"), channels[level],
                         channels[level]);
        for (const char* leaf : {"alpha1", "alpha2", "beta1", "beta2"})
            add_conv_tensors(store, rng, level_name("sft", level, leaf), channels[level],
                             channels[level]);
        if (level > 0)
            add_conv_tensors(store, rng, "decoder.up" + std::to_string(level),
                             channels[level - 1], channels[level]);
    }
    add_conv_tensors(store, rng, "decoder.head", channels[0], channels[0]);
    add_conv_tensors(store, rng, "decoder.out", 3, channels[0], zero_residual);
    if (include_extractor) {
        int in_c = 3;
        for (int k = 0; k < FeaturePyramid::kLevels; ++k) {
            add_conv_tensors(store, rng, "extractor.conv" + std::to_string(k),
                             channels[k], in_c);
            in_c = channels[k];
        }
    }
    return store;
}

}  // namespace kfr
