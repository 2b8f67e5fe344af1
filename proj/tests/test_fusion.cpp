#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "kfr/fusion.hpp"
#include "kfr/geometry.hpp"
#include "kfr/kernels/kernels.hpp"
#include "oracles.hpp"

using namespace kfr;

namespace {

// Frozen values from the first audited run of the scalar reference path
// (seed 0, all-0.5 32x32 input / the deterministic ramp inputs below).
constexpr double kGoldenLevelMeans[4] = {0.315328529317, 0.181292178329,
                                         0.110333154573, 0.060085124936};
constexpr double kGoldenResidualLinf = 0.354197800159;
constexpr double kGoldenOutMean = 0.437796130154;

FeatureMap random_map(std::mt19937& rng, int c, int h, int w, float lo = -1.0f,
                      float hi = 1.0f) {
    std::uniform_real_distribution<float> d(lo, hi);
    FeatureMap m = FeatureMap::make(c, h, w);
    for (float& v : m.data) v = d(rng);
    return m;
}

ImageBuffer ramp_image(int w, int h, int a, int b, int c, int mod) {
    ImageBuffer img = ImageBuffer::make(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < 3; ++ch)
                img.at(x, y, ch) =
                    static_cast<float>((x * a + y * b + ch * c) % mod) /
                    static_cast<float>(mod - 1);
    return img;
}

WeightStore asff_weights(int c, float bias2) {
    WeightStore w;
    std::vector<float> k1(static_cast<std::size_t>(c) * 3 * c * 9, 0.0f);
    std::vector<float> k2(static_cast<std::size_t>(c) * c * 9, 0.0f);
    w.add("asff.level0.conv1.weight",
          {static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(3 * c), 3, 3}, k1);
    w.add("asff.level0.conv1.bias", {static_cast<std::uint32_t>(c)},
          std::vector<float>(static_cast<std::size_t>(c), 0.0f));
    w.add("asff.level0.conv2.weight",
          {static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c), 3, 3}, k2);
    w.add("asff.level0.conv2.bias", {static_cast<std::uint32_t>(c)},
          std::vector<float>(static_cast<std::size_t>(c), bias2));
    return w;
}

}  // namespace

TEST_SUITE("adain") {
    TEST_CASE("re-standardizing a map to its own moments is the identity") {
        std::mt19937 rng(40);
        const FeatureMap f = random_map(rng, 3, 6, 5);
        const FeatureMap out = adain(f, f);
        for (std::size_t i = 0; i < f.data.size(); ++i)
            CHECK(out.data[i] == doctest::Approx(f.data[i]).epsilon(1e-6));
    }

    TEST_CASE("constant guide channels collapse to the degraded mean") {
        std::mt19937 rng(41);
        const FeatureMap guide = FeatureMap::make(2, 4, 4, 0.7f);
        const FeatureMap degraded = random_map(rng, 2, 4, 4);
        const FeatureMap out = adain(guide, degraded);
        for (int c = 0; c < 2; ++c) {
            const auto m = oracle::moments(degraded, c);
            for (std::size_t i = 0; i < out.plane_size(); ++i) {
                CHECK(std::isfinite(out.plane(c)[i]));
                CHECK(out.plane(c)[i] == doctest::Approx(m.mean).epsilon(1e-6));
            }
        }
    }

    TEST_CASE("scalar moments oracle on the 1x1x4 example") {
        FeatureMap guide = FeatureMap::make(1, 1, 4);
        guide.data = {0.0f, 1.0f, 2.0f, 3.0f};
        FeatureMap degraded = FeatureMap::make(1, 1, 4);
        degraded.data = {10.0f, 10.0f, 14.0f, 14.0f};
        const FeatureMap out = adain(guide, degraded);

        const auto mg = oracle::moments(guide, 0);
        const auto md = oracle::moments(degraded, 0);
        CHECK(md.mean == doctest::Approx(12.0));
        CHECK(md.std == doctest::Approx(2.0));
        for (std::size_t i = 0; i < 4; ++i) {
            const double want = md.std * (guide.data[i] - mg.mean) / mg.std + md.mean;
            CHECK(out.data[i] == doctest::Approx(want).epsilon(1e-6));
        }
        const auto mo = oracle::moments(out, 0);
        CHECK(mo.mean == doctest::Approx(12.0).epsilon(1e-6));
        CHECK(mo.std == doctest::Approx(2.0).epsilon(1e-6));
    }

    TEST_CASE("moment contract on random maps") {
        std::mt19937 rng(42);
        for (int rep = 0; rep < 50; ++rep) {
            const FeatureMap guide = random_map(rng, 4, 9, 7);
            const FeatureMap degraded = random_map(rng, 4, 9, 7, -0.5f, 2.0f);
            const FeatureMap out = adain(guide, degraded);
            for (int c = 0; c < 4; ++c) {
                const auto want = oracle::moments(degraded, c);
                const auto got = oracle::moments(out, c);
                CHECK(std::abs(got.mean - want.mean) < 1e-5);
                CHECK(std::abs(got.std - want.std) < 1e-5);
            }
        }
    }

    TEST_CASE("shape mismatch") {
        const FeatureMap a = FeatureMap::make(1, 2, 2);
        const FeatureMap b = FeatureMap::make(1, 2, 3);
        CHECK_THROWS_AS(adain(a, b), ShapeMismatch);
    }
}

TEST_SUITE("sft_modulate") {
    TEST_CASE("unit alpha and zero beta is the identity") {
        std::mt19937 rng(43);
        const FeatureMap f = random_map(rng, 2, 3, 3);
        const FeatureMap one = FeatureMap::make(2, 3, 3, 1.0f);
        const FeatureMap zero = FeatureMap::make(2, 3, 3, 0.0f);
        CHECK(sft_modulate(f, one, zero).data == f.data);
    }

    TEST_CASE("zero alpha returns beta") {
        std::mt19937 rng(44);
        const FeatureMap f = random_map(rng, 2, 3, 3);
        const FeatureMap beta = random_map(rng, 2, 3, 3);
        const FeatureMap zero = FeatureMap::make(2, 3, 3, 0.0f);
        CHECK(sft_modulate(f, zero, beta).data == beta.data);
    }

    TEST_CASE("random inputs match the elementwise loop") {
        std::mt19937 rng(45);
        const FeatureMap f = random_map(rng, 2, 3, 3);
        const FeatureMap a = random_map(rng, 2, 3, 3);
        const FeatureMap b = random_map(rng, 2, 3, 3);
        const FeatureMap out = sft_modulate(f, a, b);
        for (std::size_t i = 0; i < f.data.size(); ++i)
            CHECK(out.data[i] ==
                  doctest::Approx(a.data[i] * f.data[i] + b.data[i]).epsilon(1e-7));
    }

    TEST_CASE("shape mismatch") {
        const FeatureMap f = FeatureMap::make(2, 3, 3);
        const FeatureMap bad = FeatureMap::make(2, 3, 4);
        CHECK_THROWS_AS(sft_modulate(f, bad, f), ShapeMismatch);
    }
}

TEST_SUITE("asff_fuse") {
    TEST_CASE("saturated positive mask returns the guide") {
        std::mt19937 rng(46);
        const FeatureMap r = random_map(rng, 2, 4, 4);
        const FeatureMap g = random_map(rng, 2, 4, 4);
        const FeatureMap l = random_map(rng, 2, 4, 4);
        const WeightStore w = asff_weights(2, 20.0f);
        const FeatureMap out = asff_fuse(r, g, l, w, 0);
        for (std::size_t i = 0; i < out.data.size(); ++i)
            CHECK(out.data[i] == doctest::Approx(g.data[i]).epsilon(1e-6));
    }

    TEST_CASE("saturated negative mask returns the restored features") {
        std::mt19937 rng(47);
        const FeatureMap r = random_map(rng, 2, 4, 4);
        const FeatureMap g = random_map(rng, 2, 4, 4);
        const FeatureMap l = random_map(rng, 2, 4, 4);
        const WeightStore w = asff_weights(2, -20.0f);
        const FeatureMap out = asff_fuse(r, g, l, w, 0);
        for (std::size_t i = 0; i < out.data.size(); ++i)
            CHECK(out.data[i] == doctest::Approx(r.data[i]).epsilon(1e-6));
    }

    TEST_CASE("center-tap kernels reproduce a hand evaluation") {
        // 3x3 kernels with only the center element set act as 1x1 convs, so
        // the whole block can be evaluated by hand per pixel.
        FeatureMap r = FeatureMap::make(1, 2, 2);
        r.data = {0.2f, -0.4f, 0.9f, 0.1f};
        FeatureMap g = FeatureMap::make(1, 2, 2);
        g.data = {0.5f, 0.3f, -0.2f, 0.8f};
        FeatureMap l = FeatureMap::make(1, 2, 2);
        l.data = {1.0f, 0.0f, 1.0f, 0.0f};

        const float w_r = 0.7f, w_g = -1.1f, w_l = 0.4f, b1 = 0.05f;
        const float w2 = 1.3f, b2 = -0.1f;
        WeightStore w;
        std::vector<float> k1(27, 0.0f);
        k1[0 * 9 + 4] = w_r;  // center taps of the three input planes
        k1[1 * 9 + 4] = w_g;
        k1[2 * 9 + 4] = w_l;
        std::vector<float> k2(9, 0.0f);
        k2[4] = w2;
        w.add("asff.level0.conv1.weight", {1, 3, 3, 3}, k1);
        w.add("asff.level0.conv1.bias", {1}, {b1});
        w.add("asff.level0.conv2.weight", {1, 1, 3, 3}, k2);
        w.add("asff.level0.conv2.bias", {1}, {b2});

        const FeatureMap out = asff_fuse(r, g, l, w, 0);
        for (std::size_t i = 0; i < 4; ++i) {
            const double pre = w_r * r.data[i] + w_g * g.data[i] + w_l * l.data[i] + b1;
            const double act = pre > 0 ? pre : 0.2 * pre;
            const double mask = 1.0 / (1.0 + std::exp(-(w2 * act + b2)));
            const double want = g.data[i] * mask + r.data[i] * (1.0 - mask);
            CHECK(out.data[i] == doctest::Approx(want).epsilon(1e-6));
        }
    }

    TEST_CASE("output is elementwise between restored and guide") {
        std::mt19937 rng(48);
        const FeatureMap r = random_map(rng, 3, 8, 8);
        const FeatureMap g = random_map(rng, 3, 8, 8);
        const FeatureMap l = random_map(rng, 3, 8, 8);
        const WeightStore ws = make_test_weights(3, {3, 3, 3, 3});
        const FeatureMap out = asff_fuse(r, g, l, ws, 0);
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            CHECK(out.data[i] >= std::min(r.data[i], g.data[i]));
            CHECK(out.data[i] <= std::max(r.data[i], g.data[i]));
        }
    }

    TEST_CASE("missing weights are reported by name") {
        std::mt19937 rng(49);
        const FeatureMap r = random_map(rng, 2, 4, 4);
        const WeightStore empty;
        CHECK_THROWS_AS(asff_fuse(r, r, r, empty, 0), MissingWeight);
    }
}

TEST_SUITE("conv2d op") {
    TEST_CASE("1x1 identity kernel reproduces the input") {
        std::mt19937 rng(50);
        const FeatureMap in = random_map(rng, 3, 5, 6);
        std::vector<float> k(9, 0.0f);
        k[0 * 3 + 0] = 1.0f;  // eye(3) as flattened [oc][ic] 1x1 taps
        k[1 * 3 + 1] = 1.0f;
        k[2 * 3 + 2] = 1.0f;
        const FeatureMap out = conv2d(in, k, 3, 1, 1, {});
        CHECK(out.data == in.data);
    }

    TEST_CASE("all-ones 3x3 kernel sums the valid window") {
        const FeatureMap in = FeatureMap::make(1, 3, 3, 1.0f);
        const std::vector<float> k(9, 1.0f);
        const std::vector<float> bias = {0.25f};
        const FeatureMap out = conv2d(in, k, 1, 3, 3, bias);
        REQUIRE(out.height == 1);
        REQUIRE(out.width == 1);
        CHECK(out.data[0] == 9.25f);
    }

    TEST_CASE("dilated conv matches the naive six-loop oracle") {
        std::mt19937 rng(51);
        const FeatureMap in = random_map(rng, 2, 7, 7);
        std::uniform_real_distribution<float> d(-0.5f, 0.5f);
        std::vector<float> k(3 * 2 * 9);
        for (float& v : k) v = d(rng);
        std::vector<float> bias = {d(rng), d(rng), d(rng)};
        const FeatureMap out = conv2d(in, k, 3, 3, 3, bias, 1, 2, 2);
        const FeatureMap want = oracle::conv2d(in, k, 3, 3, 3, bias, 1, 2, 2);
        REQUIRE(out.data.size() == want.data.size());
        for (std::size_t i = 0; i < out.data.size(); ++i)
            CHECK(std::abs(out.data[i] - want.data[i]) < 1e-4);
    }

    TEST_CASE("strided conv matches the oracle") {
        std::mt19937 rng(55);
        const FeatureMap in = random_map(rng, 3, 10, 12);
        std::uniform_real_distribution<float> d(-0.5f, 0.5f);
        std::vector<float> k(4 * 3 * 9);
        for (float& v : k) v = d(rng);
        std::vector<float> bias = {d(rng), d(rng), d(rng), d(rng)};
        const FeatureMap out = conv2d(in, k, 4, 3, 3, bias, 2, 1, 1);
        const FeatureMap want = oracle::conv2d(in, k, 4, 3, 3, bias, 2, 1, 1);
        REQUIRE(out.height == 5);
        REQUIRE(out.width == 6);
        for (std::size_t i = 0; i < out.data.size(); ++i)
            CHECK(std::abs(out.data[i] - want.data[i]) < 1e-4);
    }

    TEST_CASE("linearity in the input up to the bias term") {
        std::mt19937 rng(52);
        const FeatureMap x = random_map(rng, 2, 6, 6);
        const FeatureMap y = random_map(rng, 2, 6, 6);
        std::uniform_real_distribution<float> d(-0.5f, 0.5f);
        std::vector<float> k(2 * 2 * 9);
        for (float& v : k) v = d(rng);
        const std::vector<float> bias = {0.3f, -0.2f};
        const float a = 1.7f, b = -0.6f;

        FeatureMap mix = FeatureMap::make(2, 6, 6);
        for (std::size_t i = 0; i < mix.data.size(); ++i)
            mix.data[i] = a * x.data[i] + b * y.data[i];

        const FeatureMap cm = conv2d(mix, k, 2, 3, 3, bias, 1, 1, 1);
        const FeatureMap cx = conv2d(x, k, 2, 3, 3, bias, 1, 1, 1);
        const FeatureMap cy = conv2d(y, k, 2, 3, 3, bias, 1, 1, 1);
        for (int oc = 0; oc < 2; ++oc)
            for (std::size_t i = 0; i < cm.plane_size(); ++i) {
                const double want = a * cx.plane(oc)[i] + b * cy.plane(oc)[i] -
                                    (a + b - 1.0) * bias[static_cast<std::size_t>(oc)];
                CHECK(std::abs(cm.plane(oc)[i] - want) < 1e-4);
            }
    }

    TEST_CASE("rejects inconsistent shapes") {
        const FeatureMap in = FeatureMap::make(2, 4, 4);
        CHECK_THROWS_AS(conv2d(in, std::vector<float>(17, 0.0f), 1, 3, 3, {}),
                        ShapeMismatch);
        CHECK_THROWS_AS(conv2d(in, std::vector<float>(18, 0.0f), 1, 3, 3,
                               std::vector<float>(2, 0.0f)),
                        ShapeMismatch);
    }
}

TEST_SUITE("spectral_normalize") {
    TEST_CASE("diagonal matrix") {
        MatrixF w{2, 2, {3.0f, 0.0f, 0.0f, 1.0f}};
        const SpectralNormResult r = spectral_normalize(w, 50);
        CHECK(r.sigma == doctest::Approx(3.0).epsilon(1e-9));
        CHECK(r.normalized.data[0] == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(r.normalized.data[3] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    }

    TEST_CASE("orthogonal matrix has unit spectral norm") {
        const double th = 0.83;
        MatrixF w{2, 2,
                  {static_cast<float>(std::cos(th)), static_cast<float>(-std::sin(th)),
                   static_cast<float>(std::sin(th)), static_cast<float>(std::cos(th))}};
        const SpectralNormResult r = spectral_normalize(w, 50);
        CHECK(r.sigma == doctest::Approx(1.0).epsilon(1e-5));
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(r.normalized.data[i] == doctest::Approx(w.data[i]).epsilon(1e-5));
    }

    TEST_CASE("random matrices match the dense SVD oracle") {
        std::mt19937 rng(53);
        std::uniform_real_distribution<float> d(-1.0f, 1.0f);
        for (int rep = 0; rep < 20; ++rep) {
            MatrixF w{8, 5, {}};
            w.data.resize(40);
            for (float& v : w.data) v = d(rng);
            const SpectralNormResult r = spectral_normalize(w, 50);
            const double want = oracle::sigma_max(w.data, 8, 5);
            CHECK(r.sigma == doctest::Approx(want).epsilon(1e-4));
        }
    }

    TEST_CASE("normalized matrix has unit spectral norm") {
        std::mt19937 rng(54);
        std::uniform_real_distribution<float> d(-1.0f, 1.0f);
        MatrixF w{6, 9, {}};
        w.data.resize(54);
        for (float& v : w.data) v = d(rng);
        const SpectralNormResult r = spectral_normalize(w, 200);
        const double post = oracle::sigma_max(r.normalized.data, 6, 9);
        CHECK(post > 1.0 - 1e-3);
        CHECK(post < 1.0 + 1e-3);
    }

    TEST_CASE("zero matrix is rejected") {
        MatrixF w{3, 3, std::vector<float>(9, 0.0f)};
        CHECK_THROWS_AS(spectral_normalize(w, 10), ZeroMatrix);
    }
}

TEST_SUITE("restore_forward") {
    TEST_CASE("zero residual weights reproduce the degraded input exactly") {
        auto ex = make_test_extractor(3);
        const WeightStore w = make_test_weights(5, ex->channels(), /*zero_residual=*/true);
        const ImageBuffer deg = ramp_image(32, 32, 7, 13, 29, 97);
        const ImageBuffer ref = ramp_image(32, 32, 11, 3, 17, 89);
        const ImageBuffer mask = render_landmark_mask(scaled_template(32), 32, 32, 1.0);
        const ImageBuffer out = restore_forward(deg, ref, mask, *ex, w);
        CHECK(out.data == deg.data);
    }

    TEST_CASE("deterministic for fixed weights and inputs") {
        auto ex = make_test_extractor(0);
        const WeightStore w = make_test_weights(0, ex->channels());
        const ImageBuffer deg = ramp_image(32, 32, 7, 13, 29, 97);
        const ImageBuffer ref = ramp_image(32, 32, 11, 3, 17, 89);
        const ImageBuffer mask = render_landmark_mask(scaled_template(32), 32, 32, 1.0);
        const ImageBuffer a = restore_forward(deg, ref, mask, *ex, w);
        const ImageBuffer b = restore_forward(deg, ref, mask, *ex, w);
        CHECK(a.data == b.data);
    }

    TEST_CASE("seeded 32x32 run matches the recorded golden values") {
        kernels::set_backend(kernels::Backend::Scalar);
        auto ex = make_test_extractor(0);
        const WeightStore w = make_test_weights(0, ex->channels());
        const ImageBuffer deg = ramp_image(32, 32, 7, 13, 29, 97);
        const ImageBuffer ref = ramp_image(32, 32, 11, 3, 17, 89);
        const ImageBuffer mask = render_landmark_mask(scaled_template(32), 32, 32, 1.0);
        const ImageBuffer out = restore_forward(deg, ref, mask, *ex, w);
        kernels::set_backend(kernels::Backend::Auto);

        REQUIRE(out.width == 32);
        REQUIRE(out.height == 32);
        REQUIRE(out.channels == 3);
        double linf = 0.0, mean = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            CHECK(out.data[i] >= 0.0f);
            CHECK(out.data[i] <= 1.0f);
            linf = std::max(linf, std::abs(static_cast<double>(out.data[i]) - deg.data[i]));
            mean += out.data[i];
        }
        mean /= static_cast<double>(out.data.size());
        CHECK(std::isfinite(linf));
        CHECK(linf == doctest::Approx(kGoldenResidualLinf).epsilon(1e-5));
        CHECK(mean == doctest::Approx(kGoldenOutMean).epsilon(1e-5));
    }

    TEST_CASE("SIMD and scalar paths agree") {
        if (!kernels::backend_available(kernels::Backend::Avx2) &&
            !kernels::backend_available(kernels::Backend::Neon))
            return;
        auto ex = make_test_extractor(1);
        const WeightStore w = make_test_weights(1, ex->channels());
        const ImageBuffer deg = ramp_image(32, 32, 5, 9, 23, 83);
        const ImageBuffer ref = ramp_image(32, 32, 13, 7, 19, 91);
        const ImageBuffer mask = render_landmark_mask(scaled_template(32), 32, 32, 1.0);

        kernels::set_backend(kernels::Backend::Scalar);
        const ImageBuffer a = restore_forward(deg, ref, mask, *ex, w);
        kernels::set_backend(kernels::Backend::Auto);
        const ImageBuffer b = restore_forward(deg, ref, mask, *ex, w);
        REQUIRE(a.data.size() == b.data.size());
        for (std::size_t i = 0; i < a.data.size(); ++i)
            CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-5));
    }

    TEST_CASE("shape conservation for any input divisible by 16") {
        auto ex = make_test_extractor(0);
        const WeightStore w = make_test_weights(0, ex->channels());
        for (const int size : {32, 48}) {
            const ImageBuffer deg = ramp_image(size, size, 7, 13, 29, 97);
            const ImageBuffer ref = ramp_image(size, size, 11, 3, 17, 89);
            const ImageBuffer mask =
                render_landmark_mask(scaled_template(size), size, size, 1.0);
            const ImageBuffer out = restore_forward(deg, ref, mask, *ex, w);
            CHECK(out.width == size);
            CHECK(out.height == size);
        }
    }

    TEST_CASE("rejects non-divisible dimensions and bad shapes") {
        auto ex = make_test_extractor(0);
        const WeightStore w = make_test_weights(0, ex->channels());
        const ImageBuffer odd = ramp_image(24, 24, 7, 13, 29, 97);
        const ImageBuffer mask = render_landmark_mask(scaled_template(24), 24, 24, 1.0);
        CHECK_THROWS_AS(restore_forward(odd, odd, mask, *ex, w), ShapeMismatch);
        const ImageBuffer a32 = ramp_image(32, 32, 7, 13, 29, 97);
        CHECK_THROWS_AS(restore_forward(a32, odd, mask, *ex, w), ShapeMismatch);
    }
}

TEST_SUITE("test extractor") {
    TEST_CASE("level geometry for a 32x32 input") {
        auto ex = make_test_extractor(0);
        const FeaturePyramid pyr = ex->extract(ImageBuffer::make(32, 32, 3, 0.5f));
        const int sizes[4] = {16, 8, 4, 2};
        const int chans[4] = {8, 16, 32, 32};
        for (std::size_t l = 0; l < 4; ++l) {
            CHECK(pyr.levels[l].height == sizes[l]);
            CHECK(pyr.levels[l].width == sizes[l]);
            CHECK(pyr.levels[l].channels == chans[l]);
        }
    }

    TEST_CASE("same seed yields identical pyramids, different seeds differ") {
        const ImageBuffer img = ramp_image(32, 32, 7, 13, 29, 97);
        auto a = make_test_extractor(9);
        auto b = make_test_extractor(9);
        auto c = make_test_extractor(10);
        const FeaturePyramid pa = a->extract(img);
        const FeaturePyramid pb = b->extract(img);
        const FeaturePyramid pc = c->extract(img);
        for (std::size_t l = 0; l < 4; ++l) CHECK(pa.levels[l].data == pb.levels[l].data);
        CHECK(pa.levels[0].data != pc.levels[0].data);
    }

    TEST_CASE("level means for seed 0 on an all-0.5 image match the goldens") {
        kernels::set_backend(kernels::Backend::Scalar);
        auto ex = make_test_extractor(0);
        const FeaturePyramid pyr = ex->extract(ImageBuffer::make(32, 32, 3, 0.5f));
        kernels::set_backend(kernels::Backend::Auto);
        for (std::size_t l = 0; l < 4; ++l) {
            const FeatureMap& m = pyr.levels[l];
            double mean = 0.0;
            for (float v : m.data) mean += v;
            mean /= static_cast<double>(m.data.size());
            CHECK(mean == doctest::Approx(kGoldenLevelMeans[l]).epsilon(1e-6));
        }
    }

    TEST_CASE("single-channel masks are replicated before extraction") {
        auto ex = make_test_extractor(0);
        const ImageBuffer mask = ImageBuffer::make(32, 32, 1, 1.0f);
        const ImageBuffer rgb = ImageBuffer::make(32, 32, 3, 1.0f);
        const FeaturePyramid pm = ex->extract(mask);
        const FeaturePyramid pr = ex->extract(rgb);
        for (std::size_t l = 0; l < 4; ++l) CHECK(pm.levels[l].data == pr.levels[l].data);
    }
}

TEST_SUITE("weight store") {
    TEST_CASE("write, read, write round-trips byte-identically") {
        const auto dir = std::filesystem::temp_directory_path() / "kfr_wtest";
        std::filesystem::create_directories(dir);
        const std::string p1 = (dir / "a.kfrw").string();
        const std::string p2 = (dir / "b.kfrw").string();

        const WeightStore w = make_test_weights(7, {8, 16, 32, 32}, false, true);
        w.save(p1);
        const WeightStore r = WeightStore::load(p1);
        r.save(p2);

        std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
        const std::string b1((std::istreambuf_iterator<char>(f1)),
                             std::istreambuf_iterator<char>());
        const std::string b2((std::istreambuf_iterator<char>(f2)),
                             std::istreambuf_iterator<char>());
        CHECK(b1.size() > 16);
        CHECK(b1 == b2);
        CHECK(r.size() == w.size());
    }

    TEST_CASE("missing and mis-shaped tensors raise typed errors") {
        WeightStore w;
        w.add("x", {2, 2}, {1, 2, 3, 4});
        CHECK_THROWS_AS(w.get("y"), MissingWeight);
        const std::array<std::uint32_t, 2> wrong = {2, 3};
        CHECK_THROWS_AS(w.get("x", wrong), ShapeMismatch);
        CHECK_THROWS_AS(w.add("x", {1}, {0.0f}), Error);
        CHECK_THROWS_AS(w.add("bad", {3}, {0.0f}), ShapeMismatch);
    }

    TEST_CASE("file extractor reads channel widths from tensor shapes") {
        const WeightStore w = make_test_weights(2, {8, 16, 32, 32}, false, true);
        auto ex = make_file_extractor(w);
        const std::array<int, 4> chans = ex->channels();
        CHECK(chans == std::array<int, 4>{8, 16, 32, 32});
        const FeaturePyramid pyr = ex->extract(ImageBuffer::make(32, 32, 3, 0.25f));
        CHECK(pyr.levels[3].height == 2);
        const WeightStore no_extractor = make_test_weights(2, {8, 16, 32, 32});
        CHECK_THROWS_AS(make_file_extractor(no_extractor), MissingWeight);
    }
}
