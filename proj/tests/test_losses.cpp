#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "kfr/losses.hpp"

using namespace kfr;

namespace {

ImageBuffer random_image(std::mt19937& rng, int w, int h, int c) {
    std::uniform_real_distribution<float> d(0.0f, 1.0f);
    ImageBuffer img = ImageBuffer::make(w, h, c);
    for (float& v : img.data) v = d(rng);
    return img;
}

// Values quantized to multiples of 1/256 make pooling sums exact in double.
ImageBuffer quantized_image(std::mt19937& rng, int w, int h, int c) {
    ImageBuffer img = random_image(rng, w, h, c);
    for (float& v : img.data) v = std::floor(v * 256.0f) / 256.0f;
    return img;
}

FeatureMap random_map(std::mt19937& rng, int c, int h, int w) {
    std::uniform_real_distribution<float> d(-1.0f, 1.0f);
    FeatureMap m = FeatureMap::make(c, h, w);
    for (float& v : m.data) v = d(rng);
    return m;
}

FeaturePyramid random_pyramid(std::mt19937& rng, int base = 16) {
    FeaturePyramid p;
    const int chans[4] = {2, 3, 4, 4};
    for (int l = 0; l < 4; ++l)
        p.levels[static_cast<std::size_t>(l)] =
            random_map(rng, chans[l], base >> l, base >> l);
    return p;
}

double scalar_level_sq(const FeatureMap& a, const FeatureMap& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        s += d * d;
    }
    return s / static_cast<double>(a.data.size());
}

}  // namespace

TEST_SUITE("mse_loss") {
    TEST_CASE("identical images give zero loss and zero gradient") {
        std::mt19937 rng(60);
        const ImageBuffer a = random_image(rng, 4, 4, 3);
        const MseResult r = mse_loss(a, a);
        CHECK(r.loss == 0.0);
        for (float g : r.grad) CHECK(g == 0.0f);
    }

    TEST_CASE("constant offset has closed-form loss") {
        std::mt19937 rng(61);
        const ImageBuffer gt = quantized_image(rng, 6, 5, 3);
        ImageBuffer restored = gt;
        for (float& v : restored.data) v += 0.1f;
        const MseResult r = mse_loss(restored, gt);
        CHECK(r.loss == doctest::Approx(0.01).epsilon(1e-6));
    }

    TEST_CASE("analytic gradient matches central finite differences") {
        std::mt19937 rng(62);
        for (int rep = 0; rep < 10; ++rep) {
            const ImageBuffer gt = random_image(rng, 4, 4, 3);
            const ImageBuffer restored = random_image(rng, 4, 4, 3);
            const MseResult r = mse_loss(restored, gt);
            std::uniform_int_distribution<std::size_t> pick(0, restored.data.size() - 1);
            for (int k = 0; k < 5; ++k) {
                const std::size_t i = pick(rng);
                const float h = 1e-4f;
                ImageBuffer plus = restored, minus = restored;
                plus.data[i] = restored.data[i] + h;
                minus.data[i] = restored.data[i] - h;
                // the effective step is the float-rounded difference
                const double eff = static_cast<double>(plus.data[i]) - minus.data[i];
                const double fd =
                    (mse_loss(plus, gt).loss - mse_loss(minus, gt).loss) / eff;
                CHECK(std::abs(fd - r.grad[i]) <=
                      1e-5 * std::max(1e-8, std::abs(fd)));
            }
        }
    }

    TEST_CASE("shape mismatch") {
        CHECK_THROWS_AS(mse_loss(ImageBuffer::make(2, 2, 3), ImageBuffer::make(2, 3, 3)),
                        ShapeMismatch);
    }
}

TEST_SUITE("perceptual_loss") {
    TEST_CASE("identical pyramids give zero") {
        std::mt19937 rng(63);
        const FeaturePyramid p = random_pyramid(rng);
        CHECK(perceptual_loss(p, p) == 0.0);
    }

    TEST_CASE("one level offset by one contributes exactly one") {
        std::mt19937 rng(64);
        FeaturePyramid a = random_pyramid(rng);
        // quantize so that +1 is exact in float
        for (auto& level : a.levels)
            for (float& v : level.data) v = std::floor(v * 128.0f) / 128.0f;
        FeaturePyramid b = a;
        for (float& v : b.levels[2].data) v += 1.0f;
        CHECK(perceptual_loss(a, b) == 1.0);
    }

    TEST_CASE("random pyramids match the four-term scalar sum") {
        std::mt19937 rng(65);
        const FeaturePyramid a = random_pyramid(rng);
        const FeaturePyramid b = random_pyramid(rng);
        double want = 0.0;
        for (int l = 0; l < 4; ++l)
            want += scalar_level_sq(a.levels[static_cast<std::size_t>(l)],
                                    b.levels[static_cast<std::size_t>(l)]);
        CHECK(perceptual_loss(a, b) == doctest::Approx(want).epsilon(1e-12));
    }

    TEST_CASE("level shape mismatch") {
        std::mt19937 rng(66);
        const FeaturePyramid a = random_pyramid(rng, 16);
        const FeaturePyramid b = random_pyramid(rng, 32);
        CHECK_THROWS_AS(perceptual_loss(a, b), PyramidMismatch);
    }
}

TEST_SUITE("gram") {
    TEST_CASE("single channel gives the squared sum") {
        FeatureMap f = FeatureMap::make(1, 2, 2);
        f.data = {1.0f, 2.0f, 3.0f, 4.0f};
        const GramMatrix g = gram(f);
        REQUIRE(g.channels == 1);
        CHECK(g.at(0, 0) == doctest::Approx(30.0));
    }

    TEST_CASE("orthogonal channels give a diagonal gram") {
        FeatureMap f = FeatureMap::make(2, 1, 4);
        f.data = {1.0f, 1.0f, 0.0f, 0.0f, 0.0f, 0.0f, 2.0f, 2.0f};
        const GramMatrix g = gram(f);
        CHECK(g.at(0, 0) == doctest::Approx(2.0));
        CHECK(g.at(1, 1) == doctest::Approx(8.0));
        CHECK(g.at(0, 1) == 0.0);
        CHECK(g.at(1, 0) == 0.0);
    }

    TEST_CASE("random map matches the triple-loop oracle") {
        std::mt19937 rng(67);
        const FeatureMap f = random_map(rng, 3, 2, 2);
        const GramMatrix g = gram(f);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double want = 0.0;
                for (std::size_t s = 0; s < f.plane_size(); ++s)
                    want += static_cast<double>(f.plane(i)[s]) * f.plane(j)[s];
                CHECK(g.at(i, j) == doctest::Approx(want).epsilon(1e-12));
            }
    }
}

TEST_SUITE("style_loss") {
    TEST_CASE("identical pyramids give zero") {
        std::mt19937 rng(68);
        const FeaturePyramid p = random_pyramid(rng);
        CHECK(style_loss(p, p) == 0.0);
    }

    TEST_CASE("channel permutation is detected and matches the oracle") {
        std::mt19937 rng(69);
        FeaturePyramid a = random_pyramid(rng);
        FeaturePyramid b = a;
        // swap two channels at level 1
        FeatureMap& m = b.levels[1];
        std::vector<float> tmp(m.plane(0), m.plane(0) + m.plane_size());
        std::copy(m.plane(1), m.plane(1) + m.plane_size(), m.plane(0));
        std::copy(tmp.begin(), tmp.end(), m.plane(1));

        double want = 0.0;
        for (int l = 0; l < 4; ++l) {
            const GramMatrix ga = gram(a.levels[static_cast<std::size_t>(l)]);
            const GramMatrix gb = gram(b.levels[static_cast<std::size_t>(l)]);
            double frob = 0.0;
            for (std::size_t i = 0; i < ga.data.size(); ++i) {
                const double d = ga.data[i] - gb.data[i];
                frob += d * d;
            }
            want += frob / static_cast<double>(a.levels[static_cast<std::size_t>(l)]
                                                   .data.size());
        }
        const double got = style_loss(a, b);
        CHECK(got > 0.0);
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }

    TEST_CASE("degree-4 homogeneity against a zero pyramid") {
        std::mt19937 rng(70);
        const FeaturePyramid f = random_pyramid(rng);
        FeaturePyramid zero = f;
        for (auto& level : zero.levels) std::fill(level.data.begin(), level.data.end(), 0.0f);
        FeaturePyramid doubled = f;
        for (auto& level : doubled.levels)
            for (float& v : level.data) v *= 2.0f;
        CHECK(style_loss(doubled, zero) ==
              doctest::Approx(16.0 * style_loss(f, zero)).epsilon(1e-12));
    }

    TEST_CASE("invariant under a common spatial permutation") {
        std::mt19937 rng(71);
        FeaturePyramid a = random_pyramid(rng);
        FeaturePyramid zero = a;
        for (auto& level : zero.levels) std::fill(level.data.begin(), level.data.end(), 0.0f);
        FeaturePyramid shuffled = a;
        for (auto& level : shuffled.levels) {
            std::vector<std::size_t> perm(level.plane_size());
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            for (int c = 0; c < level.channels; ++c) {
                std::vector<float> orig(level.plane(c), level.plane(c) + level.plane_size());
                for (std::size_t s = 0; s < perm.size(); ++s)
                    level.plane(c)[s] = orig[perm[s]];
            }
        }
        CHECK(style_loss(shuffled, zero) ==
              doctest::Approx(style_loss(a, zero)).epsilon(1e-9));
    }
}

TEST_SUITE("hinge losses") {
    ScaleScores scores_of(std::initializer_list<float> v) {
        ScaleScores s(4);
        for (auto& scale : s) scale.assign(v);
        return s;
    }

    TEST_CASE("saturated discriminator scores give zero loss") {
        ScaleScores real(4), fake(4);
        for (auto& v : real) v = {1.0f, 1.5f, 2.0f};
        for (auto& v : fake) v = {-1.0f, -1.25f, -3.0f};
        CHECK(hinge_d_loss(real, fake) == 0.0);
    }

    TEST_CASE("zero scores contribute two per scale") {
        const ScaleScores zeros = scores_of({0.0f});
        CHECK(hinge_d_loss(zeros, zeros) == doctest::Approx(8.0));  // 2 per scale
        // single-scale slice: exactly 2
        const HingePair p = hinge_single_scale({0.0f}, {0.0f});
        CHECK(p.d_loss == doctest::Approx(2.0));
    }

    TEST_CASE("random scores match the elementwise oracle") {
        std::mt19937 rng(72);
        std::uniform_real_distribution<float> d(-2.0f, 2.0f);
        ScaleScores real(4), fake(4);
        for (int r = 0; r < 4; ++r) {
            real[static_cast<std::size_t>(r)].resize(13);
            fake[static_cast<std::size_t>(r)].resize(13);
            for (auto& v : real[static_cast<std::size_t>(r)]) v = d(rng);
            for (auto& v : fake[static_cast<std::size_t>(r)]) v = d(rng);
        }
        double want = 0.0;
        for (int r = 0; r < 4; ++r) {
            double tr = 0.0, tf = 0.0;
            for (float v : real[static_cast<std::size_t>(r)])
                tr += std::min(0.0, -1.0 + static_cast<double>(v));
            for (float v : fake[static_cast<std::size_t>(r)])
                tf += std::min(0.0, -1.0 - static_cast<double>(v));
            want -= tr / 13.0 + tf / 13.0;
        }
        CHECK(hinge_d_loss(real, fake) == doctest::Approx(want).epsilon(1e-12));
        CHECK(hinge_d_loss(real, fake) >= 0.0);
    }

    TEST_CASE("generator loss weights the scale means") {
        const LossWeights w;
        ScaleScores fake(4);
        for (auto& v : fake) v = {0.0f};
        CHECK(hinge_g_loss(fake, w) == 0.0);

        fake[0] = {1.0f};  // score 1 at scale r=1 only
        const HingeGResult r = hinge_g_terms(fake, w);
        CHECK(r.per_scale[0] == doctest::Approx(-4.0));
        CHECK(r.total == doctest::Approx(-4.0));
    }

    TEST_CASE("generator loss matches the weighted-sum oracle") {
        std::mt19937 rng(73);
        std::uniform_real_distribution<float> d(-2.0f, 2.0f);
        LossWeights w;
        ScaleScores fake(4);
        double want = 0.0;
        for (int r = 0; r < 4; ++r) {
            fake[static_cast<std::size_t>(r)].resize(9);
            double mean = 0.0;
            for (auto& v : fake[static_cast<std::size_t>(r)]) {
                v = d(rng);
                mean += v;
            }
            want -= w.adv_per_scale[static_cast<std::size_t>(r)] * (mean / 9.0);
        }
        CHECK(hinge_g_loss(fake, w) == doctest::Approx(want).epsilon(1e-12));
    }

    TEST_CASE("single-scale specialization equals the r=1 slice with unit weight") {
        std::mt19937 rng(74);
        std::uniform_real_distribution<float> d(-2.0f, 2.0f);
        std::vector<float> real(7), fake(7);
        for (auto& v : real) v = d(rng);
        for (auto& v : fake) v = d(rng);

        ScaleScores mreal(4, real), mfake(4, fake);
        LossWeights w;
        w.adv_per_scale = {1.0, 0.0, 0.0, 0.0};
        const HingePair p = hinge_single_scale(real, fake);
        CHECK(p.g_loss == doctest::Approx(hinge_g_loss(mfake, w)).epsilon(1e-12));
        CHECK(p.d_loss ==
              doctest::Approx(hinge_d_loss(mreal, mfake) / 4.0).epsilon(1e-12));
    }

    TEST_CASE("wrong scale count is rejected") {
        ScaleScores three(3, {0.0f});
        CHECK_THROWS_AS(hinge_d_loss(three, three), ScaleCountMismatch);
        CHECK_THROWS_AS(hinge_g_loss(three, LossWeights{}), ScaleCountMismatch);
    }
}

TEST_SUITE("total_loss") {
    TEST_CASE("zero parts give zero total") {
        const LossBreakdown b = total_loss(LossParts{}, LossWeights{});
        CHECK(b.total == 0.0);
    }

    TEST_CASE("unit mse with the tuned weights gives 300") {
        LossParts parts;
        parts.mse = 1.0;
        const LossBreakdown b = total_loss(parts, LossWeights{});
        CHECK(b.total == doctest::Approx(300.0));
    }

    TEST_CASE("random parts match the dot-product oracle and stay linear") {
        std::mt19937 rng(75);
        std::uniform_real_distribution<double> d(0.0, 2.0);
        LossWeights w;
        for (int rep = 0; rep < 20; ++rep) {
            LossParts p;
            p.mse = d(rng);
            p.perceptual = d(rng);
            p.style = d(rng);
            p.adversarial_g = d(rng) - 1.0;
            const LossBreakdown b = total_loss(p, w);
            const double want = w.mse * p.mse + w.perceptual * p.perceptual +
                                w.style * p.style + w.adversarial * p.adversarial_g;
            CHECK(b.total == doctest::Approx(want).epsilon(1e-12));

            // linearity in the mse part
            LossParts p2 = p;
            p2.mse += 0.5;
            CHECK(total_loss(p2, w).total - b.total ==
                  doctest::Approx(0.5 * w.mse).epsilon(1e-9));
        }
    }

    TEST_CASE("non-finite parts are rejected") {
        LossParts p;
        p.style = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(total_loss(p, LossWeights{}), NonFiniteInput);
        LossParts q;
        q.adversarial_g = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(total_loss(q, LossWeights{}), NonFiniteInput);
    }
}

TEST_SUITE("downsample_avg") {
    TEST_CASE("factor composition is exact on dyadic data") {
        std::mt19937 rng(76);
        const ImageBuffer img = quantized_image(rng, 16, 16, 3);
        const ImageBuffer two = downsample_avg(img, 2);
        const ImageBuffer twice = downsample_avg(two, 2);
        const ImageBuffer four = downsample_avg(img, 4);
        CHECK(twice.data == four.data);
    }

    TEST_CASE("constant images stay constant through pooling") {
        const ImageBuffer img = ImageBuffer::make(8, 8, 3, 0.625f);
        for (const int f : {1, 2, 4, 8}) {
            const ImageBuffer out = downsample_avg(img, f);
            CHECK(out.width == 8 / f);
            for (float v : out.data) CHECK(v == 0.625f);
        }
    }

    TEST_CASE("indivisible dims are rejected") {
        CHECK_THROWS_AS(downsample_avg(ImageBuffer::make(9, 8, 1), 2), ShapeMismatch);
    }
}
