#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "kfr/metrics.hpp"
#include "oracles.hpp"

using namespace kfr;

namespace {

ImageBuffer quantized_image(std::mt19937& rng, int w, int h, int c, float max = 1.0f) {
    std::uniform_real_distribution<float> d(0.0f, max);
    ImageBuffer img = ImageBuffer::make(w, h, c);
    for (float& v : img.data) v = std::floor(d(rng) * 256.0f) / 256.0f;
    return img;
}

}  // namespace

TEST_SUITE("psnr") {
    TEST_CASE("identical images saturate to infinity") {
        std::mt19937 rng(80);
        const ImageBuffer a = quantized_image(rng, 8, 8, 3);
        CHECK(std::isinf(psnr(a, a)));
        CHECK(psnr(a, a) > 0);
    }

    TEST_CASE("dyadic constant offset matches the closed form to 1e-9 dB") {
        std::mt19937 rng(81);
        // offset 1/16 is exact in float on 1/256-quantized data
        const float c = 0.0625f;
        const ImageBuffer gt = quantized_image(rng, 12, 10, 3, 0.9f);
        ImageBuffer shifted = gt;
        for (float& v : shifted.data) v += c;
        const double want = 10.0 * std::log10(1.0 / (static_cast<double>(c) * c));
        CHECK(std::abs(psnr(shifted, gt) - want) < 1e-9);
    }

    TEST_CASE("offset of 10 gray levels lands near 28.13 dB") {
        const ImageBuffer gt = ImageBuffer::make(16, 16, 3, 0.25f);
        ImageBuffer shifted = gt;
        for (float& v : shifted.data) v += 10.0f / 255.0f;
        CHECK(psnr(shifted, gt) ==
              doctest::Approx(20.0 * std::log10(25.5)).epsilon(1e-6));
    }

    TEST_CASE("random pair matches the definition oracle") {
        std::mt19937 rng(82);
        const ImageBuffer a = quantized_image(rng, 9, 7, 3);
        const ImageBuffer b = quantized_image(rng, 9, 7, 3);
        double mse = 0.0;
        for (std::size_t i = 0; i < a.data.size(); ++i) {
            const double d = static_cast<double>(a.data[i]) - b.data[i];
            mse += d * d;
        }
        mse /= static_cast<double>(a.data.size());
        CHECK(std::abs(psnr(a, b) - 10.0 * std::log10(1.0 / mse)) < 1e-9);
        CHECK(psnr(a, b) == psnr(b, a));
    }

    TEST_CASE("strictly decreases with noise amplitude") {
        std::mt19937 rng(83);
        const ImageBuffer base = quantized_image(rng, 16, 16, 3, 0.5f);
        double prev = std::numeric_limits<double>::infinity();
        for (const float amp : {0.01f, 0.05f, 0.1f}) {
            std::mt19937 noise_rng(99);
            std::uniform_real_distribution<float> d(0.0f, amp);
            ImageBuffer noisy = base;
            for (float& v : noisy.data) v += d(noise_rng);
            const double p = psnr(noisy, base);
            CHECK(p < prev);
            prev = p;
        }
    }

    TEST_CASE("shape mismatch") {
        CHECK_THROWS_AS(psnr(ImageBuffer::make(4, 4, 3), ImageBuffer::make(4, 4, 1)),
                        ShapeMismatch);
    }
}

TEST_SUITE("ssim") {
    TEST_CASE("identical images give exactly one") {
        std::mt19937 rng(84);
        const ImageBuffer a = quantized_image(rng, 16, 16, 3);
        CHECK(ssim(a, a) == 1.0);
    }

    TEST_CASE("an image and its negative anticorrelate") {
        // strong zero-mean structure around 0.5
        ImageBuffer a = ImageBuffer::make(16, 16, 1);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                a.at(x, y, 0) = 0.5f + 0.4f * ((x + y) % 2 ? 1.0f : -1.0f);
        ImageBuffer b = a;
        for (float& v : b.data) v = 1.0f - v;
        CHECK(ssim(a, b) < 0.0);
    }

    TEST_CASE("gradient versus noisy copy matches the windowed oracle") {
        std::mt19937 rng(85);
        ImageBuffer a = ImageBuffer::make(16, 16, 3);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                for (int c = 0; c < 3; ++c)
                    a.at(x, y, c) = (x + 16.0f * y) / 512.0f + 0.1f * c;
        ImageBuffer b = a;
        std::uniform_real_distribution<float> d(-0.05f, 0.05f);
        for (float& v : b.data) v += d(rng);

        const double want = oracle::ssim_windowed(oracle::luma601(a), oracle::luma601(b),
                                                  16, 16, 11, 1.5, 0.01, 0.03);
        CHECK(std::abs(ssim(a, b) - want) < 1e-6);
        CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
        CHECK(ssim(a, b) >= -1.0);
        CHECK(ssim(a, b) <= 1.0);
    }

    TEST_CASE("stable under a shared constant shift") {
        std::mt19937 rng(86);
        ImageBuffer a = ImageBuffer::make(16, 16, 1);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) a.at(x, y, 0) = 0.3f + x * 0.02f;
        ImageBuffer b = a;
        std::uniform_real_distribution<float> d(-1e-3f, 1e-3f);
        for (float& v : b.data) v += d(rng);

        const double base = ssim(a, b);
        for (const float c : {0.05f, 0.1f}) {
            ImageBuffer ac = a, bc = b;
            for (float& v : ac.data) v += c;
            for (float& v : bc.data) v += c;
            CHECK(std::abs(ssim(ac, bc) - base) < 1e-6);
        }
    }

    TEST_CASE("images smaller than the window are rejected") {
        CHECK_THROWS_AS(ssim(ImageBuffer::make(8, 8, 1), ImageBuffer::make(8, 8, 1)),
                        TooSmall);
        CHECK_THROWS_AS(ssim(ImageBuffer::make(16, 16, 1), ImageBuffer::make(16, 8, 1)),
                        ShapeMismatch);
    }
}
