#include "kfr/metrics.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "kfr/errors.hpp"
#include "kfr/kernels/kernels.hpp"

namespace kfr {

namespace {

std::vector<double> to_luma(const ImageBuffer& img) {
    std::vector<double> out(img.pixel_count());
    if (img.channels == 1) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.data[i];
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const float* p = img.data.data() + i * img.channels;
            out[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
        }
    }
    return out;
}

// Separable valid-mode Gaussian filter; result has (h-win+1) x (w-win+1)
// entries.
std::vector<double> gauss_valid(const std::vector<double>& img, int w, int h,
                                const std::vector<double>& taps) {
    const int win = static_cast<int>(taps.size());
    const int ow = w - win + 1;
    const int oh = h - win + 1;
    std::vector<double> rows(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int t = 0; t < win; ++t) s += taps[t] * img[static_cast<std::size_t>(y) * w + x + t];
            rows[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int t = 0; t < win; ++t) s += taps[t] * rows[static_cast<std::size_t>(y + t) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    return out;
}

}  // namespace

double psnr(const ImageBuffer& a, const ImageBuffer& b, double max_val) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw ShapeMismatch("psnr: image shapes differ");
    if (a.data.empty()) throw ShapeMismatch("psnr: empty images");
    const double mse =
        kernels::active().sum_sq_diff(a.data.data(), b.data.data(), a.data.size()) /
        static_cast<double>(a.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(max_val * max_val / mse);
}

double ssim(const ImageBuffer& a, const ImageBuffer& b, int window, double sigma,
            double k1, double k2) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw ShapeMismatch("ssim: image shapes differ");
    if (a.width < window || a.height < window)
        throw TooSmall("ssim: image smaller than the window");

    const std::vector<double> la = to_luma(a);
    const std::vector<double> lb = to_luma(b);

    std::vector<double> taps(static_cast<std::size_t>(window));
    const double half = (window - 1) / 2.0;
    double tsum = 0.0;
    for (int i = 0; i < window; ++i) {
        const double d = i - half;
        taps[static_cast<std::size_t>(i)] = std::exp(-(d * d) / (2.0 * sigma * sigma));
        tsum += taps[static_cast<std::size_t>(i)];
    }
    for (double& t : taps) t /= tsum;

    const std::size_t n = la.size();
    std::vector<double> aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        aa[i] = la[i] * la[i];
        bb[i] = lb[i] * lb[i];
        ab[i] = la[i] * lb[i];
    }
    const int w = a.width, h = a.height;
    const std::vector<double> mu_a = gauss_valid(la, w, h, taps);
    const std::vector<double> mu_b = gauss_valid(lb, w, h, taps);
    const std::vector<double> m_aa = gauss_valid(aa, w, h, taps);
    const std::vector<double> m_bb = gauss_valid(bb, w, h, taps);
    const std::vector<double> m_ab = gauss_valid(ab, w, h, taps);

    const double c1 = k1 * k1;  // (k1 * L)^2 with L = 1
    const double c2 = k2 * k2;
    double total = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double va = m_aa[i] - mu_a[i] * mu_a[i];
        const double vb = m_bb[i] - mu_b[i] * mu_b[i];
        const double cov = m_ab[i] - mu_a[i] * mu_b[i];
        const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
        const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
        total += num / den;
    }
    return total / static_cast<double>(mu_a.size());
}

}  // namespace kfr
