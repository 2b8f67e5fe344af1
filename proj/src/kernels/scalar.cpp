#include "kfr/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>

// Reference kernels. These define the semantics the SIMD variants must
// reproduce; keep them straightforward.

namespace kfr::kernels {
namespace {

void conv2d_scalar(const ConvArgs& a) {
    for (int oc = 0; oc < a.out_c; ++oc) {
        const float b = a.bias ? a.bias[oc] : 0.0f;
        float* out_plane = a.output + static_cast<std::size_t>(oc) * a.out_h * a.out_w;
        for (int oy = 0; oy < a.out_h; ++oy) {
            for (int ox = 0; ox < a.out_w; ++ox) {
                float acc = b;
                for (int ic = 0; ic < a.in_c; ++ic) {
                    const float* in_plane =
                        a.input + static_cast<std::size_t>(ic) * a.in_h * a.in_w;
                    const float* k = a.kernel +
                        ((static_cast<std::size_t>(oc) * a.in_c + ic) * a.kh) * a.kw;
                    for (int ky = 0; ky < a.kh; ++ky) {
                        const int iy = oy * a.stride - a.pad + ky * a.dilation;
                        if (iy < 0 || iy >= a.in_h) continue;
                        for (int kx = 0; kx < a.kw; ++kx) {
                            const int ix = ox * a.stride - a.pad + kx * a.dilation;
                            if (ix < 0 || ix >= a.in_w) continue;
                            acc += k[ky * a.kw + kx] * in_plane[iy * a.in_w + ix];
                        }
                    }
                }
                out_plane[oy * a.out_w + ox] = acc;
            }
        }
    }
}

void leaky_relu_scalar(float* out, const float* in, std::size_t n, float slope) {
    for (std::size_t i = 0; i < n; ++i) {
        const float x = in[i];
        out[i] = x > 0.0f ? x : slope * x;
    }
}

void affine_mod_scalar(float* out, const float* x, const float* alpha,
                       const float* beta, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = alpha[i] * x[i] + beta[i];
}

void blend_mask_scalar(float* out, const float* restored, const float* guide,
                       const float* mask, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const float r = restored[i];
        const float g = guide[i];
        const float v = r + mask[i] * (g - r);
        const float lo = std::min(r, g);
        const float hi = std::max(r, g);
        out[i] = std::min(std::max(v, lo), hi);
    }
}

void add_clamp01_scalar(float* out, const float* base, const float* delta,
                        std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const float v = base[i] + delta[i];
        out[i] = std::min(std::max(v, 0.0f), 1.0f);
    }
}

void normalize_affine_scalar(float* out, const float* in, std::size_t n,
                             float mu_in, float scale, float mu_out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = (in[i] - mu_in) * scale + mu_out;
}

double sum_scalar(const float* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]);
    return s;
}

double sum_sq_scalar(const float* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a[i];
        s += x * x;
    }
    return s;
}

double dot_scalar(const float* a, const float* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

double sum_sq_diff_scalar(const float* a, const float* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return s;
}

void bilinear_sample_scalar(float* out, const float* src, int src_w, int src_h,
                            int channels, const double* xs, const double* ys,
                            int n) {
    for (int i = 0; i < n; ++i) {
        double x = xs[i];
        double y = ys[i];
        // clamp-to-edge: positions outside the image sample the border pixel
        if (x < 0.0) x = 0.0;
        if (x > src_w - 1) x = src_w - 1;
        if (y < 0.0) y = 0.0;
        if (y > src_h - 1) y = src_h - 1;
        const int x0 = static_cast<int>(x);
        const int y0 = static_cast<int>(y);
        const int x1 = std::min(x0 + 1, src_w - 1);
        const int y1 = std::min(y0 + 1, src_h - 1);
        const double fx = x - x0;
        const double fy = y - y0;
        const float* p00 = src + (static_cast<std::size_t>(y0) * src_w + x0) * channels;
        const float* p01 = src + (static_cast<std::size_t>(y0) * src_w + x1) * channels;
        const float* p10 = src + (static_cast<std::size_t>(y1) * src_w + x0) * channels;
        const float* p11 = src + (static_cast<std::size_t>(y1) * src_w + x1) * channels;
        for (int c = 0; c < channels; ++c) {
            const double top = (1.0 - fx) * p00[c] + fx * p01[c];
            const double bot = (1.0 - fx) * p10[c] + fx * p11[c];
            out[static_cast<std::size_t>(i) * channels + c] =
                static_cast<float>((1.0 - fy) * top + fy * bot);
        }
    }
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops = {
        "scalar",
        conv2d_scalar,
        leaky_relu_scalar,
        affine_mod_scalar,
        blend_mask_scalar,
        add_clamp01_scalar,
        normalize_affine_scalar,
        sum_scalar,
        sum_sq_scalar,
        dot_scalar,
        sum_sq_diff_scalar,
        bilinear_sample_scalar,
    };
    return ops;
}

}  // namespace kfr::kernels
