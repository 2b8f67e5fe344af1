#include "kfr/kernels/kernels.hpp"

// NEON variants for aarch64. Mirrors the AVX2 file with 4-wide float lanes;
// per-output operation order matches the scalar reference (no fused
// multiply-add), so elementwise kernels and conv2d are bit-identical to
// scalar. Bilinear sampling has no gather on NEON and stays scalar.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <algorithm>
#include <cstddef>

namespace kfr::kernels {
namespace {

inline float conv_pixel(const ConvArgs& a, int oc, int oy, int ox) {
    float acc = a.bias ? a.bias[oc] : 0.0f;
    for (int ic = 0; ic < a.in_c; ++ic) {
        const float* in_plane = a.input + static_cast<std::size_t>(ic) * a.in_h * a.in_w;
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
    return acc;
}

void conv2d_neon(const ConvArgs& a) {
    if (a.stride != 1) {
        scalar_ops().conv2d(a);
        return;
    }
    const int x_lo = std::min(a.pad, a.out_w);
    const int x_hi = std::max(x_lo, std::min(a.out_w, a.in_w + a.pad - (a.kw - 1) * a.dilation));
    for (int oc = 0; oc < a.out_c; ++oc) {
        const float b = a.bias ? a.bias[oc] : 0.0f;
        float* out_plane = a.output + static_cast<std::size_t>(oc) * a.out_h * a.out_w;
        for (int oy = 0; oy < a.out_h; ++oy) {
            float* out_row = out_plane + static_cast<std::size_t>(oy) * a.out_w;
            int ox = 0;
            for (; ox < x_lo; ++ox) out_row[ox] = conv_pixel(a, oc, oy, ox);
            for (; ox + 4 <= x_hi; ox += 4) {
                float32x4_t acc = vdupq_n_f32(b);
                for (int ic = 0; ic < a.in_c; ++ic) {
                    const float* in_plane =
                        a.input + static_cast<std::size_t>(ic) * a.in_h * a.in_w;
                    const float* k = a.kernel +
                        ((static_cast<std::size_t>(oc) * a.in_c + ic) * a.kh) * a.kw;
                    for (int ky = 0; ky < a.kh; ++ky) {
                        const int iy = oy - a.pad + ky * a.dilation;
                        if (iy < 0 || iy >= a.in_h) continue;
                        const float* in_row = in_plane + static_cast<std::size_t>(iy) * a.in_w;
                        for (int kx = 0; kx < a.kw; ++kx) {
                            const int ix = ox - a.pad + kx * a.dilation;
                            const float32x4_t w = vdupq_n_f32(k[ky * a.kw + kx]);
                            const float32x4_t v = vld1q_f32(in_row + ix);
                            acc = vaddq_f32(acc, vmulq_f32(w, v));
                        }
                    }
                }
                vst1q_f32(out_row + ox, acc);
            }
            for (; ox < a.out_w; ++ox) out_row[ox] = conv_pixel(a, oc, oy, ox);
        }
    }
}

void leaky_relu_neon(float* out, const float* in, std::size_t n, float slope) {
    const float32x4_t s = vdupq_n_f32(slope);
    const float32x4_t zero = vdupq_n_f32(0.0f);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t x = vld1q_f32(in + i);
        const float32x4_t neg = vmulq_f32(s, x);
        const uint32x4_t gt = vcgtq_f32(x, zero);
        vst1q_f32(out + i, vbslq_f32(gt, x, neg));
    }
    for (; i < n; ++i) {
        const float x = in[i];
        out[i] = x > 0.0f ? x : slope * x;
    }
}

void affine_mod_neon(float* out, const float* x, const float* alpha,
                     const float* beta, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t v = vmulq_f32(vld1q_f32(alpha + i), vld1q_f32(x + i));
        vst1q_f32(out + i, vaddq_f32(v, vld1q_f32(beta + i)));
    }
    for (; i < n; ++i) out[i] = alpha[i] * x[i] + beta[i];
}

void blend_mask_neon(float* out, const float* restored, const float* guide,
                     const float* mask, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t r = vld1q_f32(restored + i);
        const float32x4_t g = vld1q_f32(guide + i);
        const float32x4_t m = vld1q_f32(mask + i);
        const float32x4_t v = vaddq_f32(r, vmulq_f32(m, vsubq_f32(g, r)));
        const float32x4_t lo = vminq_f32(r, g);
        const float32x4_t hi = vmaxq_f32(r, g);
        vst1q_f32(out + i, vminq_f32(vmaxq_f32(v, lo), hi));
    }
    for (; i < n; ++i) {
        const float r = restored[i];
        const float g = guide[i];
        const float v = r + mask[i] * (g - r);
        out[i] = std::min(std::max(v, std::min(r, g)), std::max(r, g));
    }
}

void add_clamp01_neon(float* out, const float* base, const float* delta,
                      std::size_t n) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    const float32x4_t one = vdupq_n_f32(1.0f);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t v = vaddq_f32(vld1q_f32(base + i), vld1q_f32(delta + i));
        vst1q_f32(out + i, vminq_f32(vmaxq_f32(v, zero), one));
    }
    for (; i < n; ++i) {
        const float v = base[i] + delta[i];
        out[i] = std::min(std::max(v, 0.0f), 1.0f);
    }
}

void normalize_affine_neon(float* out, const float* in, std::size_t n,
                           float mu_in, float scale, float mu_out) {
    const float32x4_t m_in = vdupq_n_f32(mu_in);
    const float32x4_t s = vdupq_n_f32(scale);
    const float32x4_t m_out = vdupq_n_f32(mu_out);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t centered = vsubq_f32(vld1q_f32(in + i), m_in);
        vst1q_f32(out + i, vaddq_f32(vmulq_f32(centered, s), m_out));
    }
    for (; i < n; ++i) out[i] = (in[i] - mu_in) * scale + mu_out;
}

inline double hsum(float64x2_t v) { return vgetq_lane_f64(v, 0) + vgetq_lane_f64(v, 1); }

double sum_neon(const float* a, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t x = vld1q_f32(a + i);
        acc0 = vaddq_f64(acc0, vcvt_f64_f32(vget_low_f32(x)));
        acc1 = vaddq_f64(acc1, vcvt_high_f64_f32(x));
    }
    double s = hsum(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) s += static_cast<double>(a[i]);
    return s;
}

double sum_sq_neon(const float* a, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t v = vld1q_f32(a + i);
        const float64x2_t x = vcvt_f64_f32(vget_low_f32(v));
        const float64x2_t y = vcvt_high_f64_f32(v);
        acc0 = vaddq_f64(acc0, vmulq_f64(x, x));
        acc1 = vaddq_f64(acc1, vmulq_f64(y, y));
    }
    double s = hsum(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) {
        const double x = a[i];
        s += x * x;
    }
    return s;
}

double dot_neon(const float* a, const float* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t va = vld1q_f32(a + i);
        const float32x4_t vb = vld1q_f32(b + i);
        acc0 = vaddq_f64(acc0, vmulq_f64(vcvt_f64_f32(vget_low_f32(va)),
                                         vcvt_f64_f32(vget_low_f32(vb))));
        acc1 = vaddq_f64(acc1, vmulq_f64(vcvt_high_f64_f32(va), vcvt_high_f64_f32(vb)));
    }
    double s = hsum(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

double sum_sq_diff_neon(const float* a, const float* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t va = vld1q_f32(a + i);
        const float32x4_t vb = vld1q_f32(b + i);
        const float64x2_t d0 = vsubq_f64(vcvt_f64_f32(vget_low_f32(va)),
                                         vcvt_f64_f32(vget_low_f32(vb)));
        const float64x2_t d1 = vsubq_f64(vcvt_high_f64_f32(va), vcvt_high_f64_f32(vb));
        acc0 = vaddq_f64(acc0, vmulq_f64(d0, d0));
        acc1 = vaddq_f64(acc1, vmulq_f64(d1, d1));
    }
    double s = hsum(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return s;
}

void bilinear_sample_neon(float* out, const float* src, int src_w, int src_h,
                          int channels, const double* xs, const double* ys,
                          int n) {
    scalar_ops().bilinear_sample(out, src, src_w, src_h, channels, xs, ys, n);
}

}  // namespace

const Ops* neon_ops() {
    static const Ops ops = {
        "neon",
        conv2d_neon,
        leaky_relu_neon,
        affine_mod_neon,
        blend_mask_neon,
        add_clamp01_neon,
        normalize_affine_neon,
        sum_neon,
        sum_sq_neon,
        dot_neon,
        sum_sq_diff_neon,
        bilinear_sample_neon,
    };
    return &ops;
}

}  // namespace kfr::kernels

#else

namespace kfr::kernels {
const Ops* neon_ops() { return nullptr; }
}  // namespace kfr::kernels

#endif
