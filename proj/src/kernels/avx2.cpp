#include "kfr/kernels/kernels.hpp"

// AVX2 variants. Elementwise kernels and conv2d vectorize across independent
// outputs while keeping each output's operation sequence identical to the
// scalar reference (mul followed by add, no FMA contraction), so their
// results are bit-identical to scalar.cpp. Reductions use 4 double lanes and
// agree with scalar only up to accumulation-order rounding.

#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__)
#define KFR_HAVE_AVX2_BUILD 1
#else
#define KFR_HAVE_AVX2_BUILD 0
#endif

#if KFR_HAVE_AVX2_BUILD

#include <immintrin.h>

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

void conv2d_avx2(const ConvArgs& a) {
    if (a.stride != 1) {
        scalar_ops().conv2d(a);
        return;
    }
    // Columns whose taps never leave the input: ox in [x_lo, x_hi).
    const int x_lo = std::min(a.pad, a.out_w);
    const int x_hi = std::max(x_lo, std::min(a.out_w, a.in_w + a.pad - (a.kw - 1) * a.dilation));
    for (int oc = 0; oc < a.out_c; ++oc) {
        const float b = a.bias ? a.bias[oc] : 0.0f;
        float* out_plane = a.output + static_cast<std::size_t>(oc) * a.out_h * a.out_w;
        for (int oy = 0; oy < a.out_h; ++oy) {
            float* out_row = out_plane + static_cast<std::size_t>(oy) * a.out_w;
            int ox = 0;
            for (; ox < x_lo; ++ox) out_row[ox] = conv_pixel(a, oc, oy, ox);
            for (; ox + 8 <= x_hi; ox += 8) {
                __m256 acc = _mm256_set1_ps(b);
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
                            const __m256 w = _mm256_set1_ps(k[ky * a.kw + kx]);
                            const __m256 v = _mm256_loadu_ps(in_row + ix);
                            acc = _mm256_add_ps(acc, _mm256_mul_ps(w, v));
                        }
                    }
                }
                _mm256_storeu_ps(out_row + ox, acc);
            }
            for (; ox < a.out_w; ++ox) out_row[ox] = conv_pixel(a, oc, oy, ox);
        }
    }
}

void leaky_relu_avx2(float* out, const float* in, std::size_t n, float slope) {
    const __m256 s = _mm256_set1_ps(slope);
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 x = _mm256_loadu_ps(in + i);
        const __m256 neg = _mm256_mul_ps(s, x);
        const __m256 gt = _mm256_cmp_ps(x, zero, _CMP_GT_OQ);
        _mm256_storeu_ps(out + i, _mm256_blendv_ps(neg, x, gt));
    }
    for (; i < n; ++i) {
        const float x = in[i];
        out[i] = x > 0.0f ? x : slope * x;
    }
}

void affine_mod_avx2(float* out, const float* x, const float* alpha,
                     const float* beta, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_mul_ps(_mm256_loadu_ps(alpha + i), _mm256_loadu_ps(x + i));
        _mm256_storeu_ps(out + i, _mm256_add_ps(v, _mm256_loadu_ps(beta + i)));
    }
    for (; i < n; ++i) out[i] = alpha[i] * x[i] + beta[i];
}

void blend_mask_avx2(float* out, const float* restored, const float* guide,
                     const float* mask, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 r = _mm256_loadu_ps(restored + i);
        const __m256 g = _mm256_loadu_ps(guide + i);
        const __m256 m = _mm256_loadu_ps(mask + i);
        const __m256 v = _mm256_add_ps(r, _mm256_mul_ps(m, _mm256_sub_ps(g, r)));
        const __m256 lo = _mm256_min_ps(r, g);
        const __m256 hi = _mm256_max_ps(r, g);
        _mm256_storeu_ps(out + i, _mm256_min_ps(_mm256_max_ps(v, lo), hi));
    }
    for (; i < n; ++i) {
        const float r = restored[i];
        const float g = guide[i];
        const float v = r + mask[i] * (g - r);
        out[i] = std::min(std::max(v, std::min(r, g)), std::max(r, g));
    }
}

void add_clamp01_avx2(float* out, const float* base, const float* delta,
                      std::size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    const __m256 one = _mm256_set1_ps(1.0f);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_add_ps(_mm256_loadu_ps(base + i), _mm256_loadu_ps(delta + i));
        _mm256_storeu_ps(out + i, _mm256_min_ps(_mm256_max_ps(v, zero), one));
    }
    for (; i < n; ++i) {
        const float v = base[i] + delta[i];
        out[i] = std::min(std::max(v, 0.0f), 1.0f);
    }
}

void normalize_affine_avx2(float* out, const float* in, std::size_t n,
                           float mu_in, float scale, float mu_out) {
    const __m256 m_in = _mm256_set1_ps(mu_in);
    const __m256 s = _mm256_set1_ps(scale);
    const __m256 m_out = _mm256_set1_ps(mu_out);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 centered = _mm256_sub_ps(_mm256_loadu_ps(in + i), m_in);
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_mul_ps(centered, s), m_out));
    }
    for (; i < n; ++i) out[i] = (in[i] - mu_in) * scale + mu_out;
}

inline double hsum(__m256d v) {
    double lane[4];
    _mm256_storeu_pd(lane, v);
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double sum_avx2(const float* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, _mm256_cvtps_pd(_mm_loadu_ps(a + i)));
    double s = hsum(acc);
    for (; i < n; ++i) s += static_cast<double>(a[i]);
    return s;
}

double sum_sq_avx2(const float* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_cvtps_pd(_mm_loadu_ps(a + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(x, x));
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double x = a[i];
        s += x * x;
    }
    return s;
}

double dot_avx2(const float* a, const float* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_cvtps_pd(_mm_loadu_ps(a + i));
        const __m256d y = _mm256_cvtps_pd(_mm_loadu_ps(b + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(x, y));
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

double sum_sq_diff_avx2(const float* a, const float* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_cvtps_pd(_mm_loadu_ps(a + i));
        const __m256d y = _mm256_cvtps_pd(_mm_loadu_ps(b + i));
        const __m256d d = _mm256_sub_pd(x, y);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return s;
}

void bilinear_sample_avx2(float* out, const float* src, int src_w, int src_h,
                          int channels, const double* xs, const double* ys,
                          int n) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d xmax = _mm256_set1_pd(static_cast<double>(src_w - 1));
    const __m256d ymax = _mm256_set1_pd(static_cast<double>(src_h - 1));
    const __m128i xi_max = _mm_set1_epi32(src_w - 1);
    const __m128i yi_max = _mm_set1_epi32(src_h - 1);
    const __m128i one = _mm_set1_epi32(1);
    const __m128i wvec = _mm_set1_epi32(src_w);
    const __m128i cvec = _mm_set1_epi32(channels);
    const __m256d ones = _mm256_set1_pd(1.0);
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d x = _mm256_loadu_pd(xs + i);
        __m256d y = _mm256_loadu_pd(ys + i);
        x = _mm256_min_pd(_mm256_max_pd(x, zero), xmax);
        y = _mm256_min_pd(_mm256_max_pd(y, zero), ymax);
        const __m128i x0 = _mm256_cvttpd_epi32(x);
        const __m128i y0 = _mm256_cvttpd_epi32(y);
        const __m128i x1 = _mm_min_epi32(_mm_add_epi32(x0, one), xi_max);
        const __m128i y1 = _mm_min_epi32(_mm_add_epi32(y0, one), yi_max);
        const __m256d fx = _mm256_sub_pd(x, _mm256_cvtepi32_pd(x0));
        const __m256d fy = _mm256_sub_pd(y, _mm256_cvtepi32_pd(y0));
        const __m256d gx = _mm256_sub_pd(ones, fx);
        const __m256d gy = _mm256_sub_pd(ones, fy);
        const __m128i row0 = _mm_mullo_epi32(y0, wvec);
        const __m128i row1 = _mm_mullo_epi32(y1, wvec);
        const __m128i i00 = _mm_mullo_epi32(_mm_add_epi32(row0, x0), cvec);
        const __m128i i01 = _mm_mullo_epi32(_mm_add_epi32(row0, x1), cvec);
        const __m128i i10 = _mm_mullo_epi32(_mm_add_epi32(row1, x0), cvec);
        const __m128i i11 = _mm_mullo_epi32(_mm_add_epi32(row1, x1), cvec);
        for (int c = 0; c < channels; ++c) {
            const float* base = src + c;
            const __m256d p00 = _mm256_cvtps_pd(_mm_i32gather_ps(base, i00, 4));
            const __m256d p01 = _mm256_cvtps_pd(_mm_i32gather_ps(base, i01, 4));
            const __m256d p10 = _mm256_cvtps_pd(_mm_i32gather_ps(base, i10, 4));
            const __m256d p11 = _mm256_cvtps_pd(_mm_i32gather_ps(base, i11, 4));
            const __m256d top = _mm256_add_pd(_mm256_mul_pd(gx, p00), _mm256_mul_pd(fx, p01));
            const __m256d bot = _mm256_add_pd(_mm256_mul_pd(gx, p10), _mm256_mul_pd(fx, p11));
            const __m256d val = _mm256_add_pd(_mm256_mul_pd(gy, top), _mm256_mul_pd(fy, bot));
            const __m128 vf = _mm256_cvtpd_ps(val);
            alignas(16) float lane[4];
            _mm_store_ps(lane, vf);
            out[(static_cast<std::size_t>(i) + 0) * channels + c] = lane[0];
            out[(static_cast<std::size_t>(i) + 1) * channels + c] = lane[1];
            out[(static_cast<std::size_t>(i) + 2) * channels + c] = lane[2];
            out[(static_cast<std::size_t>(i) + 3) * channels + c] = lane[3];
        }
    }
    if (i < n)
        scalar_ops().bilinear_sample(out + static_cast<std::size_t>(i) * channels,
                                     src, src_w, src_h, channels, xs + i, ys + i,
                                     n - i);
}

}  // namespace

const Ops* avx2_ops() {
    static const Ops ops = {
        "avx2",
        conv2d_avx2,
        leaky_relu_avx2,
        affine_mod_avx2,
        blend_mask_avx2,
        add_clamp01_avx2,
        normalize_affine_avx2,
        sum_avx2,
        sum_sq_avx2,
        dot_avx2,
        sum_sq_diff_avx2,
        bilinear_sample_avx2,
    };
    return &ops;
}

}  // namespace kfr::kernels

#else

namespace kfr::kernels {
const Ops* avx2_ops() { return nullptr; }
}  // namespace kfr::kernels

#endif
