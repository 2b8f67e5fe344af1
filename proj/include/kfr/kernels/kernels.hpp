#pragma once

#include <cstddef>

// Arithmetic inner loops used by the image and tensor operations. Every
// kernel has a scalar reference implementation plus SIMD variants (AVX2 on
// x86-64, NEON on aarch64) selected at runtime. Elementwise kernels and the
// convolution keep the per-element operation order of the scalar reference,
// so they produce bit-identical results across backends; the reductions
// accumulate in a different order and agree only up to rounding.

namespace kfr::kernels {

enum class Backend { Auto, Scalar, Avx2, Neon };

struct ConvArgs {
    const float* input;   // in_c x in_h x in_w, C-major
    int in_c = 0, in_h = 0, in_w = 0;
    const float* kernel;  // out_c x in_c x kh x kw
    const float* bias;    // out_c, may be null
    int out_c = 0, kh = 0, kw = 0;
    int stride = 1, dilation = 1, pad = 0;
    float* output;        // out_c x out_h x out_w
    int out_h = 0, out_w = 0;
};

struct Ops {
    const char* name;

    // Cross-correlation with zero padding. Out-of-bounds taps are skipped.
    void (*conv2d)(const ConvArgs&);

    // out[i] = in[i] > 0 ? in[i] : slope * in[i]
    void (*leaky_relu)(float* out, const float* in, std::size_t n, float slope);

    // out[i] = alpha[i] * x[i] + beta[i]
    void (*affine_mod)(float* out, const float* x, const float* alpha,
                       const float* beta, std::size_t n);

    // out[i] = restored[i] + mask[i] * (guide[i] - restored[i]), clamped into
    // [min(restored, guide), max(restored, guide)] so the blend stays convex.
    void (*blend_mask)(float* out, const float* restored, const float* guide,
                       const float* mask, std::size_t n);

    // out[i] = clamp(base[i] + delta[i], 0, 1)
    void (*add_clamp01)(float* out, const float* base, const float* delta,
                        std::size_t n);

    // out[i] = (in[i] - mu_in) * scale + mu_out. The centered form keeps
    // rounding proportional to the output even when scale is large.
    void (*normalize_affine)(float* out, const float* in, std::size_t n,
                             float mu_in, float scale, float mu_out);

    // Double-accumulated reductions over float data.
    double (*sum)(const float* a, std::size_t n);
    double (*sum_sq)(const float* a, std::size_t n);
    double (*dot)(const float* a, const float* b, std::size_t n);
    double (*sum_sq_diff)(const float* a, const float* b, std::size_t n);

    // Bilinear sampling of an interleaved image at n source positions with
    // clamp-to-edge. Writes n * channels interleaved floats.
    void (*bilinear_sample)(float* out, const float* src, int src_w, int src_h,
                            int channels, const double* xs, const double* ys,
                            int n);
};

// Kernel table for the backend selected at startup (CPU detection, overridden
// by the KFR_SIMD environment variable: scalar | avx2 | neon | auto).
const Ops& active();
Backend active_backend();

// Forces a backend; throws kfr::Error if it is not available on this CPU.
void set_backend(Backend b);
bool backend_available(Backend b);

// Direct access for equivalence tests.
const Ops& scalar_ops();
const Ops* avx2_ops();  // null when not compiled in or not supported
const Ops* neon_ops();

}  // namespace kfr::kernels
