#pragma once

#include "kfr/geometry.hpp"

namespace kfr {

// 10*log10(max_val^2 / mse) over all channels jointly; +infinity for
// identical images.
double psnr(const ImageBuffer& a, const ImageBuffer& b, double max_val = 1.0);

// Mean local SSIM over Gaussian-weighted windows on the luma channel
// (BT.601 weights for RGB inputs). Standard constants; dims must be at
// least the window size.
double ssim(const ImageBuffer& a, const ImageBuffer& b, int window = 11,
            double sigma = 1.5, double k1 = 0.01, double k2 = 0.03);

}  // namespace kfr
