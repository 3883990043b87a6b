#pragma once

#include "fieldfuse/image.hpp"

namespace fieldfuse {

/// 10 log10(1 / MSE) over all channels of two [0, 1] images; +inf when the
/// images are identical.
double psnr(const Image& a, const Image& b);

/// Mean SSIM over all fully contained 11x11 Gaussian windows (sigma 1.5,
/// K1 = 0.01, K2 = 0.03, dynamic range 1), computed per channel and averaged.
double ssim(const Image& a, const Image& b);

}  // namespace fieldfuse
