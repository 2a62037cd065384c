#pragma once

#include "jga/core/types.hpp"

namespace jga {

// Mean absolute difference over all pixels and channels.
double l1_loss(const Image& a, const Image& b);
// d l1 / d a.
Image l1_backward(const Image& a, const Image& b);

// Structural similarity with an 11x11 Gaussian window (sigma 1.5),
// C1=0.01^2, C2=0.03^2, valid convolution, averaged over channels.
// Images must be at least 11x11.
double ssim(const Image& a, const Image& b);
// d ssim / d a.
Image ssim_backward(const Image& a, const Image& b);

// 10*log10(1/mse) for values in [0,1], capped at 100 dB.
double psnr(const Image& a, const Image& b);

} // namespace jga
