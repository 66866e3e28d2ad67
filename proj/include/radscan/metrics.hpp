#pragma once

#include "radscan/tensor.hpp"

namespace radscan {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(peak^2 / MSE), capped at 100 dB.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

/// PSNR restricted to pixels where the {1,H,W} or {H,W} mask is nonzero,
/// across all channels. An empty mask is rejected.
double masked_psnr(const Tensor& a, const Tensor& b, const Tensor& mask, double peak = 1.0);

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean SSIM over all fully contained 11×11 Gaussian windows of the
/// channel-mean grayscale images.
double ssim(const Tensor& a, const Tensor& b);

}  // namespace radscan
