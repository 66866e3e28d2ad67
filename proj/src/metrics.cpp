#include "radscan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace radscan {

namespace {

double psnr_from(double sum_sq, std::size_t count, double peak) {
    const double mse = sum_sq / static_cast<double>(count);
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

/// Sum of squared differences over the planes of a, restricted to `mask`
/// when given. Iterates planes then pixels so the full mask reproduces the
/// unmasked summation order.
double masked_sum_sq(const Tensor& a, const Tensor& b, const Tensor* mask, std::size_t& count) {
    require_same_shape(a, b, "psnr");
    const std::size_t hw = mask ? mask->size() : a.size();
    if (a.size() % hw != 0) throw ShapeError("masked_psnr: mask does not tile the image");
    const std::size_t planes = a.size() / hw;
    double s = 0.0;
    count = 0;
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i < hw; ++i) {
            if (mask && (*mask)[i] == 0.0) continue;
            const double d = a[p * hw + i] - b[p * hw + i];
            s += d * d;
            ++count;
        }
    return s;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double peak) {
    std::size_t count = 0;
    const double s = masked_sum_sq(a, b, nullptr, count);
    if (count == 0) throw std::invalid_argument("psnr: empty image");
    return psnr_from(s, count, peak);
}

double masked_psnr(const Tensor& a, const Tensor& b, const Tensor& mask, double peak) {
    if (a.rank() < 2 || mask.size() != a.dim(a.rank() - 2) * a.dim(a.rank() - 1))
        throw ShapeError("masked_psnr: mask " + shape_to_string(mask.shape()) + " does not match image " +
                         shape_to_string(a.shape()));
    std::size_t count = 0;
    const double s = masked_sum_sq(a, b, &mask, count);
    if (count == 0) throw std::invalid_argument("masked_psnr: mask has no active pixels");
    return psnr_from(s, count, peak);
}

namespace {

std::vector<double> grayscale(const Tensor& t, std::size_t& h, std::size_t& w) {
    const Dims4 d = dims4(t, "ssim");
    h = d.h;
    w = d.w;
    const std::size_t planes = d.n * d.c, hw = h * w;
    std::vector<double> g(hw, 0.0);
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i < hw; ++i) g[i] += t[p * hw + i];
    for (double& v : g) v /= static_cast<double>(planes);
    return g;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "ssim");
    std::size_t h = 0, w = 0;
    const std::vector<double> ga = grayscale(a, h, w), gb = grayscale(b, h, w);
    const std::size_t k = kSsimWindow;
    if (h < k || w < k) throw std::invalid_argument("ssim: image smaller than the 11x11 window");

    std::vector<double> win(k * k);
    double total = 0.0;
    const double half = static_cast<double>(k / 2);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            const double dy = static_cast<double>(i) - half, dx = static_cast<double>(j) - half;
            win[i * k + j] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSsimSigma * kSsimSigma));
            total += win[i * k + j];
        }
    for (double& v : win) v /= total;

    double acc = 0.0;
    std::size_t windows = 0;
    for (std::size_t r = 0; r + k <= h; ++r)
        for (std::size_t c = 0; c + k <= w; ++c) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j < k; ++j) {
                    const double g = win[i * k + j];
                    const double x = ga[(r + i) * w + c + j], y = gb[(r + i) * w + c + j];
                    ma += g * x;
                    mb += g * y;
                    saa += g * (x * x);
                    sbb += g * (y * y);
                    sab += g * (x * y);
                }
            const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
            acc += ((2.0 * ma * mb + kSsimC1) * (2.0 * cov + kSsimC2)) /
                   ((ma * ma + mb * mb + kSsimC1) * (va + vb + kSsimC2));
            ++windows;
        }
    return acc / static_cast<double>(windows);
}

}  // namespace radscan
