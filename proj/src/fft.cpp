#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <string>

#include "radscan/numerics.hpp"

namespace radscan {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && std::has_single_bit(n); }

void require_pow2(std::size_t h, std::size_t w, const char* what) {
    if (!is_pow2(h) || !is_pow2(w)) {
        throw ShapeError(std::string(what) + ": extents must be powers of two, got " +
                         std::to_string(h) + "x" + std::to_string(w));
    }
}

void fft_rows(std::vector<Complex>& bins, std::size_t h, std::size_t w, bool inverse) {
    for (std::size_t r = 0; r < h; ++r) fft_inplace({bins.data() + r * w, w}, inverse);
}

void fft_cols(std::vector<Complex>& bins, std::size_t h, std::size_t w, bool inverse) {
    std::vector<Complex> col(h);
    for (std::size_t c = 0; c < w; ++c) {
        for (std::size_t r = 0; r < h; ++r) col[r] = bins[r * w + c];
        fft_inplace(col, inverse);
        for (std::size_t r = 0; r < h; ++r) bins[r * w + c] = col[r];
    }
}

Spectrum plane_spectrum(const double* plane, std::size_t h, std::size_t w) {
    Spectrum s{h, w, std::vector<Complex>(h * w)};
    for (std::size_t i = 0; i < h * w; ++i) s.bins[i] = plane[i];
    fft_rows(s.bins, h, w, false);
    fft_cols(s.bins, h, w, false);
    return s;
}

void inverse_into(Spectrum s, double* plane) {
    fft_rows(s.bins, s.h, s.w, true);
    fft_cols(s.bins, s.h, s.w, true);
    const double norm = 1.0 / static_cast<double>(s.h * s.w);
    for (std::size_t i = 0; i < s.h * s.w; ++i) plane[i] = s.bins[i].real() * norm;
}

std::vector<std::size_t> band_map(std::size_t h, std::size_t w, std::size_t bands) {
    std::vector<std::size_t> map(h * w);
    for (std::size_t u = 0; u < h; ++u) {
        for (std::size_t v = 0; v < w; ++v) map[u * w + v] = frequency_band(h, w, u, v, bands);
    }
    return map;
}

void check_gains(const Tensor& gains, std::size_t bands) {
    if (gains.size() != bands) {
        throw std::invalid_argument("freq_enhance: expected " + std::to_string(bands) +
                                    " band gains, got " + std::to_string(gains.size()));
    }
}

}  // namespace

// Iterative radix-2 Cooley-Tukey; the inverse is unnormalized.
void fft_inplace(std::span<Complex> data, bool inverse) {
    const std::size_t n = data.size();
    if (!is_pow2(n)) throw ShapeError("fft: length must be a power of two, got " + std::to_string(n));
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        for (std::size_t start = 0; start < n; start += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const double a = ang * static_cast<double>(k);
                const Complex wk(std::cos(a), std::sin(a));
                const Complex even = data[start + k];
                const Complex odd = data[start + k + len / 2] * wk;
                data[start + k] = even + odd;
                data[start + k + len / 2] = even - odd;
            }
        }
    }
}

Spectrum fft2d(const Tensor& plane) {
    if (plane.rank() != 2) throw ShapeError("fft2d: expected an H×W plane, got " + shape_to_string(plane.shape()));
    require_pow2(plane.dim(0), plane.dim(1), "fft2d");
    return plane_spectrum(plane.data().data(), plane.dim(0), plane.dim(1));
}

Tensor ifft2d(const Spectrum& spectrum) {
    require_pow2(spectrum.h, spectrum.w, "ifft2d");
    if (spectrum.bins.size() != spectrum.h * spectrum.w) throw ShapeError("ifft2d: bin count mismatch");
    Tensor out({spectrum.h, spectrum.w});
    inverse_into(spectrum, out.data().data());
    return out;
}

std::size_t frequency_band(std::size_t h, std::size_t w, std::size_t u, std::size_t v,
                           std::size_t bands) {
    auto normalized = [](std::size_t k, std::size_t n) {
        if (n < 2) return 0.0;
        const double signed_k = k <= n / 2 ? static_cast<double>(k)
                                           : static_cast<double>(k) - static_cast<double>(n);
        return signed_k / (static_cast<double>(n) / 2.0);
    };
    const double r = std::hypot(normalized(u, h), normalized(v, w));
    const auto band = static_cast<std::size_t>(std::floor(r * static_cast<double>(bands) / std::numbers::sqrt2));
    return std::min(band, bands - 1);
}

Tensor freq_enhance(const Tensor& input, const Tensor& gains, std::size_t bands) {
    check_gains(gains, bands);
    const Dims4 d = dims4(input, "freq_enhance");
    require_pow2(d.h, d.w, "freq_enhance");
    const auto map = band_map(d.h, d.w, bands);
    Tensor out(input.shape());
    for (std::size_t p = 0; p < d.n * d.c; ++p) {
        Spectrum s = plane_spectrum(input.data().data() + p * d.h * d.w, d.h, d.w);
        for (std::size_t k = 0; k < s.bins.size(); ++k) s.bins[k] *= gains[map[k]];
        inverse_into(std::move(s), out.data().data() + p * d.h * d.w);
    }
    require_finite(out, "freq_enhance");
    return out;
}

FreqEnhanceGrads freq_enhance_backward(const Tensor& input, const Tensor& gains,
                                       const Tensor& upstream, std::size_t bands) {
    check_gains(gains, bands);
    require_same_shape(input, upstream, "freq_enhance_backward");
    const Dims4 d = dims4(input, "freq_enhance_backward");
    require_pow2(d.h, d.w, "freq_enhance_backward");
    const auto map = band_map(d.h, d.w, bands);
    const double norm = 1.0 / static_cast<double>(d.h * d.w);
    FreqEnhanceGrads g{Tensor(input.shape()), Tensor(gains.shape())};
    for (std::size_t p = 0; p < d.n * d.c; ++p) {
        const Spectrum x = plane_spectrum(input.data().data() + p * d.h * d.w, d.h, d.w);
        Spectrum up = plane_spectrum(upstream.data().data() + p * d.h * d.w, d.h, d.w);
        // <upstream, y_b> = Re(sum_{k in b} X_k conj(U_k)) / (H W) by Parseval.
        for (std::size_t k = 0; k < x.bins.size(); ++k) {
            g.gains[map[k]] += (x.bins[k] * std::conj(up.bins[k])).real() * norm;
        }
        // The band filter is real and even, hence self-adjoint.
        for (std::size_t k = 0; k < up.bins.size(); ++k) up.bins[k] *= gains[map[k]];
        inverse_into(std::move(up), g.input.data().data() + p * d.h * d.w);
    }
    return g;
}

}  // namespace radscan
