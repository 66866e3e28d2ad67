#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "radscan/tensor.hpp"

namespace radscan {

/// Pixel coordinate: x is the column, y the row.
struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

/// Detected or ground-truth light sources with per-source confidences.
struct SourceSet {
    std::vector<Point> centers;
    std::vector<double> confidences;

    std::size_t size() const { return centers.size(); }
    bool empty() const { return centers.empty(); }
    void add(Point p, double confidence = 1.0) {
        centers.push_back(p);
        confidences.push_back(confidence);
    }
    friend bool operator==(const SourceSet&, const SourceSet&) = default;
};

void write_sources(std::ostream& out, const SourceSet& s);
SourceSet read_sources(std::istream& in);
void save_sources(const std::string& path, const SourceSet& s);
SourceSet load_sources(const std::string& path);

/// Stand-in for an unbounded distance when no source exists.
inline constexpr double kInfiniteDistance = std::numeric_limits<double>::max();

/// Distance from every pixel to its nearest source center (row-major H×W).
struct DistanceField {
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<double> values;
    double at(std::size_t row, std::size_t col) const { return values[row * w + col]; }
};

/// Centers are rounded to the nearest pixel; a center that rounds outside the
/// grid is rejected. An empty source set yields kInfiniteDistance everywhere.
DistanceField compute_distance_map(const SourceSet& sources, std::size_t h, std::size_t w);

/// Token order for the radial scan. forward[i] is the flat pixel visited at
/// sequence step i; inverse maps back. Distances along forward never increase,
/// ties resolve to ascending raster index.
struct RadialPlan {
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<std::uint32_t> forward;
    std::vector<std::uint32_t> inverse;

    std::size_t length() const { return forward.size(); }
    static RadialPlan raster(std::size_t h, std::size_t w);
};

RadialPlan build_radial_plan(const DistanceField& dist);

/// Gathers a (C,H,W) or (H,W) field into an L×C sequence along the plan.
Tensor radial_unfold(const Tensor& field, const RadialPlan& plan);
/// Scatters an L×C sequence back to (C,H,W); exact inverse of radial_unfold.
Tensor radial_fold(const Tensor& seq, const RadialPlan& plan);

/// Pixelwise maximum of isotropic Gaussians centered on each source, as {1,H,W}.
Tensor gaussian_heatmap(const SourceSet& sources, std::size_t h, std::size_t w, double sigma);

/// Local maxima of a single-channel map that reach `threshold`. A pixel equal
/// to an earlier (raster order) neighbour inside its window is suppressed, so
/// a plateau contributes only its raster-first pixel.
SourceSet nms_peaks(const Tensor& heatmap, double threshold, std::size_t window);

Tensor threshold_mask(const Tensor& prob, double tau);

// ---------------------------------------------------------------------------

/// Priors at one resolution. Any member may be absent (empty tensor / empty
/// set); the consuming mechanism then falls back to its baseline form.
struct PriorLevel {
    Tensor p_flare;          // {1,H,W} in [0,1]
    Tensor p_mask;           // {1,H,W} binary
    SourceSet p_position;

    bool has_flare() const { return !p_flare.empty(); }
    bool has_mask() const { return !p_mask.empty(); }
};

struct PriorBundle {
    PriorLevel full;
    /// per_scale[k] holds the priors at 1/2^(k+1) resolution.
    std::vector<PriorLevel> per_scale;

    /// Level 0 is full resolution.
    const PriorLevel& level(std::size_t l) const { return l == 0 ? full : per_scale.at(l - 1); }
    std::size_t levels() const { return per_scale.size(); }
};

/// Fills per_scale: contamination by 2×2 averaging, mask by 2×2 maximum,
/// positions halved and floored. Extents must be divisible by 2^levels.
PriorBundle downsample_priors(const PriorBundle& bundle, std::size_t levels);

/// Bundle with every prior absent (the "feed None" configuration).
PriorBundle empty_priors(std::size_t levels);

}  // namespace radscan
