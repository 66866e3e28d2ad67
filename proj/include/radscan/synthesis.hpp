#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "radscan/geometry.hpp"
#include "radscan/rng.hpp"
#include "radscan/tensor.hpp"

namespace radscan {

/// One streak lobe: a Gaussian ridge through the source center whose
/// amplitude decays exponentially with distance along the ridge.
struct Streak {
    double angle = 0.0;   // radians
    double length = 1.0;  // decay length along the ridge, pixels
    double width = 1.0;   // Gaussian half-width across the ridge, pixels
    double gain = 0.0;
};

struct FlareTemplate {
    Point center;
    double glare_sigma = 3.0;
    double glare_gain = 0.0;
    std::vector<Streak> streaks;
    double tint[3] = {1.0, 1.0, 1.0};
    double source_radius = 3.0;
    double source_gain = 1.0;

    /// Untinted scattering intensity at a point: glare plus streaks.
    double glare_at(double x, double y) const;
    double streak_at(double x, double y) const;
    double intensity(double x, double y) const { return glare_at(x, y) + streak_at(x, y); }
};

/// Rendered components, all {3,H,W} except the single-channel glare and
/// streak intensity maps used to build evaluation masks.
struct FlareLayers {
    Tensor flare;
    Tensor light;
    Tensor glare;   // {1,H,W}
    Tensor streak;  // {1,H,W}
};

FlareLayers render_flare(const FlareTemplate& t, std::size_t h, std::size_t w);

/// Similarity warp about the image center, optionally mirrored left-right
/// before rotation, followed by a translation.
struct Warp {
    double rotation = 0.0;
    double tx = 0.0;
    double ty = 0.0;
    double scale = 1.0;
    bool flip = false;
};

Point warp_point(const Point& p, const Warp& warp, std::size_t h, std::size_t w);

/// Bilinear resampling of `field` under `warp`; samples outside the source are 0.
Tensor random_affine(const Tensor& field, const Warp& warp);

struct Composite {
    FlareLayers layers;
    SourceSet sources;  // warped centers rounded to the pixel grid
};

/// Independently warped templates accumulated with clamping to [0,1].
Composite compose_multisource(const std::vector<FlareTemplate>& templates,
                              const std::vector<Warp>& warps, std::size_t h, std::size_t w);

/// clamp(background^gamma + flare + light, 0, 1)^(1/gamma), per element.
Tensor blend_scene(const Tensor& background, const Tensor& flare, const Tensor& light, double gamma);

struct SynthConfig {
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t min_sources = 1;
    std::size_t max_sources = 4;
    double min_separation = 8.0;  // pixels between source centers
};

/// Heatmap spread: 2 px at 32 px height, proportional otherwise.
double heatmap_sigma(std::size_t height);

struct SceneSample {
    std::uint64_t seed = 0;
    double gamma = 2.2;
    Tensor background;  // {3,H,W}
    Tensor flare;       // {3,H,W}, linear-space composite
    Tensor light;       // {3,H,W}
    Tensor input;       // {3,H,W}
    Tensor heatmap;     // {1,H,W}
    Tensor mask;        // {1,H,W}
    SourceSet sources;
    Tensor glare_mask;   // {1,H,W}
    Tensor streak_mask;  // {1,H,W}

    /// Flare-free target: the background with the light source kept.
    Tensor clean_target() const;
    /// Flare target for the main network: input minus clean target.
    Tensor flare_target() const;
    /// Contamination target for the prior network: channel max of clamp(flare + light).
    Tensor contamination_target() const;
};

Tensor procedural_background(Rng& rng, std::size_t h, std::size_t w);
FlareTemplate random_template(Rng& rng, std::size_t h, std::size_t w);

SceneSample make_sample(std::uint64_t seed, const SynthConfig& config);

/// Writes n samples with seeds derive_seed(base_seed, i) and a manifest.tsv.
/// Returns the manifest path.
std::string write_dataset(std::size_t n, const SynthConfig& config, std::uint64_t base_seed,
                          const std::string& dir);

/// Reads every record listed in <dir>/manifest.tsv.
std::vector<SceneSample> load_dataset(const std::string& dir);

/// Binary 8-bit PPM ({3,H,W}) or PGM ({1,H,W}) with values clamped to [0,1].
void write_ppm(const std::string& path, const Tensor& image);
Tensor read_ppm(const std::string& path);

}  // namespace radscan
