#include "radscan/synthesis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace radscan {

namespace fs = std::filesystem;

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

Point pivot_of(std::size_t h, std::size_t w) {
    return {(static_cast<double>(w) - 1.0) / 2.0, (static_cast<double>(h) - 1.0) / 2.0};
}

/// Bilinear sample with zeros outside the grid.
double sample(const Tensor& t, std::size_t plane, std::size_t h, std::size_t w, double x, double y) {
    const double fx0 = std::floor(x), fy0 = std::floor(y);
    const double ax = x - fx0, ay = y - fy0;
    const long x0 = static_cast<long>(fx0), y0 = static_cast<long>(fy0);
    const double* base = t.data().data() + plane * h * w;
    auto px = [&](long r, long c) -> double {
        if (r < 0 || c < 0 || r >= static_cast<long>(h) || c >= static_cast<long>(w)) return 0.0;
        return base[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c)];
    };
    return (1 - ay) * ((1 - ax) * px(y0, x0) + ax * px(y0, x0 + 1)) +
           ay * ((1 - ax) * px(y0 + 1, x0) + ax * px(y0 + 1, x0 + 1));
}

Tensor dilate3(const Tensor& m) {
    const std::size_t h = m.dim(1), w = m.dim(2);
    Tensor out(m.shape());
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            double v = 0.0;
            for (std::size_t rr = r ? r - 1 : 0; rr <= std::min(h - 1, r + 1); ++rr)
                for (std::size_t cc = c ? c - 1 : 0; cc <= std::min(w - 1, c + 1); ++cc)
                    v = std::max(v, m[rr * w + cc]);
            out[r * w + c] = v;
        }
    return out;
}

Tensor channel_max(const Tensor& t) {
    const std::size_t c = t.dim(0), hw = t.dim(1) * t.dim(2);
    Tensor out({1, t.dim(1), t.dim(2)});
    for (std::size_t p = 0; p < hw; ++p) {
        double v = t[p];
        for (std::size_t k = 1; k < c; ++k) v = std::max(v, t[k * hw + p]);
        out[p] = v;
    }
    return out;
}

void clamp_in_place(Tensor& t) {
    for (double& v : t.values()) v = clamp01(v);
}

}  // namespace

double FlareTemplate::glare_at(double x, double y) const {
    const double dx = x - center.x, dy = y - center.y;
    return glare_gain * std::exp(-(dx * dx + dy * dy) / (2.0 * glare_sigma * glare_sigma));
}

double FlareTemplate::streak_at(double x, double y) const {
    const double dx = x - center.x, dy = y - center.y;
    double v = 0.0;
    for (const Streak& s : streaks) {
        const double c = std::cos(s.angle), sn = std::sin(s.angle);
        const double along = dx * c + dy * sn;
        const double across = -dx * sn + dy * c;
        v += s.gain * std::exp(-std::abs(along) / s.length) *
             std::exp(-(across * across) / (2.0 * s.width * s.width));
    }
    return v;
}

FlareLayers render_flare(const FlareTemplate& t, std::size_t h, std::size_t w) {
    FlareLayers out{Tensor({3, h, w}), Tensor({3, h, w}), Tensor({1, h, w}), Tensor({1, h, w})};
    const std::size_t hw = h * w;
    const double r2 = t.source_radius * t.source_radius;
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            const double x = static_cast<double>(c), y = static_cast<double>(r);
            const double g = t.glare_at(x, y), s = t.streak_at(x, y);
            const std::size_t p = r * w + c;
            out.glare[p] = clamp01(g);
            out.streak[p] = clamp01(s);
            const double dx = x - t.center.x, dy = y - t.center.y;
            const bool inside = dx * dx + dy * dy <= r2;
            for (std::size_t k = 0; k < 3; ++k) {
                out.flare[k * hw + p] = clamp01(t.tint[k] * (g + s));
                out.light[k * hw + p] = inside ? t.source_gain : 0.0;
            }
        }
    return out;
}

Point warp_point(const Point& p, const Warp& warp, std::size_t h, std::size_t w) {
    const Point o = pivot_of(h, w);
    double dx = p.x - o.x, dy = p.y - o.y;
    if (warp.flip) dx = -dx;
    const double c = std::cos(warp.rotation), s = std::sin(warp.rotation);
    return {warp.scale * (c * dx - s * dy) + o.x + warp.tx, warp.scale * (s * dx + c * dy) + o.y + warp.ty};
}

Tensor random_affine(const Tensor& field, const Warp& warp) {
    if (!(warp.scale > 0.0)) throw std::invalid_argument("random_affine: scale must be positive");
    const Dims4 d = dims4(field, "random_affine");
    const std::size_t planes = d.n * d.c;
    const Point o = pivot_of(d.h, d.w);
    const double c = std::cos(warp.rotation), s = std::sin(warp.rotation);
    Tensor out(field.shape());
    for (std::size_t r = 0; r < d.h; ++r)
        for (std::size_t col = 0; col < d.w; ++col) {
            // Inverse map: undo translation, scale, rotation, then the mirror.
            const double ux = (static_cast<double>(col) - o.x - warp.tx) / warp.scale;
            const double uy = (static_cast<double>(r) - o.y - warp.ty) / warp.scale;
            double sx = c * ux + s * uy;
            const double sy = -s * ux + c * uy;
            if (warp.flip) sx = -sx;
            for (std::size_t p = 0; p < planes; ++p)
                out[(p * d.h + r) * d.w + col] = sample(field, p, d.h, d.w, sx + o.x, sy + o.y);
        }
    return out;
}

Composite compose_multisource(const std::vector<FlareTemplate>& templates, const std::vector<Warp>& warps,
                              std::size_t h, std::size_t w) {
    if (templates.empty()) throw std::invalid_argument("compose_multisource: no templates");
    if (templates.size() != warps.size())
        throw std::invalid_argument("compose_multisource: templates and warps differ in count");
    Composite out{{Tensor({3, h, w}), Tensor({3, h, w}), Tensor({1, h, w}), Tensor({1, h, w})}, {}};
    for (std::size_t i = 0; i < templates.size(); ++i) {
        const FlareLayers one = render_flare(templates[i], h, w);
        out.layers.flare += random_affine(one.flare, warps[i]);
        out.layers.light += random_affine(one.light, warps[i]);
        out.layers.glare += random_affine(one.glare, warps[i]);
        out.layers.streak += random_affine(one.streak, warps[i]);
        const Point c = warp_point(templates[i].center, warps[i], h, w);
        out.sources.add({std::round(c.x), std::round(c.y)}, 1.0);
    }
    clamp_in_place(out.layers.flare);
    clamp_in_place(out.layers.light);
    clamp_in_place(out.layers.glare);
    clamp_in_place(out.layers.streak);
    return out;
}

Tensor blend_scene(const Tensor& background, const Tensor& flare, const Tensor& light, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("blend_scene: gamma must be positive");
    require_same_shape(background, flare, "blend_scene");
    require_same_shape(background, light, "blend_scene");
    Tensor out(background.shape());
    const double inv = 1.0 / gamma;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double lin = std::pow(background[i], gamma) + flare[i] + light[i];
        out[i] = std::pow(clamp01(lin), inv);
    }
    return out;
}

double heatmap_sigma(std::size_t height) { return 2.0 * static_cast<double>(height) / 32.0; }

Tensor SceneSample::clean_target() const {
    return blend_scene(background, Tensor(background.shape()), light, gamma);
}

Tensor SceneSample::flare_target() const { return input - clean_target(); }

Tensor SceneSample::contamination_target() const {
    Tensor sum = flare + light;
    clamp_in_place(sum);
    return channel_max(sum);
}

Tensor procedural_background(Rng& rng, std::size_t h, std::size_t w) {
    Tensor bg({3, h, w});
    const std::size_t hw = h * w;
    double c0[3], c1[3];
    for (int k = 0; k < 3; ++k) {
        c0[k] = rng.uniform(0.1, 0.7);
        c1[k] = rng.uniform(0.1, 0.7);
    }
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double span = std::abs(ca) * double(w) + std::abs(sa) * double(h);
    const Point o = pivot_of(h, w);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            const double t = 0.5 + ((double(c) - o.x) * ca + (double(r) - o.y) * sa) / span;
            for (std::size_t k = 0; k < 3; ++k) bg[k * hw + r * w + c] = c0[k] + (c1[k] - c0[k]) * t;
        }

    const std::size_t shapes = 1 + rng.below(3);
    for (std::size_t s = 0; s < shapes; ++s) {
        const bool disc = rng.uniform() < 0.5;
        const double cx = rng.uniform(0.0, double(w)), cy = rng.uniform(0.0, double(h));
        const double ex = rng.uniform(0.1, 0.3) * double(w), ey = rng.uniform(0.1, 0.3) * double(h);
        double color[3];
        for (double& v : color) v = rng.uniform(0.1, 0.7);
        for (std::size_t r = 0; r < h; ++r)
            for (std::size_t c = 0; c < w; ++c) {
                const double dx = (double(c) - cx) / ex, dy = (double(r) - cy) / ey;
                const bool in = disc ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
                if (!in) continue;
                for (std::size_t k = 0; k < 3; ++k) {
                    double& v = bg[k * hw + r * w + c];
                    v = 0.4 * v + 0.6 * color[k];
                }
            }
    }
    for (double& v : bg.values()) v = std::clamp(v + 0.02 * rng.normal(), 0.05, 0.75);
    return bg;
}

FlareTemplate random_template(Rng& rng, std::size_t h, std::size_t w) {
    const double s = static_cast<double>(h) / 32.0;
    FlareTemplate t;
    t.center = {std::floor(double(w) / 2.0), std::floor(double(h) / 2.0)};
    t.glare_sigma = rng.uniform(2.0, 5.0) * s;
    t.glare_gain = rng.uniform(0.3, 0.7);
    const std::size_t n = 2 + rng.below(3);
    for (std::size_t i = 0; i < n; ++i) {
        Streak st;
        st.angle = rng.uniform(0.0, std::numbers::pi);
        st.length = rng.uniform(4.0, 12.0) * s;
        st.width = rng.uniform(0.5, 1.2) * s;
        st.gain = rng.uniform(0.2, 0.5);
        t.streaks.push_back(st);
    }
    for (double& v : t.tint) v = rng.uniform(0.7, 1.0);
    t.source_radius = rng.uniform(2.5, 3.5) * s;
    t.source_gain = 1.0 - 0.1 * rng.uniform();  // (0.9, 1]
    return t;
}

SceneSample make_sample(std::uint64_t seed, const SynthConfig& config) {
    if (config.min_sources < 1 || config.max_sources < config.min_sources || config.max_sources > 4)
        throw std::invalid_argument("make_sample: source count range must lie in [1, 4]");
    const std::size_t h = config.height, w = config.width;
    Rng rng(seed);
    SceneSample s;
    s.seed = seed;
    s.background = procedural_background(rng, h, w);
    s.gamma = rng.uniform(1.8, 2.2);

    const std::size_t k = config.min_sources + rng.below(config.max_sources - config.min_sources + 1);
    const double margin = 4.0 * static_cast<double>(h) / 32.0;
    std::vector<Point> targets;
    for (std::size_t attempt = 0; targets.size() < k && attempt < 1000; ++attempt) {
        const Point p{std::round(rng.uniform(margin, double(w) - 1.0 - margin)),
                      std::round(rng.uniform(margin, double(h) - 1.0 - margin))};
        bool far = true;
        for (const Point& q : targets)
            far = far && std::hypot(p.x - q.x, p.y - q.y) >= config.min_separation;
        if (far) targets.push_back(p);
    }

    std::vector<FlareTemplate> templates;
    std::vector<Warp> warps;
    for (const Point& target : targets) {
        templates.push_back(random_template(rng, h, w));
        Warp warp;
        warp.rotation = rng.uniform(0.0, 2.0 * std::numbers::pi);
        warp.scale = rng.uniform(0.85, 1.15);
        warp.flip = rng.uniform() < 0.5;
        const Point moved = warp_point(templates.back().center, warp, h, w);
        warp.tx = target.x - moved.x;
        warp.ty = target.y - moved.y;
        warps.push_back(warp);
    }
    const Composite comp = compose_multisource(templates, warps, h, w);
    s.flare = comp.layers.flare;
    s.light = comp.layers.light;
    s.sources = comp.sources;
    s.input = blend_scene(s.background, s.flare, s.light, s.gamma);
    s.heatmap = gaussian_heatmap(s.sources, h, w, heatmap_sigma(h));
    s.mask = dilate3(threshold_mask(channel_max(s.light), 0.5));

    s.glare_mask = threshold_mask(comp.layers.glare, 0.02);
    s.streak_mask = threshold_mask(comp.layers.streak, 0.02);
    for (std::size_t p = 0; p < h * w; ++p) {
        if (s.mask[p] != 0.0) {
            s.glare_mask[p] = 0.0;
            s.streak_mask[p] = 0.0;
        }
    }
    return s;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kManifestHeader =
    "index\tseed\tgamma\tbackground\tflare\tlight\tinput\theatmap\tmask\tsources";

std::string record_name(std::size_t i, const char* what) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04zu_%s", i, what);
    return buf;
}

std::string format_exact(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

}  // namespace

std::string write_dataset(std::size_t n, const SynthConfig& config, std::uint64_t base_seed,
                          const std::string& dir) {
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "masks", ec);
    if (ec) throw std::runtime_error("write_dataset: cannot create directory " + dir + ": " + ec.message());
    const std::string manifest_path = (fs::path(dir) / "manifest.tsv").string();
    std::ofstream manifest(manifest_path);
    if (!manifest) throw std::runtime_error("write_dataset: cannot write " + manifest_path);
    manifest << kManifestHeader << '\n';

    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t seed = derive_seed(base_seed, i);
        const SceneSample s = make_sample(seed, config);
        const fs::path root(dir);
        const std::string names[] = {record_name(i, "background.dat"), record_name(i, "flare.dat"),
                                     record_name(i, "light.dat"),      record_name(i, "input.dat"),
                                     record_name(i, "heatmap.dat"),    record_name(i, "mask.dat")};
        const Tensor* tensors[] = {&s.background, &s.flare, &s.light, &s.input, &s.heatmap, &s.mask};
        for (int k = 0; k < 6; ++k) save_dat1((root / names[k]).string(), *tensors[k]);
        const std::string sources = record_name(i, "sources.txt");
        save_sources((root / sources).string(), s.sources);
        save_dat1((root / "masks" / record_name(i, "glare.dat")).string(), s.glare_mask);
        save_dat1((root / "masks" / record_name(i, "streak.dat")).string(), s.streak_mask);
        write_ppm((root / record_name(i, "input.ppm")).string(), s.input);
        write_ppm((root / record_name(i, "background.ppm")).string(), s.background);
        write_ppm((root / record_name(i, "flare.ppm")).string(), s.flare);
        write_ppm((root / record_name(i, "light.ppm")).string(), s.light);

        manifest << i << '\t' << seed << '\t' << format_exact(s.gamma);
        for (const std::string& name : names) manifest << '\t' << name;
        manifest << '\t' << sources << '\n';
    }
    if (!manifest) throw std::runtime_error("write_dataset: failed writing " + manifest_path);
    return manifest_path;
}

std::vector<SceneSample> load_dataset(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream manifest(root / "manifest.tsv");
    if (!manifest) throw std::runtime_error("load_dataset: no manifest.tsv in " + dir);
    std::string line;
    std::getline(manifest, line);
    if (line != kManifestHeader) throw std::runtime_error("load_dataset: unexpected manifest header");
    std::vector<SceneSample> out;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::size_t index = 0;
        std::string gamma;
        std::string files[7];
        SceneSample s;
        row >> index >> s.seed >> gamma;
        for (std::string& f : files) row >> f;
        if (!row) throw std::runtime_error("load_dataset: malformed manifest row: " + line);
        std::from_chars(gamma.data(), gamma.data() + gamma.size(), s.gamma);
        s.background = load_dat1((root / files[0]).string());
        s.flare = load_dat1((root / files[1]).string());
        s.light = load_dat1((root / files[2]).string());
        s.input = load_dat1((root / files[3]).string());
        s.heatmap = load_dat1((root / files[4]).string());
        s.mask = load_dat1((root / files[5]).string());
        s.sources = load_sources((root / files[6]).string());
        const fs::path glare = root / "masks" / record_name(index, "glare.dat");
        const fs::path streak = root / "masks" / record_name(index, "streak.dat");
        if (fs::exists(glare)) s.glare_mask = load_dat1(glare.string());
        if (fs::exists(streak)) s.streak_mask = load_dat1(streak.string());
        out.push_back(std::move(s));
    }
    return out;
}

void write_ppm(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || (image.dim(0) != 3 && image.dim(0) != 1))
        throw ShapeError("write_ppm: expected {3,H,W} or {1,H,W}, got " + shape_to_string(image.shape()));
    const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2), hw = h * w;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_ppm: cannot write " + path);
    out << (c == 3 ? "P6" : "P5") << '\n' << w << ' ' << h << "\n255\n";
    for (std::size_t p = 0; p < hw; ++p)
        for (std::size_t k = 0; k < c; ++k)
            out.put(static_cast<char>(static_cast<unsigned char>(std::lround(clamp01(image[k * hw + p]) * 255.0))));
}

Tensor read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_ppm: cannot open " + path);
    std::string magic;
    std::size_t w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    in.get();
    if ((magic != "P6" && magic != "P5") || maxval != 255) throw std::runtime_error("read_ppm: unsupported file " + path);
    const std::size_t c = magic == "P6" ? 3 : 1, hw = h * w;
    Tensor out({c, h, w});
    for (std::size_t p = 0; p < hw; ++p)
        for (std::size_t k = 0; k < c; ++k) {
            const int v = in.get();
            if (v < 0) throw std::runtime_error("read_ppm: truncated " + path);
            out[k * hw + p] = static_cast<double>(v) / 255.0;
        }
    return out;
}

}  // namespace radscan
