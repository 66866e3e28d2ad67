#include "radscan/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "radscan/numerics.hpp"

namespace radscan {

void write_sources(std::ostream& out, const SourceSet& s) {
    out << s.size() << '\n';
    out.precision(17);
    for (std::size_t k = 0; k < s.size(); ++k) {
        out << s.centers[k].x << ' ' << s.centers[k].y << ' ' << s.confidences[k] << '\n';
    }
}

SourceSet read_sources(std::istream& in) {
    std::size_t k = 0;
    if (!(in >> k)) throw std::runtime_error("source file: missing count");
    SourceSet s;
    for (std::size_t i = 0; i < k; ++i) {
        Point p;
        double conf = 0.0;
        if (!(in >> p.x >> p.y >> conf)) throw std::runtime_error("source file: truncated entry");
        s.add(p, conf);
    }
    return s;
}

void save_sources(const std::string& path, const SourceSet& s) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_sources(out, s);
}

SourceSet load_sources(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    return read_sources(in);
}

// ---------------------------------------------------------------------------

DistanceField compute_distance_map(const SourceSet& sources, std::size_t h, std::size_t w) {
    DistanceField field{h, w, std::vector<double>(h * w, kInfiniteDistance)};
    if (sources.empty()) return field;

    std::vector<std::pair<long, long>> grid;  // (col, row)
    grid.reserve(sources.size());
    for (const Point& c : sources.centers) {
        const long col = std::lround(c.x);
        const long row = std::lround(c.y);
        if (col < 0 || row < 0 || col >= static_cast<long>(w) || row >= static_cast<long>(h)) {
            throw std::invalid_argument("compute_distance_map: center (" + std::to_string(c.x) +
                                        ", " + std::to_string(c.y) + ") outside " +
                                        std::to_string(h) + "x" + std::to_string(w) + " grid");
        }
        grid.emplace_back(col, row);
    }
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            long best = std::numeric_limits<long>::max();
            for (const auto& [gc, gr] : grid) {
                const long dx = static_cast<long>(c) - gc;
                const long dy = static_cast<long>(r) - gr;
                best = std::min(best, dx * dx + dy * dy);
            }
            field.values[r * w + c] = std::sqrt(static_cast<double>(best));
        }
    }
    return field;
}

RadialPlan RadialPlan::raster(std::size_t h, std::size_t w) {
    RadialPlan plan{h, w, std::vector<std::uint32_t>(h * w), {}};
    std::iota(plan.forward.begin(), plan.forward.end(), 0u);
    plan.inverse = plan.forward;
    return plan;
}

RadialPlan build_radial_plan(const DistanceField& dist) {
    RadialPlan plan = RadialPlan::raster(dist.h, dist.w);
    std::stable_sort(plan.forward.begin(), plan.forward.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return dist.values[a] > dist.values[b]; });
    for (std::size_t i = 0; i < plan.forward.size(); ++i) {
        plan.inverse[plan.forward[i]] = static_cast<std::uint32_t>(i);
    }
    return plan;
}

namespace {

struct FieldDims {
    std::size_t c, h, w;
};

FieldDims field_dims(const Tensor& field, const char* what) {
    if (field.rank() == 2) return {1, field.dim(0), field.dim(1)};
    if (field.rank() == 3) return {field.dim(0), field.dim(1), field.dim(2)};
    throw ShapeError(std::string(what) + ": expected (C,H,W) or (H,W), got " +
                     shape_to_string(field.shape()));
}

}  // namespace

Tensor radial_unfold(const Tensor& field, const RadialPlan& plan) {
    const FieldDims d = field_dims(field, "radial_unfold");
    if (d.h != plan.h || d.w != plan.w) {
        throw ShapeError("radial_unfold: field " + shape_to_string(field.shape()) +
                         " does not match plan " + std::to_string(plan.h) + "x" +
                         std::to_string(plan.w));
    }
    const std::size_t L = plan.length();
    Tensor seq({L, d.c});
    for (std::size_t i = 0; i < L; ++i) {
        const std::size_t p = plan.forward[i];
        for (std::size_t c = 0; c < d.c; ++c) seq[i * d.c + c] = field[c * L + p];
    }
    return seq;
}

Tensor radial_fold(const Tensor& seq, const RadialPlan& plan) {
    if (seq.rank() != 2 || seq.dim(0) != plan.length()) {
        throw ShapeError("radial_fold: sequence " + shape_to_string(seq.shape()) +
                         " does not match plan length " + std::to_string(plan.length()));
    }
    const std::size_t L = plan.length();
    const std::size_t channels = seq.dim(1);
    Tensor field({channels, plan.h, plan.w});
    for (std::size_t i = 0; i < L; ++i) {
        const std::size_t p = plan.forward[i];
        for (std::size_t c = 0; c < channels; ++c) field[c * L + p] = seq[i * channels + c];
    }
    return field;
}

// ---------------------------------------------------------------------------

Tensor gaussian_heatmap(const SourceSet& sources, std::size_t h, std::size_t w, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_heatmap: sigma must be positive");
    Tensor heat({1, h, w});
    const double denom = 2.0 * sigma * sigma;
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            double best = 0.0;
            for (const Point& p : sources.centers) {
                const double dx = static_cast<double>(c) - p.x;
                const double dy = static_cast<double>(r) - p.y;
                best = std::max(best, std::exp(-(dx * dx + dy * dy) / denom));
            }
            heat[r * w + c] = best;
        }
    }
    return heat;
}

SourceSet nms_peaks(const Tensor& heatmap, double threshold, std::size_t window) {
    const FieldDims d = field_dims(heatmap, "nms_peaks");
    if (d.c != 1) throw ShapeError("nms_peaks: expected a single-channel map");
    if (window < 3 || window % 2 == 0) throw std::invalid_argument("nms_peaks: window must be odd and >= 3");
    const long half = static_cast<long>(window / 2);
    const long H = static_cast<long>(d.h);
    const long W = static_cast<long>(d.w);
    SourceSet peaks;
    for (long r = 0; r < H; ++r) {
        for (long c = 0; c < W; ++c) {
            const double v = heatmap[static_cast<std::size_t>(r * W + c)];
            if (v < threshold) continue;
            bool keep = true;
            for (long rr = std::max(0L, r - half); keep && rr <= std::min(H - 1, r + half); ++rr) {
                for (long cc = std::max(0L, c - half); cc <= std::min(W - 1, c + half); ++cc) {
                    const double n = heatmap[static_cast<std::size_t>(rr * W + cc)];
                    const bool earlier = rr * W + cc < r * W + c;
                    if (n > v || (n == v && earlier)) {
                        keep = false;
                        break;
                    }
                }
            }
            if (keep) peaks.add({static_cast<double>(c), static_cast<double>(r)}, v);
        }
    }
    return peaks;
}

Tensor threshold_mask(const Tensor& prob, double tau) {
    Tensor mask(prob.shape());
    for (std::size_t i = 0; i < prob.size(); ++i) mask[i] = prob[i] >= tau ? 1.0 : 0.0;
    return mask;
}

// ---------------------------------------------------------------------------

PriorBundle downsample_priors(const PriorBundle& bundle, std::size_t levels) {
    PriorBundle out;
    out.full = bundle.full;
    PriorLevel cur = bundle.full;
    for (std::size_t l = 0; l < levels; ++l) {
        PriorLevel next;
        for (const Tensor* t : {&cur.p_flare, &cur.p_mask}) {
            if (!t->empty() && (t->dim(t->rank() - 1) % 2 != 0 || t->dim(t->rank() - 2) % 2 != 0)) {
                throw ShapeError("downsample_priors: extents " + shape_to_string(t->shape()) +
                                 " not divisible by 2^" + std::to_string(levels));
            }
        }
        if (cur.has_flare()) next.p_flare = avg_pool2(cur.p_flare);
        if (cur.has_mask()) next.p_mask = max_pool2(cur.p_mask);
        for (std::size_t k = 0; k < cur.p_position.size(); ++k) {
            const Point& p = cur.p_position.centers[k];
            next.p_position.add({std::floor(p.x / 2.0), std::floor(p.y / 2.0)},
                                cur.p_position.confidences[k]);
        }
        out.per_scale.push_back(next);
        cur = std::move(next);
    }
    return out;
}

PriorBundle empty_priors(std::size_t levels) {
    PriorBundle b;
    b.per_scale.resize(levels);
    return b;
}

}  // namespace radscan
