#include "radscan/evaluation.hpp"

#include <cmath>
#include <limits>

#include "radscan/losses.hpp"
#include "radscan/metrics.hpp"

namespace radscan {

Tensor clean_region_mask(const SceneSample& s) {
    const Tensor gt = s.clean_target();
    const std::size_t h = gt.dim(1), w = gt.dim(2), hw = h * w;
    Tensor out({1, h, w});
    for (std::size_t i = 0; i < hw; ++i) {
        if (s.mask[i] != 0.0) continue;
        bool clean = true;
        for (std::size_t c = 0; c < 3; ++c) clean &= std::abs(s.input[c * hw + i] - gt[c * hw + i]) < kCleanRegionTolerance;
        out[i] = clean ? 1.0 : 0.0;
    }
    return out;
}

namespace {

double region_psnr(const Tensor& a, const Tensor& b, const Tensor& mask) {
    for (double v : mask.data())
        if (v != 0.0) return masked_psnr(a, b, mask);
    return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

SampleScores score_restoration(const SceneSample& s, const Tensor& restored) {
    const Tensor gt = s.clean_target();
    require_same_shape(restored, gt, "score_restoration");
    SampleScores out;
    out.psnr = psnr(restored, gt);
    out.ssim = ssim(restored, gt);
    out.light_psnr = region_psnr(restored, gt, s.mask);
    out.clean_psnr = region_psnr(restored, gt, clean_region_mask(s));
    out.glare_psnr = region_psnr(restored, gt, s.glare_mask);
    out.streak_psnr = region_psnr(restored, gt, s.streak_mask);
    return out;
}

const char* ablation_name(Ablation a) {
    switch (a) {
        case Ablation::full: return "full";
        case Ablation::no_unfold: return "w/o unfold";
        case Ablation::no_hb: return "w/o HB";
        case Ablation::no_rse: return "w/o RSE";
    }
    return "?";
}

const std::vector<Ablation>& all_ablations() {
    static const std::vector<Ablation> all{Ablation::full, Ablation::no_unfold, Ablation::no_hb, Ablation::no_rse};
    return all;
}

PriorBundle ablate(PriorBundle b, Ablation a) {
    auto strip = [a](PriorLevel& l) {
        if (a == Ablation::no_unfold) l.p_position = SourceSet{};
        if (a == Ablation::no_hb) l.p_mask = Tensor{};
        if (a == Ablation::no_rse) l.p_flare = Tensor{};
    };
    strip(b.full);
    for (PriorLevel& l : b.per_scale) strip(l);
    return b;
}

Tensor Restorer::restore(const Tensor& input, Ablation a) const {
    const PriorBundle priors = ablate(fpn_infer_priors(fpn, input, main.config.levels()), a);
    return clean_head(main_forward(main, input, priors));
}

double finite_mean(const std::vector<double>& values) {
    double s = 0.0;
    std::size_t n = 0;
    for (double v : values)
        if (std::isfinite(v)) {
            s += v;
            ++n;
        }
    return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace radscan
