#pragma once

#include <string>
#include <vector>

#include "radscan/fpn.hpp"
#include "radscan/main_net.hpp"
#include "radscan/synthesis.hpp"

namespace radscan {

/// Pixels counted as flare-free: every channel of the input within this of
/// the clean target, and outside the light-source mask.
inline constexpr double kCleanRegionTolerance = 0.02;

Tensor clean_region_mask(const SceneSample& sample);

/// Region scores are NaN when the region is empty for this sample.
struct SampleScores {
    double psnr = 0.0;
    double ssim = 0.0;
    double light_psnr = 0.0;
    double clean_psnr = 0.0;
    double glare_psnr = 0.0;
    double streak_psnr = 0.0;
};

SampleScores score_restoration(const SceneSample& sample, const Tensor& restored);

/// Which prior mechanism is starved of its input at inference.
enum class Ablation { full, no_unfold, no_hb, no_rse };

const char* ablation_name(Ablation a);
const std::vector<Ablation>& all_ablations();

/// Removes positions (no_unfold), masks (no_hb) or contamination (no_rse)
/// at every level.
PriorBundle ablate(PriorBundle bundle, Ablation a);

struct Restorer {
    FpnModel fpn;
    MainModel main;

    /// Clean head of the main network under (possibly ablated) FPN priors.
    Tensor restore(const Tensor& input, Ablation a = Ablation::full) const;
};

/// Mean of the finite entries; NaN when there are none.
double finite_mean(const std::vector<double>& values);

}  // namespace radscan
