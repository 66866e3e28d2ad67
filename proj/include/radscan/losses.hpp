#pragma once

#include <string>
#include <utility>
#include <vector>

#include "radscan/tensor.hpp"

namespace radscan {

inline constexpr double kCharbonnierEps = 1e-3;
inline constexpr double kWeakThreshold = 0.15;
inline constexpr double kFocalAlpha = 2.0;
inline constexpr double kFocalBeta = 4.0;
inline constexpr double kProbClamp = 1e-6;

/// Scalar loss and its gradient with respect to the prediction.
struct LossValue {
    double value = 0.0;
    Tensor grad;
};

/// mean sqrt((pred - gt)^2 + eps^2)
LossValue charbonnier(const Tensor& pred, const Tensor& gt, double eps = kCharbonnierEps);

/// mean W * BCE(pred, gt) with W = min(1, 4|pred - gt|) held constant in the
/// gradient. Predictions are clamped to [1e-6, 1 - 1e-6].
LossValue weighted_bce_err(const Tensor& pred, const Tensor& gt);

/// mean |pred - gt| over pixels with gt < threshold; 0 when there are none.
LossValue weak_region_l1(const Tensor& pred, const Tensor& gt, double threshold = kWeakThreshold);

/// Penalty-reduced focal loss over a keypoint heatmap. Positives are gt == 1;
/// the sum is divided by their count, or by 1 when there are none.
LossValue focal_heatmap_loss(const Tensor& pred, const Tensor& gt, double alpha = kFocalAlpha,
                             double beta = kFocalBeta);

LossValue l1_loss(const Tensor& pred, const Tensor& gt);

struct LossReport {
    double total = 0.0;
    std::vector<std::pair<std::string, double>> components;

    double component(const std::string& name) const;
    double component_sum() const;
};

struct FpnLoss {
    LossReport report;  // char, err, weak, hm
    Tensor d_flare;
    Tensor d_heat;
};

FpnLoss fpn_loss(const Tensor& pred_flare, const Tensor& gt_flare, const Tensor& pred_heat,
                 const Tensor& gt_heat);

struct MainLoss {
    LossReport report;  // l1, vgg_slot, rec
    Tensor d_pred;      // {6,H,W}
};

/// pred is {6,H,W}: channels 0-2 the clean estimate, 3-5 the flare estimate.
/// The recomposition term compares clamp(clean + flare, 0, 1) with the input.
MainLoss main_loss(const Tensor& pred, const Tensor& gt_clean, const Tensor& gt_flare, const Tensor& input);

/// Channel slices of a {6,H,W} prediction.
Tensor clean_head(const Tensor& pred);
Tensor flare_head(const Tensor& pred);

}  // namespace radscan
