#include "radscan/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace radscan {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

LossValue charbonnier(const Tensor& pred, const Tensor& gt, double eps) {
    require_same_shape(pred, gt, "charbonnier");
    if (!(eps > 0.0)) throw std::invalid_argument("charbonnier: eps must be positive");
    const double n = static_cast<double>(pred.size());
    LossValue out{0.0, Tensor(pred.shape())};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - gt[i];
        const double r = std::sqrt(d * d + eps * eps);
        out.value += r - eps;  // excess over the floor, so an exact match gives eps exactly
        out.grad[i] = d / r / n;
    }
    out.value = eps + out.value / n;
    return out;
}

LossValue weighted_bce_err(const Tensor& pred, const Tensor& gt) {
    require_same_shape(pred, gt, "weighted_bce_err");
    const double n = static_cast<double>(pred.size());
    LossValue out{0.0, Tensor(pred.shape())};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double raw = pred[i];
        const double p = std::clamp(raw, kProbClamp, 1.0 - kProbClamp);
        const double y = gt[i];
        const double weight = std::min(1.0, 4.0 * std::abs(raw - y));  // treated as a constant
        out.value += weight * -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        if (raw > kProbClamp && raw < 1.0 - kProbClamp) out.grad[i] = weight * (p - y) / (p * (1.0 - p)) / n;
    }
    out.value /= n;
    return out;
}

LossValue weak_region_l1(const Tensor& pred, const Tensor& gt, double threshold) {
    require_same_shape(pred, gt, "weak_region_l1");
    LossValue out{0.0, Tensor(pred.shape())};
    std::size_t count = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) count += gt[i] < threshold;
    if (count == 0) return out;
    const double n = static_cast<double>(count);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!(gt[i] < threshold)) continue;
        const double d = pred[i] - gt[i];
        out.value += std::abs(d);
        out.grad[i] = sign(d) / n;
    }
    out.value /= n;
    return out;
}

LossValue focal_heatmap_loss(const Tensor& pred, const Tensor& gt, double alpha, double beta) {
    require_same_shape(pred, gt, "focal_heatmap_loss");
    std::size_t positives = 0;
    for (double v : gt.data()) positives += v == 1.0;
    const double norm = positives == 0 ? 1.0 : static_cast<double>(positives);
    LossValue out{0.0, Tensor(pred.shape())};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double raw = pred[i];
        const double p = std::clamp(raw, kProbClamp, 1.0 - kProbClamp);
        const bool inside = raw > kProbClamp && raw < 1.0 - kProbClamp;
        double value, grad;
        if (gt[i] == 1.0) {
            const double q = std::pow(1.0 - p, alpha);
            value = -q * std::log(p);
            grad = alpha * std::pow(1.0 - p, alpha - 1.0) * std::log(p) - q / p;
        } else {
            const double wp = std::pow(1.0 - gt[i], beta);
            const double pa = std::pow(p, alpha);
            value = -wp * pa * std::log(1.0 - p);
            grad = -wp * (alpha * std::pow(p, alpha - 1.0) * std::log(1.0 - p) - pa / (1.0 - p));
        }
        out.value += value;
        out.grad[i] = inside ? grad / norm : 0.0;
    }
    out.value /= norm;
    return out;
}

LossValue l1_loss(const Tensor& pred, const Tensor& gt) {
    require_same_shape(pred, gt, "l1_loss");
    const double n = static_cast<double>(pred.size());
    LossValue out{0.0, Tensor(pred.shape())};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - gt[i];
        out.value += std::abs(d);
        out.grad[i] = sign(d) / n;
    }
    out.value /= n;
    return out;
}

double LossReport::component(const std::string& name) const {
    for (const auto& [k, v] : components)
        if (k == name) return v;
    throw std::out_of_range("LossReport: no component " + name);
}

double LossReport::component_sum() const {
    double s = 0.0;
    for (const auto& c : components) s += c.second;
    return s;
}

FpnLoss fpn_loss(const Tensor& pred_flare, const Tensor& gt_flare, const Tensor& pred_heat, const Tensor& gt_heat) {
    const LossValue c = charbonnier(pred_flare, gt_flare);
    const LossValue e = weighted_bce_err(pred_flare, gt_flare);
    const LossValue w = weak_region_l1(pred_flare, gt_flare);
    const LossValue h = focal_heatmap_loss(pred_heat, gt_heat);
    FpnLoss out;
    out.report.components = {{"char", c.value}, {"err", e.value}, {"weak", w.value}, {"hm", h.value}};
    out.report.total = out.report.component_sum();
    out.d_flare = c.grad + e.grad + w.grad;
    out.d_heat = h.grad;
    return out;
}

namespace {

Tensor channel_slice(const Tensor& pred, std::size_t first) {
    const std::size_t hw = pred.dim(1) * pred.dim(2);
    Tensor out({3, pred.dim(1), pred.dim(2)});
    std::copy_n(pred.data().begin() + static_cast<std::ptrdiff_t>(first * hw), 3 * hw, out.data().begin());
    return out;
}

void require_six(const Tensor& pred) {
    if (pred.rank() != 3 || pred.dim(0) != 6)
        throw ShapeError("main_loss: prediction must be {6,H,W}, got " + shape_to_string(pred.shape()));
}

}  // namespace

Tensor clean_head(const Tensor& pred) {
    require_six(pred);
    return channel_slice(pred, 0);
}

Tensor flare_head(const Tensor& pred) {
    require_six(pred);
    return channel_slice(pred, 3);
}

MainLoss main_loss(const Tensor& pred, const Tensor& gt_clean, const Tensor& gt_flare, const Tensor& input) {
    require_six(pred);
    const Tensor clean = channel_slice(pred, 0), flare = channel_slice(pred, 3);
    require_same_shape(clean, gt_clean, "main_loss");
    require_same_shape(flare, gt_flare, "main_loss");
    require_same_shape(clean, input, "main_loss");

    const LossValue lc = l1_loss(clean, gt_clean);
    const LossValue lf = l1_loss(flare, gt_flare);
    const double n = static_cast<double>(input.size());
    double rec = 0.0;
    Tensor d_sum(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double s = clean[i] + flare[i];
        const double d = std::clamp(s, 0.0, 1.0) - input[i];
        rec += std::abs(d);
        if (s > 0.0 && s < 1.0) d_sum[i] = sign(d) / n;
    }
    rec /= n;

    MainLoss out;
    out.report.components = {{"l1", lc.value + lf.value}, {"vgg_slot", 0.0}, {"rec", rec}};
    out.report.total = out.report.component_sum();
    out.d_pred = Tensor(pred.shape());
    const std::size_t m = input.size();
    for (std::size_t i = 0; i < m; ++i) {
        out.d_pred[i] = lc.grad[i] + d_sum[i];
        out.d_pred[m + i] = lf.grad[i] + d_sum[i];
    }
    return out;
}

}  // namespace radscan
