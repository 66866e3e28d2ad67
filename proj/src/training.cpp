#include "radscan/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <stdexcept>

namespace radscan {

void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, AdamState& s,
               double lr, const AdamConfig& c) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
    if (s.m.empty()) {
        for (const Tensor* p : params) {
            s.m.emplace_back(p->shape());
            s.v.emplace_back(p->shape());
        }
    }
    if (s.m.size() != params.size()) throw std::invalid_argument("adam_step: optimizer state does not match parameters");
    ++s.step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Tensor& g = *grads[k];
        require_same_shape(p, g, "adam_step");
        Tensor& m = s.m[k];
        Tensor& v = s.v[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
            p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + c.eps);
        }
    }
}

double scheduled_lr(double base, std::size_t iteration, std::size_t total) {
    return iteration >= total / 2 ? 0.5 * base : base;
}

FpnConfig fpn_config_for(const TrainConfig& config) {
    FpnConfig f;
    f.channels = config.fpn_channels;
    return f;
}

MainConfig main_config_for(const TrainConfig& config) {
    MainConfig m;
    m.channels = config.channels;
    m.d_state = config.d_state;
    m.groups = config.groups;
    m.identity_init = config.identity_init;
    return m;
}

namespace {

template <typename M>
std::vector<Tensor*> param_ptrs(M& model) {
    std::vector<Tensor*> out;
    model.visit([&](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
}

template <typename M>
std::vector<const Tensor*> grad_ptrs(M& grads) {
    std::vector<const Tensor*> out;
    grads.visit([&](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
}

template <typename M>
std::vector<std::string> param_names(M& model) {
    std::vector<std::string> out;
    model.visit([&](const std::string& name, Tensor&) { out.push_back(name); });
    return out;
}

void write_common_meta(Checkpoint& ck, const char* stage, const TrainConfig& c) {
    ck.set_meta("stage", stage);
    ck.set_meta("channels", std::to_string(c.channels));
    ck.set_meta("d_state", std::to_string(c.d_state));
    ck.set_meta("groups", std::to_string(c.groups));
    ck.set_meta("fpn_channels", std::to_string(c.fpn_channels));
    ck.set_meta("identity_init", c.identity_init ? "1" : "0");
    ck.set_meta("iterations", std::to_string(c.iterations));
    ck.set_meta("seed", std::to_string(c.seed));
}

void require_stage(const Checkpoint& ck, const char* stage) {
    if (!ck.has_meta("stage") || ck.meta_value("stage") != stage)
        throw std::invalid_argument(std::string("checkpoint is not a '") + stage + "' checkpoint");
}

std::size_t meta_size(const Checkpoint& ck, const char* key) { return std::stoull(ck.meta_value(key)); }

/// Shared optimization loop. `step(index, grads_out)` runs one sample and
/// returns its loss report, writing parameter gradients into the grad model.
template <typename M, typename StepFn>
TrainRun run_loop(const char* stage, const TrainConfig& config, M& model, std::size_t samples,
                  const TrainOptions& options, StepFn&& step) {
    if (samples == 0) throw std::invalid_argument(std::string("train ") + stage + ": dataset is empty");
    Rng pick(derive_seed(config.seed, 1000));
    AdamState adam;
    std::size_t start = 0;
    const std::vector<std::string> names = param_names(model);
    if (options.resume) {
        const Checkpoint& ck = *options.resume;
        require_stage(ck, stage);
        restore_params(ck, model);
        for (const std::string& n : names) {
            adam.m.push_back(ck.tensor("adam_m/" + n));
            adam.v.push_back(ck.tensor("adam_v/" + n));
        }
        adam.step = meta_size(ck, "adam_step");
        pick.restore(ck.rng_state);
        start = ck.iteration;
    }

    TrainRun run;
    const std::vector<Tensor*> params = param_ptrs(model);
    std::size_t it = start;
    for (; it < config.iterations && it < options.stop_at; ++it) {
        const std::size_t index = static_cast<std::size_t>(pick.below(samples));
        M grads = zeros_like_model(model);
        LossReport report = step(index, grads);
        if (!std::isfinite(report.total))
            throw std::runtime_error(std::string("train ") + stage + ": non-finite loss at iteration " + std::to_string(it));
        adam_step(params, grad_ptrs(grads), adam, scheduled_lr(config.lr, it, config.iterations));
        run.rows.push_back({it, std::move(report)});
    }

    Checkpoint& ck = run.checkpoint;
    ck.iteration = it;
    write_common_meta(ck, stage, config);
    ck.set_meta("adam_step", std::to_string(adam.step));
    ck.rng_state = pick.state();
    store_params(ck, model);
    for (std::size_t k = 0; k < names.size() && k < adam.m.size(); ++k) {
        ck.add("adam_m/" + names[k], adam.m[k]);
        ck.add("adam_v/" + names[k], adam.v[k]);
    }
    return run;
}

}  // namespace

TrainRun train_fpn(const TrainConfig& config, const std::vector<SceneSample>& data, const TrainOptions& options) {
    Rng init(derive_seed(config.seed, 1));
    FpnModel model = FpnModel::init(fpn_config_for(config), init);
    std::vector<Tensor> flare_gt(data.size());
    return run_loop("fpn", config, model, data.size(), options, [&](std::size_t i, FpnModel& grads) {
        const SceneSample& s = data[i];
        if (flare_gt[i].empty()) flare_gt[i] = s.contamination_target();
        FpnTape tape;
        const FpnOutput out = fpn_forward(model, s.input, &tape);
        FpnLoss loss = fpn_loss(out.flare, flare_gt[i], out.heat, s.heatmap);
        grads = fpn_backward(model, tape, loss.d_flare, loss.d_heat);
        return loss.report;
    });
}

TrainRun train_main(const TrainConfig& config, const std::vector<SceneSample>& data, const Checkpoint* fpn_checkpoint,
                    const TrainOptions& options) {
    if (!fpn_checkpoint)
        throw std::invalid_argument("train_main: a trained FPN checkpoint is required (run `train --stage fpn` first)");
    const FpnModel fpn = fpn_from_checkpoint(*fpn_checkpoint);
    const FpnModel frozen = fpn;

    Rng init(derive_seed(config.seed, 2));
    MainModel model = MainModel::init(main_config_for(config), init);
    const std::size_t levels = model.config.levels();
    std::vector<std::optional<PriorBundle>> priors(data.size());
    std::vector<Tensor> clean_gt(data.size()), flare_gt(data.size());

    TrainRun run = run_loop("main", config, model, data.size(), options, [&](std::size_t i, MainModel& grads) {
        const SceneSample& s = data[i];
        if (!priors[i]) {
            priors[i] = fpn_infer_priors(fpn, s.input, levels);
            clean_gt[i] = s.clean_target();
            flare_gt[i] = s.flare_target();
        }
        MainTape tape;
        const Tensor pred = main_forward(model, s.input, *priors[i], &tape);
        MainLoss loss = main_loss(pred, clean_gt[i], flare_gt[i], s.input);
        grads = main_backward(model, tape, loss.d_pred);
        return loss.report;
    });

    // The prior network must leave training bit-identical.
    std::vector<const Tensor*> before, after;
    FpnModel a = fpn, b = frozen;
    a.visit([&](const std::string&, Tensor& t) { after.push_back(&t); });
    b.visit([&](const std::string&, Tensor& t) { before.push_back(&t); });
    for (std::size_t k = 0; k < before.size(); ++k)
        if (!(*before[k] == *after[k])) throw std::logic_error("train_main: prior network parameters changed");
    run.checkpoint.set_meta("fpn_iteration", std::to_string(fpn_checkpoint->iteration));
    return run;
}

FpnModel fpn_from_checkpoint(const Checkpoint& ck) {
    require_stage(ck, "fpn");
    FpnConfig c;
    c.channels = meta_size(ck, "fpn_channels");
    Rng unused(0);
    FpnModel m = FpnModel::init(c, unused);
    restore_params(ck, m);
    return m;
}

MainModel main_from_checkpoint(const Checkpoint& ck) {
    require_stage(ck, "main");
    MainConfig c;
    c.channels = meta_size(ck, "channels");
    c.d_state = meta_size(ck, "d_state");
    c.groups = meta_size(ck, "groups");
    Rng unused(0);
    MainModel m = MainModel::init(c, unused);
    restore_params(ck, m);
    return m;
}

double smoothed_loss(const std::vector<LossRow>& rows, bool tail) {
    if (rows.empty()) throw std::invalid_argument("smoothed_loss: no rows");
    const std::size_t window = std::clamp<std::size_t>(rows.size() / 10, 1, 50);
    double s = 0.0;
    for (std::size_t k = 0; k < window; ++k) s += rows[tail ? rows.size() - window + k : k].report.total;
    return s / static_cast<double>(window);
}

void write_loss_curve(const std::string& path, const std::vector<LossRow>& rows, std::size_t interval) {
    if (interval == 0) throw std::invalid_argument("write_loss_curve: interval must be positive");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write loss curve " + path);
    out.precision(9);
    out << "iteration\ttotal";
    if (!rows.empty())
        for (const auto& c : rows.front().report.components) out << '\t' << c.first;
    out << '\n';
    for (std::size_t begin = 0; begin < rows.size(); begin += interval) {
        const std::size_t end = std::min(rows.size(), begin + interval);
        const double n = static_cast<double>(end - begin);
        double total = 0.0;
        std::vector<double> parts(rows[begin].report.components.size(), 0.0);
        for (std::size_t k = begin; k < end; ++k) {
            total += rows[k].report.total;
            for (std::size_t j = 0; j < parts.size(); ++j) parts[j] += rows[k].report.components[j].second;
        }
        out << rows[end - 1].iteration << '\t' << total / n;
        for (double v : parts) out << '\t' << v / n;
        out << '\n';
    }
}

}  // namespace radscan
