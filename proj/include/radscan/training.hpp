#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "radscan/checkpoint.hpp"
#include "radscan/config.hpp"
#include "radscan/fpn.hpp"
#include "radscan/losses.hpp"
#include "radscan/main_net.hpp"
#include "radscan/synthesis.hpp"

namespace radscan {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Tensor> m, v;
    std::size_t step = 0;
};

/// One bias-corrected adaptive-moment update. Moments are created on first use.
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, AdamState& state,
               double lr, const AdamConfig& config = {});

/// Base rate for the first half of the run, half of it afterwards.
double scheduled_lr(double base, std::size_t iteration, std::size_t total);

struct LossRow {
    std::size_t iteration = 0;
    LossReport report;
};

struct TrainRun {
    Checkpoint checkpoint;
    std::vector<LossRow> rows;  // one per executed iteration
};

struct TrainOptions {
    const Checkpoint* resume = nullptr;
    /// Stop (and checkpoint) before this iteration; the schedule still follows
    /// the configured total.
    std::size_t stop_at = std::numeric_limits<std::size_t>::max();
};

FpnConfig fpn_config_for(const TrainConfig& config);
MainConfig main_config_for(const TrainConfig& config);

TrainRun train_fpn(const TrainConfig& config, const std::vector<SceneSample>& data, const TrainOptions& options = {});

/// The prior network is loaded from `fpn_checkpoint` and never updated; its
/// priors are computed without a tape. A null checkpoint is rejected.
TrainRun train_main(const TrainConfig& config, const std::vector<SceneSample>& data,
                    const Checkpoint* fpn_checkpoint, const TrainOptions& options = {});

FpnModel fpn_from_checkpoint(const Checkpoint& ck);
MainModel main_from_checkpoint(const Checkpoint& ck);

/// Mean total loss over the first (head) or last (tail) window of rows, with
/// window = clamp(rows/10, 1, 50).
double smoothed_loss(const std::vector<LossRow>& rows, bool tail);

/// TSV with one row per logging interval (the last may be partial) holding
/// interval means, labelled by the interval's last iteration.
void write_loss_curve(const std::string& path, const std::vector<LossRow>& rows, std::size_t interval);

}  // namespace radscan
