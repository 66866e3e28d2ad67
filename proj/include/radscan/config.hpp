#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>

namespace radscan {

/// Plain key=value training configuration. Blank lines and '#' comments are
/// ignored; unknown keys are rejected.
struct TrainConfig {
    std::size_t channels = 8;
    std::size_t d_state = 4;
    std::size_t groups = 3;
    double lr = 1e-3;
    std::size_t iterations = 500;
    std::uint64_t seed = 1;
    std::string dataset;
    std::size_t fpn_channels = 8;
    std::size_t log_interval = 10;
    bool identity_init = false;
};

TrainConfig parse_config(std::istream& in);
TrainConfig load_config(const std::string& path);
/// Applies one key=value assignment.
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);
/// Canonical key=value rendering, one per line.
std::string describe(const TrainConfig& config);

}  // namespace radscan
