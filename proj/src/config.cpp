#include "radscan/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace radscan {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const auto* end = text.data() + text.size();
    const auto r = std::from_chars(text.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end)
        throw std::invalid_argument("config: invalid value '" + text + "' for key '" + key + "'");
    return v;
}

std::size_t positive(const std::string& key, const std::string& text) {
    const auto v = parse_number<std::size_t>(key, text);
    if (v == 0) throw std::invalid_argument("config: '" + key + "' must be positive");
    return v;
}

}  // namespace

void set_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
    if (key == "channels") c.channels = positive(key, value);
    else if (key == "d_state") c.d_state = positive(key, value);
    else if (key == "groups") {
        c.groups = positive(key, value);
        if (c.groups % 2 == 0) throw std::invalid_argument("config: 'groups' must be odd");
    } else if (key == "lr") {
        c.lr = parse_number<double>(key, value);
        if (!(c.lr > 0.0)) throw std::invalid_argument("config: 'lr' must be positive");
    } else if (key == "iterations") c.iterations = positive(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "dataset") c.dataset = value;
    else if (key == "fpn_channels") c.fpn_channels = positive(key, value);
    else if (key == "log_interval") c.log_interval = positive(key, value);
    else if (key == "identity_init") {
        if (value != "0" && value != "1") throw std::invalid_argument("config: 'identity_init' must be 0 or 1");
        c.identity_init = value == "1";
    }
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

TrainConfig parse_config(std::istream& in) {
    TrainConfig c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not key=value");
        set_config_value(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

TrainConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    return parse_config(in);
}

std::string describe(const TrainConfig& c) {
    std::ostringstream out;
    out.precision(17);
    out << "channels=" << c.channels << "\nd_state=" << c.d_state << "\ngroups=" << c.groups << "\nlr=" << c.lr
        << "\niterations=" << c.iterations << "\nseed=" << c.seed << "\ndataset=" << c.dataset
        << "\nfpn_channels=" << c.fpn_channels << "\nlog_interval=" << c.log_interval
        << "\nidentity_init=" << (c.identity_init ? 1 : 0) << '\n';
    return out.str();
}

}  // namespace radscan
