#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "radscan/tensor.hpp"

namespace radscan {

/// Training snapshot: header `CKPT1 <iter>`, `META key value` lines, the
/// generator state, then named DAT1 blocks (f64, so reloading is exact).
struct Checkpoint {
    std::size_t iteration = 0;
    std::vector<std::pair<std::string, std::string>> meta;
    std::string rng_state;
    std::vector<std::pair<std::string, Tensor>> tensors;

    void set_meta(const std::string& key, const std::string& value);
    /// Throws std::runtime_error naming the key when absent.
    const std::string& meta_value(const std::string& key) const;
    bool has_meta(const std::string& key) const;

    void add(const std::string& name, const Tensor& t) { tensors.emplace_back(name, t); }
    const Tensor& tensor(const std::string& name) const;
    bool has(const std::string& name) const;

    void write(std::ostream& out) const;
    static Checkpoint read(std::istream& in);
    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Stores every parameter of `model` under "param/<name>".
template <typename M>
void store_params(Checkpoint& ck, M& model, const std::string& prefix = "param/") {
    model.visit([&](const std::string& name, Tensor& t) { ck.add(prefix + name, t); });
}

/// Loads parameters written by store_params; shapes must match.
template <typename M>
void restore_params(const Checkpoint& ck, M& model, const std::string& prefix = "param/") {
    model.visit([&](const std::string& name, Tensor& t) {
        const Tensor& src = ck.tensor(prefix + name);
        if (src.shape() != t.shape())
            throw ShapeError("checkpoint tensor " + prefix + name + " has shape " + shape_to_string(src.shape()) +
                             ", model expects " + shape_to_string(t.shape()));
        t = src;
    });
}

}  // namespace radscan
