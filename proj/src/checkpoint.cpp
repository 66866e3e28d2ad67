#include "radscan/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace radscan {

void Checkpoint::set_meta(const std::string& key, const std::string& value) {
    if (key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos)
        throw std::invalid_argument("Checkpoint: metadata may not contain newlines or spaces in keys");
    for (auto& [k, v] : meta)
        if (k == key) {
            v = value;
            return;
        }
    meta.emplace_back(key, value);
}

const std::string& Checkpoint::meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta)
        if (k == key) return v;
    throw std::runtime_error("checkpoint has no metadata entry '" + key + "'");
}

bool Checkpoint::has_meta(const std::string& key) const {
    for (const auto& kv : meta)
        if (kv.first == key) return true;
    return false;
}

const Tensor& Checkpoint::tensor(const std::string& name) const {
    for (const auto& [k, t] : tensors)
        if (k == name) return t;
    throw std::runtime_error("checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
    for (const auto& kv : tensors)
        if (kv.first == name) return true;
    return false;
}

void Checkpoint::write(std::ostream& out) const {
    out << "CKPT1 " << iteration << '\n';
    for (const auto& [k, v] : meta) out << "META " << k << ' ' << v << '\n';
    out << "RNG " << rng_state.size() << '\n';
    out.write(rng_state.data(), static_cast<std::streamsize>(rng_state.size()));
    out << '\n';
    for (const auto& [name, t] : tensors) {
        out << "TENSOR " << name << '\n';
        write_dat1(out, t, Precision::f64);
    }
    out << "END\n";
}

Checkpoint Checkpoint::read(std::istream& in) {
    Checkpoint ck;
    std::string tag;
    if (!(in >> tag) || tag != "CKPT1") throw std::runtime_error("not a CKPT1 checkpoint");
    in >> ck.iteration;
    in.get();
    while (in >> tag) {
        if (tag == "META") {
            std::string key, value;
            in >> key;
            in.get();
            std::getline(in, value);
            ck.meta.emplace_back(key, value);
        } else if (tag == "RNG") {
            std::size_t n = 0;
            in >> n;
            in.get();
            ck.rng_state.resize(n);
            in.read(ck.rng_state.data(), static_cast<std::streamsize>(n));
            in.get();
        } else if (tag == "TENSOR") {
            std::string name;
            in >> name;
            in.get();
            ck.tensors.emplace_back(name, read_dat1(in));
        } else if (tag == "END") {
            return ck;
        } else {
            throw std::runtime_error("checkpoint: unexpected record '" + tag + "'");
        }
        if (!in) break;
    }
    throw std::runtime_error("checkpoint: truncated file");
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    write(out);
    if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    return read(in);
}

}  // namespace radscan
