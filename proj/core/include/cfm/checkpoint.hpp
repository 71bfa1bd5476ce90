#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cfm/errors.hpp"
#include "cfm/tensor.hpp"
#include "cfm/trainer.hpp"
#include "cfm/vectorfield.hpp"

namespace cfm {

/// On-disk training state. Little-endian binary: magic "CFMC", u32 version,
/// u64 config-blob length + structured-text config, u64 step, then repeated
/// tensor records {u32 name length, name bytes, u32 ndim, u64 dims...,
/// float32 data row-major}. Optimizer moments are parallel records whose
/// names carry ".m"/".v" suffixes.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::string config_text;
    std::uint64_t step = 0;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(const std::string& name) const {
        for (const auto& [n, t] : tensors) {
            if (n == name) return &t;
        }
        return nullptr;
    }
};

namespace detail {

template <class V>
void write_pod(std::ostream& os, V v) {
    static_assert(std::is_trivially_copyable_v<V>);
    os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <class V>
V read_pod(std::istream& is, const char* what) {
    V v;
    is.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!is) throw IoError(std::string("checkpoint: truncated while reading ") + what);
    return v;
}

inline void write_tensor_record(std::ostream& os, const std::string& name,
                                const Tensor& t) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) write_pod<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("checkpoint: cannot open for writing: " + path);
    os.write("CFMC", 4);
    detail::write_pod<std::uint32_t>(os, Checkpoint::kVersion);
    detail::write_pod<std::uint64_t>(os, ckpt.config_text.size());
    os.write(ckpt.config_text.data(), static_cast<std::streamsize>(ckpt.config_text.size()));
    detail::write_pod<std::uint64_t>(os, ckpt.step);
    for (const auto& [name, t] : ckpt.tensors) detail::write_tensor_record(os, name, t);
    if (!os) throw IoError("checkpoint: write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "CFMC", 4) != 0) {
        throw IoError("checkpoint: bad magic in " + path);
    }
    const auto version = detail::read_pod<std::uint32_t>(is, "version");
    if (version != Checkpoint::kVersion) {
        throw IoError("checkpoint: unsupported version " + std::to_string(version));
    }
    Checkpoint ckpt;
    const auto cfg_len = detail::read_pod<std::uint64_t>(is, "config length");
    ckpt.config_text.resize(cfg_len);
    is.read(ckpt.config_text.data(), static_cast<std::streamsize>(cfg_len));
    if (!is) throw IoError("checkpoint: truncated config blob");
    ckpt.step = detail::read_pod<std::uint64_t>(is, "step");

    while (true) {
        std::uint32_t name_len;
        is.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
        if (is.eof()) break;
        if (!is) throw IoError("checkpoint: truncated record header");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const auto ndim = detail::read_pod<std::uint32_t>(is, "rank");
        std::vector<std::size_t> shape;
        std::size_t numel = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            const auto ext = detail::read_pod<std::uint64_t>(is, "extent");
            shape.push_back(static_cast<std::size_t>(ext));
            numel *= static_cast<std::size_t>(ext);
        }
        std::vector<float> data(numel);
        is.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(numel * sizeof(float)));
        if (!is) throw IoError("checkpoint: truncated payload for " + name);
        ckpt.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return ckpt;
}

/// Serializes model parameters and optimizer moments (cast to float32).
template <class T>
Checkpoint make_checkpoint(const VectorFieldModel<T>& model, const AdamState<T>* opt,
                           std::uint64_t step, std::string config_text) {
    Checkpoint ckpt;
    ckpt.config_text = std::move(config_text);
    ckpt.step = step;
    for (const auto& [name, t] : model.params) {
        ckpt.tensors.emplace_back(name, t.template cast<float>());
    }
    if (opt) {
        for (std::size_t p = 0; p < model.params.size(); ++p) {
            ckpt.tensors.emplace_back(model.params[p].first + ".m",
                                      opt->m[p].template cast<float>());
            ckpt.tensors.emplace_back(model.params[p].first + ".v",
                                      opt->v[p].template cast<float>());
        }
    }
    return ckpt;
}

/// Restores parameters (and moments when `opt` is non-null, e.g. to resume).
/// The stored config text must match `expected_config_text` byte for byte.
template <class T>
void restore_checkpoint(const Checkpoint& ckpt, const std::string& expected_config_text,
                        VectorFieldModel<T>& model, AdamState<T>* opt) {
    if (ckpt.config_text != expected_config_text) {
        throw UsageError("checkpoint: stored config does not match the requested one");
    }
    for (auto& [name, t] : model.params) {
        const Tensor* stored = ckpt.find(name);
        if (!stored) throw IoError("checkpoint: missing tensor " + name);
        if (stored->shape() != t.shape()) {
            throw IoError("checkpoint: shape mismatch for " + name);
        }
        t = stored->cast<T>();
    }
    if (opt) {
        for (std::size_t p = 0; p < model.params.size(); ++p) {
            const std::string& base = model.params[p].first;
            const Tensor* m = ckpt.find(base + ".m");
            const Tensor* v = ckpt.find(base + ".v");
            if (!m || !v) throw IoError("checkpoint: missing optimizer moments for " + base);
            opt->m[p] = m->cast<T>();
            opt->v[p] = v->cast<T>();
        }
        opt->step = ckpt.step;
    }
}

}  // namespace cfm
