// SPDX-License-Identifier: Apache-2.0
//
// vqcsi — digital CSI feedback simulation for near-field XL-MIMO links
// Copyright (C) 2026 the vqcsi authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef VQCSI_GRAD_PARAM_STORE_HPP
#define VQCSI_GRAD_PARAM_STORE_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "vqcsi/grad/graph.hpp"

namespace vqcsi::grad {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

/// Named model state: trainable parameters (graph leaves) and persistent
/// buffers (running statistics, EMA accumulators). Creation order is the
/// iteration order, which keeps optimizer sweeps deterministic.
template <typename T>
class ParamStore {
  public:
    /// Create-or-get a trainable parameter. `init` runs only on first use.
    NodePtr<T> param(const std::string& name, const std::function<Tensor<T>()>& init) {
        return get(name, init, true);
    }

    /// Create-or-get a non-trainable buffer, mutated in place by its owner.
    NodePtr<T> buffer(const std::string& name, const std::function<Tensor<T>()>& init) {
        return get(name, init, false);
    }

    bool has(const std::string& name) const { return entries_.count(name) != 0; }

    NodePtr<T> at(const std::string& name) const {
        auto it = entries_.find(name);
        require(it != entries_.end(), "param store: unknown name '" + name + "'");
        return it->second.node;
    }

    bool trainable(const std::string& name) const {
        auto it = entries_.find(name);
        require(it != entries_.end(), "param store: unknown name '" + name + "'");
        return it->second.trainable;
    }

    const std::vector<std::string>& names() const { return order_; }

    std::int64_t trainable_scalars() const {
        std::int64_t n = 0;
        for (const auto& name : order_) {
            const auto& e = entries_.at(name);
            if (e.trainable) n += e.node->value.numel();
        }
        return n;
    }

    void clear_grads() {
        for (const auto& name : order_) {
            auto& e = entries_.at(name);
            e.node->grad = Tensor<T>();
            e.node->grad_ready = false;
        }
    }

  private:
    struct Entry {
        NodePtr<T> node;
        bool trainable = false;
    };

    NodePtr<T> get(const std::string& name, const std::function<Tensor<T>()>& init,
                   bool trainable) {
        auto it = entries_.find(name);
        if (it != entries_.end()) {
            require(it->second.trainable == trainable,
                    "param store: trainable/buffer role conflict for '" + name + "'");
            return it->second.node;
        }
        NodePtr<T> node = trainable ? leaf(init(), name) : constant(init());
        node->name = name;
        entries_.emplace(name, Entry{node, trainable});
        order_.push_back(name);
        return node;
    }

    std::unordered_map<std::string, Entry> entries_;
    std::vector<std::string> order_;
};

// --------------------------------------------------------------- checkpoints

/// One named array inside a checkpoint. `kind` tags the owner:
/// 'p' parameter, 'b' buffer, 'm'/'v' optimizer moments.
template <typename T>
struct CheckpointArray {
    char kind = 'p';
    std::string name;
    Tensor<T> tensor;
};

template <typename T>
struct Checkpoint {
    std::map<std::string, std::string> meta;
    std::vector<CheckpointArray<T>> arrays;
};

namespace detail {

inline void write_bytes(std::ofstream& f, const void* p, std::size_t n) {
    f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename U>
void write_pod(std::ofstream& f, U v) {
    write_bytes(f, &v, sizeof(U));
}

inline void write_str(std::ofstream& f, const std::string& s) {
    write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(s.size()));
    write_bytes(f, s.data(), s.size());
}

inline void require_file(bool ok, const std::string& msg) {
    if (!ok) throw file_error(msg);
}

inline void read_bytes(std::ifstream& f, void* p, std::size_t n) {
    f.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    require_file(f.good(), "checkpoint: truncated file");
}

template <typename U>
U read_pod(std::ifstream& f) {
    U v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(U));
    if (!f.good()) throw file_error("checkpoint: truncated file");
    return v;
}

inline std::string read_str(std::ifstream& f) {
    auto n = read_pod<std::uint32_t>(f);
    require_file(n <= (1u << 20), "checkpoint: implausible string length");
    std::string s(n, '\0');
    if (n) read_bytes(f, s.data(), n);
    return s;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const Checkpoint<T>& ck) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw file_error("checkpoint: cannot open for writing: " + path);
    detail::write_bytes(f, "VQCK", 4);
    detail::write_pod<std::uint32_t>(f, 1u);
    detail::write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(ck.meta.size()));
    for (const auto& [k, v] : ck.meta) {
        detail::write_str(f, k);
        detail::write_str(f, v);
    }
    detail::write_pod<std::uint64_t>(f, static_cast<std::uint64_t>(ck.arrays.size()));
    for (const auto& a : ck.arrays) {
        detail::write_pod<std::uint8_t>(f, static_cast<std::uint8_t>(a.kind));
        detail::write_str(f, a.name);
        detail::write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(a.tensor.rank()));
        for (std::size_t i = 0; i < a.tensor.rank(); ++i)
            detail::write_pod<std::uint64_t>(f, static_cast<std::uint64_t>(a.tensor.dim(i)));
        for (std::int64_t i = 0; i < a.tensor.numel(); ++i)
            detail::write_pod<double>(f, static_cast<double>(a.tensor[i]));
    }
    f.flush();
    if (!f.good()) throw file_error("checkpoint: write failed: " + path);
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw file_error("checkpoint: cannot open: " + path);
    char magic[4];
    detail::read_bytes(f, magic, 4);
    detail::require_file(std::memcmp(magic, "VQCK", 4) == 0, "checkpoint: bad magic");
    auto version = detail::read_pod<std::uint32_t>(f);
    detail::require_file(version == 1, "checkpoint: unsupported version");
    Checkpoint<T> ck;
    auto meta_count = detail::read_pod<std::uint32_t>(f);
    for (std::uint32_t i = 0; i < meta_count; ++i) {
        std::string k = detail::read_str(f);
        ck.meta[k] = detail::read_str(f);
    }
    auto array_count = detail::read_pod<std::uint64_t>(f);
    detail::require_file(array_count <= (1u << 20), "checkpoint: implausible array count");
    ck.arrays.reserve(array_count);
    for (std::uint64_t i = 0; i < array_count; ++i) {
        CheckpointArray<T> a;
        a.kind = static_cast<char>(detail::read_pod<std::uint8_t>(f));
        a.name = detail::read_str(f);
        auto rank = detail::read_pod<std::uint32_t>(f);
        detail::require_file(rank <= 8, "checkpoint: implausible tensor rank");
        std::vector<std::int64_t> shape(rank);
        for (auto& d : shape) d = static_cast<std::int64_t>(detail::read_pod<std::uint64_t>(f));
        Tensor<T> t(shape);
        for (std::int64_t j = 0; j < t.numel(); ++j)
            t[j] = static_cast<T>(detail::read_pod<double>(f));
        a.tensor = std::move(t);
        ck.arrays.push_back(std::move(a));
    }
    return ck;
}

/// Stage-then-commit restore of 'p' and 'b' arrays into an existing store.
/// Every store entry must be present in the checkpoint with a matching shape
/// before anything is written, so a mismatch cannot leave partial state.
template <typename T>
void restore_into(ParamStore<T>& store, const Checkpoint<T>& ck) {
    std::unordered_map<std::string, const Tensor<T>*> staged;
    for (const auto& a : ck.arrays)
        if (a.kind == 'p' || a.kind == 'b') staged[a.name] = &a.tensor;
    for (const auto& name : store.names()) {
        auto it = staged.find(name);
        require(it != staged.end(), "checkpoint: missing array '" + name + "'");
        require(it->second->same_shape(store.at(name)->value),
                "checkpoint: shape mismatch for '" + name + "'");
    }
    for (const auto& name : store.names()) store.at(name)->value = *staged.at(name);
}

}  // namespace vqcsi::grad

#endif  // VQCSI_GRAD_PARAM_STORE_HPP
