#pragma once

#include <string>
#include <vector>

#include "esvt/error.hpp"
#include "esvt/tensor.hpp"

namespace esvt {

// Flat container of named float arrays. On disk (all little-endian):
//   magic "ESVT1" (5 bytes), then entries until EOF:
//   u32 name length | name bytes (UTF-8) | u32 rank | u32 extent per axis |
//   f32 data, row-major, product(extents) values.
struct CheckpointEntry {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

void write_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint(const std::string& path);

template <typename S>
CheckpointEntry to_entry(const std::string& name, const Tensor<S>& t) {
    CheckpointEntry e;
    e.name = name;
    e.shape = t.shape();
    e.data.resize(static_cast<size_t>(t.size()));
    for (int64_t i = 0; i < t.size(); ++i) e.data[static_cast<size_t>(i)] = static_cast<float>(t.data()[i]);
    return e;
}

template <typename S>
void load_entry_into(const CheckpointEntry& e, Tensor<S>& t) {
    if (e.shape != t.shape())
        throw CheckpointError("checkpoint entry '" + e.name + "' has shape " + shape_str(e.shape) +
                              ", expected " + shape_str(t.shape()));
    for (size_t i = 0; i < e.data.size(); ++i) t.data()[i] = static_cast<S>(e.data[i]);
}

// Entries must match the expected names one-for-one, in order; mismatches
// report the offending entry.
template <typename S>
void load_named_params(const std::string& path, const std::vector<CheckpointEntry>& entries,
                       std::vector<std::pair<std::string, Tensor<S>>>&& named) {
    for (size_t i = 0; i < named.size(); ++i) {
        if (i >= entries.size())
            throw CheckpointError("'" + path + "' is missing entry '" + named[i].first + "'");
        if (entries[i].name != named[i].first)
            throw CheckpointError("'" + path + "' entry " + std::to_string(i) + " is '" + entries[i].name +
                                  "', expected '" + named[i].first + "'");
        load_entry_into(entries[i], named[i].second);
    }
    if (entries.size() > named.size())
        throw CheckpointError("'" + path + "' has unexpected extra entry '" + entries[named.size()].name + "'");
}

}  // namespace esvt
