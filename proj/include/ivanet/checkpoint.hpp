#pragma once

#include <filesystem>

#include "ivanet/params.hpp"

namespace ivanet {

/// Binary layout, little-endian:
///   "IVNT0001" | u64 tensor count
///   per tensor: u32 name length | name | u32 rank | u64 dims[rank] | f64 values
///   u64 training step | u64 config length | config text
struct Checkpoint {
    ParamMap tensors;
    std::uint64_t step = 0;
    std::string config;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws ParseError with the byte offset of the first malformed field.
Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& source = "<checkpoint>");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ivanet
