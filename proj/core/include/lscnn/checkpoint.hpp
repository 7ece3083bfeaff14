#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "lscnn/architecture.hpp"
#include "lscnn/model.hpp"

namespace lscnn {

using Digest = std::array<std::uint8_t, 32>;

// SHA-256 of the canonical structural encoding of the architecture.
Digest spec_digest(const ArchitectureSpec& spec);
std::string digest_hex(const Digest& d);
std::string sha256_hex(std::string_view data);

struct Checkpoint {
  Digest digest{};
  std::int64_t iteration = 0;
  ModelParams<float> tensors;
  std::map<std::string, TensorF> opt_state;  // optional optimizer moments
};

Checkpoint make_checkpoint(const ArchitectureSpec& spec,
                           ModelParams<float> params, std::int64_t iteration);

// File layout (little-endian): magic "LSCN", format-version u32, spec digest
// (32 bytes), tensor count u32, then per tensor: name length u32, UTF-8
// name, rank u32, dims u32 each, dtype tag u8 (0 = 32-bit float), raw data.
// The iteration counter and optimizer moments ride along as reserved-name
// tensors ("__meta__.iteration", "__opt__.<param>").
void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path);

Checkpoint load_checkpoint(const std::filesystem::path& path);

// Also verifies the stored digest against the expected architecture.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const ArchitectureSpec& expected);

}  // namespace lscnn
