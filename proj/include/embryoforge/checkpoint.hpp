#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "embryoforge/models.hpp"
#include "embryoforge/nn.hpp"
#include "embryoforge/rng.hpp"

namespace embryoforge {

/// Binary layout, little-endian throughout:
///   "NNCK" u32 version=1
///   u32 tensor_count, then per tensor:
///     u16 name_len, name, u8 dtype (0 f32, 1 f64), u8 rank, u32 dims[rank], raw data
///   u32 block_count, then per block:
///     u16 name_len, name, u32 payload_len, payload
struct Checkpoint {
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::vector<std::pair<std::string, std::string>> blocks;

  const Tensor* find_tensor(std::string_view name) const;
  const std::string* find_block(std::string_view name) const;
  void put_block(std::string name, std::string payload);
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws CheckpointError naming the offending record.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Stores a network under `role`: "<role>.param.<name>" and
/// "<role>.buffer.<name>" tensors, a "<role>.topology" block and, given an
/// optimizer state, "<role>.adam.m/v.<name>" tensors plus a "<role>.adam"
/// block.
void pack_network(Checkpoint& ckpt, std::string_view role, const Network& net,
                  const AdamState* adam = nullptr);
Network unpack_network(const Checkpoint& ckpt, std::string_view role);
/// Optimizer state aligned with `net`'s parameters; nullopt if none stored.
std::optional<AdamState> unpack_adam(const Checkpoint& ckpt, std::string_view role,
                                     const Network& net);

/// "rng.<stream>" blocks plus "rng.master".
void pack_rng(Checkpoint& ckpt, const RngStreams& streams);
RngStreams unpack_rng(const Checkpoint& ckpt);

void pack_iteration(Checkpoint& ckpt, std::int64_t iteration);
std::int64_t unpack_iteration(const Checkpoint& ckpt);

}  // namespace embryoforge
