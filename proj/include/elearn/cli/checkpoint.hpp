#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "elearn/cli/config.hpp"
#include "elearn/codebook/codebook.hpp"
#include "elearn/landscape/gnfpe.hpp"

namespace elearn::cli {

// File layout: the 8-byte magic "ELCKPT01", the manifest length as a
// little-endian uint64, the compact JSON manifest, then every parameter as
// raw little-endian float64 in manifest order.
inline constexpr char kCheckpointMagic[] = "ELCKPT01";
inline constexpr int kCheckpointVersion = 1;

struct CheckpointData {
  Json config;  // snapshot of the experiment config
  std::string config_hash;
  std::uint64_t seed = 0;
  codebook::CodebookModel codebook;
  std::optional<landscape::FpeModel> fpe;  // absent after stage 1 only
};

std::string checkpoint_bytes(CheckpointData& data);
void save_checkpoint(const std::filesystem::path& path, CheckpointData& data);

CheckpointData parse_checkpoint(const std::string& bytes);
CheckpointData load_checkpoint(const std::filesystem::path& path);

// Loads the encoder, decoder and codebook of a checkpoint and marks them
// non-trainable. Throws when the stored input layout differs from `expected`.
codebook::CodebookModel import_frozen(const std::filesystem::path& path, const codebook::InputSpec& expected);

}  // namespace elearn::cli
