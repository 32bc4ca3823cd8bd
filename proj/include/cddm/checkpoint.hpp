#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "cddm/train.hpp"

namespace cddm {

// Checkpoint container, all integers and floats little-endian:
//
//   magic "CDDMCKPT" | u32 version | u64 config hash
//   architecture     u32 signal_dim, hidden, blocks, embed_dim
//   schedule         u32 T | f64 alpha_first | f64 alpha_last | u32 t_max
//   training config  u32 channel | u32 source | u32 len + bytes corpus path | i64 steps |
//                    u32 batch | u64 seed | f64 lr base | i64 warmup | i64 total | f64 lr min |
//                    f64 beta1 | f64 beta2 | f64 epsilon | u32 weighting
//   progress         i64 completed steps | i64 optimizer step
//   tensors          u64 n | f64[n] weights | f64[n] first moment | f64[n] second moment
inline constexpr std::string_view kCheckpointMagic = "CDDMCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const TrainingState& state);
TrainingState load_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const TrainingState& state);
TrainingState decode_checkpoint(std::string_view bytes, std::string_view origin = "<memory>");

}  // namespace cddm
