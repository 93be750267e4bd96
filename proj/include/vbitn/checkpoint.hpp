#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "vbitn/autodiff/tensor.hpp"
#include "vbitn/networks.hpp"

namespace vbitn {

/// Malformed, truncated, or version-mismatched checkpoint.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[4] = {'V', 'B', 'I', 'T'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Decoded checkpoint contents.
///
/// On-disk layout, all integers little-endian:
///   "VBIT" | u16 version | u32 len, config text (UTF-8) | u32 count |
///   count x ( u32 len, name (UTF-8) | u32 rank | rank x u32 extent |
///             numel x f32 payload )
/// Entries are written in ascending name order so equal contents always
/// serialize to equal bytes.
struct CheckpointData {
  std::string config_text;
  std::map<std::string, Tensor<float>> tensors;
};

std::vector<std::uint8_t> encode_checkpoint(const CheckpointData& data);
/// Throws FormatError with a diagnostic on any defect.
CheckpointData decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void write_checkpoint_file(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData read_checkpoint_file(const std::filesystem::path& path);

/// Copies every bundle parameter into `data.tensors` under its bundle name.
void export_parameters(const ModelBundle<float>& bundle, CheckpointData& data);
/// Overwrites bundle parameters from `data`; throws FormatError if a
/// parameter is missing or has the wrong shape.
void import_parameters(const CheckpointData& data, ModelBundle<float>& bundle);

/// FNV-1a 64-bit digest rendered as 16 hex digits.
std::string content_hash(const std::vector<std::uint8_t>& bytes);

}  // namespace vbitn
