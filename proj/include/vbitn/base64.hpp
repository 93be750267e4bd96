#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vbitn {

/// Standard alphabet with '=' padding.
std::string base64_encode(const std::vector<std::uint8_t>& bytes);
/// Accepts padded or unpadded input and an optional "data:...;base64,"
/// prefix. Throws std::invalid_argument on any other character.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace vbitn
