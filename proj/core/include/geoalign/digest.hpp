#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geoalign/nn.hpp"

namespace geoalign {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Digest over block names and the raw bytes of every parameter value.
std::string parameter_digest(std::span<const ConstParamBlock> blocks);

} // namespace geoalign
