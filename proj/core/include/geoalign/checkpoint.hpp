#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "geoalign/nn.hpp"

namespace geoalign {

// Self-describing parameter container. Weights are stored row-major as 64-bit values;
// a save/load cycle reproduces every parameter bit for bit.
struct Checkpoint {
    std::uint64_t seed = 0;
    std::int64_t step = 0;
    std::vector<std::pair<std::string, Mlp>> networks;
    std::map<std::string, double> scalars;

    const Mlp& network(std::string_view name) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace geoalign
