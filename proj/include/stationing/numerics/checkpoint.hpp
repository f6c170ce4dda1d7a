#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stationing/numerics/tensor.hpp"

namespace stationing::numerics {

inline constexpr char kCheckpointMagic[] = "STNLAB01";

// Layout: magic "STNLAB01", one line of JSON header, then the parameters'
// values as little-endian float32 in declaration order. The header must
// contain a "shapes" array; other fields (layers, seed) are caller-defined.
void save_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                     const std::vector<Tensor>& params);

struct Checkpoint {
    nlohmann::json header;
    std::vector<Tensor> params;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace stationing::numerics
