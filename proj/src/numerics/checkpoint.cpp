#include "stationing/numerics/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "stationing/core/error.hpp"

namespace stationing::numerics {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::string magic() { return std::string(kCheckpointMagic, sizeof(kCheckpointMagic) - 1); }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, nlohmann::json header, const std::vector<Tensor>& params) {
    nlohmann::json shapes = nlohmann::json::array();
    for (const auto& p : params) shapes.push_back(p.shape());
    header["shapes"] = shapes;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
    out << magic() << header.dump() << '\n';
    for (const auto& p : params)
        out.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.numel() * sizeof(float)));
    if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    std::string m(magic().size(), '\0');
    in.read(m.data(), static_cast<std::streamsize>(m.size()));
    if (!in || m != magic()) throw IoError(path.string() + ": bad checkpoint magic");
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": missing checkpoint header");
    Checkpoint ck;
    try {
        ck.header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": malformed checkpoint header: " + e.what());
    }
    if (!ck.header.contains("shapes") || !ck.header["shapes"].is_array())
        throw IoError(path.string() + ": checkpoint header lacks shapes");
    for (const auto& s : ck.header["shapes"]) {
        Tensor t = Tensor::zeros(s.get<Shape>());
        in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(t.numel() * sizeof(float)))
            throw IoError(path.string() + ": truncated payload");
        ck.params.push_back(std::move(t));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw IoError(path.string() + ": trailing bytes after payload");
    return ck;
}

}  // namespace stationing::numerics
