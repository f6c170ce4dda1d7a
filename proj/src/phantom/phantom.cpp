#include "stationing/phantom/phantom.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stationing/core/error.hpp"
#include "stationing/core/rng.hpp"
#include "stationing/phantom/stations.hpp"

namespace stationing::phantom {

static_assert(std::endian::native == std::endian::little, "raw payloads are written in host order");

namespace fs = std::filesystem;

namespace {

bool inside(const OrganSpec& o, const std::array<double, 3>& c, const std::array<double, 3>& r, double x, double y,
            double z) {
    const double dx = (x - c[0]) / r[0], dy = (y - c[1]) / r[1], dz = (z - c[2]) / r[2];
    switch (o.shape) {
        case ShapeFamily::ellipsoid: return dx * dx + dy * dy + dz * dz <= 1.0;
        case ShapeFamily::tube: return dx * dx + dy * dy <= 1.0 && std::abs(dz) <= 1.0;
        case ShapeFamily::box: return std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0 && std::abs(dz) <= 1.0;
    }
    return false;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

template <typename T>
std::uint64_t checksum(const std::vector<T>& data) {
    return fnv1a64(std::string_view(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(T)));
}

template <typename T>
void write_raw(const fs::path& path, const std::vector<T>& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(T)));
    if (!out) throw IoError("short write to " + path.string());
}

template <typename T>
std::vector<T> read_raw(const fs::path& path, std::size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.filename().string() + ": cannot open");
    const auto size = fs::file_size(path);
    const auto want = count * sizeof(T);
    if (size < want)
        throw IoError(path.filename().string() + ": truncated payload (" + std::to_string(size) + " of " +
                      std::to_string(want) + " bytes)");
    if (size > want) throw IoError(path.filename().string() + ": payload has " + std::to_string(size - want) +
                                   " trailing bytes");
    std::vector<T> data(count);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(want));
    if (!in) throw IoError(path.filename().string() + ": read failed");
    return data;
}

}  // namespace

bool operator==(const CaseRecord& a, const CaseRecord& b) {
    auto same_instances = [](const auto& x, const auto& y) {
        if (x.size() != y.size()) return false;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i].station != y[i].station || x[i].voxel != y[i].voxel || x[i].radius != y[i].radius) return false;
        return true;
    };
    // Bitwise image comparison so NaN payloads would still compare equal.
    const bool same_image = a.image.extents == b.image.extents && a.image.spacing == b.image.spacing &&
                            a.image.data.size() == b.image.data.size() &&
                            std::memcmp(a.image.data.data(), b.image.data.data(), a.image.data.size() * 4) == 0;
    return a.id == b.id && same_image && a.organs == b.organs && a.stations == b.stations &&
           a.organ_legend == b.organ_legend && a.station_legend == b.station_legend &&
           same_instances(a.ln_instances, b.ln_instances) && a.seed == b.seed && a.config_hash == b.config_hash &&
           a.key_organs == b.key_organs && a.warnings == b.warnings;
}

CaseRecord generate_case(const PhantomConfig& config, std::uint64_t seed, std::string id) {
    validate(config);
    const auto& e = config.extents;
    const auto& sp = config.spacing;

    CaseRecord rec;
    rec.id = id.empty() ? "case_" + hex64(seed) : std::move(id);
    rec.seed = seed;
    rec.config_hash = config_hash(config);
    for (const auto& o : config.organs) rec.organ_legend.push_back({o.name, o.anchor, o.air});
    rec.station_legend = station_names(config);
    rec.key_organs = key_organs(config);

    const CounterRng pose(derive_seed(seed, "pose"));
    std::array<double, 3> global{};
    for (int a = 0; a < 3; ++a) global[a] = pose.uniform(a, -config.global_jitter, config.global_jitter);

    rec.organs = LabelMap(e, sp, 0);
    for (std::size_t o = 0; o < config.organs.size(); ++o) {
        const auto& spec = config.organs[o];
        const std::uint64_t base = 16 + 8 * o;
        std::array<double, 3> c{}, r{};
        const double scale = pose.uniform(base + 3, 1.0 - spec.size_jitter, 1.0 + spec.size_jitter);
        for (int a = 0; a < 3; ++a) {
            c[a] = spec.center[a] + global[a] + pose.uniform(base + a, -spec.position_jitter, spec.position_jitter);
            r[a] = spec.size[a] * scale;
        }
        const auto label = static_cast<std::uint8_t>(o + 1);
        for (int k = 0; k < e.z; ++k)
            for (int j = 0; j < e.y; ++j)
                for (int i = 0; i < e.x; ++i)
                    if (inside(spec, c, r, i * sp.x, j * sp.y, k * sp.z)) rec.organs.at(i, j, k) = label;
    }

    auto stations = lns_from_organs(rec.organs, organ_names(config), config.rules);
    rec.stations = std::move(stations.labels);
    rec.warnings = std::move(stations.warnings);

    // Lymph nodes: spheres centred on a random voxel of a random non-empty station.
    const CounterRng ln(derive_seed(seed, "lymph_nodes"));
    const auto& lns = config.lymph_nodes;
    std::vector<std::vector<std::size_t>> members(config.rules.size());
    for (std::size_t v = 0; v < rec.stations.data.size(); ++v)
        if (rec.stations.data[v]) members[rec.stations.data[v] - 1].push_back(v);
    std::vector<int> nonempty;
    for (std::size_t s = 0; s < members.size(); ++s)
        if (!members[s].empty()) nonempty.push_back(static_cast<int>(s));
    const int count = lns.min_count + static_cast<int>(ln.below(0, lns.max_count - lns.min_count + 1));
    if (nonempty.empty() && count > 0) rec.warnings.push_back("no lymph nodes placed: every station is empty");
    for (int n = 0; n < count && !nonempty.empty(); ++n) {
        const std::uint64_t base = 1 + 4 * static_cast<std::uint64_t>(n);
        const int s = nonempty[ln.below(base, nonempty.size())];
        const auto v = members[s][ln.below(base + 1, members[s].size())];
        metrics::LnInstance inst;
        inst.station = s + 1;
        inst.voxel = {static_cast<int>(v % e.x), static_cast<int>((v / e.x) % e.y), static_cast<int>(v / e.x / e.y)};
        inst.radius = lns.min_radius + static_cast<int>(ln.below(base + 2, lns.max_radius - lns.min_radius + 1));
        rec.ln_instances.push_back(inst);
    }

    rec.image = Volume(e, sp, static_cast<float>(config.background));
    for (std::size_t v = 0; v < rec.organs.data.size(); ++v)
        if (rec.organs.data[v]) rec.image.data[v] = static_cast<float>(config.organs[rec.organs.data[v] - 1].intensity);
    for (const auto& inst : rec.ln_instances) {
        const int r = inst.radius;
        for (int dk = -r; dk <= r; ++dk)
            for (int dj = -r; dj <= r; ++dj)
                for (int di = -r; di <= r; ++di) {
                    if (di * di + dj * dj + dk * dk > r * r) continue;
                    const int i = inst.voxel[0] + di, j = inst.voxel[1] + dj, k = inst.voxel[2] + dk;
                    if (!e.contains(i, j, k) || rec.organs.at(i, j, k)) continue;
                    rec.image.at(i, j, k) = static_cast<float>(lns.intensity);
                }
    }
    if (config.noise_sigma > 0) {
        const CounterRng noise(derive_seed(seed, "noise"));
        for (std::size_t v = 0; v < rec.image.data.size(); ++v)
            rec.image.data[v] += static_cast<float>(config.noise_sigma * noise.gaussian(v));
    }
    return rec;
}

void save_case(const CaseRecord& rec, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    nlohmann::json meta;
    meta["id"] = rec.id;
    meta["extents"] = {rec.image.extents.x, rec.image.extents.y, rec.image.extents.z};
    meta["spacing"] = {rec.image.spacing.x, rec.image.spacing.y, rec.image.spacing.z};
    meta["seed"] = rec.seed;
    meta["config_hash"] = hex64(rec.config_hash);
    auto& organs = meta["organ_legend"] = nlohmann::json::array();
    for (std::size_t i = 0; i < rec.organ_legend.size(); ++i)
        organs.push_back({{"label", i + 1},
                          {"name", rec.organ_legend[i].name},
                          {"anchor", rec.organ_legend[i].anchor},
                          {"air", rec.organ_legend[i].air}});
    auto& stations = meta["station_legend"] = nlohmann::json::array();
    for (std::size_t i = 0; i < rec.station_legend.size(); ++i)
        stations.push_back({{"label", i + 1}, {"name", rec.station_legend[i]}});
    meta["key_organs"] = rec.key_organs;
    meta["warnings"] = rec.warnings;
    auto& inst = meta["ln_instances"] = nlohmann::json::array();
    for (const auto& n : rec.ln_instances)
        inst.push_back({{"station", n.station}, {"voxel", n.voxel}, {"radius", n.radius}});
    meta["checksums"] = {{"image.raw", hex64(checksum(rec.image.data))},
                         {"organs.raw", hex64(checksum(rec.organs.data))},
                         {"stations.raw", hex64(checksum(rec.stations.data))}};

    write_raw(dir / "image.raw", rec.image.data);
    write_raw(dir / "organs.raw", rec.organs.data);
    write_raw(dir / "stations.raw", rec.stations.data);
    std::ofstream out(dir / "meta.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
    out << meta.dump(2) << '\n';
}

CaseRecord load_case(const fs::path& dir, const PhantomConfig* expected, std::vector<std::string>* warnings) {
    const auto meta_path = dir / "meta.json";
    std::ifstream in(meta_path);
    if (!in) throw IoError("meta.json: cannot open " + meta_path.string());
    CaseRecord rec;
    nlohmann::json meta;
    std::map<std::string, std::string> sums;
    try {
        meta = nlohmann::json::parse(in);
        rec.id = meta.at("id").get<std::string>();
        const auto e = meta.at("extents").get<std::array<int, 3>>();
        const auto s = meta.at("spacing").get<std::array<double, 3>>();
        const Extents ext{e[0], e[1], e[2]};
        const Spacing spc{s[0], s[1], s[2]};
        if (ext.x < 1 || ext.y < 1 || ext.z < 1) throw IoError("meta.json: invalid extents");
        rec.image = Volume(ext, spc);
        rec.organs = LabelMap(ext, spc);
        rec.stations = LabelMap(ext, spc);
        rec.seed = meta.at("seed").get<std::uint64_t>();
        rec.config_hash = std::stoull(meta.at("config_hash").get<std::string>(), nullptr, 16);
        for (const auto& o : meta.at("organ_legend"))
            rec.organ_legend.push_back({o.at("name").get<std::string>(), o.at("anchor").get<bool>(),
                                        o.at("air").get<bool>()});
        for (const auto& st : meta.at("station_legend")) rec.station_legend.push_back(st.at("name").get<std::string>());
        rec.key_organs = meta.at("key_organs").get<std::vector<std::string>>();
        rec.warnings = meta.at("warnings").get<std::vector<std::string>>();
        for (const auto& n : meta.at("ln_instances")) {
            metrics::LnInstance inst;
            inst.station = n.at("station").get<int>();
            inst.voxel = n.at("voxel").get<std::array<int, 3>>();
            inst.radius = n.at("radius").get<int>();
            rec.ln_instances.push_back(inst);
        }
        sums = meta.at("checksums").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& ex) {
        throw IoError(std::string("meta.json: malformed header: ") + ex.what());
    } catch (const std::invalid_argument&) {
        throw IoError("meta.json: malformed config_hash");
    }

    const auto n = rec.image.extents.voxels();
    rec.image.data = read_raw<float>(dir / "image.raw", n);
    rec.organs.data = read_raw<std::uint8_t>(dir / "organs.raw", n);
    rec.stations.data = read_raw<std::uint8_t>(dir / "stations.raw", n);
    auto verify = [&](const char* name, std::uint64_t got) {
        const auto it = sums.find(name);
        if (it == sums.end()) throw IoError(std::string("meta.json: no checksum for ") + name);
        if (it->second != hex64(got)) throw IoError(std::string(name) + ": checksum mismatch");
    };
    verify("image.raw", checksum(rec.image.data));
    verify("organs.raw", checksum(rec.organs.data));
    verify("stations.raw", checksum(rec.stations.data));

    if (expected) {
        const auto h = config_hash(*expected);
        if (h != rec.config_hash) {
            const std::string w = "meta.json: config hash " + hex64(rec.config_hash) +
                                  " does not match the provided config (" + hex64(h) + ")";
            if (warnings) warnings->push_back(w);
        }
    }
    return rec;
}

void save_station_map(const StationFile& f, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    nlohmann::json meta;
    meta["id"] = f.id;
    meta["extents"] = {f.labels.extents.x, f.labels.extents.y, f.labels.extents.z};
    meta["spacing"] = {f.labels.spacing.x, f.labels.spacing.y, f.labels.spacing.z};
    auto& stations = meta["station_legend"] = nlohmann::json::array();
    for (std::size_t i = 0; i < f.station_legend.size(); ++i)
        stations.push_back({{"label", i + 1}, {"name", f.station_legend[i]}});
    auto& inst = meta["ln_instances"] = nlohmann::json::array();
    for (const auto& n : f.ln_instances)
        inst.push_back({{"station", n.station}, {"voxel", n.voxel}, {"radius", n.radius}});
    meta["checksums"] = {{"stations.raw", hex64(checksum(f.labels.data))}};
    write_raw(dir / "stations.raw", f.labels.data);
    std::ofstream out(dir / "meta.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
    out << meta.dump(2) << '\n';
}

StationFile load_station_map(const fs::path& dir) {
    const auto meta_path = dir / "meta.json";
    std::ifstream in(meta_path);
    if (!in) throw IoError("meta.json: cannot open " + meta_path.string());
    StationFile f;
    std::string sum;
    try {
        const auto meta = nlohmann::json::parse(in);
        f.id = meta.at("id").get<std::string>();
        const auto e = meta.at("extents").get<std::array<int, 3>>();
        const auto s = meta.at("spacing").get<std::array<double, 3>>();
        const Extents ext{e[0], e[1], e[2]};
        if (ext.x < 1 || ext.y < 1 || ext.z < 1) throw IoError("meta.json: invalid extents");
        f.labels = LabelMap(ext, Spacing{s[0], s[1], s[2]});
        for (const auto& st : meta.at("station_legend")) f.station_legend.push_back(st.at("name").get<std::string>());
        if (meta.contains("ln_instances"))
            for (const auto& n : meta.at("ln_instances")) {
                metrics::LnInstance inst;
                inst.station = n.at("station").get<int>();
                inst.voxel = n.at("voxel").get<std::array<int, 3>>();
                inst.radius = n.at("radius").get<int>();
                f.ln_instances.push_back(inst);
            }
        if (meta.contains("checksums") && meta.at("checksums").contains("stations.raw"))
            sum = meta.at("checksums").at("stations.raw").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
        throw IoError(std::string("meta.json: malformed header: ") + ex.what());
    }
    f.labels.data = read_raw<std::uint8_t>(dir / "stations.raw", f.labels.extents.voxels());
    if (!sum.empty() && sum != hex64(checksum(f.labels.data))) throw IoError("stations.raw: checksum mismatch");
    return f;
}

}  // namespace stationing::phantom
