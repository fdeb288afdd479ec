#include "spus/trajectory.hpp"

#include "binio.hpp"
#include "spus/datagen.hpp"

namespace spus {

namespace {
constexpr char kMagic[4] = {'P', 'D', 'E', 'T'};
constexpr uint32_t kVersion = 1;
}  // namespace

void write_trajectory(const Trajectory& traj, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw format_error("cannot open " + path + " for writing");
    os.write(kMagic, 4);
    binio::put_u32(os, kVersion);
    binio::put_u8(os, static_cast<uint8_t>(traj.family));
    binio::put_u8(os, static_cast<uint8_t>(traj.fields()));
    for (const auto& name : traj.field_names) binio::put_string(os, name);
    binio::put_u32(os, static_cast<uint32_t>(traj.h));
    binio::put_u32(os, static_cast<uint32_t>(traj.w));
    binio::put_u32(os, static_cast<uint32_t>(traj.snapshots()));
    binio::put_f64(os, traj.dt);
    binio::put_u64(os, traj.seed);
    for (const auto& snap : traj.data)
        for (const auto& field : snap) binio::put_f32_array(os, field);
    if (!os) throw format_error("write failed for " + path);
}

Trajectory read_trajectory(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw format_error("cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw format_error("bad magic in " + path);
    const uint32_t version = binio::get_u32(is);
    if (version != kVersion)
        throw version_error("unsupported trajectory version " + std::to_string(version));

    Trajectory traj;
    const uint8_t fam = binio::get_u8(is);
    if (fam > 2) throw format_error("unknown family tag " + std::to_string(fam));
    traj.family = static_cast<Family>(fam);
    const int d = binio::get_u8(is);
    if (d != field_count(traj.family))
        throw format_error("field count " + std::to_string(d) + " does not match family " +
                           family_name(traj.family));
    traj.field_names.reserve(d);
    for (int f = 0; f < d; ++f) traj.field_names.push_back(binio::get_string(is, 256));
    traj.h = static_cast<int>(binio::get_u32(is));
    traj.w = static_cast<int>(binio::get_u32(is));
    const uint32_t snaps = binio::get_u32(is);
    traj.dt = binio::get_f64(is);
    traj.seed = binio::get_u64(is);
    if (traj.h < 1 || traj.w < 1 || traj.h > 1 << 16 || traj.w > 1 << 16)
        throw format_error("implausible grid dims in " + path);

    const size_t plane = static_cast<size_t>(traj.h) * traj.w;
    traj.data.resize(snaps);
    for (uint32_t t = 0; t < snaps; ++t) {
        traj.data[t].resize(d);
        for (int f = 0; f < d; ++f) traj.data[t][f] = binio::get_f32_array(is, plane);
    }
    // trailing bytes would mean the header undercounts the payload
    if (is.peek() != EOF) throw corruption_error("trailing bytes in " + path);
    return traj;
}

}  // namespace spus
