#include "spus/checkpoint.hpp"

#include <sstream>

#include "binio.hpp"

namespace spus {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'U', 'S'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kDtypeF32 = 0;

struct Entry {
    std::string name;
    std::vector<uint32_t> dims;
    std::vector<double> values;
};

size_t entry_count(const std::vector<uint32_t>& dims) {
    size_t m = 1;
    for (uint32_t d : dims) m *= d;
    return m;
}

// Canonical entry order: meta, norm, params (map order), bn stats (map order).
std::vector<Entry> to_entries(const Checkpoint& c) {
    std::vector<Entry> out;
    out.push_back({"meta/config",
                   {6},
                   {static_cast<double>(c.config.base_width),
                    static_cast<double>(c.config.width_multiplier),
                    static_cast<double>(c.config.in_fields),
                    static_cast<double>(c.config.grid_h), static_cast<double>(c.config.grid_w),
                    static_cast<double>(c.d_task)}});
    out.push_back({"norm/mean", {static_cast<uint32_t>(c.norm.mean.size())}, c.norm.mean});
    out.push_back(
        {"norm/std", {static_cast<uint32_t>(c.norm.stddev.size())}, c.norm.stddev});
    for (const auto& [name, t] : c.params)
        out.push_back({"param/" + name,
                       {static_cast<uint32_t>(t.n), static_cast<uint32_t>(t.c),
                        static_cast<uint32_t>(t.h), static_cast<uint32_t>(t.w)},
                       t.data});
    for (const auto& [name, st] : c.bn_stats) {
        out.push_back(
            {"bnstats/" + name + "/mean", {static_cast<uint32_t>(st.mean.size())}, st.mean});
        out.push_back(
            {"bnstats/" + name + "/var", {static_cast<uint32_t>(st.var.size())}, st.var});
        out.push_back({"bnstats/" + name + "/init", {1}, {st.initialized ? 1.0 : 0.0}});
    }
    return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    const std::vector<Entry> entries = to_entries(ckpt);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw format_error("cannot open " + path + " for writing");
    os.write(kMagic, 4);
    binio::put_u32(os, kVersion);
    binio::put_u32(os, static_cast<uint32_t>(entries.size()));
    for (const Entry& e : entries) {
        binio::put_string(os, e.name);
        binio::put_u32(os, static_cast<uint32_t>(e.dims.size()));
        for (uint32_t d : e.dims) binio::put_u32(os, d);
        binio::put_u8(os, kDtypeF32);
    }
    for (const Entry& e : entries) binio::put_f32_array(os, e.values);
    if (!os) throw format_error("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw format_error("cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw format_error("bad magic in " + path);
    const uint32_t version = binio::get_u32(is);
    if (version != kVersion)
        throw version_error("unsupported checkpoint version " + std::to_string(version));

    const uint32_t count = binio::get_u32(is);
    if (count > 1u << 20) throw format_error("implausible entry count");
    std::vector<Entry> entries(count);
    for (Entry& e : entries) {
        e.name = binio::get_string(is, 4096);
        const uint32_t rank = binio::get_u32(is);
        if (rank > 4) throw format_error("entry " + e.name + " has rank > 4");
        e.dims.resize(rank);
        for (uint32_t& d : e.dims) d = binio::get_u32(is);
        const uint8_t dtype = binio::get_u8(is);
        if (dtype != kDtypeF32)
            throw format_error("unknown dtype tag " + std::to_string(dtype));
    }
    for (Entry& e : entries) e.values = binio::get_f32_array(is, entry_count(e.dims));
    if (is.peek() != EOF) throw corruption_error("trailing bytes in " + path);

    std::map<std::string, const Entry*> by_name;
    for (const Entry& e : entries) {
        if (!by_name.emplace(e.name, &e).second)
            throw format_error("duplicate entry " + e.name);
    }
    auto need = [&](const std::string& name) -> const Entry& {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw format_error("missing entry " + name);
        return *it->second;
    };

    Checkpoint c;
    c.version = version;
    const Entry& cfg = need("meta/config");
    if (cfg.values.size() != 6) throw format_error("meta/config must hold 6 values");
    c.config.base_width = static_cast<int>(cfg.values[0]);
    c.config.width_multiplier = static_cast<int>(cfg.values[1]);
    c.config.in_fields = static_cast<int>(cfg.values[2]);
    c.config.grid_h = static_cast<int>(cfg.values[3]);
    c.config.grid_w = static_cast<int>(cfg.values[4]);
    c.d_task = static_cast<int>(cfg.values[5]);
    c.norm.mean = need("norm/mean").values;
    c.norm.stddev = need("norm/std").values;

    for (const Entry& e : entries) {
        if (e.name.rfind("param/", 0) == 0) {
            if (e.dims.size() != 4) throw format_error("parameter " + e.name + " must be rank 4");
            Tensor4 t(static_cast<int>(e.dims[0]), static_cast<int>(e.dims[1]),
                      static_cast<int>(e.dims[2]), static_cast<int>(e.dims[3]));
            t.data = e.values;
            c.params.emplace(e.name.substr(6), std::move(t));
        } else if (e.name.rfind("bnstats/", 0) == 0) {
            const size_t slash = e.name.rfind('/');
            const std::string layer = e.name.substr(8, slash - 8);
            const std::string what = e.name.substr(slash + 1);
            RunningStats& st = c.bn_stats[layer];
            if (what == "mean")
                st.mean = e.values;
            else if (what == "var")
                st.var = e.values;
            else if (what == "init")
                st.initialized = !e.values.empty() && e.values[0] != 0.0;
            else
                throw format_error("unknown bnstats entry " + e.name);
        }
    }
    return c;
}

Checkpoint make_checkpoint(const AdaptedModel& model, const NormStats& norm) {
    Checkpoint c;
    c.config = model.core.cfg;
    c.d_task = model.d_task;
    c.norm = norm;
    c.params = model.core.params;
    for (const auto& [name, t] : model.adapters) c.params.emplace(name, t);
    c.bn_stats = model.core.bn_stats;
    return c;
}

AdaptedModel model_from_checkpoint(const Checkpoint& ckpt) {
    ckpt.config.validate();
    AdaptedModel am;
    am.d_task = ckpt.d_task;
    am.core.cfg = ckpt.config;
    for (const auto& [name, t] : ckpt.params) {
        if (name.rfind("adapter_", 0) == 0)
            am.adapters.emplace(name, t);
        else
            am.core.params.emplace(name, t);
    }
    am.core.bn_stats = ckpt.bn_stats;
    if (am.d_task != ckpt.config.in_fields && am.adapters.empty())
        throw format_error("checkpoint declares d_task " + std::to_string(am.d_task) +
                           " but holds no adapter tensors");
    return am;
}

}  // namespace spus
