#include "spus/model.hpp"

#include <cmath>

#include "spus/rng.hpp"

namespace spus {

void ModelConfig::validate() const {
    if (base_width < 1 || width_multiplier < 1)
        throw config_error("base_width and width_multiplier must be >= 1");
    if (in_fields < 1) throw config_error("in_fields must be >= 1");
    if (grid_h % 8 != 0 || grid_w % 8 != 0)
        throw config_error("grid " + std::to_string(grid_h) + "x" + std::to_string(grid_w) +
                           " must be divisible by 8");
}

namespace {

ConvSpec spec_for(const Tensor4& weight, int stride, bool transposed) {
    ConvSpec s;
    s.kernel = weight.h;
    s.stride = stride;
    s.padding = weight.h == 3 ? 1 : 0;
    s.transposed = transposed;
    if (transposed) {
        s.in_channels = weight.n;
        s.out_channels = weight.c;
    } else {
        s.in_channels = weight.c;
        s.out_channels = weight.n;
    }
    return s;
}

// Direct-execution context: values are tensors.
struct RawCtx {
    using Ref = Tensor4;
    const std::map<std::string, Tensor4>& params;
    std::map<std::string, RunningStats>& bn_stats;
    Mode mode;

    const Tensor4& p(const std::string& name) const {
        auto it = params.find(name);
        if (it == params.end()) throw config_error("missing parameter: " + name);
        return it->second;
    }
    bool has(const std::string& name) const { return params.count(name) != 0; }

    Tensor4 conv(const std::string& name, const Tensor4& x, int stride) {
        const Tensor4& w = p(name + ".weight");
        return conv2d(x, w, p(name + ".bias").data, spec_for(w, stride, false));
    }
    Tensor4 conv_t(const std::string& name, const Tensor4& x) {
        const Tensor4& w = p(name + ".weight");
        return conv2d_transpose(x, w, p(name + ".bias").data, spec_for(w, 2, true));
    }
    Tensor4 bn(const std::string& name, const Tensor4& x) {
        return batchnorm(x, p(name + ".gamma").data, p(name + ".beta").data, bn_stats[name],
                         mode);
    }
    Tensor4 gelu(const Tensor4& x) { return spus::gelu(x); }
    Tensor4 concat(const Tensor4& a, const Tensor4& b) { return concat_channels(a, b); }
    Tensor4 add(const Tensor4& a, const Tensor4& b) { return spus::add(a, b); }
    void trace(const Tensor4& x, ForwardTrace* t) {
        if (t) *t = ForwardTrace{x.n, x.c, x.h, x.w};
    }
};

// Tape-recording context: values are node ids.
struct TapeCtx {
    using Ref = NodeId;
    Tape& tape;
    const std::map<std::string, Tensor4>& params;
    std::map<std::string, RunningStats>& bn_stats;
    Mode mode;
    std::map<std::string, NodeId>& pids;

    NodeId p(const std::string& name) {
        auto it = pids.find(name);
        if (it != pids.end()) return it->second;
        auto pit = params.find(name);
        if (pit == params.end()) throw config_error("missing parameter: " + name);
        NodeId id = tape.param(pit->second);
        pids.emplace(name, id);
        return id;
    }
    bool has(const std::string& name) const { return params.count(name) != 0; }

    NodeId conv(const std::string& name, NodeId x, int stride) {
        const Tensor4& w = params.at(name + ".weight");
        return tape.conv(x, p(name + ".weight"), p(name + ".bias"), spec_for(w, stride, false));
    }
    NodeId conv_t(const std::string& name, NodeId x) {
        const Tensor4& w = params.at(name + ".weight");
        return tape.conv_transpose(x, p(name + ".weight"), p(name + ".bias"),
                                   spec_for(w, 2, true));
    }
    NodeId bn(const std::string& name, NodeId x) {
        return tape.batchnorm(x, p(name + ".gamma"), p(name + ".beta"), bn_stats[name], mode);
    }
    NodeId gelu(NodeId x) { return tape.gelu(x); }
    NodeId concat(NodeId a, NodeId b) { return tape.concat(a, b); }
    NodeId add(NodeId a, NodeId b) { return tape.add(a, b); }
    void trace(NodeId x, ForwardTrace* t) {
        if (t) {
            const Tensor4& v = tape.value(x);
            *t = ForwardTrace{v.n, v.c, v.h, v.w};
        }
    }
};

template <class Ctx>
typename Ctx::Ref block_fwd(Ctx& cx, const std::string& prefix, typename Ctx::Ref x) {
    auto a = cx.gelu(cx.bn(prefix + ".bn1", cx.conv(prefix + ".conv1", x, 1)));
    a = cx.gelu(cx.bn(prefix + ".bn2", cx.conv(prefix + ".conv2", a, 1)));
    auto shortcut = cx.has(prefix + ".proj.weight") ? cx.conv(prefix + ".proj", x, 1) : x;
    return cx.add(a, shortcut);
}

template <class Ctx>
typename Ctx::Ref level_fwd(Ctx& cx, const std::string& prefix, typename Ctx::Ref x) {
    return block_fwd(cx, prefix + ".block1", block_fwd(cx, prefix + ".block0", x));
}

template <class Ctx>
typename Ctx::Ref unet_fwd(Ctx& cx, typename Ctx::Ref x, ForwardTrace* trace) {
    auto s0 = level_fwd(cx, "enc0", cx.conv("stem", x, 1));
    auto s1 = level_fwd(cx, "enc1", cx.conv("down0", s0, 2));
    auto s2 = level_fwd(cx, "enc2", cx.conv("down1", s1, 2));
    auto e3 = level_fwd(cx, "enc3", cx.conv("down2", s2, 2));
    auto bott = level_fwd(cx, "bottleneck", e3);
    cx.trace(bott, trace);
    auto r0 = level_fwd(cx, "dec0", cx.concat(cx.conv_t("up0", bott), s2));
    auto r1 = level_fwd(cx, "dec1", cx.concat(cx.conv_t("up1", r0), s1));
    auto r2 = level_fwd(cx, "dec2", cx.concat(cx.conv_t("up2", r1), s0));
    return cx.conv("head", r2, 1);
}

void check_input(const ModelConfig& cfg, const Tensor4& x) {
    if (x.c != cfg.in_fields)
        throw shape_error("input has " + std::to_string(x.c) + " fields, model expects " +
                          std::to_string(cfg.in_fields));
    if (x.h % 8 != 0 || x.w % 8 != 0)
        throw shape_error("input H and W must be divisible by 8, got " + x.dims_str());
}

struct Builder {
    std::map<std::string, Tensor4>& params;
    std::map<std::string, RunningStats>& bn_stats;
    Rng& rng;

    void conv(const std::string& name, int cin, int cout, int k, bool transposed = false) {
        // weight layout: forward [cout,cin,k,k]; transposed [cin,cout,k,k]
        Tensor4 w = transposed ? Tensor4(cin, cout, k, k) : Tensor4(cout, cin, k, k);
        const double bound = std::sqrt(6.0 / (cin * k * k));
        for (double& v : w.data) v = rng.uniform(-bound, bound);
        params.emplace(name + ".weight", std::move(w));
        params.emplace(name + ".bias", Tensor4(1, cout, 1, 1, 0.0));
    }
    void bn(const std::string& name, int c) {
        params.emplace(name + ".gamma", Tensor4(1, c, 1, 1, 1.0));
        params.emplace(name + ".beta", Tensor4(1, c, 1, 1, 0.0));
        bn_stats.emplace(name, RunningStats{});
    }
    void block(const std::string& prefix, int cin, int cout) {
        conv(prefix + ".conv1", cin, cout, 3);
        bn(prefix + ".bn1", cout);
        conv(prefix + ".conv2", cout, cout, 3);
        bn(prefix + ".bn2", cout);
        if (cin != cout) conv(prefix + ".proj", cin, cout, 1);
    }
    void level(const std::string& prefix, int cin, int cout) {
        block(prefix + ".block0", cin, cout);
        block(prefix + ".block1", cout, cout);
    }
};

}  // namespace

Model build_model(const ModelConfig& config, uint64_t seed) {
    config.validate();
    Model m;
    m.cfg = config;
    Rng rng(seed);
    Builder b{m.params, m.bn_stats, rng};
    const int w = config.width();
    const int d = config.in_fields;

    b.conv("stem", d, w, 3);
    b.level("enc0", w, w);
    b.conv("down0", w, w, 3);
    b.level("enc1", w, 2 * w);
    b.conv("down1", 2 * w, 2 * w, 3);
    b.level("enc2", 2 * w, 2 * w);
    b.conv("down2", 2 * w, 2 * w, 3);
    b.level("enc3", 2 * w, 4 * w);
    b.level("bottleneck", 4 * w, 4 * w);
    b.conv("up0", 4 * w, 2 * w, 3, true);
    b.level("dec0", 4 * w, 2 * w);
    b.conv("up1", 2 * w, 2 * w, 3, true);
    b.level("dec1", 4 * w, 2 * w);
    b.conv("up2", 2 * w, w, 3, true);
    b.level("dec2", 2 * w, w);
    b.conv("head", w, d, 3);
    return m;
}

Tensor4 Model::forward(const Tensor4& x, Mode mode, ForwardTrace* trace) {
    check_input(cfg, x);
    RawCtx cx{params, bn_stats, mode};
    return unet_fwd(cx, x, trace);
}

NodeId Model::forward_tape(Tape& tape, NodeId x, Mode mode,
                           std::map<std::string, NodeId>& param_nodes, ForwardTrace* trace) {
    check_input(cfg, tape.value(x));
    TapeCtx cx{tape, params, bn_stats, mode, param_nodes};
    return unet_fwd(cx, x, trace);
}

AdaptedModel wrap_with_adapters(Model model, int d_task, uint64_t seed) {
    if (d_task < 1) throw config_error("d_task must be >= 1");
    AdaptedModel am;
    am.d_task = d_task;
    const int d_core = model.cfg.in_fields;
    am.core = std::move(model);
    if (d_task != d_core) {
        Rng rng(seed);
        std::map<std::string, RunningStats> unused;
        Builder b{am.adapters, unused, rng};
        b.conv("adapter_in", d_task, d_core, 1);
        b.conv("adapter_out", d_core, d_task, 1);
    }
    return am;
}

Tensor4 AdaptedModel::forward(const Tensor4& x, Mode mode, ForwardTrace* trace) {
    if (!has_adapters()) return core.forward(x, mode, trace);
    RawCtx cx{adapters, core.bn_stats, mode};
    Tensor4 h = cx.conv("adapter_in", x, 1);
    h = core.forward(h, mode, trace);
    return cx.conv("adapter_out", h, 1);
}

NodeId AdaptedModel::forward_tape(Tape& tape, NodeId x, Mode mode,
                                  std::map<std::string, NodeId>& param_nodes,
                                  ForwardTrace* trace) {
    if (!has_adapters()) return core.forward_tape(tape, x, mode, param_nodes, trace);
    TapeCtx cx{tape, adapters, core.bn_stats, mode, param_nodes};
    NodeId h = cx.conv("adapter_in", x, 1);
    h = core.forward_tape(tape, h, mode, param_nodes, trace);
    return cx.conv("adapter_out", h, 1);
}

std::map<std::string, Tensor4*> AdaptedModel::trainable() {
    std::map<std::string, Tensor4*> out;
    for (auto& [name, t] : core.params) out.emplace(name, &t);
    for (auto& [name, t] : adapters) out.emplace(name, &t);
    return out;
}

long count_params(const Model& model) {
    long total = 0;
    for (const auto& [name, t] : model.params) total += static_cast<long>(t.size());
    return total;
}

long count_params(const AdaptedModel& model) {
    long total = count_params(model.core);
    for (const auto& [name, t] : model.adapters) total += static_cast<long>(t.size());
    return total;
}

Tensor4 residual_block(const Tensor4& input, const std::map<std::string, Tensor4>& params,
                       std::map<std::string, RunningStats>& bn_stats, const std::string& prefix,
                       Mode mode) {
    RawCtx cx{params, bn_stats, mode};
    return block_fwd(cx, prefix, input);
}

}  // namespace spus
