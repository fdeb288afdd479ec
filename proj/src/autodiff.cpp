#include "spus/autodiff.hpp"

#include <memory>

#include <algorithm>
#include <cmath>

namespace spus {

namespace {

std::vector<double> channel_vec(const Tensor4& t) {
    if (t.n != 1 || t.h != 1 || t.w != 1)
        throw shape_error("expected channel vector tensor (1,C,1,1), got " + t.dims_str());
    return t.data;
}

Tensor4 sum_over_nhw(const Tensor4& g) {
    Tensor4 out(1, g.c, 1, 1);
    for (int in = 0; in < g.n; ++in)
        for (int ci = 0; ci < g.c; ++ci) {
            const double* p = &g.at(in, ci, 0, 0);
            double acc = 0.0;
            for (size_t i = 0, m = static_cast<size_t>(g.h) * g.w; i < m; ++i) acc += p[i];
            out.at(0, ci, 0, 0) += acc;
        }
    return out;
}

}  // namespace

Tape::Node& Tape::node(NodeId id) {
    if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
        throw graph_error("node id " + std::to_string(id) + " not recorded on this tape");
    return nodes_[id];
}

const Tape::Node& Tape::node(NodeId id) const {
    if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
        throw graph_error("node id " + std::to_string(id) + " not recorded on this tape");
    return nodes_[id];
}

NodeId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Tape::leaf(Tensor4 v, bool requires_grad) {
    Node n;
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

Tensor4 Tape::grad(NodeId id) const {
    const Node& n = node(id);
    if (n.grad.size() == 0) return Tensor4(n.value.n, n.value.c, n.value.h, n.value.w);
    return n.grad;
}

void Tape::accum(NodeId id, const Tensor4& g) {
    Node& n = node(id);
    if (n.grad.size() == 0) {
        n.grad = g;
    } else {
        for (size_t i = 0; i < g.data.size(); ++i) n.grad.data[i] += g.data[i];
    }
}

NodeId Tape::conv(NodeId x, NodeId weight, NodeId bias, const ConvSpec& spec) {
    Node n;
    n.requires_grad = true;
    n.value = conv2d(value(x), value(weight), channel_vec(value(bias)), spec);
    const int in_h = value(x).h, in_w = value(x).w;
    NodeId out = static_cast<NodeId>(nodes_.size());
    n.back = [this, x, weight, bias, spec, in_h, in_w, out]() {
        const Tensor4& go = node(out).grad;
        accum(x, conv2d_input_grad(go, value(weight), spec, in_h, in_w));
        accum(weight, conv2d_weight_grad(go, value(x), spec, spec.kernel, spec.kernel));
        accum(bias, sum_over_nhw(go));
    };
    return push(std::move(n));
}

NodeId Tape::conv_transpose(NodeId x, NodeId weight, NodeId bias, const ConvSpec& spec) {
    Node n;
    n.requires_grad = true;
    n.value = conv2d_transpose(value(x), value(weight), channel_vec(value(bias)), spec);
    // The corresponding forward conv (whose adjoint this op applies).
    ConvSpec fwd;
    fwd.in_channels = spec.out_channels;
    fwd.out_channels = spec.in_channels;
    fwd.kernel = spec.kernel;
    fwd.stride = 2;
    fwd.padding = spec.padding;
    NodeId out = static_cast<NodeId>(nodes_.size());
    n.back = [this, x, weight, bias, fwd, out]() {
        const Tensor4& go = node(out).grad;
        const std::vector<double> zero_bias(fwd.out_channels, 0.0);
        accum(x, conv2d(go, value(weight), zero_bias, fwd));
        accum(weight, conv2d_weight_grad(value(x), go, fwd, fwd.kernel, fwd.kernel));
        accum(bias, sum_over_nhw(go));
    };
    return push(std::move(n));
}

NodeId Tape::batchnorm(NodeId x, NodeId gamma, NodeId beta, RunningStats& stats, Mode mode) {
    Node n;
    n.requires_grad = true;
    auto saved = std::make_shared<BnSaved>();
    const std::vector<double> g = channel_vec(value(gamma));
    n.value = spus::batchnorm(value(x), g, channel_vec(value(beta)), stats, mode,
                              mode == Mode::train ? saved.get() : nullptr);
    NodeId out = static_cast<NodeId>(nodes_.size());
    if (mode == Mode::train) {
        n.back = [this, x, gamma, beta, saved, out]() {
            const Tensor4& go = node(out).grad;
            const Tensor4& xin = value(x);
            const std::vector<double> gam = channel_vec(value(gamma));
            const int C = xin.c;
            const size_t plane = static_cast<size_t>(xin.h) * xin.w;
            const double m = static_cast<double>(xin.n) * plane;
            Tensor4 gx(xin.n, xin.c, xin.h, xin.w);
            Tensor4 ggamma(1, C, 1, 1), gbeta(1, C, 1, 1);
            for (int ci = 0; ci < C; ++ci) {
                const double mu = saved->batch_mean[ci];
                const double istd = saved->batch_invstd[ci];
                double sum_g = 0.0, sum_gx = 0.0;
                for (int in = 0; in < xin.n; ++in) {
                    const double* gp = &go.at(in, ci, 0, 0);
                    const double* xp = &xin.at(in, ci, 0, 0);
                    for (size_t i = 0; i < plane; ++i) {
                        sum_g += gp[i];
                        sum_gx += gp[i] * (xp[i] - mu) * istd;
                    }
                }
                ggamma.at(0, ci, 0, 0) = sum_gx;
                gbeta.at(0, ci, 0, 0) = sum_g;
                const double scale = gam[ci] * istd;
                for (int in = 0; in < xin.n; ++in) {
                    const double* gp = &go.at(in, ci, 0, 0);
                    const double* xp = &xin.at(in, ci, 0, 0);
                    double* op = &gx.at(in, ci, 0, 0);
                    for (size_t i = 0; i < plane; ++i) {
                        const double xhat = (xp[i] - mu) * istd;
                        op[i] = scale * (gp[i] - sum_g / m - xhat * sum_gx / m);
                    }
                }
            }
            accum(x, gx);
            accum(gamma, ggamma);
            accum(beta, gbeta);
        };
    } else {
        // Eval mode is a fixed per-channel affine map.
        std::vector<double> mean = stats.mean;
        std::vector<double> var = stats.var;
        n.back = [this, x, gamma, beta, mean, var, out]() {
            const Tensor4& go = node(out).grad;
            const Tensor4& xin = value(x);
            const std::vector<double> gam = channel_vec(value(gamma));
            const size_t plane = static_cast<size_t>(xin.h) * xin.w;
            Tensor4 gx(xin.n, xin.c, xin.h, xin.w);
            Tensor4 ggamma(1, xin.c, 1, 1), gbeta(1, xin.c, 1, 1);
            for (int ci = 0; ci < xin.c; ++ci) {
                const double istd = 1.0 / std::sqrt(var[ci] + kBnEps);
                double sg = 0.0, sgx = 0.0;
                for (int in = 0; in < xin.n; ++in) {
                    const double* gp = &go.at(in, ci, 0, 0);
                    const double* xp = &xin.at(in, ci, 0, 0);
                    double* op = &gx.at(in, ci, 0, 0);
                    for (size_t i = 0; i < plane; ++i) {
                        sg += gp[i];
                        sgx += gp[i] * (xp[i] - mean[ci]) * istd;
                        op[i] = gp[i] * gam[ci] * istd;
                    }
                }
                ggamma.at(0, ci, 0, 0) = sgx;
                gbeta.at(0, ci, 0, 0) = sg;
            }
            accum(x, gx);
            accum(gamma, ggamma);
            accum(beta, gbeta);
        };
    }
    return push(std::move(n));
}

NodeId Tape::gelu(NodeId x) {
    Node n;
    n.requires_grad = true;
    n.value = spus::gelu(value(x));
    NodeId out = static_cast<NodeId>(nodes_.size());
    n.back = [this, x, out]() {
        const Tensor4& go = node(out).grad;
        const Tensor4& xin = value(x);
        Tensor4 gx = xin;
        for (size_t i = 0; i < gx.data.size(); ++i)
            gx.data[i] = go.data[i] * gelu_grad_scalar(xin.data[i]);
        accum(x, gx);
    };
    return push(std::move(n));
}

NodeId Tape::concat(NodeId a, NodeId b) {
    Node n;
    n.requires_grad = true;
    n.value = concat_channels(value(a), value(b));
    const int ca = value(a).c, cb = value(b).c;
    NodeId out = static_cast<NodeId>(nodes_.size());
    n.back = [this, a, b, ca, cb, out]() {
        const Tensor4& go = node(out).grad;
        accum(a, slice_channels(go, 0, ca));
        accum(b, slice_channels(go, ca, cb));
    };
    return push(std::move(n));
}

NodeId Tape::slice(NodeId x, int c0, int count) {
    Node n;
    n.requires_grad = true;
    n.value = slice_channels(value(x), c0, count);
    const Tensor4& xin = value(x);
    const int xn = xin.n, xc = xin.c, xh = xin.h, xw = xin.w;
    NodeId out = static_cast<NodeId>(nodes_.size());
    n.back = [this, x, c0, count, xn, xc, xh, xw, out]() {
        const Tensor4& go = node(out).grad;
        Tensor4 gx(xn, xc, xh, xw);
        const size_t plane = static_cast<size_t>(xh) * xw;
        for (int in = 0; in < xn; ++in)
            for (int ci = 0; ci < count; ++ci)
                std::copy_n(&go.at(in, ci, 0, 0), plane, &gx.at(in, c0 + ci, 0, 0));
        accum(x, gx);
    };
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
    Node n;
    n.requires_grad = true;
    n.value = spus::add(value(a), value(b));
    NodeId out = static_cast<NodeId>(nodes_.size());
    n.back = [this, a, b, out]() {
        const Tensor4& go = node(out).grad;
        accum(a, go);
        accum(b, go);
    };
    return push(std::move(n));
}

NodeId Tape::sum(NodeId x) {
    Node n;
    n.requires_grad = true;
    double acc = 0.0;
    for (double v : value(x).data) acc += v;
    n.value = Tensor4(1, 1, 1, 1, acc);
    NodeId out = static_cast<NodeId>(nodes_.size());
    n.back = [this, x, out]() {
        const double g = node(out).grad.data[0];
        const Tensor4& xin = value(x);
        accum(x, Tensor4(xin.n, xin.c, xin.h, xin.w, g));
    };
    return push(std::move(n));
}

NodeId Tape::mse(NodeId pred, NodeId target) {
    const Tensor4& p = value(pred);
    const Tensor4& t = value(target);
    if (!p.same_dims(t))
        throw shape_error("mse dim mismatch: " + p.dims_str() + " vs " + t.dims_str());
    Node n;
    n.requires_grad = true;
    double acc = 0.0;
    for (size_t i = 0; i < p.data.size(); ++i) {
        const double d = p.data[i] - t.data[i];
        acc += d * d;
    }
    const double m = static_cast<double>(p.size());
    n.value = Tensor4(1, 1, 1, 1, acc / m);
    NodeId out = static_cast<NodeId>(nodes_.size());
    n.back = [this, pred, target, m, out]() {
        const double g = node(out).grad.data[0];
        const Tensor4& pv = value(pred);
        const Tensor4& tv = value(target);
        Tensor4 gp(pv.n, pv.c, pv.h, pv.w);
        Tensor4 gt(pv.n, pv.c, pv.h, pv.w);
        for (size_t i = 0; i < pv.data.size(); ++i) {
            const double d = 2.0 * (pv.data[i] - tv.data[i]) * g / m;
            gp.data[i] = d;
            gt.data[i] = -d;
        }
        accum(pred, gp);
        accum(target, gt);
    };
    return push(std::move(n));
}

void Tape::backward(NodeId loss) {
    Node& ln = node(loss);
    if (ln.value.size() != 1)
        throw contract_error("backward requires a scalar loss, got " + ln.value.dims_str());
    ln.grad = Tensor4(1, 1, 1, 1, 1.0);
    for (NodeId id = loss; id >= 0; --id) {
        Node& n = nodes_[id];
        if (n.back && n.grad.size() != 0) n.back();
    }
}

double grad_check(const std::function<NodeId(Tape&, const std::vector<NodeId>&)>& build,
                  const std::vector<Tensor4>& inputs, double step) {
    if (step <= 0.0) throw contract_error("grad_check step must be positive");

    auto eval_loss = [&](const std::vector<Tensor4>& ins) {
        Tape tape;
        std::vector<NodeId> ids;
        ids.reserve(ins.size());
        for (const Tensor4& t : ins) ids.push_back(tape.param(t));
        return tape.value(build(tape, ids)).data[0];
    };

    // Analytic gradients once.
    Tape tape;
    std::vector<NodeId> ids;
    for (const Tensor4& t : inputs) ids.push_back(tape.param(t));
    NodeId loss = build(tape, ids);
    tape.backward(loss);
    std::vector<Tensor4> analytic;
    for (NodeId id : ids) analytic.push_back(tape.grad(id));

    double worst = 0.0;
    std::vector<Tensor4> work = inputs;
    for (size_t ti = 0; ti < work.size(); ++ti) {
        for (size_t i = 0; i < work[ti].data.size(); ++i) {
            const double orig = work[ti].data[i];
            work[ti].data[i] = orig + step;
            const double fp = eval_loss(work);
            work[ti].data[i] = orig - step;
            const double fm = eval_loss(work);
            work[ti].data[i] = orig;
            const double fd = (fp - fm) / (2.0 * step);
            const double an = analytic[ti].data[i];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            worst = std::max(worst, std::abs(fd - an) / denom);
        }
    }
    return worst;
}

}  // namespace spus
