#include "spus/tensor.hpp"

#include <cmath>
#include <sstream>

namespace spus {

std::string Tensor4::dims_str() const {
    std::ostringstream os;
    os << "(" << n << "," << c << "," << h << "," << w << ")";
    return os.str();
}

static void check_conv_args(const Tensor4& input, const Tensor4& weight,
                            const std::vector<double>& bias, const ConvSpec& spec) {
    if (spec.kernel != 1 && spec.kernel != 3)
        throw shape_error("kernel must be 1 or 3");
    if (spec.stride != 1 && spec.stride != 2)
        throw shape_error("stride must be 1 or 2");
    if (weight.h != spec.kernel || weight.w != spec.kernel)
        throw shape_error("weight kernel dims " + weight.dims_str() + " do not match spec");
    if (static_cast<int>(bias.size()) != spec.out_channels)
        throw shape_error("bias length does not match out_channels");
    if (input.c != spec.in_channels)
        throw shape_error("input channels " + std::to_string(input.c) + " != spec.in_channels " +
                          std::to_string(spec.in_channels));
}

Tensor4 conv2d(const Tensor4& input, const Tensor4& weight, const std::vector<double>& bias,
               const ConvSpec& spec) {
    if (spec.transposed) throw shape_error("conv2d called with transposed spec");
    check_conv_args(input, weight, bias, spec);
    if (weight.n != spec.out_channels || weight.c != spec.in_channels)
        throw shape_error("weight channel dims " + weight.dims_str() + " do not match spec");
    if (spec.stride == 2 && (input.h % 2 != 0 || input.w % 2 != 0))
        throw shape_error("stride-2 conv requires even H and W, got " + input.dims_str());

    const int k = spec.kernel, s = spec.stride, p = spec.padding;
    const int oh = (input.h + 2 * p - k) / s + 1;
    const int ow = (input.w + 2 * p - k) / s + 1;
    Tensor4 out(input.n, spec.out_channels, oh, ow);

    for (int in = 0; in < input.n; ++in) {
        for (int co = 0; co < spec.out_channels; ++co) {
            double* outp = &out.at(in, co, 0, 0);
            const double b = bias[co];
            for (size_t i = 0, m = static_cast<size_t>(oh) * ow; i < m; ++i) outp[i] = b;
            for (int ci = 0; ci < input.c; ++ci) {
                const double* inp = &input.at(in, ci, 0, 0);
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        const double wv = weight.at(co, ci, ky, kx);
                        if (wv == 0.0) continue;
                        for (int y = 0; y < oh; ++y) {
                            const int iy = y * s - p + ky;
                            if (iy < 0 || iy >= input.h) continue;
                            double* orow = outp + static_cast<size_t>(y) * ow;
                            const double* irow = inp + static_cast<size_t>(iy) * input.w;
                            const int ix0 = -p + kx;
                            // x range with ix0 + x*s in [0, W)
                            int x_lo = 0;
                            while (x_lo < ow && ix0 + x_lo * s < 0) ++x_lo;
                            int x_hi = ow;
                            while (x_hi > x_lo && ix0 + (x_hi - 1) * s >= input.w) --x_hi;
                            for (int x = x_lo; x < x_hi; ++x)
                                orow[x] += wv * irow[ix0 + x * s];
                        }
                    }
                }
            }
        }
    }
    return out;
}

Tensor4 conv2d_input_grad(const Tensor4& grad_out, const Tensor4& weight, const ConvSpec& spec,
                          int in_h, int in_w) {
    const int k = spec.kernel, s = spec.stride, p = spec.padding;
    Tensor4 gin(grad_out.n, spec.in_channels, in_h, in_w);
    for (int in = 0; in < grad_out.n; ++in) {
        for (int co = 0; co < spec.out_channels; ++co) {
            const double* gop = &grad_out.at(in, co, 0, 0);
            for (int ci = 0; ci < spec.in_channels; ++ci) {
                double* gip = &gin.at(in, ci, 0, 0);
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        const double wv = weight.at(co, ci, ky, kx);
                        if (wv == 0.0) continue;
                        for (int y = 0; y < grad_out.h; ++y) {
                            const int iy = y * s - p + ky;
                            if (iy < 0 || iy >= in_h) continue;
                            const double* grow = gop + static_cast<size_t>(y) * grad_out.w;
                            double* irow = gip + static_cast<size_t>(iy) * in_w;
                            const int ix0 = -p + kx;
                            int x_lo = 0;
                            while (x_lo < grad_out.w && ix0 + x_lo * s < 0) ++x_lo;
                            int x_hi = grad_out.w;
                            while (x_hi > x_lo && ix0 + (x_hi - 1) * s >= in_w) --x_hi;
                            for (int x = x_lo; x < x_hi; ++x)
                                irow[ix0 + x * s] += wv * grow[x];
                        }
                    }
                }
            }
        }
    }
    return gin;
}

Tensor4 conv2d_weight_grad(const Tensor4& grad_out, const Tensor4& input, const ConvSpec& spec,
                           int kh, int kw) {
    const int s = spec.stride, p = spec.padding;
    Tensor4 gw(spec.out_channels, spec.in_channels, kh, kw);
    for (int in = 0; in < grad_out.n; ++in) {
        for (int co = 0; co < spec.out_channels; ++co) {
            const double* gop = &grad_out.at(in, co, 0, 0);
            for (int ci = 0; ci < spec.in_channels; ++ci) {
                const double* inp = &input.at(in, ci, 0, 0);
                for (int ky = 0; ky < kh; ++ky) {
                    for (int kx = 0; kx < kw; ++kx) {
                        double acc = 0.0;
                        for (int y = 0; y < grad_out.h; ++y) {
                            const int iy = y * s - p + ky;
                            if (iy < 0 || iy >= input.h) continue;
                            const double* grow = gop + static_cast<size_t>(y) * grad_out.w;
                            const double* irow = inp + static_cast<size_t>(iy) * input.w;
                            const int ix0 = -p + kx;
                            int x_lo = 0;
                            while (x_lo < grad_out.w && ix0 + x_lo * s < 0) ++x_lo;
                            int x_hi = grad_out.w;
                            while (x_hi > x_lo && ix0 + (x_hi - 1) * s >= input.w) --x_hi;
                            for (int x = x_lo; x < x_hi; ++x)
                                acc += grow[x] * irow[ix0 + x * s];
                        }
                        gw.at(co, ci, ky, kx) += acc;
                    }
                }
            }
        }
    }
    return gw;
}

Tensor4 conv2d_transpose(const Tensor4& input, const Tensor4& weight,
                         const std::vector<double>& bias, const ConvSpec& spec) {
    if (!spec.transposed) throw shape_error("conv2d_transpose called with non-transposed spec");
    if (spec.stride != 2) throw shape_error("transposed conv supports stride 2 only");
    if (input.c != spec.in_channels)
        throw shape_error("transposed conv input channels " + std::to_string(input.c) +
                          " != spec.in_channels " + std::to_string(spec.in_channels));
    if (weight.n != spec.in_channels || weight.c != spec.out_channels)
        throw shape_error("transposed weight dims " + weight.dims_str() + " do not match spec");
    if (static_cast<int>(bias.size()) != spec.out_channels)
        throw shape_error("bias length does not match out_channels");

    // Adjoint of: conv2d stride 2, kernel 3, pad 1, mapping (2H x 2W) -> (H x W).
    ConvSpec fwd;
    fwd.in_channels = spec.out_channels;
    fwd.out_channels = spec.in_channels;
    fwd.kernel = spec.kernel;
    fwd.stride = 2;
    fwd.padding = spec.padding;
    Tensor4 out = conv2d_input_grad(input, weight, fwd, input.h * 2, input.w * 2);
    for (int in = 0; in < out.n; ++in)
        for (int co = 0; co < out.c; ++co) {
            double* p = &out.at(in, co, 0, 0);
            for (size_t i = 0, m = static_cast<size_t>(out.h) * out.w; i < m; ++i)
                p[i] += bias[co];
        }
    return out;
}

Tensor4 batchnorm(const Tensor4& input, const std::vector<double>& gamma,
                  const std::vector<double>& beta, RunningStats& stats, Mode mode,
                  BnSaved* saved) {
    const int C = input.c;
    if (static_cast<int>(gamma.size()) != C || static_cast<int>(beta.size()) != C)
        throw shape_error("batchnorm gamma/beta length must equal channel count");
    Tensor4 out(input.n, C, input.h, input.w);
    const size_t plane = static_cast<size_t>(input.h) * input.w;
    const double m = static_cast<double>(input.n) * plane;

    if (mode == Mode::train) {
        if (stats.mean.empty()) {
            stats.mean.assign(C, 0.0);
            stats.var.assign(C, 1.0);
        }
        if (saved) {
            saved->batch_mean.assign(C, 0.0);
            saved->batch_invstd.assign(C, 0.0);
        }
        for (int ci = 0; ci < C; ++ci) {
            double mean = 0.0;
            for (int in = 0; in < input.n; ++in) {
                const double* p = &input.at(in, ci, 0, 0);
                for (size_t i = 0; i < plane; ++i) mean += p[i];
            }
            mean /= m;
            double var = 0.0;
            for (int in = 0; in < input.n; ++in) {
                const double* p = &input.at(in, ci, 0, 0);
                for (size_t i = 0; i < plane; ++i) {
                    const double d = p[i] - mean;
                    var += d * d;
                }
            }
            var /= m;  // biased, used both for normalization and running stats
            const double invstd = 1.0 / std::sqrt(var + kBnEps);
            const double g = gamma[ci], b = beta[ci];
            for (int in = 0; in < input.n; ++in) {
                const double* p = &input.at(in, ci, 0, 0);
                double* q = &out.at(in, ci, 0, 0);
                for (size_t i = 0; i < plane; ++i) q[i] = g * (p[i] - mean) * invstd + b;
            }
            stats.mean[ci] = (1.0 - kBnMomentum) * stats.mean[ci] + kBnMomentum * mean;
            stats.var[ci] = (1.0 - kBnMomentum) * stats.var[ci] + kBnMomentum * var;
            if (saved) {
                saved->batch_mean[ci] = mean;
                saved->batch_invstd[ci] = invstd;
            }
        }
        stats.initialized = true;
    } else {
        if (!stats.initialized)
            throw contract_error("batchnorm eval before any train step (uninitialized stats)");
        for (int ci = 0; ci < C; ++ci) {
            const double invstd = 1.0 / std::sqrt(stats.var[ci] + kBnEps);
            const double g = gamma[ci], b = beta[ci], mean = stats.mean[ci];
            for (int in = 0; in < input.n; ++in) {
                const double* p = &input.at(in, ci, 0, 0);
                double* q = &out.at(in, ci, 0, 0);
                for (size_t i = 0; i < plane; ++i) q[i] = g * (p[i] - mean) * invstd + b;
            }
        }
    }
    return out;
}

double gelu_scalar(double x) {
    const double a = std::sqrt(2.0 / M_PI);
    const double u = a * (x + 0.044715 * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_grad_scalar(double x) {
    const double a = std::sqrt(2.0 / M_PI);
    const double u = a * (x + 0.044715 * x * x * x);
    const double t = std::tanh(u);
    const double sech2 = 1.0 - t * t;
    return 0.5 * (1.0 + t) + 0.5 * x * sech2 * a * (1.0 + 3.0 * 0.044715 * x * x);
}

Tensor4 gelu(const Tensor4& input) {
    Tensor4 out = input;
    for (double& v : out.data) v = gelu_scalar(v);
    return out;
}

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw shape_error("concat_channels spatial/batch mismatch: " + a.dims_str() + " vs " +
                          b.dims_str());
    Tensor4 out(a.n, a.c + b.c, a.h, a.w);
    const size_t plane = static_cast<size_t>(a.h) * a.w;
    for (int in = 0; in < a.n; ++in) {
        for (int ci = 0; ci < a.c; ++ci)
            std::copy_n(&a.at(in, ci, 0, 0), plane, &out.at(in, ci, 0, 0));
        for (int ci = 0; ci < b.c; ++ci)
            std::copy_n(&b.at(in, ci, 0, 0), plane, &out.at(in, a.c + ci, 0, 0));
    }
    return out;
}

Tensor4 slice_channels(const Tensor4& input, int c0, int count) {
    if (c0 < 0 || count < 1 || c0 + count > input.c)
        throw shape_error("slice_channels range out of bounds");
    Tensor4 out(input.n, count, input.h, input.w);
    const size_t plane = static_cast<size_t>(input.h) * input.w;
    for (int in = 0; in < input.n; ++in)
        for (int ci = 0; ci < count; ++ci)
            std::copy_n(&input.at(in, c0 + ci, 0, 0), plane, &out.at(in, ci, 0, 0));
    return out;
}

Tensor4 add(const Tensor4& a, const Tensor4& b) {
    if (!a.same_dims(b))
        throw shape_error("add dim mismatch: " + a.dims_str() + " vs " + b.dims_str());
    Tensor4 out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

bool all_finite(const Tensor4& t) {
    for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace spus
