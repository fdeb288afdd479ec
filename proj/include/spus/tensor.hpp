#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "spus/errors.hpp"

namespace spus {

// Dense rank-4 array [batch, channels, rows, cols], row-major, W fastest.
// All forward kernels in this module are pure functions of their inputs.
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_, double fill = 0.0)
        : n(n_), c(c_), h(h_), w(w_) {
        if (n < 1 || c < 1 || h < 1 || w < 1)
            throw shape_error("all tensor dims must be >= 1");
        data.assign(static_cast<size_t>(n) * c * h * w, fill);
    }

    size_t size() const { return data.size(); }

    double& at(int in, int ic, int iy, int ix) {
        return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    const double& at(int in, int ic, int iy, int ix) const {
        return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }

    bool same_dims(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    std::string dims_str() const;
};

// Convolution descriptor. kernel in {1,3}, stride in {1,2}.
struct ConvSpec {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
    int stride = 1;
    int padding = 1;
    bool transposed = false;
};

// Per-channel running statistics for batch normalization.
struct RunningStats {
    std::vector<double> mean;
    std::vector<double> var;
    bool initialized = false;
};

enum class Mode { train, eval };

// Saved intermediates from a train-mode batchnorm, needed by its backward pass.
struct BnSaved {
    std::vector<double> batch_mean;
    std::vector<double> batch_invstd;  // 1/sqrt(var + eps)
};

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

// out[n,co,oh,ow] = bias[co] + sum_{ci,ky,kx} in[n,ci,oh*s-p+ky,ow*s-p+kx] * w[co,ci,ky,kx]
// Out-of-range taps read zero. Output H = floor((H + 2p - k)/s) + 1.
Tensor4 conv2d(const Tensor4& input, const Tensor4& weight, const std::vector<double>& bias,
               const ConvSpec& spec);

// Exact adjoint of the stride-2 forward conv with the same weight, plus bias.
// weight layout [Cin_t, Cout_t, kh, kw]; output is exactly 2x the input H and W.
Tensor4 conv2d_transpose(const Tensor4& input, const Tensor4& weight,
                         const std::vector<double>& bias, const ConvSpec& spec);

// Gradient of conv2d w.r.t. its input (scatter of grad_out through the weight).
Tensor4 conv2d_input_grad(const Tensor4& grad_out, const Tensor4& weight, const ConvSpec& spec,
                          int in_h, int in_w);
// Gradient of conv2d w.r.t. its weight.
Tensor4 conv2d_weight_grad(const Tensor4& grad_out, const Tensor4& input, const ConvSpec& spec,
                           int kh, int kw);

Tensor4 batchnorm(const Tensor4& input, const std::vector<double>& gamma,
                  const std::vector<double>& beta, RunningStats& stats, Mode mode,
                  BnSaved* saved = nullptr);

Tensor4 gelu(const Tensor4& input);
double gelu_scalar(double x);
double gelu_grad_scalar(double x);

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b);
// Channels [c0, c0+count) of input.
Tensor4 slice_channels(const Tensor4& input, int c0, int count);

Tensor4 add(const Tensor4& a, const Tensor4& b);

bool all_finite(const Tensor4& t);

}  // namespace spus
