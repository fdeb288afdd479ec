#pragma once

#include <map>
#include <string>

#include "spus/autodiff.hpp"
#include "spus/tensor.hpp"

namespace spus {

// Residual U-Net layout: 4 encoder levels with widths [w, 2w, 2w, 4w],
// two residual blocks per level, strided-conv downsampling after levels 0-2,
// a 2-block bottleneck at 4w, and three transposed-conv decoder stages
// (4w -> 2w -> 2w -> w) with skip concatenation, closed by a 3x3 head conv.
struct ModelConfig {
    int base_width = 32;
    int width_multiplier = 1;
    int in_fields = 5;  // d
    int grid_h = 64;
    int grid_w = 64;

    int width() const { return base_width * width_multiplier; }
    void validate() const;
};

// Filled by forward() when a trace pointer is passed; exposes the bottleneck
// activation dims for architecture checks.
struct ForwardTrace {
    int bn_n = 0, bn_c = 0, bn_h = 0, bn_w = 0;
};

struct Model {
    ModelConfig cfg;
    std::map<std::string, Tensor4> params;
    std::map<std::string, RunningStats> bn_stats;

    // Pure eval-style forward. Train mode mutates batchnorm running stats.
    Tensor4 forward(const Tensor4& x, Mode mode, ForwardTrace* trace = nullptr);

    // Records the forward pass on a tape; parameter nodes are created on
    // demand and reported through param_nodes (name -> node id).
    NodeId forward_tape(Tape& tape, NodeId x, Mode mode,
                        std::map<std::string, NodeId>& param_nodes,
                        ForwardTrace* trace = nullptr);
};

// Core model plus optional 1x1-conv input/output adapters. When d_task == 5
// the adapter map is empty and the core is used unchanged.
struct AdaptedModel {
    Model core;
    int d_task = 5;
    std::map<std::string, Tensor4> adapters;

    bool has_adapters() const { return !adapters.empty(); }
    Tensor4 forward(const Tensor4& x, Mode mode, ForwardTrace* trace = nullptr);
    NodeId forward_tape(Tape& tape, NodeId x, Mode mode,
                        std::map<std::string, NodeId>& param_nodes,
                        ForwardTrace* trace = nullptr);

    // All trainable tensors (core + adapters) by stable unique name.
    std::map<std::string, Tensor4*> trainable();
};

Model build_model(const ModelConfig& config, uint64_t seed);
AdaptedModel wrap_with_adapters(Model model, int d_task, uint64_t seed);

long count_params(const Model& model);
long count_params(const AdaptedModel& model);

// One residual block as a standalone unit (used by tests): two conv-bn-gelu
// stages plus an identity or 1x1-projection shortcut. Parameter names carry
// the given prefix, matching the layout build_model produces.
Tensor4 residual_block(const Tensor4& input, const std::map<std::string, Tensor4>& params,
                       std::map<std::string, RunningStats>& bn_stats, const std::string& prefix,
                       Mode mode);

}  // namespace spus
