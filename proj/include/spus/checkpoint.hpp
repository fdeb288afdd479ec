#pragma once

#include <map>
#include <string>
#include <vector>

#include "spus/model.hpp"

namespace spus {

// Per-field normalization statistics from a training split.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

// Serialized model: config + normalization + named parameters + batchnorm
// running statistics. Storage is f32; in-memory arithmetic stays f64.
struct Checkpoint {
    uint32_t version = 1;
    ModelConfig config;
    int d_task = 5;  // adapters present iff d_task != config.in_fields
    NormStats norm;
    std::map<std::string, Tensor4> params;  // core and (optionally) adapter tensors
    std::map<std::string, RunningStats> bn_stats;
};

Checkpoint make_checkpoint(const AdaptedModel& model, const NormStats& norm);
AdaptedModel model_from_checkpoint(const Checkpoint& ckpt);

// "SPUS" binary format, little-endian: magic, version, manifest
// (count; name, rank, dims, dtype tag per entry), then f32 payloads in
// manifest order. Saving is canonical: save(load(save(c))) == save(c).
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace spus
