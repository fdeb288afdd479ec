#pragma once

#include "spus/tensor.hpp"

namespace spus {

// Per-parameter Adam moments. beta1/beta2/eps are the cited defaults.
struct AdamState {
    Tensor4 m;
    Tensor4 v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam update, in place. Throws numeric_error on non-finite
// gradients, naming the offending element.
void adam_step(Tensor4& param, const Tensor4& grad, AdamState& state, double lr);

struct LrSchedule {
    double initial_lr = 1e-4;
    int total_epochs = 200;
    double floor_lr = 0.0;
};

// Linear decay from initial_lr at epoch 0 to floor_lr at total_epochs,
// stepped once per epoch.
double lr_at(int epoch, const LrSchedule& schedule);

}  // namespace spus
