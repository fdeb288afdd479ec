#include "spus/optim.hpp"

#include <cmath>

namespace spus {

void adam_step(Tensor4& param, const Tensor4& grad, AdamState& state, double lr) {
    if (!param.same_dims(grad))
        throw shape_error("adam_step param/grad dim mismatch: " + param.dims_str() + " vs " +
                          grad.dims_str());
    if (state.m.size() == 0) {
        state.m = Tensor4(param.n, param.c, param.h, param.w);
        state.v = Tensor4(param.n, param.c, param.h, param.w);
    }
    if (!state.m.same_dims(param))
        throw shape_error("adam state dims do not match parameter");

    for (size_t i = 0; i < grad.data.size(); ++i)
        if (!std::isfinite(grad.data[i]))
            throw numeric_error("non-finite gradient at flat index " + std::to_string(i) +
                                " (t=" + std::to_string(state.t) + ")");

    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < param.data.size(); ++i) {
        const double g = grad.data[i];
        state.m.data[i] = state.beta1 * state.m.data[i] + (1.0 - state.beta1) * g;
        state.v.data[i] = state.beta2 * state.v.data[i] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m.data[i] / bc1;
        const double vhat = state.v.data[i] / bc2;
        param.data[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

double lr_at(int epoch, const LrSchedule& schedule) {
    if (epoch < 0 || epoch > schedule.total_epochs)
        throw contract_error("epoch " + std::to_string(epoch) + " outside [0, " +
                             std::to_string(schedule.total_epochs) + "]");
    const double frac = 1.0 - static_cast<double>(epoch) / schedule.total_epochs;
    const double lr = schedule.initial_lr * frac;
    return lr < schedule.floor_lr ? schedule.floor_lr : lr;
}

}  // namespace spus
