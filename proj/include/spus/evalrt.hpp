#pragma once

#include <functional>
#include <string>
#include <vector>

#include "spus/checkpoint.hpp"
#include "spus/spectral.hpp"
#include "spus/trajectory.hpp"

namespace spus {

// Per-rollout error summary. `average` is the arithmetic mean of
// `per_step_mse`; `per_field_mse` averages each field over all steps.
struct RolloutReport {
    std::vector<double> per_step_mse;
    double average = 0.0;
    std::vector<double> per_field_mse;
    double wall_seconds = 0.0;
    bool raw_units = false;
};

// One forward step in normalized space; used by rollout and eval_dataset.
// Overridable so tests can substitute oracle/identity models.
using StepFn = std::function<Tensor4(const Tensor4&)>;

StepFn model_step_fn(AdaptedModel& model);

// Autoregressive inference: X'_1 = f(X_0), X'_{t+1} = f(X'_t). Input and
// outputs are in raw units; normalization uses the checkpoint stats.
// Throws numeric_error naming the timestep if a state goes non-finite.
std::vector<Tensor4> rollout(const StepFn& step, const NormStats& norm, const Tensor4& x0,
                             int n);

// Rollout every trajectory from its initial condition and compare step t
// against ground truth X_t, in normalized space by default.
RolloutReport eval_dataset(const StepFn& step, const NormStats& norm,
                           const std::vector<Trajectory>& test, int n, bool raw_units = false);

// 8-bit grayscale PGM, min-max scaled per snapshot.
void export_pgm(const Field& field, int h, int w, const std::string& path);
// CSV grid, one row per line.
void export_csv(const Field& field, int h, int w, const std::string& path);
// Three PGM panels side by side: prediction | ground truth | difference.
void export_panels(const Field& pred, const Field& truth, int h, int w,
                   const std::string& path);

void write_report_csv(const RolloutReport& report, const std::vector<std::string>& field_names,
                      const std::string& path);

}  // namespace spus
