#pragma once

#include <vector>

#include "spus/checkpoint.hpp"
#include "spus/trajectory.hpp"

namespace spus {

struct TrainConfig {
    int epochs = 200;
    int batch = 10;
    double initial_lr = 1e-4;
    uint64_t seed = 0;
    double eval_fraction = 0.1;
    bool normalize = true;
};

NormStats compute_norm_stats(const std::vector<Trajectory>& training);

void normalize(Tensor4& x, const NormStats& stats);
void denormalize(Tensor4& x, const NormStats& stats);

// Epoch permutation over all consecutive (X_t, X_{t+1}) pairs of a dataset.
// A trajectory with n+1 snapshots contributes exactly n pairs; every epoch
// visits each pair exactly once in seeded-shuffled order.
class PairSampler {
public:
    PairSampler(const std::vector<Trajectory>* dataset, const std::vector<int>& traj_indices,
                const NormStats& stats, uint64_t seed);

    struct Batch {
        Tensor4 x, y;
        std::vector<int> t_indices;      // source timestep of each pair
        bool ground_truth = true;        // both sides come from stored snapshots
    };

    // False once the epoch is exhausted; call start_epoch to reshuffle.
    bool next_batch(int batch_size, Batch& out);
    void start_epoch();

    long pairs_per_epoch() const { return static_cast<long>(pairs_.size()); }

private:
    const std::vector<Trajectory>* dataset_;
    std::vector<std::pair<int, int>> pairs_;  // (trajectory, t)
    NormStats stats_;
    uint64_t seed_;
    long epoch_ = -1;
    size_t cursor_ = 0;
};

struct EpochMetrics {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double eval_mse = 0.0;
};

struct TrainResult {
    Checkpoint best;
    int best_epoch = 0;  // 1-based epoch of the saved checkpoint
    double best_eval = 0.0;
    std::vector<EpochMetrics> log;
    long pairs_per_epoch = 0;
    long gradient_steps = 0;
    bool only_ground_truth_inputs = true;  // protocol instrumentation
    std::vector<int> train_split, eval_split;
};

// Shared epoch loop: forward, mse, backward, adam with the linear LR
// schedule; per-epoch one-step eval on the held-out split; returns the
// checkpoint with the best eval MSE.
TrainResult train_loop(AdaptedModel& model, const std::vector<Trajectory>& data,
                       const TrainConfig& config);

// Pretraining over 5-field (CE) trajectories; model must not carry adapters.
TrainResult pretrain(AdaptedModel& model, const std::vector<Trajectory>& datasets,
                     const TrainConfig& config);

// Adapter fine-tuning: wraps the pretrained core when d_task differs from its
// field count; all parameters stay trainable; fresh task NormStats.
TrainResult finetune(const Checkpoint& pretrained, const std::vector<Trajectory>& task_data,
                     int d_task, const TrainConfig& config);

void write_metrics_log(const std::vector<EpochMetrics>& log, const std::string& path);

}  // namespace spus
