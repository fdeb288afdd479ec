#include "spus/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "spus/optim.hpp"
#include "spus/rng.hpp"

namespace spus {

NormStats compute_norm_stats(const std::vector<Trajectory>& training) {
    if (training.empty()) throw contract_error("compute_norm_stats needs at least 1 trajectory");
    const int d = training[0].fields();
    NormStats st;
    st.mean.assign(d, 0.0);
    st.stddev.assign(d, 0.0);
    std::vector<long> counts(d, 0);
    for (const Trajectory& traj : training) {
        if (traj.fields() != d) throw data_error("mixed field counts in training set");
        for (const auto& snap : traj.data)
            for (int f = 0; f < d; ++f) {
                for (double v : snap[f]) st.mean[f] += v;
                counts[f] += static_cast<long>(snap[f].size());
            }
    }
    for (int f = 0; f < d; ++f) st.mean[f] /= static_cast<double>(counts[f]);
    for (const Trajectory& traj : training)
        for (const auto& snap : traj.data)
            for (int f = 0; f < d; ++f)
                for (double v : snap[f]) {
                    const double dd = v - st.mean[f];
                    st.stddev[f] += dd * dd;
                }
    for (int f = 0; f < d; ++f) {
        st.stddev[f] = std::sqrt(st.stddev[f] / static_cast<double>(counts[f]));
        if (st.stddev[f] <= 0.0) st.stddev[f] = 1.0;  // zero-variance guard
    }
    return st;
}

void normalize(Tensor4& x, const NormStats& stats) {
    if (x.c != static_cast<int>(stats.mean.size()))
        throw shape_error("normalize: field count mismatch");
    const size_t plane = static_cast<size_t>(x.h) * x.w;
    for (int in = 0; in < x.n; ++in)
        for (int f = 0; f < x.c; ++f) {
            double* p = &x.at(in, f, 0, 0);
            for (size_t i = 0; i < plane; ++i) p[i] = (p[i] - stats.mean[f]) / stats.stddev[f];
        }
}

void denormalize(Tensor4& x, const NormStats& stats) {
    if (x.c != static_cast<int>(stats.mean.size()))
        throw shape_error("denormalize: field count mismatch");
    const size_t plane = static_cast<size_t>(x.h) * x.w;
    for (int in = 0; in < x.n; ++in)
        for (int f = 0; f < x.c; ++f) {
            double* p = &x.at(in, f, 0, 0);
            for (size_t i = 0; i < plane; ++i) p[i] = p[i] * stats.stddev[f] + stats.mean[f];
        }
}

PairSampler::PairSampler(const std::vector<Trajectory>* dataset,
                         const std::vector<int>& traj_indices, const NormStats& stats,
                         uint64_t seed)
    : dataset_(dataset), stats_(stats), seed_(seed) {
    for (int ti : traj_indices) {
        const Trajectory& traj = (*dataset_)[ti];
        for (int t = 0; t + 1 < traj.snapshots(); ++t) pairs_.emplace_back(ti, t);
    }
    if (pairs_.empty()) throw contract_error("dataset contributes no training pairs");
    start_epoch();
}

void PairSampler::start_epoch() {
    epoch_ += 1;
    cursor_ = 0;
    Rng rng(seed_ + 0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(epoch_ + 1));
    for (size_t i = pairs_.size(); i > 1; --i)
        std::swap(pairs_[i - 1], pairs_[rng.below(i)]);
}

bool PairSampler::next_batch(int batch_size, Batch& out) {
    if (cursor_ >= pairs_.size()) return false;
    const int take = static_cast<int>(std::min<size_t>(batch_size, pairs_.size() - cursor_));
    const Trajectory& first = (*dataset_)[pairs_[cursor_].first];
    const int d = first.fields(), h = first.h, w = first.w;
    out.x = Tensor4(take, d, h, w);
    out.y = Tensor4(take, d, h, w);
    out.t_indices.clear();
    out.ground_truth = true;
    const size_t plane = static_cast<size_t>(h) * w;
    for (int b = 0; b < take; ++b) {
        const auto [ti, t] = pairs_[cursor_ + b];
        const Trajectory& traj = (*dataset_)[ti];
        if (traj.h != h || traj.w != w || traj.fields() != d)
            throw data_error("inhomogeneous trajectories in one dataset");
        for (int f = 0; f < d; ++f) {
            std::copy_n(traj.data[t][f].data(), plane, &out.x.at(b, f, 0, 0));
            std::copy_n(traj.data[t + 1][f].data(), plane, &out.y.at(b, f, 0, 0));
        }
        out.t_indices.push_back(t);
    }
    cursor_ += take;
    normalize(out.x, stats_);
    normalize(out.y, stats_);
    return true;
}

namespace {

// Mean one-step MSE in normalized space over all consecutive pairs of the
// given trajectories, eval-mode forward.
double eval_one_step(AdaptedModel& model, const std::vector<Trajectory>& data,
                     const std::vector<int>& split, const NormStats& stats, int batch) {
    PairSampler sampler(&data, split, stats, 0);
    PairSampler::Batch b;
    double sum = 0.0;
    long count = 0;
    while (sampler.next_batch(batch, b)) {
        Tensor4 pred = model.forward(b.x, Mode::eval);
        for (size_t i = 0; i < pred.data.size(); ++i) {
            const double d = pred.data[i] - b.y.data[i];
            sum += d * d;
        }
        count += static_cast<long>(pred.data.size());
    }
    return sum / static_cast<double>(count);
}

}  // namespace

TrainResult train_loop(AdaptedModel& model, const std::vector<Trajectory>& data,
                       const TrainConfig& config) {
    if (config.epochs < 1 || config.batch < 1)
        throw contract_error("epochs and batch must be >= 1");
    if (data.empty()) throw contract_error("empty training dataset");
    const int d = data[0].fields();
    for (const Trajectory& t : data)
        if (t.fields() != d) throw data_error("mixed field counts across trajectories");
    if (d != model.d_task)
        throw data_error("dataset has " + std::to_string(d) + " fields, model expects " +
                         std::to_string(model.d_task));

    TrainResult result;

    // Seeded trajectory-level split, eval disjoint from train.
    std::vector<int> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng split_rng(config.seed ^ 0x51ed5eedULL);
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[split_rng.below(i)]);
    size_t n_eval = static_cast<size_t>(std::ceil(config.eval_fraction * data.size()));
    if (n_eval >= data.size()) n_eval = data.size() - 1;
    result.eval_split.assign(order.begin(), order.begin() + n_eval);
    result.train_split.assign(order.begin() + n_eval, order.end());
    std::sort(result.eval_split.begin(), result.eval_split.end());
    std::sort(result.train_split.begin(), result.train_split.end());

    std::vector<Trajectory> train_set;
    for (int i : result.train_split) train_set.push_back(data[i]);
    NormStats stats = config.normalize ? compute_norm_stats(train_set)
                                       : NormStats{std::vector<double>(d, 0.0),
                                                   std::vector<double>(d, 1.0)};

    PairSampler sampler(&data, result.train_split, stats, config.seed);
    result.pairs_per_epoch = sampler.pairs_per_epoch();

    LrSchedule schedule{config.initial_lr, config.epochs, 0.0};
    std::map<std::string, AdamState> adam;
    auto trainable = model.trainable();

    double best_eval = std::numeric_limits<double>::infinity();
    const bool have_eval = !result.eval_split.empty();

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = lr_at(epoch, schedule);
        if (epoch > 0) sampler.start_epoch();
        double loss_sum = 0.0;
        long batches = 0;
        PairSampler::Batch batch;
        while (sampler.next_batch(config.batch, batch)) {
            if (!batch.ground_truth) {
                result.only_ground_truth_inputs = false;
                throw contract_error("training batch not sourced from ground-truth snapshots");
            }
            Tape tape;
            NodeId x = tape.leaf(batch.x);
            NodeId y = tape.leaf(batch.y);
            std::map<std::string, NodeId> pids;
            NodeId pred = model.forward_tape(tape, x, Mode::train, pids);
            NodeId loss = tape.mse(pred, y);
            const double lv = tape.value(loss).data[0];
            if (!std::isfinite(lv))
                throw numeric_error("non-finite loss at epoch " + std::to_string(epoch + 1) +
                                    " batch " + std::to_string(batches + 1));
            tape.backward(loss);
            for (auto& [name, param] : trainable) {
                auto it = pids.find(name);
                if (it == pids.end()) continue;
                adam_step(*param, tape.grad(it->second), adam[name], lr);
            }
            loss_sum += lv;
            batches += 1;
            result.gradient_steps += 1;
        }

        EpochMetrics m;
        m.epoch = epoch + 1;
        m.lr = lr;
        m.train_loss = loss_sum / static_cast<double>(batches);
        m.eval_mse = have_eval ? eval_one_step(model, data, result.eval_split, stats, config.batch)
                               : m.train_loss;
        result.log.push_back(m);
        if (m.eval_mse < best_eval) {
            best_eval = m.eval_mse;
            result.best = make_checkpoint(model, stats);
            result.best_epoch = epoch + 1;
            result.best_eval = best_eval;
        }
    }
    return result;
}

TrainResult pretrain(AdaptedModel& model, const std::vector<Trajectory>& datasets,
                     const TrainConfig& config) {
    if (model.has_adapters())
        throw contract_error("pretraining operates on the bare 5-field core");
    for (const Trajectory& t : datasets)
        if (t.fields() != model.core.cfg.in_fields)
            throw data_error("pretraining trajectories must match the core field count");
    return train_loop(model, datasets, config);
}

TrainResult finetune(const Checkpoint& pretrained, const std::vector<Trajectory>& task_data,
                     int d_task, const TrainConfig& config) {
    AdaptedModel base = model_from_checkpoint(pretrained);
    if (base.has_adapters())
        throw contract_error("finetune expects a pretrained core checkpoint without adapters");
    AdaptedModel model = wrap_with_adapters(std::move(base.core), d_task, config.seed);
    return train_loop(model, task_data, config);
}

void write_metrics_log(const std::vector<EpochMetrics>& log, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw format_error("cannot open " + path + " for writing");
    os << "epoch,lr,train_loss,eval_mse\n";
    os.precision(17);
    for (const EpochMetrics& m : log)
        os << m.epoch << "," << m.lr << "," << m.train_loss << "," << m.eval_mse << "\n";
}

}  // namespace spus
