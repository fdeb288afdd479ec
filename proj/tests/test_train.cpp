#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "spus/rng.hpp"
#include "spus/spectral.hpp"
#include "spus/train.hpp"

using namespace spus;

namespace {

// Hand-built trajectory with the linear map X_{t+1} = decay * X_t.
Trajectory synthetic_trajectory(int snapshots, int h, int w, int d, uint64_t seed,
                                double decay = 0.9) {
    Rng rng(seed);
    Trajectory traj;
    traj.family = Family::navier_stokes;
    traj.h = h;
    traj.w = w;
    traj.dt = 0.1;
    traj.seed = seed;
    for (int f = 0; f < d; ++f) traj.field_names.push_back("f" + std::to_string(f));
    std::vector<Field> cur(d, Field(static_cast<size_t>(h) * w));
    for (auto& f : cur)
        for (double& v : f) v = rng.uniform(-1.0, 1.0);
    traj.data.push_back(cur);
    for (int t = 1; t < snapshots; ++t) {
        for (auto& f : cur)
            for (double& v : f) v *= decay;
        traj.data.push_back(cur);
    }
    return traj;
}

std::vector<Trajectory> synthetic_dataset(int count, int snapshots, int d = 2) {
    std::vector<Trajectory> out;
    for (int i = 0; i < count; ++i)
        out.push_back(synthetic_trajectory(snapshots, 8, 8, d, 100 + i));
    return out;
}

}  // namespace

TEST_CASE("normalization stats match a direct two-pass computation") {
    std::vector<Trajectory> data = synthetic_dataset(3, 4);
    NormStats st = compute_norm_stats(data);
    REQUIRE(st.mean.size() == 2);
    for (int f = 0; f < 2; ++f) {
        double mean = 0.0;
        long cnt = 0;
        for (const auto& t : data)
            for (const auto& snap : t.data)
                for (double v : snap[f]) {
                    mean += v;
                    cnt++;
                }
        mean /= cnt;
        double var = 0.0;
        for (const auto& t : data)
            for (const auto& snap : t.data)
                for (double v : snap[f]) var += (v - mean) * (v - mean);
        CHECK(st.mean[f] == doctest::Approx(mean).epsilon(1e-12));
        CHECK(st.stddev[f] == doctest::Approx(std::sqrt(var / cnt)).epsilon(1e-12));
    }
}

TEST_CASE("zero-variance fields normalize with unit stddev") {
    Trajectory t = synthetic_trajectory(3, 8, 8, 2, 1);
    for (auto& snap : t.data) snap[1] = Field(64, 7.0);
    NormStats st = compute_norm_stats({t});
    CHECK(st.mean[1] == 7.0);
    CHECK(st.stddev[1] == 1.0);
}

TEST_CASE("normalize and denormalize are inverse maps") {
    NormStats st;
    st.mean = {1.5, -0.25};
    st.stddev = {2.0, 0.5};
    Rng rng(4);
    Tensor4 x(2, 2, 4, 4);
    for (double& v : x.data) v = rng.uniform(-3.0, 3.0);
    Tensor4 y = x;
    normalize(y, st);
    CHECK(y.data != x.data);
    denormalize(y, st);
    for (size_t i = 0; i < x.data.size(); ++i)
        CHECK(y.data[i] == doctest::Approx(x.data[i]).epsilon(1e-14));
    Tensor4 bad(1, 3, 4, 4, 0.0);
    CHECK_THROWS_AS(normalize(bad, st), shape_error);
}

TEST_CASE("pair sampler: a trajectory with n+1 snapshots yields exactly n pairs") {
    std::vector<Trajectory> data = synthetic_dataset(3, 6);  // 5 pairs each
    NormStats st = compute_norm_stats(data);
    PairSampler sampler(&data, {0, 1, 2}, st, 7);
    CHECK(sampler.pairs_per_epoch() == 15);

    // batch 4 over 15 pairs: sizes 4,4,4,3 (partial batch kept)
    PairSampler::Batch b;
    std::vector<int> sizes;
    int total = 0;
    while (sampler.next_batch(4, b)) {
        sizes.push_back(b.x.n);
        total += b.x.n;
        CHECK(b.ground_truth);
        CHECK(b.x.c == 2);
    }
    CHECK(total == 15);
    CHECK(sizes == std::vector<int>({4, 4, 4, 3}));
}

TEST_CASE("pair sampler visits every pair exactly once per epoch, reshuffled") {
    std::vector<Trajectory> data = synthetic_dataset(2, 5);
    NormStats st;
    st.mean = {0.0, 0.0};
    st.stddev = {1.0, 1.0};
    PairSampler sampler(&data, {0, 1}, st, 3);

    auto collect = [&]() {
        std::vector<std::vector<double>> seen;
        PairSampler::Batch b;
        while (sampler.next_batch(3, b))
            for (int i = 0; i < b.x.n; ++i) {
                std::vector<double> key(&b.x.at(i, 0, 0, 0), &b.x.at(i, 0, 0, 0) + 128);
                seen.push_back(std::move(key));
            }
        return seen;
    };
    std::vector<std::vector<double>> e1 = collect();
    sampler.start_epoch();
    std::vector<std::vector<double>> e2 = collect();
    CHECK(e1.size() == 8);
    CHECK(e2.size() == 8);
    CHECK(e1 != e2);  // different order
    std::sort(e1.begin(), e1.end());
    std::sort(e2.begin(), e2.end());
    CHECK(e1 == e2);  // same multiset of pairs
    // identity stats above mean the batch carries raw snapshot values
    std::set<std::vector<double>> unique(e1.begin(), e1.end());
    CHECK(unique.size() == 8);
}

TEST_CASE("pair sampler is deterministic in its seed") {
    std::vector<Trajectory> data = synthetic_dataset(2, 5);
    NormStats st = compute_norm_stats(data);
    PairSampler a(&data, {0, 1}, st, 11);
    PairSampler b(&data, {0, 1}, st, 11);
    PairSampler::Batch ba, bb;
    while (a.next_batch(3, ba)) {
        REQUIRE(b.next_batch(3, bb));
        CHECK(ba.x.data == bb.x.data);
        CHECK(ba.y.data == bb.y.data);
        CHECK(ba.t_indices == bb.t_indices);
    }
    CHECK(!b.next_batch(3, bb));
}

TEST_CASE("train/eval split is disjoint, covering, and seeded") {
    std::vector<Trajectory> data = synthetic_dataset(10, 3);
    AdaptedModel model;
    ModelConfig cfg;
    cfg.base_width = 4;
    cfg.in_fields = 2;
    cfg.grid_h = cfg.grid_w = 8;
    model.core = build_model(cfg, 0);
    model.d_task = 2;
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch = 8;
    tc.seed = 5;
    TrainResult r = train_loop(model, data, tc);

    CHECK(r.eval_split.size() == 1);  // ceil(0.1 * 10)
    CHECK(r.train_split.size() == 9);
    std::set<int> all(r.train_split.begin(), r.train_split.end());
    for (int i : r.eval_split) CHECK(all.insert(i).second);
    CHECK(all.size() == 10);
    CHECK(r.pairs_per_epoch == 18);
    CHECK(r.gradient_steps == 3);  // ceil(18 / 8)
    CHECK(r.only_ground_truth_inputs);

    AdaptedModel model2;
    model2.core = build_model(cfg, 0);
    model2.d_task = 2;
    TrainConfig tc2 = tc;
    tc2.seed = 6;
    TrainResult r2 = train_loop(model2, data, tc2);
    CHECK(r.eval_split != r2.eval_split);
}

TEST_CASE("a short training run reduces the loss and tracks the best epoch") {
    std::vector<Trajectory> data = synthetic_dataset(5, 6);
    ModelConfig cfg;
    cfg.base_width = 4;
    cfg.in_fields = 2;
    cfg.grid_h = cfg.grid_w = 8;
    AdaptedModel model;
    model.core = build_model(cfg, 1);
    model.d_task = 2;
    TrainConfig tc;
    tc.epochs = 8;
    tc.batch = 8;
    tc.initial_lr = 2e-3;
    tc.seed = 9;
    TrainResult r = train_loop(model, data, tc);

    REQUIRE(r.log.size() == 8);
    CHECK(r.log.back().train_loss < r.log.front().train_loss);
    double best = r.log[0].eval_mse;
    int best_epoch = 1;
    for (const auto& m : r.log)
        if (m.eval_mse < best) {
            best = m.eval_mse;
            best_epoch = m.epoch;
        }
    CHECK(r.best_eval == best);
    CHECK(r.best_epoch == best_epoch);
    // the linear schedule decays monotonically
    for (size_t i = 1; i < r.log.size(); ++i) CHECK(r.log[i].lr < r.log[i - 1].lr);
}

TEST_CASE("training is deterministic end to end") {
    std::vector<Trajectory> data = synthetic_dataset(4, 4);
    ModelConfig cfg;
    cfg.base_width = 4;
    cfg.in_fields = 2;
    cfg.grid_h = cfg.grid_w = 8;
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch = 6;
    tc.seed = 13;

    auto run = [&]() {
        AdaptedModel m;
        m.core = build_model(cfg, 2);
        m.d_task = 2;
        return train_loop(m, data, tc);
    };
    TrainResult a = run();
    TrainResult b = run();
    REQUIRE(a.log.size() == b.log.size());
    for (size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].train_loss == b.log[i].train_loss);
        CHECK(a.log[i].eval_mse == b.log[i].eval_mse);
    }
    for (const auto& [name, t] : a.best.params) CHECK(t.data == b.best.params.at(name).data);
}

TEST_CASE("field-count mismatches are rejected") {
    std::vector<Trajectory> data = synthetic_dataset(4, 3, 2);
    ModelConfig cfg;
    cfg.base_width = 4;
    cfg.in_fields = 3;
    cfg.grid_h = cfg.grid_w = 8;
    AdaptedModel model;
    model.core = build_model(cfg, 0);
    model.d_task = 3;
    TrainConfig tc;
    tc.epochs = 1;
    CHECK_THROWS_AS(train_loop(model, data, tc), data_error);
    CHECK_THROWS_AS(pretrain(model, data, tc), data_error);
}

TEST_CASE("pretraining rejects adapter-wrapped models") {
    ModelConfig cfg;
    cfg.base_width = 4;
    cfg.in_fields = 5;
    cfg.grid_h = cfg.grid_w = 8;
    AdaptedModel model = wrap_with_adapters(build_model(cfg, 0), 2, 1);
    std::vector<Trajectory> data = synthetic_dataset(3, 3, 2);
    TrainConfig tc;
    tc.epochs = 1;
    CHECK_THROWS_AS(pretrain(model, data, tc), contract_error);
}

TEST_CASE("finetune wraps the pretrained core with task adapters") {
    // pretrain a 2-field core, then adapt it to a 1-field task
    std::vector<Trajectory> pre_data = synthetic_dataset(4, 4, 2);
    ModelConfig cfg;
    cfg.base_width = 4;
    cfg.in_fields = 2;
    cfg.grid_h = cfg.grid_w = 8;
    AdaptedModel model;
    model.core = build_model(cfg, 3);
    model.d_task = 2;
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch = 8;
    TrainResult pre = pretrain(model, pre_data, tc);
    CHECK(pre.best.d_task == 2);

    std::vector<Trajectory> task_data = synthetic_dataset(4, 4, 1);
    TrainResult ft = finetune(pre.best, task_data, 1, tc);
    CHECK(ft.best.d_task == 1);
    CHECK(ft.best.params.count("adapter_in.weight") == 1);
    CHECK(ft.best.params.count("adapter_out.bias") == 1);
    // task normalization is recomputed from the task data
    CHECK(ft.best.norm.mean.size() == 1);
}
