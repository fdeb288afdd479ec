#include "spus/evalrt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "spus/train.hpp"

namespace spus {

StepFn model_step_fn(AdaptedModel& model) {
    return [&model](const Tensor4& x) { return model.forward(x, Mode::eval); };
}

std::vector<Tensor4> rollout(const StepFn& step, const NormStats& norm, const Tensor4& x0,
                             int n) {
    if (n < 1) throw contract_error("rollout needs n >= 1");
    std::vector<Tensor4> out;
    out.reserve(n);
    Tensor4 state = x0;
    normalize(state, norm);
    for (int t = 1; t <= n; ++t) {
        state = step(state);
        if (!all_finite(state))
            throw numeric_error("rollout diverged at timestep " + std::to_string(t));
        Tensor4 raw = state;
        denormalize(raw, norm);
        out.push_back(std::move(raw));
    }
    return out;
}

namespace {

Tensor4 snapshot_tensor(const Trajectory& traj, int t) {
    Tensor4 x(1, traj.fields(), traj.h, traj.w);
    const size_t plane = static_cast<size_t>(traj.h) * traj.w;
    for (int f = 0; f < traj.fields(); ++f)
        std::copy_n(traj.data[t][f].data(), plane, &x.at(0, f, 0, 0));
    return x;
}

}  // namespace

RolloutReport eval_dataset(const StepFn& step, const NormStats& norm,
                           const std::vector<Trajectory>& test, int n, bool raw_units) {
    if (test.empty()) throw data_error("eval_dataset needs at least one trajectory");
    const auto start = std::chrono::steady_clock::now();
    const int d = test[0].fields();
    RolloutReport report;
    report.raw_units = raw_units;
    report.per_step_mse.assign(n, 0.0);
    report.per_field_mse.assign(d, 0.0);

    for (const Trajectory& traj : test) {
        if (traj.snapshots() < n + 1)
            throw data_error("trajectory has " + std::to_string(traj.snapshots()) +
                             " snapshots, need " + std::to_string(n + 1));
        if (traj.fields() != d) throw data_error("mixed field counts in test set");
        const std::vector<Tensor4> preds = rollout(step, norm, snapshot_tensor(traj, 0), n);
        for (int t = 1; t <= n; ++t) {
            Tensor4 pred = preds[t - 1];
            Tensor4 truth = snapshot_tensor(traj, t);
            if (!raw_units) {
                normalize(pred, norm);
                normalize(truth, norm);
            }
            const size_t plane = static_cast<size_t>(pred.h) * pred.w;
            double step_sum = 0.0;
            for (int f = 0; f < d; ++f) {
                const double* pp = &pred.at(0, f, 0, 0);
                const double* tp = &truth.at(0, f, 0, 0);
                double fs = 0.0;
                for (size_t i = 0; i < plane; ++i) {
                    const double e = pp[i] - tp[i];
                    fs += e * e;
                }
                report.per_field_mse[f] += fs / static_cast<double>(plane);
                step_sum += fs;
            }
            report.per_step_mse[t - 1] += step_sum / static_cast<double>(plane * d);
        }
    }
    const double trajs = static_cast<double>(test.size());
    for (double& v : report.per_step_mse) v /= trajs;
    for (double& v : report.per_field_mse) v /= trajs * n;
    double avg = 0.0;
    for (double v : report.per_step_mse) avg += v;
    report.average = avg / n;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

void export_pgm(const Field& field, int h, int w, const std::string& path) {
    if (static_cast<int>(field.size()) != h * w) throw shape_error("export field size mismatch");
    double lo = field[0], hi = field[0];
    for (double v : field) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi - lo;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw format_error("cannot open " + path + " for writing");
    os << "P5\n" << w << " " << h << "\n255\n";
    for (double v : field) {
        // constant fields map to mid-gray
        const int g = span > 0.0 ? static_cast<int>(std::lround((v - lo) / span * 255.0)) : 128;
        os.put(static_cast<char>(std::clamp(g, 0, 255)));
    }
}

void export_csv(const Field& field, int h, int w, const std::string& path) {
    if (static_cast<int>(field.size()) != h * w) throw shape_error("export field size mismatch");
    std::ofstream os(path);
    if (!os) throw format_error("cannot open " + path + " for writing");
    os.precision(17);
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) {
            if (i) os << ",";
            os << field[static_cast<size_t>(j) * w + i];
        }
        os << "\n";
    }
}

void export_panels(const Field& pred, const Field& truth, int h, int w,
                   const std::string& path) {
    if (pred.size() != truth.size() || static_cast<int>(pred.size()) != h * w)
        throw shape_error("panel field size mismatch");
    // one image: prediction | ground truth | difference, scaled jointly
    Field panel(static_cast<size_t>(h) * w * 3);
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) {
            const size_t src = static_cast<size_t>(j) * w + i;
            const size_t row = static_cast<size_t>(j) * (3 * w);
            panel[row + i] = pred[src];
            panel[row + w + i] = truth[src];
            panel[row + 2 * w + i] = pred[src] - truth[src];
        }
    export_pgm(panel, h, 3 * w, path);
}

void write_report_csv(const RolloutReport& report, const std::vector<std::string>& field_names,
                      const std::string& path) {
    std::ofstream os(path);
    if (!os) throw format_error("cannot open " + path + " for writing");
    os.precision(17);
    os << "step,mse\n";
    for (size_t t = 0; t < report.per_step_mse.size(); ++t)
        os << (t + 1) << "," << report.per_step_mse[t] << "\n";
    os << "average," << report.average << "\n";
    for (size_t f = 0; f < report.per_field_mse.size(); ++f) {
        const std::string name = f < field_names.size() ? field_names[f] : std::to_string(f);
        os << "field_" << name << "," << report.per_field_mse[f] << "\n";
    }
}

}  // namespace spus
