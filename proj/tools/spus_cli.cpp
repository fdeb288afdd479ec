#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "spus/datagen.hpp"
#include "spus/evalrt.hpp"
#include "spus/train.hpp"

namespace fs = std::filesystem;
using namespace spus;

namespace {

struct Usage {
    std::string message;
};

// key=value config file + --key value flags; flags override file entries.
class Options {
public:
    void load_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw Usage{"cannot open config file " + path};
        std::string line;
        while (std::getline(is, line)) {
            const size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const size_t eq = line.find('=');
            if (eq == std::string::npos) continue;
            values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
        }
    }

    void parse_flags(int argc, char** argv, int start) {
        for (int i = start; i < argc; ++i) {
            std::string arg = argv[i];
            if (arg.rfind("--", 0) != 0) throw Usage{"unexpected argument: " + arg};
            arg = arg.substr(2);
            const size_t eq = arg.find('=');
            if (eq != std::string::npos) {
                flags_[arg.substr(0, eq)] = arg.substr(eq + 1);
            } else {
                if (i + 1 >= argc) throw Usage{"flag --" + arg + " needs a value"};
                flags_[arg] = argv[++i];
            }
        }
        if (flags_.count("config")) load_file(flags_.at("config"));
    }

    std::string get(const std::string& key, const std::string& def) const {
        auto f = flags_.find(key);
        if (f != flags_.end()) return f->second;
        auto v = values_.find(key);
        if (v != values_.end()) return v->second;
        return def;
    }
    std::string require(const std::string& key) const {
        const std::string v = get(key, "");
        if (v.empty()) throw Usage{"missing required option --" + key};
        return v;
    }
    long get_int(const std::string& key, long def) const {
        const std::string v = get(key, "");
        return v.empty() ? def : std::stol(v);
    }
    double get_double(const std::string& key, double def) const {
        const std::string v = get(key, "");
        return v.empty() ? def : std::stod(v);
    }

    std::map<std::string, std::string> effective() const {
        std::map<std::string, std::string> out = values_;
        for (const auto& [k, v] : flags_) out[k] = v;
        return out;
    }

private:
    static std::string trim(std::string s) {
        const auto sp = " \t\r";
        s.erase(0, s.find_first_not_of(sp));
        const size_t last = s.find_last_not_of(sp);
        s.erase(last == std::string::npos ? 0 : last + 1);
        return s;
    }
    std::map<std::string, std::string> values_;
    std::map<std::string, std::string> flags_;
};

std::vector<std::string> data_paths(const std::string& spec) {
    std::vector<std::string> out;
    if (fs::is_directory(spec)) {
        for (const auto& e : fs::directory_iterator(spec))
            if (e.path().extension() == ".pdet") out.push_back(e.path().string());
        std::sort(out.begin(), out.end());
    } else {
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) out.push_back(item);
    }
    if (out.empty()) throw Usage{"no trajectory files found at " + spec};
    return out;
}

std::vector<Trajectory> load_dataset(const std::string& spec) {
    std::vector<Trajectory> out;
    for (const std::string& p : data_paths(spec)) out.push_back(read_trajectory(p));
    return out;
}

SolverParams solver_params(const Options& opt) {
    SolverParams p;
    p.gas_gamma = opt.get_double("gamma", p.gas_gamma);
    p.cfl = opt.get_double("cfl", p.cfl);
    p.viscosity = opt.get_double("viscosity", p.viscosity);
    p.forcing_amp = opt.get_double("forcing-amp", p.forcing_amp);
    p.forcing_k = static_cast<int>(opt.get_int("forcing-k", p.forcing_k));
    p.horizon = opt.get_double("horizon", 0.0);
    return p;
}

TrainConfig train_config(const Options& opt, int default_epochs) {
    TrainConfig cfg;
    cfg.epochs = static_cast<int>(opt.get_int("epochs", default_epochs));
    cfg.batch = static_cast<int>(opt.get_int("batch", 10));
    cfg.initial_lr = opt.get_double("lr", 1e-4);
    cfg.seed = static_cast<uint64_t>(opt.get_int("seed", 0));
    cfg.eval_fraction = opt.get_double("eval-frac", 0.1);
    cfg.normalize = opt.get_int("normalize", 1) != 0;
    return cfg;
}

int cmd_generate(const Options& opt) {
    const Family family = family_from_name(opt.require("family"));
    const int count = static_cast<int>(opt.get_int("count", 4));
    const int grid = static_cast<int>(opt.get_int("grid", 64));
    const int h = static_cast<int>(opt.get_int("height", grid));
    const int w = static_cast<int>(opt.get_int("width", grid));
    const int default_snaps = family == Family::wave ? 14 : 20;
    const int snaps = static_cast<int>(opt.get_int("snapshots", default_snaps));
    const uint64_t seed0 = static_cast<uint64_t>(opt.get_int("seed", 0));
    const std::string out = opt.require("out");
    fs::create_directories(out);

    IcSpec ic;
    ic.kind = ic_kind_from_name(opt.require("ic"));
    ic.amplitude = opt.get_double("amplitude", 1.0);
    const SolverParams params = solver_params(opt);

    for (int i = 0; i < count; ++i) {
        ic.seed = seed0 + static_cast<uint64_t>(i);
        Trajectory traj = generate_trajectory(family, ic, h, w, snaps, params);
        std::ostringstream name;
        name << out << "/traj_" << std::setw(4) << std::setfill('0') << i << ".pdet";
        write_trajectory(traj, name.str());
    }
    std::cout << "wrote " << count << " trajectories to " << out << "\n";
    return 0;
}

int cmd_pretrain(const Options& opt) {
    std::vector<Trajectory> data = load_dataset(opt.require("data"));
    ModelConfig mc;
    mc.base_width = static_cast<int>(opt.get_int("base-width", 32));
    mc.width_multiplier = static_cast<int>(opt.get_int("width-mult", 1));
    mc.in_fields = data[0].fields();
    mc.grid_h = data[0].h;
    mc.grid_w = data[0].w;
    const TrainConfig cfg = train_config(opt, 200);

    AdaptedModel model;
    model.core = build_model(mc, cfg.seed);
    model.d_task = mc.in_fields;
    TrainResult result = pretrain(model, data, cfg);

    save_checkpoint(result.best, opt.require("out"));
    const std::string log = opt.get("log", "");
    if (!log.empty()) write_metrics_log(result.log, log);
    std::cout << "best eval mse " << result.best_eval << " at epoch " << result.best_epoch
              << ", checkpoint written to " << opt.require("out") << "\n";
    return 0;
}

int cmd_finetune(const Options& opt) {
    const Checkpoint pre = load_checkpoint(opt.require("checkpoint"));
    std::vector<Trajectory> data = load_dataset(opt.require("data"));
    const int max_traj = static_cast<int>(opt.get_int("trajectories", 128));
    if (static_cast<int>(data.size()) > max_traj) data.resize(max_traj);
    const TrainConfig cfg = train_config(opt, 200);
    TrainResult result = finetune(pre, data, data[0].fields(), cfg);
    save_checkpoint(result.best, opt.require("out"));
    const std::string log = opt.get("log", "");
    if (!log.empty()) write_metrics_log(result.log, log);
    std::cout << "best eval mse " << result.best_eval << " at epoch " << result.best_epoch
              << ", checkpoint written to " << opt.require("out") << "\n";
    return 0;
}

int cmd_rollout(const Options& opt) {
    const Checkpoint ckpt = load_checkpoint(opt.require("checkpoint"));
    AdaptedModel model = model_from_checkpoint(ckpt);
    const Trajectory traj = read_trajectory(opt.require("trajectory"));
    const int n = static_cast<int>(opt.get_int("steps", traj.snapshots() - 1));

    Tensor4 x0(1, traj.fields(), traj.h, traj.w);
    for (int f = 0; f < traj.fields(); ++f)
        std::copy(traj.data[0][f].begin(), traj.data[0][f].end(), &x0.at(0, f, 0, 0));
    const std::vector<Tensor4> preds = rollout(model_step_fn(model), ckpt.norm, x0, n);

    Trajectory out = traj;
    out.data.resize(1);
    for (const Tensor4& p : preds) {
        std::vector<Field> snap(traj.fields());
        const size_t plane = static_cast<size_t>(traj.h) * traj.w;
        for (int f = 0; f < traj.fields(); ++f)
            snap[f].assign(&p.at(0, f, 0, 0), &p.at(0, f, 0, 0) + plane);
        out.data.push_back(std::move(snap));
    }
    write_trajectory(out, opt.require("out"));
    std::cout << "wrote " << n << " predicted steps to " << opt.require("out") << "\n";
    return 0;
}

int cmd_eval(const Options& opt) {
    const Checkpoint ckpt = load_checkpoint(opt.require("checkpoint"));
    AdaptedModel model = model_from_checkpoint(ckpt);
    std::vector<Trajectory> data = load_dataset(opt.require("data"));
    const int n = static_cast<int>(opt.get_int("steps", data[0].snapshots() - 1));
    const bool raw = opt.get_int("raw-units", 0) != 0;
    RolloutReport report = eval_dataset(model_step_fn(model), ckpt.norm, data, n, raw);
    write_report_csv(report, data[0].field_names, opt.require("out"));
    std::cout << "average mse (" << (raw ? "raw" : "normalized") << ") " << report.average
              << " over " << data.size() << " trajectories, report at " << opt.require("out")
              << "\n";
    return 0;
}

int cmd_export(const Options& opt) {
    const Trajectory traj = read_trajectory(opt.require("trajectory"));
    const int t = static_cast<int>(opt.get_int("timestep", 0));
    const int f = static_cast<int>(opt.get_int("field", 0));
    if (t < 0 || t >= traj.snapshots() || f < 0 || f >= traj.fields())
        throw contract_error("timestep/field index out of range");
    const std::string out = opt.require("out");
    const std::string format = opt.get("format", "pgm");
    const std::string truth_path = opt.get("truth", "");
    if (!truth_path.empty()) {
        const Trajectory truth = read_trajectory(truth_path);
        if (t >= truth.snapshots() || f >= truth.fields())
            throw contract_error("timestep/field index out of range in truth trajectory");
        export_panels(traj.data[t][f], truth.data[t][f], traj.h, traj.w, out);
    } else if (format == "csv") {
        export_csv(traj.data[t][f], traj.h, traj.w, out);
    } else {
        export_pgm(traj.data[t][f], traj.h, traj.w, out);
    }
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_inspect(const Options& opt) {
    const std::string path = opt.require("path");
    std::ifstream is(path, std::ios::binary);
    char magic[4] = {0, 0, 0, 0};
    is.read(magic, 4);
    is.close();
    if (std::string(magic, 4) == "SPUS") {
        const Checkpoint c = load_checkpoint(path);
        AdaptedModel m = model_from_checkpoint(c);
        std::cout << "checkpoint version " << c.version << "\n"
                  << "base_width=" << c.config.base_width
                  << " width_multiplier=" << c.config.width_multiplier
                  << " in_fields=" << c.config.in_fields << " grid=" << c.config.grid_h << "x"
                  << c.config.grid_w << " d_task=" << c.d_task << "\n"
                  << "parameters: " << count_params(m) << "\n"
                  << "tensors: " << c.params.size() << ", batchnorm layers: " << c.bn_stats.size()
                  << "\n";
        std::cout << "norm mean:";
        for (double v : c.norm.mean) std::cout << " " << v;
        std::cout << "\nnorm std:";
        for (double v : c.norm.stddev) std::cout << " " << v;
        std::cout << "\n";
    } else if (std::string(magic, 4) == "PDET") {
        const Trajectory t = read_trajectory(path);
        std::cout << "trajectory family=" << family_name(t.family) << " fields=" << t.fields()
                  << " grid=" << t.h << "x" << t.w << " snapshots=" << t.snapshots()
                  << " dt=" << t.dt << " seed=" << t.seed << "\nfield names:";
        for (const auto& n : t.field_names) std::cout << " " << n;
        std::cout << "\n";
    } else {
        throw format_error("unrecognized file magic in " + path);
    }
    std::cout << "effective options:\n";
    for (const auto& [k, v] : opt.effective()) std::cout << "  " << k << "=" << v << "\n";
    return 0;
}

void print_usage() {
    std::cout <<
        "usage: spus <command> [--config file] [--key value ...]\n"
        "commands:\n"
        "  generate  --family euler|navier-stokes|wave --ic <kind> --out <dir>\n"
        "            [--count N --grid N --snapshots N --seed S --horizon T\n"
        "             --viscosity NU --forcing-amp A --forcing-k K --gamma G --cfl C]\n"
        "  pretrain  --data <dir|files> --out <ckpt> [--epochs N --batch N --lr LR\n"
        "             --seed S --eval-frac F --base-width W --width-mult M --log <csv>]\n"
        "  finetune  --checkpoint <ckpt> --data <dir|files> --out <ckpt>\n"
        "            [--trajectories N --epochs N --batch N --lr LR --seed S --log <csv>]\n"
        "  rollout   --checkpoint <ckpt> --trajectory <pdet> --out <pdet> [--steps N]\n"
        "  eval      --checkpoint <ckpt> --data <dir|files> --out <csv>\n"
        "            [--steps N --raw-units 1]\n"
        "  export    --trajectory <pdet> --out <file> [--timestep T --field F\n"
        "             --format pgm|csv --truth <pdet>]\n"
        "  inspect   --path <ckpt|pdet>\n"
        "config files hold key=value lines ('#' comments); flags override them.\n";
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        print_usage();
        return 2;
    }
    const std::string cmd = argv[1];
    try {
        Options opt;
        opt.parse_flags(argc, argv, 2);
        if (cmd == "generate") return cmd_generate(opt);
        if (cmd == "pretrain") return cmd_pretrain(opt);
        if (cmd == "finetune") return cmd_finetune(opt);
        if (cmd == "rollout") return cmd_rollout(opt);
        if (cmd == "eval") return cmd_eval(opt);
        if (cmd == "export") return cmd_export(opt);
        if (cmd == "inspect") return cmd_inspect(opt);
        std::cerr << "unknown command: " << cmd << "\n";
        print_usage();
        return 2;
    } catch (const Usage& u) {
        std::cerr << "error: " << u.message << "\n";
        print_usage();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
