// Command-line front end: every subcommand is a thin adapter over the
// library; no numerical logic lives here.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hits/experiment.hpp"
#include "hits/hybrid.hpp"
#include "hits/metrics.hpp"
#include "hits/rng.hpp"

namespace fs = std::filesystem;
using namespace hits;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Vec parse_state(const std::string& csv) {
    std::vector<double> vals;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
    if (vals.empty()) throw UsageError("--x0 must list at least one coordinate");
    Vec x(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) x[static_cast<long>(i)] = vals[i];
    return x;
}

// Preset configs are plain JSON files shipped with the repository.
std::string resolve_preset(const std::string& name, const std::string& presets_dir) {
    std::vector<fs::path> candidates;
    if (!presets_dir.empty()) candidates.push_back(fs::path(presets_dir) / (name + ".json"));
    candidates.push_back(fs::path("presets") / (name + ".json"));
    if (const char* env = std::getenv("HITS_PRESET_DIR"))
        candidates.push_back(fs::path(env) / (name + ".json"));
#ifdef HITS_SOURCE_PRESETS
    candidates.push_back(fs::path(HITS_SOURCE_PRESETS) / (name + ".json"));
#endif
    for (const auto& c : candidates) {
        if (fs::exists(c)) return c.string();
    }
    throw UsageError("preset not found: " + name);
}

ExperimentConfig load_config_arg(const std::string& config_path, const std::string& preset,
                                 const std::string& presets_dir) {
    if (config_path.empty() && preset.empty())
        throw UsageError("provide --config PATH or --preset NAME");
    const std::string path = !config_path.empty() ? config_path : resolve_preset(preset, presets_dir);
    return load_experiment_config(path);
}

void write_trajectory_csv(const Trajectory& tr, std::ostream& os) {
    os << "time";
    for (int d = 0; d < tr.dim(); ++d) os << ",x" << d;
    os << "\n";
    char buf[32];
    for (int k = 0; k <= tr.steps(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", tr.t0 + k * tr.dt);
        os << buf;
        for (int d = 0; d < tr.dim(); ++d) {
            std::snprintf(buf, sizeof(buf), "%.17g", tr.states(k, d));
            os << ',' << buf;
        }
        os << "\n";
    }
}

int run_simulate(const std::string& system, const std::string& x0_csv, double dt, int steps,
                 int substeps, const std::string& out) {
    auto sys = builtin_system(system);
    Vec x0 = parse_state(x0_csv);
    if (x0.size() != sys.dim)
        throw UsageError("--x0 has " + std::to_string(x0.size()) + " coordinates, " + system +
                         " needs " + std::to_string(sys.dim));
    Trajectory tr = reference_trajectory(sys, x0, dt, steps, substeps);
    if (out.empty()) {
        write_trajectory_csv(tr, std::cout);
    } else {
        std::ofstream os(out);
        if (!os) throw std::runtime_error("cannot open " + out);
        write_trajectory_csv(tr, os);
        std::cout << out << "\n";
    }
    return kExitOk;
}

int run_gen_data(const ExperimentConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    const auto sys = builtin_system(cfg.system);
    const Box region = cfg.region ? *cfg.region : sys.default_region;
    const fs::path dir = out_dir.empty() ? fs::path(cfg.out_dir) / "data" : fs::path(out_dir);
    fs::create_directories(dir);

    const long s_max = static_cast<long>(std::llround(cfg.dts.back() / cfg.dts.front()));
    const int p_fine = cfg.train.p_steps * static_cast<int>(s_max);
    const double grid_dt = cfg.eval_dt > 0.0 ? cfg.eval_dt : cfg.dts.front();
    const long grid_steps = static_cast<long>(std::llround(cfg.horizon / grid_dt));

    Dataset train_ds = build_dataset(sys, region, cfg.dts.front(), p_fine, cfg.samples.train,
                                     splitmix64(cfg.seed, 1), Split::train, cfg.burn_in,
                                     cfg.constraint);
    Dataset val_ds = build_dataset(sys, region, grid_dt, static_cast<int>(grid_steps),
                                   cfg.samples.validate, splitmix64(cfg.seed, 2), Split::validate,
                                   cfg.burn_in, cfg.constraint);
    Dataset test_ds = build_dataset(sys, region, grid_dt, static_cast<int>(grid_steps),
                                    cfg.samples.test, splitmix64(cfg.seed, 3), Split::test,
                                    cfg.burn_in, cfg.constraint);
    save_dataset(train_ds, (dir / "train.ds").string());
    save_dataset(val_ds, (dir / "validate.ds").string());
    save_dataset(test_ds, (dir / "test.ds").string());
    std::cout << dir.string() << "\n";
    return kExitOk;
}

int run_train(const ExperimentConfig& cfg, const std::string& data_dir, const std::string& out_dir) {
    cfg.validate();
    const fs::path dir = out_dir.empty() ? fs::path(cfg.out_dir) / "models" : fs::path(out_dir);
    fs::create_directories(dir);

    Dataset fine_train;
    const fs::path data_path = fs::path(data_dir.empty() ? (fs::path(cfg.out_dir) / "data").string()
                                                         : data_dir) /
                               "train.ds";
    if (fs::exists(data_path)) {
        fine_train = load_dataset(data_path.string());
    } else {
        const auto sys = builtin_system(cfg.system);
        const Box region = cfg.region ? *cfg.region : sys.default_region;
        const long s_max = static_cast<long>(std::llround(cfg.dts.back() / cfg.dts.front()));
        fine_train = build_dataset(sys, region, cfg.dts.front(),
                                   cfg.train.p_steps * static_cast<int>(s_max), cfg.samples.train,
                                   splitmix64(cfg.seed, 1), Split::train, cfg.burn_in,
                                   cfg.constraint);
    }

    for (std::size_t j = 0; j < cfg.dts.size(); ++j) {
        const long s = static_cast<long>(std::llround(cfg.dts[j] / cfg.dts.front()));
        Dataset scaled = stride(fine_train, static_cast<int>(s));
        TrainConfig tc = cfg.train;
        tc.seed = splitmix64(cfg.seed, 0x1000 + j);
        TrainResult res = train(scaled, cfg.arch_for(static_cast<int>(j)), cfg.dts[j], tc);
        char name[64];
        std::snprintf(name, sizeof(name), "model_dt%g.txt", cfg.dts[j]);
        save_model(res.model, (dir / name).string(), tc.digest());
        std::cout << (dir / name).string() << "  final one-step mse "
                  << res.history.back().one_step_mse << "\n";
    }
    return kExitOk;
}

std::vector<FlowMapModel> load_models_csv(const std::string& csv) {
    std::vector<FlowMapModel> models;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) models.push_back(load_model(item));
    if (models.empty()) throw UsageError("--models must list at least one model file");
    std::sort(models.begin(), models.end(),
              [](const FlowMapModel& a, const FlowMapModel& b) { return a.dt < b.dt; });
    return models;
}

int run_select(const ExperimentConfig& cfg, const std::string& models_csv,
               const std::string& data_dir) {
    std::vector<FlowMapModel> models = load_models_csv(models_csv);
    const fs::path data_path = fs::path(data_dir.empty() ? (fs::path(cfg.out_dir) / "data").string()
                                                         : data_dir) /
                               "validate.ds";
    if (!fs::exists(data_path))
        throw UsageError("validation dataset not found at " + data_path.string() +
                         " (run gen-data first)");
    Dataset val = load_dataset(data_path.string());
    CrossValidation cv = cross_validate(models, val, cfg.horizon);
    for (const auto& w : cv.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "lower " << cv.lower << " upper " << cv.upper << " (dt " << models[cv.lower].dt
              << " .. " << models[cv.upper].dt << ")\n";
    return kExitOk;
}

int run_rollout(const std::string& models_csv, const std::string& x0_csv, double horizon,
                double dt_out, double rk_h, const std::string& tableau, const std::string& out) {
    std::vector<FlowMapModel> models = load_models_csv(models_csv);
    Hierarchy h(models);
    Vec x0 = parse_state(x0_csv);
    RolloutResult result;
    CsvStyle style = CsvStyle::multiscale;
    if (rk_h > 0.0) {
        auto sys = builtin_system(models.front().system);
        HybridScheme scheme(h, RkTableau::named(tableau), sys, rk_h);
        result = hybrid_rollout(scheme, x0, horizon);
        style = CsvStyle::hybrid;
    } else {
        result = multiscale_rollout(h, x0, horizon, dt_out > 0.0 ? dt_out : h.finest_dt());
    }
    write_rollout_csv(result, out, style);
    std::cout << out << "\n";
    return kExitOk;
}

int run_bench(ExperimentConfig cfg, const std::string& out_override, std::uint64_t seed_override,
              bool seed_given, int threads) {
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (seed_given) cfg.seed = seed_override;
    cfg.threads = threads;
    cfg.validate();
    ExperimentReport rep = run_experiment(cfg);
    std::cout << rep.manifest_path << "\n";
    return rep.all_stages_ok ? kExitOk : kExitRuntime;
}

int run_increments(const std::string& config_path, const std::string& preset,
                   const std::string& presets_dir, const std::string& out_override) {
    const std::string path =
        !config_path.empty() ? config_path : resolve_preset(preset, presets_dir);
    std::ifstream is(path);
    if (!is) throw UsageError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("config parse error: " + std::string(e.what()));
    }
    const auto sys = builtin_system(j.at("system").get<std::string>());
    Box region;
    if (j.contains("region")) {
        for (const auto& iv : j.at("region")) region.axes.push_back({iv.at(0), iv.at(1)});
    } else {
        region = sys.default_region;
    }
    const int grid_n = j.value("grid_per_axis", 64);
    const double dt = j.at("dt").get<double>();
    const int j_max = j.value("j_max", 64);
    const std::string out_dir = out_override.empty()
                                    ? j.value("out_dir", "results/increments-" + sys.name)
                                    : out_override;

    IncrementField field = increment_field(sys, region, grid_n, dt, j_max);
    fs::create_directories(out_dir);
    for (int step = 1; step <= j_max; ++step) {
        char name[64];
        std::snprintf(name, sizeof(name), "increments_j%03d.csv", step);
        write_increment_csv(field, step, (fs::path(out_dir) / name).string());
    }
    std::cout << out_dir << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hits: hierarchical neural time-stepping of dynamical systems"};
    app.require_subcommand(1);

    std::string config_path, preset, presets_dir, out_dir, data_dir, models_csv, x0_csv;
    std::string tableau = "rk4";
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 0;
    double dt = 0.01, horizon = 1.0, dt_out = 0.0, rk_h = 0.0;
    int steps = 100, substeps = 0;

    auto add_config_opts = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file (JSON)");
        cmd->add_option("--preset", preset, "named preset from the presets directory");
        cmd->add_option("--presets-dir", presets_dir, "directory holding preset configs");
        cmd->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
            seed_given = true;
        });
        cmd->add_option("--out", out_dir, "output directory override");
        cmd->add_option("--threads", threads, "worker threads for training (0 = auto)");
    };

    auto* sim = app.add_subcommand("simulate", "reference trajectory of a built-in system");
    std::string sim_system = "harmonic", sim_out;
    sim->add_option("--system", sim_system, "system name")->required();
    sim->add_option("--x0", x0_csv, "comma-separated initial state")->required();
    sim->add_option("--dt", dt, "sampling step")->required();
    sim->add_option("--steps", steps, "number of samples")->required();
    sim->add_option("--substeps", substeps, "internal rk4 substeps per sample (0 = auto)");
    sim->add_option("--out", sim_out, "output CSV path (stdout when omitted)");

    auto* gen = app.add_subcommand("gen-data", "generate train/validate/test datasets");
    add_config_opts(gen);

    auto* tr = app.add_subcommand("train", "train one flow map per configured step size");
    add_config_opts(tr);
    tr->add_option("--data", data_dir, "directory with datasets from gen-data");

    auto* sel = app.add_subcommand("select", "cross-validate a set of trained models");
    add_config_opts(sel);
    sel->add_option("--models", models_csv, "comma-separated model files")->required();
    sel->add_option("--data", data_dir, "directory with datasets from gen-data");

    auto* roll = app.add_subcommand("rollout", "multiscale or hybrid rollout from model files");
    std::string roll_out = "rollout.csv";
    roll->add_option("--models", models_csv, "comma-separated model files")->required();
    roll->add_option("--x0", x0_csv, "comma-separated initial state")->required();
    roll->add_option("--T", horizon, "horizon")->required();
    roll->add_option("--dt-out", dt_out, "output grid step (default finest model dt)");
    roll->add_option("--rk-h", rk_h, "fine RK step; turns the rollout into the hybrid scheme");
    roll->add_option("--tableau", tableau, "rk tableau for the hybrid fill");
    roll->add_option("--out", roll_out, "output CSV path");

    auto* bench = app.add_subcommand("bench", "run a benchmark experiment");
    add_config_opts(bench);

    auto* noise = app.add_subcommand("noise-bench", "run a noise-robustness sweep");
    add_config_opts(noise);

    auto* inc = app.add_subcommand("increments", "flow-map increment fields over a state grid");
    add_config_opts(inc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (sim->parsed()) return run_simulate(sim_system, x0_csv, dt, steps, substeps, sim_out);
        if (gen->parsed()) {
            ExperimentConfig cfg = load_config_arg(config_path, preset, presets_dir);
            if (seed_given) cfg.seed = seed;
            return run_gen_data(cfg, out_dir);
        }
        if (tr->parsed()) {
            ExperimentConfig cfg = load_config_arg(config_path, preset, presets_dir);
            if (seed_given) cfg.seed = seed;
            return run_train(cfg, data_dir, out_dir);
        }
        if (sel->parsed()) {
            ExperimentConfig cfg = load_config_arg(config_path, preset, presets_dir);
            return run_select(cfg, models_csv, data_dir);
        }
        if (roll->parsed())
            return run_rollout(models_csv, x0_csv, horizon, dt_out, rk_h, tableau, roll_out);
        if (bench->parsed() || noise->parsed()) {
            ExperimentConfig cfg = load_config_arg(config_path, preset, presets_dir);
            return run_bench(std::move(cfg), out_dir, seed, seed_given, threads);
        }
        if (inc->parsed()) return run_increments(config_path, preset, presets_dir, out_dir);
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
