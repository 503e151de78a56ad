#include "hits/experiment.hpp"

#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "hits/hybrid.hpp"
#include "hits/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hits {

namespace {

// Substream tags for the per-stage seed split. Everything random in a run
// derives from the config seed through these.
constexpr std::uint64_t kTagTrainIcs = 1;
constexpr std::uint64_t kTagValIcs = 2;
constexpr std::uint64_t kTagTestIcs = 3;
constexpr std::uint64_t kTagTrainNoise = 0x100;  // + fraction index
constexpr std::uint64_t kTagValNoise = 0x200;    // + fraction index
constexpr std::uint64_t kTagModelInit = 0x1000;  // + fraction index * 64 + scale

std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

long integer_ratio_or_zero(double a, double b) {
    const double q = a / b;
    const double r = std::round(q);
    if (r < 1.0 || std::abs(q - r) > 1e-9 * std::max(1.0, std::abs(q))) return 0;
    return static_cast<long>(r);
}

}  // namespace

const std::vector<int>& ExperimentConfig::arch_for(int scale) const {
    if (archs.size() == 1) return archs.front();
    return archs.at(static_cast<std::size_t>(scale));
}

void ExperimentConfig::validate() const {
    require(!system.empty(), "config: system is required");
    require(!dts.empty(), "config: dts must be non-empty");
    for (std::size_t i = 1; i < dts.size(); ++i)
        require(dts[i] > dts[i - 1], "config: dts must be sorted ascending and pairwise distinct");
    for (double dt : dts) {
        require(dt > 0.0, "config: dts must be positive");
        require(integer_ratio_or_zero(dt, dts.front()) != 0,
                "config: every dt must be an integer multiple of the finest dt");
        require(integer_ratio_or_zero(horizon, dt) != 0,
                "config: the horizon must be an integer multiple of every dt");
    }
    require(horizon > 0.0, "config: horizon must be positive");
    if (eval_dt > 0.0) {
        for (double dt : dts)
            require(integer_ratio_or_zero(dt, eval_dt) != 0,
                    "config: every dt must be an integer multiple of eval_dt");
        require(integer_ratio_or_zero(horizon, eval_dt) != 0,
                "config: the horizon must be an integer multiple of eval_dt");
    }
    require(archs.size() == 1 || archs.size() == dts.size(),
            "config: provide one architecture or one per dt");
    const SystemSpec sys = builtin_system(system);
    for (const auto& a : archs) {
        require(a.size() >= 2, "config: architectures need at least input and output widths");
        require(a.front() == sys.dim && a.back() == sys.dim,
                "config: architecture end widths must equal the system dimension");
    }
    if (region) {
        region->validate();
        require(region->dim() == sys.dim, "config: region dimension must match the system");
    }
    train.validate();
    require(samples.train >= 1 && samples.validate >= 1 && samples.test >= 1,
            "config: sample counts must be >= 1");
    for (double f : noise_fractions)
        require(f >= 0.0 && f <= 1.0, "config: noise fractions must lie in [0, 1]");
    require(!schemes.empty(), "config: scheme selection is empty");
    for (const auto& s : schemes) {
        require(s == "single-scale" || s == "multiscale" || s == "hybrid" || s == "rk",
                "config: unknown scheme " + s);
        if (s == "hybrid") {
            require(!hybrid.fine_steps.empty(), "config: hybrid scheme requires fine_steps");
            require(hybrid.q >= 1 && hybrid.q <= static_cast<int>(dts.size()),
                    "config: hybrid q must lie in [1, number of models]");
            for (double h : hybrid.fine_steps) {
                require(integer_ratio_or_zero(dts[dts.size() - hybrid.q], h) != 0,
                        "config: the finest coarse dt must be an integer multiple of each hybrid step");
            }
        }
        if (s == "rk") {
            require(!rk.steps.empty(), "config: rk scheme requires steps");
            for (double h : rk.steps)
                require(integer_ratio_or_zero(horizon, h) != 0,
                        "config: the horizon must be an integer multiple of each rk step");
        }
    }
    require(burn_in >= 0.0, "config: burn_in must be >= 0");
    require(!out_dir.empty(), "config: out_dir is required");
}

std::string ExperimentConfig::digest() const {
    std::string s = name + "|" + system + "|";
    for (double dt : dts) s += fmt17(dt) + ",";
    s += "|" + fmt17(horizon) + "|" + fmt17(eval_dt) + "|";
    for (const auto& a : archs) {
        for (int w : a) s += std::to_string(w) + ".";
        s += ";";
    }
    s += "|" + train.digest();
    s += "|" + std::to_string(samples.train) + "/" + std::to_string(samples.validate) + "/" +
         std::to_string(samples.test);
    for (double f : noise_fractions) s += "|" + fmt17(f);
    s += "|" + fmt17(burn_in) + "|" + std::to_string(seed);
    for (const auto& sc : schemes) s += "|" + sc;
    s += "|q=" + std::to_string(hybrid.q) + ":" + hybrid.tableau;
    for (double h : hybrid.fine_steps) s += "," + fmt17(h);
    s += "|rk=" + rk.tableau;
    for (double h : rk.steps) s += "," + fmt17(h);
    if (region) {
        s += "|region=";
        for (const auto& iv : region->axes) s += fmt17(iv.lo) + ":" + fmt17(iv.hi) + ",";
    }
    s += constraint == RegionConstraint::unit_disk ? "|disk" : "|box";

    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016" PRIx64, h);
    return out;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open config file: " + path);
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        throw std::invalid_argument("config parse error in " + path + ": " + e.what());
    }
    try {
        ExperimentConfig cfg;
        cfg.name = j.value("name", fs::path(path).stem().string());
        cfg.system = j.at("system").get<std::string>();
        if (j.contains("region")) {
            Box box;
            for (const auto& iv : j.at("region")) box.axes.push_back({iv.at(0), iv.at(1)});
            cfg.region = box;
        }
        const std::string rc = j.value("region_constraint", "none");
        if (rc == "unit_disk") cfg.constraint = RegionConstraint::unit_disk;
        else if (rc != "none") throw std::invalid_argument("unknown region_constraint: " + rc);
        cfg.dts = j.at("dts").get<std::vector<double>>();
        cfg.horizon = j.at("horizon").get<double>();
        cfg.eval_dt = j.value("eval_dt", 0.0);
        if (j.contains("archs")) cfg.archs = j.at("archs").get<std::vector<std::vector<int>>>();
        else cfg.archs = {j.at("arch").get<std::vector<int>>()};
        if (j.contains("train")) {
            const auto& t = j.at("train");
            cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
            cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
            cfg.train.stop_threshold = t.value("stop_threshold", cfg.train.stop_threshold);
            cfg.train.p_steps = t.value("p_steps", cfg.train.p_steps);
        }
        const auto& s = j.at("samples");
        cfg.samples = {s.at("train").get<int>(), s.at("validate").get<int>(), s.at("test").get<int>()};
        if (j.contains("noise_fractions"))
            cfg.noise_fractions = j.at("noise_fractions").get<std::vector<double>>();
        cfg.burn_in = j.value("burn_in", 0.0);
        cfg.seed = j.value("seed", 0ULL);
        if (j.contains("schemes")) cfg.schemes = j.at("schemes").get<std::vector<std::string>>();
        if (j.contains("hybrid")) {
            const auto& h = j.at("hybrid");
            cfg.hybrid.q = h.value("q", 1);
            cfg.hybrid.tableau = h.value("tableau", std::string("rk4"));
            cfg.hybrid.fine_steps = h.value("fine_steps", std::vector<double>{});
        }
        if (j.contains("rk")) {
            const auto& r = j.at("rk");
            cfg.rk.tableau = r.value("tableau", std::string("rk4"));
            cfg.rk.steps = r.value("steps", std::vector<double>{});
        }
        cfg.out_dir = j.value("out_dir", "results/" + cfg.name);
        cfg.threads = j.value("threads", 1);
        return cfg;
    } catch (const json::exception& e) {
        throw std::invalid_argument("config field error in " + path + ": " + e.what());
    }
}

void save_experiment_config(const ExperimentConfig& cfg, const std::string& path) {
    json j;
    j["name"] = cfg.name;
    j["system"] = cfg.system;
    if (cfg.region) {
        json r = json::array();
        for (const auto& iv : cfg.region->axes) r.push_back({iv.lo, iv.hi});
        j["region"] = r;
    }
    if (cfg.constraint == RegionConstraint::unit_disk) j["region_constraint"] = "unit_disk";
    j["dts"] = cfg.dts;
    j["horizon"] = cfg.horizon;
    if (cfg.eval_dt > 0.0) j["eval_dt"] = cfg.eval_dt;
    if (cfg.archs.size() == 1) j["arch"] = cfg.archs.front();
    else j["archs"] = cfg.archs;
    j["train"] = {{"learning_rate", cfg.train.learning_rate},
                  {"max_epochs", cfg.train.max_epochs},
                  {"stop_threshold", cfg.train.stop_threshold},
                  {"p_steps", cfg.train.p_steps}};
    j["samples"] = {{"train", cfg.samples.train},
                    {"validate", cfg.samples.validate},
                    {"test", cfg.samples.test}};
    j["noise_fractions"] = cfg.noise_fractions;
    if (cfg.burn_in > 0) j["burn_in"] = cfg.burn_in;
    j["seed"] = cfg.seed;
    j["schemes"] = cfg.schemes;
    if (!cfg.hybrid.fine_steps.empty())
        j["hybrid"] = {{"q", cfg.hybrid.q},
                       {"tableau", cfg.hybrid.tableau},
                       {"fine_steps", cfg.hybrid.fine_steps}};
    if (!cfg.rk.steps.empty()) j["rk"] = {{"tableau", cfg.rk.tableau}, {"steps", cfg.rk.steps}};
    j["out_dir"] = cfg.out_dir;
    std::ofstream os(path);
    if (!os) throw LoadError(LoadError::Kind::io, "cannot open " + path + " for writing");
    os << j.dump(2) << "\n";
}

namespace {

Box effective_region(const ExperimentConfig& cfg, const SystemSpec& sys) {
    return cfg.region ? *cfg.region : sys.default_region;
}

// Trains one model per configured dt from the (already noisy, if requested)
// fine training dataset, striding so every scale shares the same underlying
// trajectories. Scales train in parallel when threads > 1.
std::vector<FlowMapModel> train_all_scales(const ExperimentConfig& cfg, const Dataset& fine_train,
                                           std::uint64_t fraction_idx, int threads) {
    const int n_scales = static_cast<int>(cfg.dts.size());
    std::vector<FlowMapModel> models(n_scales);
    std::vector<std::string> errors(n_scales);

    auto train_one = [&](int j) {
        try {
            const long s = integer_ratio_or_zero(cfg.dts[j], cfg.dts.front());
            Dataset scaled = stride(fine_train, static_cast<int>(s));
            TrainConfig tc = cfg.train;
            tc.seed = splitmix64(cfg.seed, kTagModelInit + fraction_idx * 64 + static_cast<std::uint64_t>(j));
            models[j] = train(scaled, cfg.arch_for(j), cfg.dts[j], tc).model;
        } catch (const std::exception& e) {
            errors[j] = e.what();
        }
    };

    int workers = threads == 0 ? static_cast<int>(std::thread::hardware_concurrency()) : threads;
    workers = std::max(1, std::min(workers, n_scales));
    if (workers == 1) {
        for (int j = 0; j < n_scales; ++j) train_one(j);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int j = next.fetch_add(1); j < n_scales; j = next.fetch_add(1)) train_one(j);
            });
        }
        for (auto& t : pool) t.join();
    }
    for (int j = 0; j < n_scales; ++j) {
        if (!errors[j].empty())
            throw TrainingError("scale dt=" + fmt_g(cfg.dts[j]) + ": " + errors[j]);
    }
    return models;
}

Vec grid_times(double dt, long steps) {
    Vec t(steps + 1);
    for (long k = 0; k <= steps; ++k) t[k] = static_cast<double>(k) * dt;
    return t;
}

void write_summary_csv(const std::string& path, const std::vector<ErrorReport>& reports,
                       const std::vector<std::pair<double, double>>& dt_ranges) {
    std::ofstream os(path);
    if (!os) throw LoadError(LoadError::Kind::io, "cannot open " + path + " for writing");
    os << "scheme_id,dt_min,dt_max,integrated_l2,wall_seconds\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        os << reports[i].scheme_id << ',' << fmt17(dt_ranges[i].first) << ','
           << fmt17(dt_ranges[i].second) << ',' << fmt17(reports[i].integrated_l2) << ','
           << fmt17(reports[i].wall_seconds) << "\n";
    }
}

void write_per_step_csv(const std::string& path, const Vec& times, const Vec& mse) {
    std::ofstream os(path);
    if (!os) throw LoadError(LoadError::Kind::io, "cannot open " + path + " for writing");
    os << "time,mse\n";
    for (long k = 0; k < times.size(); ++k)
        os << fmt17(times[k]) << ',' << fmt17(mse[k]) << "\n";
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const SystemSpec sys = builtin_system(cfg.system);
    const Box region = effective_region(cfg, sys);

    fs::create_directories(cfg.out_dir);
    ExperimentReport report;
    report.out_dir = cfg.out_dir;

    json manifest;
    manifest["artifact"] = "hits-experiment";
    manifest["format_version"] = 1;
    manifest["name"] = cfg.name;
    manifest["system"] = cfg.system;
    manifest["config_digest"] = cfg.digest();
    manifest["seed"] = cfg.seed;
    manifest["notes"] = {
        "scheme timings cover the rollout plus interpolation onto the evaluation grid",
        "noise corrupts training and validation observations; tests are evaluated against clean truth",
        "rk rows are timed as serial per-trajectory rollouts; neural and hybrid rows batch over trajectories"};
    json stages = json::array();
    json fraction_entries = json::array();

    const double grid_dt = cfg.eval_dt > 0.0 ? cfg.eval_dt : cfg.dts.front();
    const long grid_steps = integer_ratio_or_zero(cfg.horizon, grid_dt);
    const Vec grid = grid_times(grid_dt, grid_steps);
    const bool need_selection =
        std::find(cfg.schemes.begin(), cfg.schemes.end(), "multiscale") != cfg.schemes.end();

    Dataset fine_train, validation, test;
    try {
        const long s_max = integer_ratio_or_zero(cfg.dts.back(), grid_dt);
        const int p_fine = cfg.train.p_steps * static_cast<int>(s_max);
        fine_train = build_dataset(sys, region, cfg.dts.front(), p_fine, cfg.samples.train,
                                   splitmix64(cfg.seed, kTagTrainIcs), Split::train, cfg.burn_in,
                                   cfg.constraint);
        validation = build_dataset(sys, region, grid_dt, static_cast<int>(grid_steps),
                                   cfg.samples.validate, splitmix64(cfg.seed, kTagValIcs),
                                   Split::validate, cfg.burn_in, cfg.constraint);
        test = build_dataset(sys, region, grid_dt, static_cast<int>(grid_steps), cfg.samples.test,
                             splitmix64(cfg.seed, kTagTestIcs), Split::test, cfg.burn_in,
                             cfg.constraint);
        stages.push_back({{"name", "datasets"}, {"status", "ok"}});
    } catch (const std::exception& e) {
        stages.push_back({{"name", "datasets"}, {"status", "failed"}, {"message", e.what()}});
        manifest["stages"] = stages;
        manifest["fractions"] = fraction_entries;
        report.manifest_path = (fs::path(cfg.out_dir) / "manifest.json").string();
        std::ofstream os(report.manifest_path);
        os << manifest.dump(2) << "\n";
        report.all_stages_ok = false;
        return report;
    }

    Mat test_x0(cfg.samples.test, sys.dim);
    for (int i = 0; i < cfg.samples.test; ++i) test_x0.row(i) = test.trajectories[i].states.row(0);

    for (std::size_t fi = 0; fi < cfg.noise_fractions.size(); ++fi) {
        const double fraction = cfg.noise_fractions[fi];
        FractionReport frep;
        frep.fraction = fraction;
        const std::string fdir_name = "noise-" + fmt_g(fraction);
        const fs::path fdir = fs::path(cfg.out_dir) / fdir_name;
        fs::create_directories(fdir / "models");
        json fentry;
        fentry["fraction"] = fraction;
        fentry["dir"] = fdir_name;
        json fstages = json::array();

        try {
            Dataset train_ds = fraction > 0.0
                                   ? add_noise(fine_train, fraction, splitmix64(cfg.seed, kTagTrainNoise + fi))
                                   : fine_train;
            Dataset val_ds = fraction > 0.0
                                 ? add_noise(validation, fraction, splitmix64(cfg.seed, kTagValNoise + fi))
                                 : validation;

            std::vector<FlowMapModel> models = train_all_scales(cfg, train_ds, fi, cfg.threads);
            json model_paths;
            for (std::size_t j = 0; j < models.size(); ++j) {
                const std::string mpath = (fdir / "models" / ("model_dt" + fmt_g(cfg.dts[j]) + ".txt")).string();
                save_model(models[j], mpath, cfg.train.digest());
                model_paths[fmt_g(cfg.dts[j])] = fdir_name + "/models/model_dt" + fmt_g(cfg.dts[j]) + ".txt";
                frep.artifacts["model_dt" + fmt_g(cfg.dts[j])] = mpath;
            }
            fentry["models"] = model_paths;
            fstages.push_back({{"name", "train"}, {"status", "ok"}});

            CrossValidation cv;
            cv.lower = 0;
            cv.upper = static_cast<int>(models.size()) - 1;
            if (need_selection) {
                cv = cross_validate(models, val_ds, cfg.horizon);
                fentry["selection"] = {{"lower", cv.lower}, {"upper", cv.upper}};
                if (!cv.warnings.empty()) fentry["selection_warnings"] = cv.warnings;
                fstages.push_back({{"name", "cross_validate"}, {"status", "ok"}});
            }
            frep.selected_lower = cv.lower;
            frep.selected_upper = cv.upper;

            // Evaluation: every scheme sees the identical clean test
            // trajectories on the identical grid.
            std::vector<ErrorReport> reports;
            std::vector<std::pair<double, double>> dt_ranges;
            json per_step_paths;

            auto evaluate = [&](const std::string& id, double dt_min, double dt_max,
                                const std::function<BatchRolloutResult()>& runner) {
                BatchRolloutResult preds;
                ErrorReport er;
                er.scheme_id = id;
                er.wall_seconds = time_execution([&] { preds = runner(); });
                er.per_step_mse = per_step_error(preds, test.trajectories);
                er.integrated_l2 = integrated_l2(er.per_step_mse);
                const std::string csv = (fdir / ("errors_" + id + ".csv")).string();
                write_per_step_csv(csv, grid, er.per_step_mse);
                per_step_paths[id] = fdir_name + "/errors_" + id + ".csv";
                frep.artifacts["errors_" + id] = csv;
                reports.push_back(std::move(er));
                dt_ranges.emplace_back(dt_min, dt_max);
            };

            for (const std::string& scheme : cfg.schemes) {
                if (scheme == "single-scale") {
                    for (std::size_t j = 0; j < models.size(); ++j) {
                        Hierarchy h({models[j]});
                        evaluate("single-dt" + fmt_g(cfg.dts[j]), cfg.dts[j], cfg.dts[j], [&] {
                            return multiscale_rollout_batch(h, test_x0, cfg.horizon, grid_dt);
                        });
                    }
                } else if (scheme == "multiscale") {
                    std::vector<FlowMapModel> members(models.begin() + cv.lower,
                                                      models.begin() + cv.upper + 1);
                    Hierarchy h(members);
                    evaluate("multiscale", cfg.dts[cv.lower], cfg.dts[cv.upper], [&] {
                        return multiscale_rollout_batch(h, test_x0, cfg.horizon, grid_dt);
                    });
                } else if (scheme == "hybrid") {
                    std::vector<FlowMapModel> coarse_members(models.end() - cfg.hybrid.q, models.end());
                    Hierarchy coarse(coarse_members);
                    for (double hstep : cfg.hybrid.fine_steps) {
                        HybridScheme hs(coarse, RkTableau::named(cfg.hybrid.tableau), sys, hstep);
                        evaluate("hybrid-h" + fmt_g(hstep), hstep, cfg.dts.back(), [&] {
                            return project_rollout(hybrid_rollout_batch(hs, test_x0, cfg.horizon),
                                                   grid);
                        });
                    }
                } else if (scheme == "rk") {
                    RkTableau tab = RkTableau::named(cfg.rk.tableau);
                    for (double hstep : cfg.rk.steps) {
                        const int n = static_cast<int>(integer_ratio_or_zero(cfg.horizon, hstep));
                        evaluate("rk-h" + fmt_g(hstep), hstep, hstep, [&] {
                            // Deliberately serial: one trajectory after another.
                            BatchRolloutResult preds;
                            preds.times = grid_times(hstep, n);
                            preds.provenance.assign(n + 1, Provenance::runge_kutta());
                            preds.provenance[0] = Provenance::initial();
                            preds.states.assign(n + 1, Mat(test_x0.rows(), sys.dim));
                            for (int b = 0; b < test_x0.rows(); ++b) {
                                Trajectory tr =
                                    rollout_rk(tab, sys, test_x0.row(b).transpose(), hstep, n);
                                for (int k = 0; k <= n; ++k) preds.states[k].row(b) = tr.states.row(k);
                            }
                            return project_rollout(preds, grid);
                        });
                    }
                }
            }

            write_summary_csv((fdir / "summary.csv").string(), reports, dt_ranges);
            frep.artifacts["summary"] = (fdir / "summary.csv").string();
            fentry["summary"] = fdir_name + "/summary.csv";
            fentry["per_step"] = per_step_paths;
            frep.schemes = std::move(reports);
            fstages.push_back({{"name", "evaluate"}, {"status", "ok"}});
        } catch (const std::exception& e) {
            fstages.push_back({{"name", "fraction"}, {"status", "failed"}, {"message", e.what()}});
            report.all_stages_ok = false;
        }
        fentry["stages"] = fstages;
        fraction_entries.push_back(fentry);
        report.fractions.push_back(std::move(frep));
    }

    manifest["stages"] = stages;
    manifest["fractions"] = fraction_entries;
    report.manifest_path = (fs::path(cfg.out_dir) / "manifest.json").string();
    std::ofstream os(report.manifest_path);
    if (!os) throw LoadError(LoadError::Kind::io, "cannot write manifest");
    os << manifest.dump(2) << "\n";
    return report;
}

}  // namespace hits
