#ifndef HITS_EXPERIMENT_HPP
#define HITS_EXPERIMENT_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hits/dataset.hpp"
#include "hits/flowmap_net.hpp"
#include "hits/metrics.hpp"
#include "hits/types.hpp"

namespace hits {

struct SampleCounts {
    int train = 0;
    int validate = 0;
    int test = 0;
};

struct HybridSetup {
    int q = 1;                       // number of coarse neural levels (largest dts)
    std::string tableau = "rk4";
    std::vector<double> fine_steps;  // one hybrid scheme per step size
};

struct RkSetup {
    std::string tableau = "rk4";
    std::vector<double> steps;
};

/// Everything one benchmark run needs: which system, the ladder of model
/// step sizes, training setup, sample counts, noise fractions and the scheme
/// selection.
struct ExperimentConfig {
    std::string name;
    std::string system;
    std::optional<Box> region;  // default: the system's region
    RegionConstraint constraint = RegionConstraint::none;
    std::vector<double> dts;    // ascending, pairwise distinct
    double horizon = 0.0;
    double eval_dt = 0.0;       // evaluation grid step; 0 = finest dt
    std::vector<std::vector<int>> archs;  // one per dt, or a single broadcast arch
    TrainConfig train;
    SampleCounts samples;
    std::vector<double> noise_fractions{0.0};
    double burn_in = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::string> schemes{"single-scale", "multiscale"};
    HybridSetup hybrid;
    RkSetup rk;
    std::string out_dir;
    int threads = 1;  // trainings run in parallel; 0 = hardware concurrency

    const std::vector<int>& arch_for(int scale) const;
    /// Throws std::invalid_argument with a reason if anything is off.
    void validate() const;
    /// Stable hash of the run-relevant fields, recorded in the manifest.
    std::string digest() const;
};

ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const ExperimentConfig& cfg, const std::string& path);

/// Results of one noise fraction.
struct FractionReport {
    double fraction = 0.0;
    int selected_lower = 0;
    int selected_upper = 0;
    std::vector<ErrorReport> schemes;
    std::map<std::string, std::string> artifacts;  // label -> path
};

struct ExperimentReport {
    std::string out_dir;
    std::string manifest_path;
    std::vector<FractionReport> fractions;
    bool all_stages_ok = true;
};

/// Runs the full pipeline: simulate data once at the finest step, stride per
/// scale, train one model per scale (in parallel), cross-validate, evaluate
/// the selected schemes on the clean test split, and write per-step error
/// CSVs, a summary CSV, model files and a manifest under cfg.out_dir.
/// Repeats per noise fraction. Stage failures are recorded in the manifest
/// and partial results are kept.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

}  // namespace hits

#endif
