#ifndef HITS_MULTISCALE_HPP
#define HITS_MULTISCALE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hits/dataset.hpp"
#include "hits/flowmap_net.hpp"
#include "hits/types.hpp"

namespace hits {

/// Where a rollout state came from.
struct Provenance {
    enum class Kind { initial, level, interp, rk };
    Kind kind = Kind::initial;
    int level = -1;  // meaningful for Kind::level

    static Provenance initial() { return {Kind::initial, -1}; }
    static Provenance from_level(int i) { return {Kind::level, i}; }
    static Provenance interpolated() { return {Kind::interp, -1}; }
    static Provenance runge_kutta() { return {Kind::rk, -1}; }

    bool operator==(const Provenance&) const = default;
};

/// Trained flow maps over a ladder of commensurate step sizes, ordered with
/// decreasing dt. Consecutive step-size ratios must be integers >= 2 and all
/// models must share system and state dimension.
class Hierarchy {
  public:
    explicit Hierarchy(std::vector<FlowMapModel> models);

    int levels() const { return static_cast<int>(models_.size()); }
    const FlowMapModel& model(int i) const { return models_[i]; }
    const std::vector<FlowMapModel>& models() const { return models_; }
    /// ratios()[i] = dt_{i-1} / dt_i for i >= 1; ratios()[0] = 1.
    const std::vector<long>& ratios() const { return ratios_; }
    double coarsest_dt() const { return models_.front().dt; }
    double finest_dt() const { return models_.back().dt; }
    int dim() const { return models_.front().dim(); }
    const std::string& system() const { return models_.front().system; }

  private:
    std::vector<FlowMapModel> models_;
    std::vector<long> ratios_;
};

/// Per-level schedule of the hierarchical rollout: level 0 takes
/// floor(T / dt_0) serial steps, every deeper level takes ratio-1 batched
/// steps, which tiles the finest grid exactly once (mixed-radix cover).
struct CouplingPlan {
    double horizon = 0.0;
    double finest_dt = 0.0;
    std::vector<long> steps_per_level;   // K_i
    std::vector<long> level_stride;      // dt_i in units of the finest dt
    long total_fine_steps = 0;           // T / finest dt

    /// All anchor times in units of the finest dt, sorted ascending.
    std::vector<long> anchor_indices() const;
};

/// Validates the hierarchy against a horizon and computes the step counts.
/// Throws std::invalid_argument for a horizon shorter than the coarsest step
/// or not an integer multiple of the finest step.
CouplingPlan plan_coupling(const Hierarchy& h, double horizon);

/// Chronological states of one rollout with per-entry provenance.
struct RolloutResult {
    Vec times;
    Mat states;  // one row per time
    std::vector<Provenance> provenance;
    std::vector<long> level_eval_counts;  // batched forward calls per level

    int size() const { return static_cast<int>(times.size()); }
};

/// Rollout of several initial conditions that share the time grid; states[k]
/// holds one row per initial condition.
struct BatchRolloutResult {
    Vec times;
    std::vector<Mat> states;
    std::vector<Provenance> provenance;
    std::vector<long> level_eval_counts;

    int size() const { return static_cast<int>(times.size()); }
    int batch() const { return states.empty() ? 0 : static_cast<int>(states.front().rows()); }

    RolloutResult extract(int row) const;
};

/// Vectorized hierarchical rollout: level 0 advances serially from x0, every
/// deeper level steps the stacked set of all previously generated states, and
/// the chronologically sorted anchors are (when dt_out < finest dt) augmented
/// with linearly interpolated states on the dt_out grid.
///
/// dt_out must equal the finest model dt or divide it.
RolloutResult multiscale_rollout(const Hierarchy& h, const Vec& x0, double horizon, double dt_out);

/// Same rollout advancing one initial condition per row of x0 through shared
/// batched evaluations.
BatchRolloutResult multiscale_rollout_batch(const Hierarchy& h, const Mat& x0, double horizon,
                                            double dt_out);

/// Test oracle: computes every anchor state independently by explicit nested
/// composition from x0 (one anchor at a time, no batching). Returns anchors
/// only.
RolloutResult serial_oracle_rollout(const Hierarchy& h, const Vec& x0, double horizon);

/// Piecewise-linear interpolation in time, exact at knots. `times` must be
/// strictly increasing and queries must lie inside [times.first, times.last]
/// (throws std::invalid_argument otherwise).
Mat interpolate_states(const Vec& times, const Mat& states, const Vec& query_times);

/// Batched rollout re-expressed on a query grid: every row is linearly
/// interpolated in time (exact and provenance-preserving where a query hits
/// a knot). A rollout already on the grid passes through unchanged.
BatchRolloutResult project_rollout(const BatchRolloutResult& r, const Vec& grid_times);

/// Result of the two-pass greedy model filter.
struct CrossValidation {
    int lower = 0;
    int upper = 0;
    /// Metric per examined candidate; NaN where the candidate was skipped.
    std::vector<double> prefix_metrics;  // pass 1: ensembles {0..k}
    std::vector<double> suffix_metrics;  // pass 2: ensembles {k..upper}
    std::vector<std::string> warnings;
};

/// Greedy two-pass selection of the best contiguous model subset.
/// `models` are indexed ascending by dt; the metric is the validation
/// integrated L2 error of the coupled rollout over `horizon`. Pass 1 picks
/// the upper index u minimizing the prefix-ensemble metric, pass 2 the lower
/// index l <= u minimizing the suffix metric. Ties prefer the smaller
/// ensemble. Candidates whose coupling fails are skipped with a warning;
/// throws std::runtime_error if every candidate fails.
CrossValidation cross_validate(const std::vector<FlowMapModel>& models_ascending,
                               const Dataset& validation, double horizon);

/// CSV export: header "time,level,x0,..,x{D-1}". Level values: -1 for the
/// initial state, the producing level index for neural states ("nn-level-i"
/// in hybrid style), "interp" for interpolated and "rk" for Runge-Kutta
/// states.
enum class CsvStyle { multiscale, hybrid };
void write_rollout_csv(const RolloutResult& r, const std::string& path,
                       CsvStyle style = CsvStyle::multiscale);

}  // namespace hits

#endif
