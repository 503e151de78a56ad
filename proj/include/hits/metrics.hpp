#ifndef HITS_METRICS_HPP
#define HITS_METRICS_HPP

#include <functional>
#include <string>
#include <vector>

#include "hits/dynamics.hpp"
#include "hits/multiscale.hpp"
#include "hits/types.hpp"

namespace hits {

/// Accuracy/efficiency record of one scheme on one test set.
struct ErrorReport {
    std::string scheme_id;
    Vec per_step_mse;          // mean over trajectories of |error|^2 at each grid step
    double integrated_l2 = 0;  // mean of per_step_mse over all steps
    double wall_seconds = 0;
};

/// Squared-error curve of one prediction against one truth trajectory:
/// entry k = |pred(t_k) - truth(t_k)|^2 on the truth grid. The prediction
/// must supply states on that grid (computed or interpolated); its times are
/// matched to the grid by linear interpolation, exact at knots.
Vec per_step_error(const RolloutResult& pred, const Trajectory& truth);

/// Mean over trajectories: entry k = (1/n) sum_i |pred_i(t_k) - truth_i(t_k)|^2.
Vec per_step_error(const std::vector<RolloutResult>& preds, const std::vector<Trajectory>& truths);
Vec per_step_error(const BatchRolloutResult& preds, const std::vector<Trajectory>& truths);

/// Time-and-trajectory mean of squared Euclidean error; equals the mean of
/// the matching per_step_error vector.
double integrated_l2(const Vec& per_step);
double integrated_l2(const RolloutResult& pred, const Trajectory& truth);
double integrated_l2(const std::vector<RolloutResult>& preds, const std::vector<Trajectory>& truths);
double integrated_l2(const BatchRolloutResult& preds, const std::vector<Trajectory>& truths);

/// Monotonic-clock wall time of task(), in seconds. Callers time rollouts
/// only (training and data generation are excluded from reported timings)
/// and run single-threaded while timing.
double time_execution(const std::function<void()>& task);

/// Flow-map increment fields x_{j dt} - x_0 over a grid of the region, for
/// j = 1..j_max. A degenerate region axis (lo == hi) pins that coordinate.
/// Grid points whose reference integration diverges are flagged and their
/// increments set to NaN rather than failing the whole field.
struct IncrementField {
    Mat points;                    // grid points, one per row
    std::vector<Mat> increments;   // increments[j-1].row(i) = x_{j dt}(p_i) - p_i
    std::vector<char> diverged;    // per grid point
    double dt = 0.0;
};

IncrementField increment_field(const SystemSpec& system, const Box& region, int grid_per_axis,
                               double dt, int j_max);

/// CSV export of the j-th increment slice: coordinates then increments.
void write_increment_csv(const IncrementField& field, int j, const std::string& path);

}  // namespace hits

#endif
