#include <cmath>
#include <limits>

#include "hits/metrics.hpp"
#include "hits/multiscale.hpp"

namespace hits {

namespace {

// Validation metric of one candidate ensemble: integrated L2 of the coupled
// rollout against the validation trajectories on their own grid.
double candidate_metric(const std::vector<FlowMapModel>& members, const Dataset& validation,
                        double horizon) {
    Hierarchy h(members);
    const int n = validation.size();
    Mat x0(n, h.dim());
    for (int i = 0; i < n; ++i) x0.row(i) = validation.trajectories[i].states.row(0);
    BatchRolloutResult rollout = multiscale_rollout_batch(h, x0, horizon, validation.dt());

    // Trim/validate the truth grid against the horizon.
    const long grid_steps = static_cast<long>(std::round(horizon / validation.dt()));
    require(validation.steps() >= grid_steps, "validation trajectories do not cover the horizon");
    std::vector<Trajectory> truths = validation.trajectories;
    if (validation.steps() > grid_steps) {
        for (auto& tr : truths) tr.states.conservativeResize(grid_steps + 1, Eigen::NoChange);
    }
    return integrated_l2(rollout, truths);
}

}  // namespace

CrossValidation cross_validate(const std::vector<FlowMapModel>& models_ascending,
                               const Dataset& validation, double horizon) {
    require(!models_ascending.empty(), "need at least one model");
    require(!validation.trajectories.empty(), "empty validation dataset");
    for (std::size_t i = 1; i < models_ascending.size(); ++i)
        require(models_ascending[i].dt > models_ascending[i - 1].dt,
                "models must be sorted ascending by dt");

    const int m = static_cast<int>(models_ascending.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CrossValidation cv;
    cv.prefix_metrics.assign(m, nan);

    // Pass 1: best prefix {F_0..F_k}; ties keep the smaller ensemble.
    int u = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < m; ++k) {
        std::vector<FlowMapModel> members(models_ascending.begin(), models_ascending.begin() + k + 1);
        try {
            cv.prefix_metrics[k] = candidate_metric(members, validation, horizon);
        } catch (const std::exception& e) {
            cv.warnings.push_back("prefix ensemble 0.." + std::to_string(k) + " skipped: " + e.what());
            continue;
        }
        if (cv.prefix_metrics[k] < best) {
            best = cv.prefix_metrics[k];
            u = k;
        }
    }
    if (u < 0) throw std::runtime_error("cross-validation: every candidate ensemble failed to couple");

    // Pass 2: best suffix {F_k..F_u} for k <= u; ties keep the larger k.
    cv.suffix_metrics.assign(u + 1, nan);
    int l = u;
    best = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= u; ++k) {
        std::vector<FlowMapModel> members(models_ascending.begin() + k,
                                          models_ascending.begin() + u + 1);
        try {
            cv.suffix_metrics[k] = candidate_metric(members, validation, horizon);
        } catch (const std::exception& e) {
            cv.warnings.push_back("suffix ensemble " + std::to_string(k) + ".." + std::to_string(u) +
                                  " skipped: " + e.what());
            continue;
        }
        if (cv.suffix_metrics[k] <= best) {
            best = cv.suffix_metrics[k];
            l = k;
        }
    }
    cv.lower = l;
    cv.upper = u;
    return cv;
}

}  // namespace hits
