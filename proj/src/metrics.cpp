#include "hits/metrics.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace hits {

namespace {

Vec truth_grid_times(const Trajectory& truth) {
    Vec t(truth.states.rows());
    for (long k = 0; k < t.size(); ++k) t[k] = truth.t0 + static_cast<double>(k) * truth.dt;
    return t;
}

}  // namespace

Vec per_step_error(const RolloutResult& pred, const Trajectory& truth) {
    require(pred.states.cols() == truth.dim(), "prediction/truth dimension mismatch");
    Mat on_grid = interpolate_states(pred.times, pred.states, truth_grid_times(truth));
    return (on_grid - truth.states).rowwise().squaredNorm();
}

Vec per_step_error(const std::vector<RolloutResult>& preds, const std::vector<Trajectory>& truths) {
    require(!preds.empty() && preds.size() == truths.size(),
            "need one prediction per truth trajectory");
    Vec acc = per_step_error(preds[0], truths[0]);
    for (std::size_t i = 1; i < preds.size(); ++i) {
        Vec e = per_step_error(preds[i], truths[i]);
        require(e.size() == acc.size(), "trajectories must share the evaluation grid");
        acc += e;
    }
    return acc / static_cast<double>(preds.size());
}

Vec per_step_error(const BatchRolloutResult& preds, const std::vector<Trajectory>& truths) {
    require(preds.batch() == static_cast<int>(truths.size()),
            "need one prediction row per truth trajectory");
    require(!truths.empty(), "need at least one truth trajectory");

    // Fast path: the prediction grid coincides with the truth grid, so the
    // error reduces to row differences without interpolation.
    const Trajectory& first = truths.front();
    bool aligned = preds.size() == static_cast<int>(first.states.rows());
    if (aligned) {
        const double tol = 1e-9 * std::max(1.0, std::abs(first.t0 + first.dt * first.steps()));
        for (int k = 0; aligned && k < preds.size(); ++k)
            aligned = std::abs(preds.times[k] - (first.t0 + k * first.dt)) <= tol;
    }
    if (aligned) {
        Vec acc = Vec::Zero(preds.size());
        for (int b = 0; b < preds.batch(); ++b) {
            const Trajectory& tr = truths[b];
            require(tr.states.rows() == preds.size() && tr.dt == first.dt && tr.t0 == first.t0,
                    "trajectories must share the evaluation grid");
            for (int k = 0; k < preds.size(); ++k)
                acc[k] += (preds.states[k].row(b) - tr.states.row(k)).squaredNorm();
        }
        return acc / static_cast<double>(preds.batch());
    }

    std::vector<RolloutResult> rows;
    rows.reserve(truths.size());
    for (int b = 0; b < preds.batch(); ++b) rows.push_back(preds.extract(b));
    return per_step_error(rows, truths);
}

double integrated_l2(const Vec& per_step) {
    require(per_step.size() > 0, "empty per-step error vector");
    return per_step.mean();
}

double integrated_l2(const RolloutResult& pred, const Trajectory& truth) {
    return integrated_l2(per_step_error(pred, truth));
}

double integrated_l2(const std::vector<RolloutResult>& preds,
                     const std::vector<Trajectory>& truths) {
    return integrated_l2(per_step_error(preds, truths));
}

double integrated_l2(const BatchRolloutResult& preds, const std::vector<Trajectory>& truths) {
    return integrated_l2(per_step_error(preds, truths));
}

double time_execution(const std::function<void()>& task) {
    const auto start = std::chrono::steady_clock::now();
    task();
    const auto end = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(end - start).count();
}

IncrementField increment_field(const SystemSpec& system, const Box& region, int grid_per_axis,
                               double dt, int j_max) {
    region.validate();
    require(region.dim() == system.dim, "region dimension mismatch for system " + system.name);
    require(grid_per_axis >= 1, "grid size must be >= 1");
    require(dt > 0.0, "dt must be positive");
    require(j_max >= 1, "j_max must be >= 1");

    // Per-axis grids; a pinned axis contributes a single value.
    std::vector<std::vector<double>> axes(region.dim());
    for (int a = 0; a < region.dim(); ++a) {
        const Interval& iv = region.axes[a];
        if (iv.degenerate() || grid_per_axis == 1) {
            axes[a] = {iv.degenerate() ? iv.lo : 0.5 * (iv.lo + iv.hi)};
        } else {
            axes[a].resize(grid_per_axis);
            for (int i = 0; i < grid_per_axis; ++i)
                axes[a][i] = iv.lo + (iv.hi - iv.lo) * static_cast<double>(i) / (grid_per_axis - 1);
        }
    }
    long total = 1;
    for (const auto& g : axes) total *= static_cast<long>(g.size());

    IncrementField field;
    field.dt = dt;
    field.points.resize(total, region.dim());
    std::vector<long> digit(region.dim(), 0);
    for (long i = 0; i < total; ++i) {
        for (int a = 0; a < region.dim(); ++a) field.points(i, a) = axes[a][digit[a]];
        int a = region.dim() - 1;
        while (a >= 0 && ++digit[a] == static_cast<long>(axes[a].size())) digit[a--] = 0;
    }

    field.increments.assign(j_max, Mat::Zero(total, region.dim()));
    field.diverged.assign(total, 0);
    try {
        auto samples = reference_trajectory_batch(system, field.points, dt, j_max);
        for (int j = 1; j <= j_max; ++j) field.increments[j - 1] = samples[j] - field.points;
    } catch (const DivergenceError&) {
        // Retry point by point so one blow-up only flags its own grid point.
        for (long i = 0; i < total; ++i) {
            try {
                auto traj = reference_trajectory(system, field.points.row(i).transpose(), dt, j_max);
                for (int j = 1; j <= j_max; ++j)
                    field.increments[j - 1].row(i) = traj.states.row(j) - field.points.row(i);
            } catch (const DivergenceError&) {
                field.diverged[i] = 1;
                for (int j = 1; j <= j_max; ++j)
                    field.increments[j - 1].row(i).setConstant(std::nan(""));
            }
        }
    }
    return field;
}

void write_increment_csv(const IncrementField& field, int j, const std::string& path) {
    require(j >= 1 && j <= static_cast<int>(field.increments.size()), "j outside the computed range");
    std::ofstream os(path);
    if (!os) throw LoadError(LoadError::Kind::io, "cannot open " + path + " for writing");
    const int d = static_cast<int>(field.points.cols());
    for (int a = 0; a < d; ++a) os << (a ? "," : "") << "x" << a;
    for (int a = 0; a < d; ++a) os << ",dx" << a;
    os << ",diverged\n";
    char buf[32];
    for (long i = 0; i < field.points.rows(); ++i) {
        for (int a = 0; a < d; ++a) {
            std::snprintf(buf, sizeof(buf), "%.17g", field.points(i, a));
            os << (a ? "," : "") << buf;
        }
        for (int a = 0; a < d; ++a) {
            std::snprintf(buf, sizeof(buf), "%.17g", field.increments[j - 1](i, a));
            os << ',' << buf;
        }
        os << ',' << static_cast<int>(field.diverged[i]) << "\n";
    }
}

}  // namespace hits
