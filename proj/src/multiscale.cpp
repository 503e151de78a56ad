#include "hits/multiscale.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace hits {

namespace {

// Nearest-integer ratio if a/b is an integer to 1e-9 relative, else 0.
long integer_ratio(double a, double b) {
    const double q = a / b;
    const double r = std::round(q);
    if (r < 1.0 || std::abs(q - r) > 1e-9 * std::max(1.0, std::abs(q))) return 0;
    return static_cast<long>(r);
}

}  // namespace

Hierarchy::Hierarchy(std::vector<FlowMapModel> models) : models_(std::move(models)) {
    require(!models_.empty(), "hierarchy needs at least one model");
    std::sort(models_.begin(), models_.end(),
              [](const FlowMapModel& a, const FlowMapModel& b) { return a.dt > b.dt; });
    for (const auto& m : models_) m.validate();
    ratios_.assign(models_.size(), 1);
    for (std::size_t i = 1; i < models_.size(); ++i) {
        require(models_[i].dim() == models_[0].dim(), "hierarchy models must share state dimension");
        require(models_[i].system == models_[0].system, "hierarchy models must share the system");
        const long r = integer_ratio(models_[i - 1].dt, models_[i].dt);
        require(r != 1, "hierarchy models must have pairwise distinct step sizes");
        require(r >= 2, "consecutive step sizes must have an integer ratio >= 2");
        ratios_[i] = r;
    }
}

CouplingPlan plan_coupling(const Hierarchy& h, double horizon) {
    require(horizon >= h.coarsest_dt(), "horizon shorter than the coarsest model step");
    const double fine = h.finest_dt();
    const long total = integer_ratio(horizon, fine);
    require(total != 0, "horizon must be an integer multiple of the finest model step");

    CouplingPlan plan;
    plan.horizon = horizon;
    plan.finest_dt = fine;
    plan.total_fine_steps = total;
    plan.steps_per_level.resize(h.levels());
    plan.level_stride.resize(h.levels());
    long stride = 1;
    for (int i = h.levels() - 1; i >= 0; --i) {
        plan.level_stride[i] = stride = (i == h.levels() - 1) ? 1 : stride * h.ratios()[i + 1];
    }
    plan.steps_per_level[0] = static_cast<long>(std::floor(horizon / h.coarsest_dt() + 1e-9));
    for (int i = 1; i < h.levels(); ++i) plan.steps_per_level[i] = h.ratios()[i] - 1;
    return plan;
}

std::vector<long> CouplingPlan::anchor_indices() const {
    std::vector<long> idx{0};
    for (std::size_t i = 0; i < steps_per_level.size(); ++i) {
        const std::size_t existing = idx.size();
        for (long k = 1; k <= steps_per_level[i]; ++k) {
            for (std::size_t e = 0; e < existing; ++e) idx.push_back(idx[e] + k * level_stride[i]);
        }
    }
    std::erase_if(idx, [&](long v) { return v > total_fine_steps; });
    std::sort(idx.begin(), idx.end());
    return idx;
}

RolloutResult BatchRolloutResult::extract(int row) const {
    RolloutResult r;
    r.times = times;
    r.provenance = provenance;
    r.level_eval_counts = level_eval_counts;
    r.states.resize(size(), states.empty() ? 0 : states.front().cols());
    for (int k = 0; k < size(); ++k) r.states.row(k) = states[k].row(row);
    return r;
}

BatchRolloutResult multiscale_rollout_batch(const Hierarchy& h, const Mat& x0, double horizon,
                                            double dt_out) {
    require(x0.cols() == h.dim(), "initial states do not match the hierarchy state dimension");
    require(x0.rows() >= 1, "need at least one initial condition");
    const CouplingPlan plan = plan_coupling(h, horizon);
    const long out_per_fine = integer_ratio(plan.finest_dt, dt_out);
    require(out_per_fine != 0, "dt_out must equal or divide the finest model step");

    const int batch = static_cast<int>(x0.rows());

    struct Entry {
        long fine_idx;
        Mat states;
        Provenance prov;
    };
    std::vector<Entry> entries;
    entries.push_back({0, x0, Provenance::initial()});

    std::vector<long> eval_counts(h.levels(), 0);
    for (int level = 0; level < h.levels(); ++level) {
        const long K = plan.steps_per_level[level];
        if (K == 0) continue;
        const long stride = plan.level_stride[level];
        const std::size_t existing = entries.size();

        // Stack every state generated so far and step the whole stack K times.
        Mat cur(static_cast<long>(existing) * batch, h.dim());
        for (std::size_t e = 0; e < existing; ++e)
            cur.middleRows(static_cast<long>(e) * batch, batch) = entries[e].states;

        for (long k = 1; k <= K; ++k) {
            cur = forward(h.model(level), cur);
            ++eval_counts[level];
            if (!cur.allFinite())
                throw DivergenceError("multiscale level " + std::to_string(level) + " step " +
                                      std::to_string(k));
            for (std::size_t e = 0; e < existing; ++e) {
                entries.push_back({entries[e].fine_idx + k * stride,
                                   cur.middleRows(static_cast<long>(e) * batch, batch),
                                   Provenance::from_level(level)});
            }
        }
    }

    std::erase_if(entries, [&](const Entry& e) { return e.fine_idx > plan.total_fine_steps; });
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.fine_idx < b.fine_idx; });
    // The mixed-radix digit bounds make anchor indices unique and, when the
    // horizon is a whole number of fine steps, complete.
    for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
        if (entries[i].fine_idx == entries[i + 1].fine_idx)
            throw std::logic_error("duplicate anchor time in multiscale rollout");
    }
    if (static_cast<long>(entries.size()) != plan.total_fine_steps + 1)
        throw std::logic_error("anchor cover is incomplete");

    BatchRolloutResult out;
    out.level_eval_counts = eval_counts;
    if (out_per_fine == 1) {
        out.times.resize(entries.size());
        out.states.reserve(entries.size());
        out.provenance.reserve(entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            out.times[static_cast<long>(i)] = static_cast<double>(entries[i].fine_idx) * plan.finest_dt;
            out.states.push_back(std::move(entries[i].states));
            out.provenance.push_back(entries[i].prov);
        }
        return out;
    }

    // Augment with linear interpolation on the dt_out grid.
    const long n_out = plan.total_fine_steps * out_per_fine;
    out.times.resize(n_out + 1);
    out.states.resize(n_out + 1);
    out.provenance.resize(n_out + 1);
    for (long m = 0; m <= n_out; ++m) {
        out.times[m] = static_cast<double>(m) * dt_out;
        const long k = m / out_per_fine;
        const long rem = m % out_per_fine;
        if (rem == 0) {
            out.states[m] = entries[k].states;
            out.provenance[m] = entries[k].prov;
        } else {
            const double w = static_cast<double>(rem) / static_cast<double>(out_per_fine);
            out.states[m] = (1.0 - w) * entries[k].states + w * entries[k + 1].states;
            out.provenance[m] = Provenance::interpolated();
        }
    }
    return out;
}

RolloutResult multiscale_rollout(const Hierarchy& h, const Vec& x0, double horizon, double dt_out) {
    return multiscale_rollout_batch(h, x0.transpose(), horizon, dt_out).extract(0);
}

RolloutResult serial_oracle_rollout(const Hierarchy& h, const Vec& x0, double horizon) {
    require(x0.size() == h.dim(), "initial state does not match the hierarchy state dimension");
    const CouplingPlan plan = plan_coupling(h, horizon);
    const int m = h.levels();

    struct Anchor {
        long fine_idx;
        Vec state;
        Provenance prov;
    };
    std::vector<Anchor> anchors;

    // Enumerate digit tuples (a_0, ..., a_{m-1}) with 0 <= a_i <= K_i.
    std::vector<long> digits(m, 0);
    while (true) {
        long idx = 0;
        for (int i = 0; i < m; ++i) idx += digits[i] * plan.level_stride[i];
        if (idx <= plan.total_fine_steps) {
            Mat x = x0.transpose();
            Provenance prov = Provenance::initial();
            for (int i = 0; i < m; ++i) {
                for (long k = 0; k < digits[i]; ++k) x = forward(h.model(i), x);
                if (digits[i] > 0) prov = Provenance::from_level(i);
            }
            if (!x.allFinite()) throw DivergenceError("serial oracle anchor " + std::to_string(idx));
            anchors.push_back({idx, x.row(0).transpose(), prov});
        }
        int i = m - 1;
        while (i >= 0 && digits[i] == plan.steps_per_level[i]) digits[i--] = 0;
        if (i < 0) break;
        ++digits[i];
    }

    std::sort(anchors.begin(), anchors.end(),
              [](const Anchor& a, const Anchor& b) { return a.fine_idx < b.fine_idx; });
    RolloutResult out;
    out.times.resize(anchors.size());
    out.states.resize(anchors.size(), h.dim());
    out.provenance.reserve(anchors.size());
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        out.times[static_cast<long>(i)] = static_cast<double>(anchors[i].fine_idx) * plan.finest_dt;
        out.states.row(static_cast<long>(i)) = anchors[i].state;
        out.provenance.push_back(anchors[i].prov);
    }
    return out;
}

Mat interpolate_states(const Vec& times, const Mat& states, const Vec& query_times) {
    require(times.size() >= 1, "need at least one knot");
    require(states.rows() == times.size(), "one state row per knot time expected");
    for (long i = 1; i < times.size(); ++i)
        require(times[i] > times[i - 1], "knot times must be strictly increasing");

    const double scale = std::max(1.0, std::max(std::abs(times[0]), std::abs(times[times.size() - 1])));
    const double tol = 1e-12 * scale;

    Mat out(query_times.size(), states.cols());
    for (long q = 0; q < query_times.size(); ++q) {
        const double t = query_times[q];
        require(t >= times[0] - tol && t <= times[times.size() - 1] + tol,
                "query time outside the knot range (extrapolation refused)");
        // Largest knot index with times[k] <= t.
        long k = static_cast<long>(
                     std::upper_bound(times.data(), times.data() + times.size(), t) - times.data()) -
                 1;
        if (k < 0) k = 0;
        if (k >= times.size() - 1) k = times.size() - 1;
        if (std::abs(times[k] - t) <= tol) {
            out.row(q) = states.row(k);
            continue;
        }
        if (k + 1 >= times.size()) {
            out.row(q) = states.row(k);
            continue;
        }
        const double w = (t - times[k]) / (times[k + 1] - times[k]);
        if (std::abs(times[k + 1] - t) <= tol) {
            out.row(q) = states.row(k + 1);
        } else {
            out.row(q) = (1.0 - w) * states.row(k) + w * states.row(k + 1);
        }
    }
    return out;
}

BatchRolloutResult project_rollout(const BatchRolloutResult& r, const Vec& grid_times) {
    require(r.size() >= 1, "empty rollout");
    const double scale =
        std::max(1.0, std::max(std::abs(r.times[0]), std::abs(r.times[r.size() - 1])));
    const double tol = 1e-9 * scale;

    bool aligned = r.size() == static_cast<int>(grid_times.size());
    for (long k = 0; aligned && k < grid_times.size(); ++k)
        aligned = std::abs(r.times[k] - grid_times[k]) <= tol;
    if (aligned) return r;

    BatchRolloutResult out;
    out.level_eval_counts = r.level_eval_counts;
    out.times = grid_times;
    out.states.resize(grid_times.size());
    out.provenance.resize(grid_times.size());
    for (long q = 0; q < grid_times.size(); ++q) {
        const double t = grid_times[q];
        require(t >= r.times[0] - tol && t <= r.times[r.size() - 1] + tol,
                "query time outside the rollout range (extrapolation refused)");
        long k = static_cast<long>(
                     std::upper_bound(r.times.data(), r.times.data() + r.times.size(), t) -
                     r.times.data()) -
                 1;
        k = std::clamp<long>(k, 0, r.size() - 1);
        if (std::abs(r.times[k] - t) <= tol) {
            out.states[q] = r.states[k];
            out.provenance[q] = r.provenance[k];
        } else if (k + 1 < r.size() && std::abs(r.times[k + 1] - t) <= tol) {
            out.states[q] = r.states[k + 1];
            out.provenance[q] = r.provenance[k + 1];
        } else {
            const double w = (t - r.times[k]) / (r.times[k + 1] - r.times[k]);
            out.states[q] = (1.0 - w) * r.states[k] + w * r.states[k + 1];
            out.provenance[q] = Provenance::interpolated();
        }
    }
    return out;
}

void write_rollout_csv(const RolloutResult& r, const std::string& path, CsvStyle style) {
    std::ofstream os(path);
    if (!os) throw LoadError(LoadError::Kind::io, "cannot open " + path + " for writing");
    os << "time,level";
    for (int d = 0; d < r.states.cols(); ++d) os << ",x" << d;
    os << "\n";
    char buf[32];
    for (int k = 0; k < r.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.times[k]);
        os << buf << ',';
        const Provenance& p = r.provenance[k];
        switch (p.kind) {
            case Provenance::Kind::initial: os << "-1"; break;
            case Provenance::Kind::level:
                if (style == CsvStyle::hybrid) os << "nn-level-" << p.level;
                else os << p.level;
                break;
            case Provenance::Kind::interp: os << "interp"; break;
            case Provenance::Kind::rk: os << "rk"; break;
        }
        for (int d = 0; d < r.states.cols(); ++d) {
            std::snprintf(buf, sizeof(buf), "%.17g", r.states(k, d));
            os << ',' << buf;
        }
        os << "\n";
    }
}

}  // namespace hits
