#include "hits/hybrid.hpp"

#include <algorithm>
#include <cmath>

namespace hits {

namespace {

long integer_ratio(double a, double b) {
    const double q = a / b;
    const double r = std::round(q);
    if (r < 1.0 || std::abs(q - r) > 1e-9 * std::max(1.0, std::abs(q))) return 0;
    return static_cast<long>(r);
}

}  // namespace

HybridScheme::HybridScheme(RkTableau tableau, SystemSpec system, double fine_step)
    : tableau_(std::move(tableau)), system_(std::move(system)), fine_step_(fine_step) {
    require(fine_step_ > 0.0, "fine step must be positive");
}

HybridScheme::HybridScheme(Hierarchy coarse, RkTableau tableau, SystemSpec system, double fine_step)
    : coarse_(std::move(coarse)),
      tableau_(std::move(tableau)),
      system_(std::move(system)),
      fine_step_(fine_step) {
    require(fine_step_ > 0.0, "fine step must be positive");
    require(coarse_->system() == system_.name, "coarse hierarchy was trained on a different system");
    require(coarse_->dim() == system_.dim, "coarse hierarchy state dimension mismatch");
    steps_per_anchor_ = integer_ratio(coarse_->finest_dt(), fine_step_);
    require(steps_per_anchor_ != 0,
            "the finest coarse step must be an integer multiple of the RK step");
}

BatchRolloutResult hybrid_rollout_batch(const HybridScheme& s, const Mat& x0, double horizon) {
    require(x0.cols() == s.system().dim, "initial states do not match the system dimension");
    const double h = s.fine_step();

    if (s.q() == 0) {
        // Degenerate scheme: a plain fixed-step RK rollout.
        const long n = integer_ratio(horizon, h);
        require(n != 0, "horizon must be an integer multiple of the RK step");
        auto trajs = rollout_rk_batch(s.tableau(), s.system(), x0, h, static_cast<int>(n));
        BatchRolloutResult out;
        out.times.resize(n + 1);
        out.states.resize(n + 1);
        out.provenance.resize(n + 1);
        for (long k = 0; k <= n; ++k) {
            out.times[k] = static_cast<double>(k) * h;
            out.provenance[k] = k == 0 ? Provenance::initial() : Provenance::runge_kutta();
            Mat st(x0.rows(), x0.cols());
            for (long b = 0; b < x0.rows(); ++b) st.row(b) = trajs[b].states.row(k);
            out.states[k] = std::move(st);
        }
        return out;
    }

    // Coarse anchors on the finest coarse grid, exactly as the multiscale
    // rollout computes them.
    BatchRolloutResult anchors =
        multiscale_rollout_batch(s.coarse(), x0, horizon, s.coarse().finest_dt());
    const long K = s.steps_per_anchor();
    if (K == 1) return anchors;  // nothing between anchors to fill

    const long n_anchor = anchors.size();
    const long total = (n_anchor - 1) * K;  // horizon in units of h
    const int batch = anchors.batch();

    BatchRolloutResult out;
    out.level_eval_counts = anchors.level_eval_counts;
    out.times.resize(total + 1);
    out.states.resize(total + 1);
    out.provenance.resize(total + 1);
    for (long a = 0; a < n_anchor; ++a) {
        out.times[a * K] = static_cast<double>(a * K) * h;
        out.states[a * K] = anchors.states[a];
        out.provenance[a * K] = anchors.provenance[a];
    }

    // One batched RK pass advances all anchors at once; step k fills the
    // k-th fine state of every anchor interval. States of the final anchor
    // would land beyond the horizon and are not requested.
    Mat cur((n_anchor - 1) * batch, x0.cols());
    for (long a = 0; a + 1 < n_anchor; ++a) cur.middleRows(a * batch, batch) = anchors.states[a];
    RkStepper stepper(s.tableau(), s.system());
    for (long k = 1; k < K; ++k) {
        stepper.step_in_place(cur, h);
        if (!cur.allFinite()) throw DivergenceError("hybrid rk fill step " + std::to_string(k));
        for (long a = 0; a + 1 < n_anchor; ++a) {
            out.times[a * K + k] = static_cast<double>(a * K + k) * h;
            out.states[a * K + k] = cur.middleRows(a * batch, batch);
            out.provenance[a * K + k] = Provenance::runge_kutta();
        }
    }
    return out;
}

RolloutResult hybrid_rollout(const HybridScheme& s, const Vec& x0, double horizon) {
    if (s.q() == 0) {
        // Keep the single-state path identical to rollout_rk.
        const long n = integer_ratio(horizon, s.fine_step());
        require(n != 0, "horizon must be an integer multiple of the RK step");
        Trajectory traj = rollout_rk(s.tableau(), s.system(), x0, s.fine_step(), static_cast<int>(n));
        RolloutResult out;
        out.times.resize(n + 1);
        out.states = traj.states;
        out.provenance.resize(n + 1);
        for (long k = 0; k <= n; ++k) {
            out.times[k] = static_cast<double>(k) * s.fine_step();
            out.provenance[k] = k == 0 ? Provenance::initial() : Provenance::runge_kutta();
        }
        return out;
    }
    return hybrid_rollout_batch(s, x0.transpose(), horizon).extract(0);
}

}  // namespace hits
