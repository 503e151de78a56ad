#ifndef HITS_DYNAMICS_HPP
#define HITS_DYNAMICS_HPP

#include <functional>
#include <string>
#include <vector>

#include "hits/types.hpp"

namespace hits {

/// A named autonomous vector field dx/dt = f(x) together with the state-space
/// box its experiments sample from and a horizon over which reference
/// integration is expected to stay trustworthy.
///
/// The field is stored in batched form: it maps a B x D matrix of states to
/// the B x D matrix of derivatives, row by row (callers pass `derivs`
/// pre-sized to the shape of `states`). Batched evaluation is elementwise
/// across rows, so row i of a batched call is bitwise identical to a
/// batch-of-one call on that row.
struct SystemSpec {
    std::string name;
    int dim = 0;
    std::function<void(const Mat& states, Mat& derivs)> field;
    Box default_region;
    double characteristic_horizon = 0.0;
};

/// Uniformly sampled states of one solution: states.row(k) is the state at
/// time t0 + k*dt.
struct Trajectory {
    double t0 = 0.0;
    double dt = 0.0;
    Mat states;  // (p+1) x D

    int steps() const { return static_cast<int>(states.rows()) - 1; }
    int dim() const { return static_cast<int>(states.cols()); }
};

/// Built-in systems, addressed by name: "harmonic", "hyperbolic", "cubic",
/// "van_der_pol", "hopf", "lorenz". Throws std::invalid_argument for an
/// unknown name.
SystemSpec builtin_system(const std::string& name);

std::vector<std::string> builtin_system_names();

/// f(x) for a single state. Throws std::invalid_argument on dimension
/// mismatch.
Vec eval_vector_field(const SystemSpec& system, const Vec& x);

/// Batched f over one state per row.
Mat eval_vector_field_batch(const SystemSpec& system, const Mat& states);

/// High-accuracy ground truth: p+1 states at times 0, dt, ..., p*dt starting
/// from x0 exactly.
///
/// substeps_per_sample > 0 forces that many internal RK4 substeps per output
/// sample. substeps_per_sample == 0 selects the self-checking default: run at
/// 100 and 200 substeps, accept the finer result if they agree to 1e-9
/// (relative), otherwise refine once more to 400 substeps.
///
/// Throws DivergenceError naming the offending step if a state goes
/// non-finite.
Trajectory reference_trajectory(const SystemSpec& system, const Vec& x0, double dt, int steps,
                                int substeps_per_sample = 0);

/// Same reference integrator advancing several initial conditions at once;
/// row b of every returned matrix belongs to x0.row(b). Bitwise equal to the
/// single-state version row by row.
std::vector<Mat> reference_trajectory_batch(const SystemSpec& system, const Mat& x0, double dt,
                                            int steps, int substeps_per_sample = 0);

}  // namespace hits

#endif
