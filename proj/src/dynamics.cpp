#include "hits/dynamics.hpp"

#include <cmath>
#include <utility>

namespace hits {

namespace {

SystemSpec make_harmonic() {
    SystemSpec s;
    s.name = "harmonic";
    s.dim = 2;
    s.field = [](const Mat& x, Mat& d) {
        d.col(0) = x.col(1);
        d.col(1) = -x.col(0);
    };
    s.default_region = make_box({{-1.0, 1.0}, {-1.0, 1.0}});
    s.characteristic_horizon = 51.2;
    return s;
}

SystemSpec make_hyperbolic() {
    SystemSpec s;
    s.name = "hyperbolic";
    s.dim = 2;
    const double mu = -0.05;
    const double lambda = -1.0;
    s.field = [mu, lambda](const Mat& x, Mat& d) {
        d.col(0) = mu * x.col(0);
        d.col(1) = lambda * (x.col(1).array() - x.col(0).array().square()).matrix();
    };
    s.default_region = make_box({{-1.0, 1.0}, {-1.0, 1.0}});
    s.characteristic_horizon = 51.2;
    return s;
}

SystemSpec make_cubic() {
    SystemSpec s;
    s.name = "cubic";
    s.dim = 2;
    s.field = [](const Mat& x, Mat& d) {
        auto x3 = x.col(0).array().cube();
        auto y3 = x.col(1).array().cube();
        d.col(0) = (-0.1 * x3 + 2.0 * y3).matrix();
        d.col(1) = (-2.0 * x3 - 0.1 * y3).matrix();
    };
    s.default_region = make_box({{-1.0, 1.0}, {-1.0, 1.0}});
    s.characteristic_horizon = 51.2;
    return s;
}

SystemSpec make_van_der_pol() {
    SystemSpec s;
    s.name = "van_der_pol";
    s.dim = 2;
    const double mu = 2.0;
    s.field = [mu](const Mat& x, Mat& d) {
        d.col(0) = x.col(1);
        d.col(1) = (mu * (1.0 - x.col(0).array().square()) * x.col(1).array() - x.col(0).array()).matrix();
    };
    s.default_region = make_box({{-2.0, 2.0}, {-4.0, 4.0}});
    s.characteristic_horizon = 51.2;
    return s;
}

// Hopf normal form with the bifurcation parameter carried as a frozen first
// state coordinate.
SystemSpec make_hopf() {
    SystemSpec s;
    s.name = "hopf";
    s.dim = 3;
    s.field = [](const Mat& x, Mat& d) {
        auto mu = x.col(0).array();
        auto u = x.col(1).array();
        auto v = x.col(2).array();
        auto r2 = u.square() + v.square();
        d.col(0).setZero();
        d.col(1) = (mu * u + v - u * r2).matrix();
        d.col(2) = (-u + mu * v - v * r2).matrix();
    };
    s.default_region = make_box({{-0.2, 0.6}, {-1.0, 2.0}, {-1.0, 1.0}});
    s.characteristic_horizon = 51.2;
    return s;
}

SystemSpec make_lorenz() {
    SystemSpec s;
    s.name = "lorenz";
    s.dim = 3;
    const double sigma = 10.0;
    const double rho = 28.0;
    const double beta = 8.0 / 3.0;
    s.field = [sigma, rho, beta](const Mat& x, Mat& d) {
        d.col(0) = sigma * (x.col(1) - x.col(0));
        d.col(1) = (x.col(0).array() * (rho - x.col(2).array()) - x.col(1).array()).matrix();
        d.col(2) = (x.col(0).array() * x.col(1).array() - beta * x.col(2).array()).matrix();
    };
    s.default_region = make_box({{-0.1, 0.1}, {-0.1, 0.1}, {-0.1, 0.1}});
    s.characteristic_horizon = 2.56;
    return s;
}

// One classic RK4 substep applied to every row of X in place. k1..k4 are
// caller-owned scratch to avoid reallocating across substeps.
void rk4_substep(const SystemSpec& sys, Mat& x, double h, Mat& k1, Mat& k2, Mat& k3, Mat& k4,
                 Mat& tmp) {
    k1.resize(x.rows(), x.cols());
    k2.resize(x.rows(), x.cols());
    k3.resize(x.rows(), x.cols());
    k4.resize(x.rows(), x.cols());
    sys.field(x, k1);
    tmp = x + (0.5 * h) * k1;
    sys.field(tmp, k2);
    tmp = x + (0.5 * h) * k2;
    sys.field(tmp, k3);
    tmp = x + h * k3;
    sys.field(tmp, k4);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::vector<Mat> integrate_fixed(const SystemSpec& sys, const Mat& x0, double dt, int steps,
                                 int substeps) {
    const double h = dt / substeps;
    std::vector<Mat> out;
    out.reserve(steps + 1);
    out.push_back(x0);
    Mat x = x0;
    Mat k1, k2, k3, k4, tmp;
    for (int i = 1; i <= steps; ++i) {
        for (int s = 0; s < substeps; ++s) rk4_substep(sys, x, h, k1, k2, k3, k4, tmp);
        if (!x.allFinite()) {
            for (int b = 0; b < x.rows(); ++b) {
                if (!x.row(b).allFinite())
                    throw DivergenceError("reference step " + std::to_string(i) + " (trajectory row " +
                                          std::to_string(b) + ")");
            }
        }
        out.push_back(x);
    }
    return out;
}

double max_rel_diff(const std::vector<Mat>& a, const std::vector<Mat>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double scale = std::max(1.0, std::max(a[i].cwiseAbs().maxCoeff(), b[i].cwiseAbs().maxCoeff()));
        worst = std::max(worst, (a[i] - b[i]).cwiseAbs().maxCoeff() / scale);
    }
    return worst;
}

}  // namespace

SystemSpec builtin_system(const std::string& name) {
    if (name == "harmonic") return make_harmonic();
    if (name == "hyperbolic") return make_hyperbolic();
    if (name == "cubic") return make_cubic();
    if (name == "van_der_pol") return make_van_der_pol();
    if (name == "hopf") return make_hopf();
    if (name == "lorenz") return make_lorenz();
    throw std::invalid_argument("unknown system: " + name);
}

std::vector<std::string> builtin_system_names() {
    return {"harmonic", "hyperbolic", "cubic", "van_der_pol", "hopf", "lorenz"};
}

Vec eval_vector_field(const SystemSpec& system, const Vec& x) {
    require(x.size() == system.dim, "state dimension mismatch for system " + system.name);
    Mat xs = x.transpose();
    Mat d(1, system.dim);
    system.field(xs, d);
    return d.row(0).transpose();
}

Mat eval_vector_field_batch(const SystemSpec& system, const Mat& states) {
    require(states.cols() == system.dim, "state dimension mismatch for system " + system.name);
    Mat d(states.rows(), states.cols());
    system.field(states, d);
    return d;
}

std::vector<Mat> reference_trajectory_batch(const SystemSpec& system, const Mat& x0, double dt,
                                            int steps, int substeps_per_sample) {
    require(x0.cols() == system.dim, "state dimension mismatch for system " + system.name);
    require(dt > 0.0, "dt must be positive");
    require(steps >= 1, "step count must be >= 1");
    require(substeps_per_sample >= 0, "substep count must be >= 0");

    if (substeps_per_sample > 0) return integrate_fixed(system, x0, dt, steps, substeps_per_sample);

    // Self-checking mode: accept the 200-substep run if it agrees with the
    // 100-substep run to 1e-9, otherwise refine once more.
    auto coarse = integrate_fixed(system, x0, dt, steps, 100);
    auto fine = integrate_fixed(system, x0, dt, steps, 200);
    if (max_rel_diff(coarse, fine) <= 1e-9) return fine;
    return integrate_fixed(system, x0, dt, steps, 400);
}

Trajectory reference_trajectory(const SystemSpec& system, const Vec& x0, double dt, int steps,
                                int substeps_per_sample) {
    auto rows = reference_trajectory_batch(system, x0.transpose(), dt, steps, substeps_per_sample);
    Trajectory traj;
    traj.t0 = 0.0;
    traj.dt = dt;
    traj.states.resize(steps + 1, system.dim);
    for (int i = 0; i <= steps; ++i) traj.states.row(i) = rows[i].row(0);
    return traj;
}

}  // namespace hits
