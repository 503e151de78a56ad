#include "hits/integrators.hpp"

#include <cmath>

namespace hits {

RkTableau::RkTableau(std::string name, Mat a, Vec b, Vec c)
    : name_(std::move(name)), a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
    const int k = static_cast<int>(b_.size());
    require(k >= 1, "tableau needs at least one stage");
    require(a_.rows() == k && a_.cols() == k, "stage coefficient matrix must be k x k");
    require(c_.size() == k, "node vector must have k entries");
    require(std::abs(b_.sum() - 1.0) <= 1e-12, "tableau weights must sum to 1");
    for (int j = 0; j < k; ++j) {
        for (int l = j; l < k; ++l) {
            require(a_(j, l) == 0.0, "implicit tableaus are not supported (a must be strictly lower triangular)");
        }
    }
}

RkTableau RkTableau::named(const std::string& name) {
    if (name == "euler") {
        Mat a = Mat::Zero(1, 1);
        Vec b(1), c(1);
        b << 1.0;
        c << 0.0;
        return RkTableau("euler", a, b, c);
    }
    if (name == "rk4") {
        Mat a = Mat::Zero(4, 4);
        a(1, 0) = 0.5;
        a(2, 1) = 0.5;
        a(3, 2) = 1.0;
        Vec b(4), c(4);
        b << 1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0;
        c << 0.0, 0.5, 0.5, 1.0;
        return RkTableau("rk4", a, b, c);
    }
    throw std::invalid_argument("unknown tableau: " + name);
}

void RkStepper::step_in_place(Mat& x, double h) {
    const int k = tab_.stages();
    if (static_cast<int>(stage_.size()) != k) stage_.assign(k, Mat());
    for (int j = 0; j < k; ++j) stage_[j].resize(x.rows(), x.cols());
    for (int j = 0; j < k; ++j) {
        if (j == 0) {
            system_.field(x, stage_[0]);
        } else {
            work_ = x;
            for (int l = 0; l < j; ++l) {
                if (tab_.a()(j, l) != 0.0) work_ += (h * tab_.a()(j, l)) * stage_[l];
            }
            system_.field(work_, stage_[j]);
        }
    }
    for (int j = 0; j < k; ++j) x += (h * tab_.b()[j]) * stage_[j];
}

Mat rk_step_batch(const RkTableau& tab, const SystemSpec& system, const Mat& x, double h) {
    require(x.cols() == system.dim, "state dimension mismatch for system " + system.name);
    require(h > 0.0, "step size must be positive");
    RkStepper stepper(tab, system);
    Mat out = x;
    stepper.step_in_place(out, h);
    if (!out.allFinite()) {
        for (int b = 0; b < out.rows(); ++b) {
            if (!out.row(b).allFinite()) throw DivergenceError("rk step (batch row " + std::to_string(b) + ")");
        }
    }
    return out;
}

Vec rk_step(const RkTableau& tab, const SystemSpec& system, const Vec& x, double h) {
    return rk_step_batch(tab, system, x.transpose(), h).row(0).transpose();
}

std::vector<Trajectory> rollout_rk_batch(const RkTableau& tab, const SystemSpec& system,
                                         const Mat& x0, double h, int n) {
    require(x0.cols() == system.dim, "state dimension mismatch for system " + system.name);
    require(h > 0.0, "step size must be positive");
    require(n >= 1, "step count must be >= 1");

    const int batch = static_cast<int>(x0.rows());
    std::vector<Trajectory> out(batch);
    for (int b = 0; b < batch; ++b) {
        out[b].t0 = 0.0;
        out[b].dt = h;
        out[b].states.resize(n + 1, system.dim);
        out[b].states.row(0) = x0.row(b);
    }

    RkStepper stepper(tab, system);
    Mat x = x0;
    for (int i = 1; i <= n; ++i) {
        stepper.step_in_place(x, h);
        if (!x.allFinite()) {
            for (int b = 0; b < batch; ++b) {
                if (!x.row(b).allFinite())
                    throw DivergenceError("rk rollout step " + std::to_string(i) + " (batch row " +
                                          std::to_string(b) + ")");
            }
        }
        for (int b = 0; b < batch; ++b) out[b].states.row(i) = x.row(b);
    }
    return out;
}

Trajectory rollout_rk(const RkTableau& tab, const SystemSpec& system, const Vec& x0, double h,
                      int n) {
    return rollout_rk_batch(tab, system, x0.transpose(), h, n)[0];
}

}  // namespace hits
