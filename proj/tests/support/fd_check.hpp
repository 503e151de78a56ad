#ifndef HITS_TESTS_FD_CHECK_HPP
#define HITS_TESTS_FD_CHECK_HPP

// Finite-difference gradient oracle, independent of the reverse-mode path it
// checks: the loss is re-evaluated through plain forward passes at
// parameter +/- eps and differenced centrally.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hits/flowmap_net.hpp"

namespace hits::testing {

struct FdCheckResult {
    long checked = 0;
    long excluded = 0;  // ReLU-kink entries
    long failed = 0;
    double worst_rel = 0.0;
    std::string first_failure;
};

// Loss recomputed forward-only (no gradient machinery shared with the
// implementation under test). Optionally records every hidden preactivation
// so the caller can spot ReLU kinks inside the FD stencil.
inline double fd_loss(const FlowMapModel& m, const Mat& x0, const std::vector<Mat>& targets,
                      std::vector<double>* preacts) {
    const int p = static_cast<int>(targets.size());
    const int L = m.layers();
    if (preacts) preacts->clear();
    Mat x = x0;
    double loss = 0.0;
    for (int k = 0; k < p; ++k) {
        Mat z = x;
        for (int l = 0; l < L; ++l) {
            Mat h = z * m.weights[l].transpose();
            h.rowwise() += m.biases[l].transpose();
            if (l + 1 < L) {
                if (preacts) preacts->insert(preacts->end(), h.data(), h.data() + h.size());
                z = h.array().max(0.0).matrix();
            } else {
                z = std::move(h);
            }
        }
        x = x + z;
        loss += (x - targets[k]).squaredNorm();
    }
    return loss / (static_cast<double>(x0.rows()) * p);
}

// True when a ReLU input sits within kink_tol of zero in either evaluation or
// changes sign across the stencil; the loss may be non-differentiable there.
inline bool stencil_hits_kink(const std::vector<double>& plus, const std::vector<double>& minus,
                              double kink_tol) {
    for (std::size_t i = 0; i < plus.size(); ++i) {
        if (std::abs(plus[i]) < kink_tol || std::abs(minus[i]) < kink_tol) return true;
        if ((plus[i] > 0.0) != (minus[i] > 0.0)) return true;
    }
    return false;
}

inline void fd_check_array(FlowMapModel& m, double* param, const double* analytic, long count,
                           const Mat& x0, const std::vector<Mat>& targets, double eps, double rel_tol,
                           double kink_tol, FdCheckResult& res, const std::string& label) {
    std::vector<double> pre_plus, pre_minus;
    for (long i = 0; i < count; ++i) {
        const double saved = param[i];
        param[i] = saved + eps;
        const double f_plus = fd_loss(m, x0, targets, &pre_plus);
        param[i] = saved - eps;
        const double f_minus = fd_loss(m, x0, targets, &pre_minus);
        param[i] = saved;
        if (stencil_hits_kink(pre_plus, pre_minus, kink_tol)) {
            ++res.excluded;
            continue;
        }
        const double fd = (f_plus - f_minus) / (2.0 * eps);
        const double an = analytic[i];
        // The relative comparison floors the denominator at 1e-3: below that
        // the central-difference quotient itself carries ~1e-10 of roundoff.
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
        const double rel = std::abs(fd - an) / denom;
        ++res.checked;
        res.worst_rel = std::max(res.worst_rel, rel);
        if (rel > rel_tol) {
            ++res.failed;
            if (res.first_failure.empty()) {
                res.first_failure = label + "[" + std::to_string(i) + "]: analytic " +
                                    std::to_string(an) + " vs fd " + std::to_string(fd);
            }
        }
    }
}

// Checks every parameter entry of the model against central differences.
inline FdCheckResult fd_check_model(const FlowMapModel& model, const Mat& x0,
                                    const std::vector<Mat>& targets, double eps = 1e-6,
                                    double rel_tol = 1e-6, double kink_tol = 1e-7) {
    FlowMapModel m = model;  // mutated in place while probing
    LossGrad lg = loss_and_grad(m, x0, targets);
    FdCheckResult res;
    for (int l = 0; l < m.layers(); ++l) {
        fd_check_array(m, m.weights[l].data(), lg.grads.weights[l].data(), m.weights[l].size(), x0,
                       targets, eps, rel_tol, kink_tol, res, "W" + std::to_string(l));
        fd_check_array(m, m.biases[l].data(), lg.grads.biases[l].data(), m.biases[l].size(), x0,
                       targets, eps, rel_tol, kink_tol, res, "b" + std::to_string(l));
    }
    return res;
}

}  // namespace hits::testing

#endif
