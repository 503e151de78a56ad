#ifndef HITS_HYBRID_HPP
#define HITS_HYBRID_HPP

#include <optional>

#include "hits/integrators.hpp"
#include "hits/multiscale.hpp"

namespace hits {

/// Coarse neural anchors plus classical Runge-Kutta stepping in between
/// (q = 0 means pure RK). The finest coarse step must be an integer multiple
/// of the RK step.
class HybridScheme {
  public:
    /// Pure-RK scheme (q = 0).
    HybridScheme(RkTableau tableau, SystemSpec system, double fine_step);

    /// q >= 1: neural anchors from `coarse`, RK fill below the finest coarse
    /// step.
    HybridScheme(Hierarchy coarse, RkTableau tableau, SystemSpec system, double fine_step);

    int q() const { return coarse_ ? coarse_->levels() : 0; }
    const Hierarchy& coarse() const { return *coarse_; }
    const RkTableau& tableau() const { return tableau_; }
    const SystemSpec& system() const { return system_; }
    double fine_step() const { return fine_step_; }
    /// RK steps per coarse anchor interval (1 when q = 0).
    long steps_per_anchor() const { return steps_per_anchor_; }

  private:
    std::optional<Hierarchy> coarse_;
    RkTableau tableau_;
    SystemSpec system_;
    double fine_step_ = 0.0;
    long steps_per_anchor_ = 1;
};

/// Alg.-style hybrid rollout: coarse anchors computed exactly as the
/// multiscale rollout, then batched RK steps advance from every anchor
/// simultaneously, filling strictly between anchors (anchor states are never
/// overwritten). With q = 0 the result is bitwise identical to rollout_rk.
RolloutResult hybrid_rollout(const HybridScheme& s, const Vec& x0, double horizon);

BatchRolloutResult hybrid_rollout_batch(const HybridScheme& s, const Mat& x0, double horizon);

}  // namespace hits

#endif
