#ifndef HITS_INTEGRATORS_HPP
#define HITS_INTEGRATORS_HPP

#include <string>
#include <vector>

#include "hits/dynamics.hpp"
#include "hits/types.hpp"

namespace hits {

/// Butcher tableau of an explicit Runge-Kutta scheme. Only explicit schemes
/// are accepted: `a` must be strictly lower triangular.
class RkTableau {
  public:
    /// Validates and stores the tableau. Throws std::invalid_argument for
    /// implicit schemes (nonzero on/above the diagonal of `a`), inconsistent
    /// weights (sum b != 1) or mismatched sizes.
    RkTableau(std::string name, Mat a, Vec b, Vec c);

    /// Built-in tableaus by name: "euler", "rk4".
    static RkTableau named(const std::string& name);

    const std::string& name() const { return name_; }
    int stages() const { return static_cast<int>(b_.size()); }
    const Mat& a() const { return a_; }
    const Vec& b() const { return b_; }
    const Vec& c() const { return c_; }

  private:
    std::string name_;
    Mat a_;
    Vec b_;
    Vec c_;
};

/// One explicit RK step x -> x + h * sum_j b_j h_j for a single state.
/// Throws DivergenceError if the result is non-finite.
Vec rk_step(const RkTableau& tab, const SystemSpec& system, const Vec& x, double h);

/// Same step applied to one state per row. Row i is bitwise identical to a
/// single-state rk_step on that row.
Mat rk_step_batch(const RkTableau& tab, const SystemSpec& system, const Mat& x, double h);

/// n fixed-size steps from x0; returns the n+1 visited states.
Trajectory rollout_rk(const RkTableau& tab, const SystemSpec& system, const Vec& x0, double h,
                      int n);

/// Batched rollout: result[b] is bitwise identical to rollout_rk on row b.
/// A divergence error names the batch row that blew up.
std::vector<Trajectory> rollout_rk_batch(const RkTableau& tab, const SystemSpec& system,
                                         const Mat& x0, double h, int n);

/// Stepping kernel for callers that manage their own state storage: advances
/// every row of `x` by one step in place. Scratch matrices are reused across
/// calls when their size already matches.
class RkStepper {
  public:
    RkStepper(RkTableau tab, SystemSpec system) : tab_(std::move(tab)), system_(std::move(system)) {}

    void step_in_place(Mat& x, double h);

    const RkTableau& tableau() const { return tab_; }
    const SystemSpec& system() const { return system_; }

  private:
    RkTableau tab_;
    SystemSpec system_;
    std::vector<Mat> stage_;  // stage derivatives h_j
    Mat work_;
};

}  // namespace hits

#endif
