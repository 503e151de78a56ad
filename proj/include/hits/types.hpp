#ifndef HITS_TYPES_HPP
#define HITS_TYPES_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace hits {

using Vec = Eigen::VectorXd;

/// Batch of states, one state per row (B x D).
using Mat = Eigen::MatrixXd;

/// Closed interval. A degenerate interval (lo == hi) pins a coordinate.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool degenerate() const { return lo == hi; }
    double width() const { return hi - lo; }
};

/// Axis-aligned box in state space.
struct Box {
    std::vector<Interval> axes;

    Box() = default;
    explicit Box(std::vector<Interval> a) : axes(std::move(a)) {}

    int dim() const { return static_cast<int>(axes.size()); }

    bool contains(const Vec& x, double tol = 0.0) const {
        if (x.size() != dim()) return false;
        for (int i = 0; i < dim(); ++i) {
            if (x[i] < axes[i].lo - tol || x[i] > axes[i].hi + tol) return false;
        }
        return true;
    }

    /// Throws std::invalid_argument if any interval has lo > hi.
    void validate() const {
        for (const auto& a : axes) {
            if (a.lo > a.hi) throw std::invalid_argument("box interval has lower > upper");
        }
    }
};

inline Box make_box(std::initializer_list<Interval> axes) { return Box(std::vector<Interval>(axes)); }

/// A trajectory blew up (non-finite state). `where` names the offending
/// step/level/row so callers can report it.
class DivergenceError : public std::runtime_error {
  public:
    explicit DivergenceError(const std::string& where)
        : std::runtime_error("non-finite state encountered at " + where) {}
};

/// Raised when training produces a non-finite loss.
class TrainingError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Structured load failures for model/dataset files.
class LoadError : public std::runtime_error {
  public:
    enum class Kind { version_mismatch, truncated, inconsistent, io };

    LoadError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

  private:
    Kind kind_;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace hits

#endif
