#include <doctest.h>

#include <chrono>
#include <cmath>

#include "hits/metrics.hpp"
#include "hits/rng.hpp"

using namespace hits;

namespace {

RolloutResult rollout_from(const Mat& states, double dt) {
    RolloutResult r;
    r.times.resize(states.rows());
    for (long k = 0; k < states.rows(); ++k) r.times[k] = k * dt;
    r.states = states;
    r.provenance.assign(states.rows(), Provenance::from_level(0));
    return r;
}

Trajectory trajectory_from(const Mat& states, double dt) {
    Trajectory t;
    t.t0 = 0;
    t.dt = dt;
    t.states = states;
    return t;
}

// Deterministic busy work; duration scales with `units`.
void spin(long units) {
    volatile double acc = 0.0;
    for (long i = 0; i < units * 1000000; ++i) acc = acc + std::sqrt(static_cast<double>(i % 97));
}

}  // namespace

TEST_CASE("exact predictions give an all-zero error curve") {
    Mat states(4, 2);
    states << 0, 0, 1, 1, 2, 2, 3, 3;
    auto pred = rollout_from(states, 0.5);
    auto truth = trajectory_from(states, 0.5);
    Vec e = per_step_error(pred, truth);
    CHECK(e.size() == 4);
    CHECK(e.cwiseAbs().maxCoeff() == 0.0);
    CHECK(integrated_l2(pred, truth) == 0.0);
}

TEST_CASE("squared norm of the pointwise error") {
    Mat truth_states(2, 2);
    truth_states << 0, 0, 1, 1;
    Mat pred_states = truth_states;
    pred_states(1, 0) += 3.0;
    pred_states(1, 1) += 4.0;
    Vec e = per_step_error(rollout_from(pred_states, 1.0), trajectory_from(truth_states, 1.0));
    CHECK(e[0] == 0.0);
    CHECK(e[1] == doctest::Approx(25.0));

    // Doubling every error component scales entries by 4.
    Mat doubled = truth_states;
    doubled(1, 0) += 6.0;
    doubled(1, 1) += 8.0;
    Vec e2 = per_step_error(rollout_from(doubled, 1.0), trajectory_from(truth_states, 1.0));
    CHECK(e2[1] == doctest::Approx(100.0));
}

TEST_CASE("integrated l2 is the mean of the per-step curve") {
    Rng rng(6);
    for (int trial = 0; trial < 5; ++trial) {
        Mat truth_states(6, 3), pred_states(6, 3);
        for (long i = 0; i < truth_states.size(); ++i) {
            truth_states.data()[i] = rng.uniform(-1, 1);
            pred_states.data()[i] = rng.uniform(-1, 1);
        }
        auto pred = rollout_from(pred_states, 0.1);
        auto truth = trajectory_from(truth_states, 0.1);
        Vec e = per_step_error(pred, truth);
        CHECK(integrated_l2(pred, truth) == doctest::Approx(e.mean()).epsilon(1e-15));
    }

    // Constant per-step error c integrates to c.
    Mat truth_states = Mat::Zero(5, 1);
    Mat pred_states = Mat::Constant(5, 1, 2.0);
    CHECK(integrated_l2(rollout_from(pred_states, 1.0), trajectory_from(truth_states, 1.0)) ==
          doctest::Approx(4.0));
}

TEST_CASE("batched error averages over trajectories") {
    Mat truth_a = Mat::Zero(3, 1), truth_b = Mat::Zero(3, 1);
    Mat pred_a = Mat::Constant(3, 1, 1.0);  // error 1 everywhere
    Mat pred_b = Mat::Constant(3, 1, 3.0);  // error 9 everywhere
    std::vector<RolloutResult> preds{rollout_from(pred_a, 1.0), rollout_from(pred_b, 1.0)};
    std::vector<Trajectory> truths{trajectory_from(truth_a, 1.0), trajectory_from(truth_b, 1.0)};
    Vec e = per_step_error(preds, truths);
    for (long k = 0; k < 3; ++k) CHECK(e[k] == doctest::Approx(5.0));
}

TEST_CASE("grid mismatch is rejected") {
    Mat s4(4, 1);
    s4 << 0, 1, 2, 3;
    Mat s6(6, 1);
    s6 << 0, 1, 2, 3, 4, 5;
    // Prediction covers [0, 1.5], truth asks for states up to t = 5.
    CHECK_THROWS_AS(per_step_error(rollout_from(s4, 0.5), trajectory_from(s6, 1.0)),
                    std::invalid_argument);
}

TEST_CASE("timing a no-op is fast and repeat timings are stable") {
    CHECK(time_execution([] {}) < 1e-3);

    std::vector<double> times;
    for (int run = 0; run < 5; ++run) times.push_back(time_execution([] { spin(40); }));
    double mean = 0;
    for (double t : times) mean += t;
    mean /= times.size();
    double var = 0;
    for (double t : times) var += (t - mean) * (t - mean);
    var /= times.size();
    const double cov = std::sqrt(var) / mean;
    INFO("timing coefficient of variation ", cov);
    CHECK(cov < 0.5);
}

TEST_CASE("timing is additive across sequential tasks") {
    const double ta = time_execution([] { spin(60); });
    const double tb = time_execution([] { spin(30); });
    const double tab = time_execution([] {
        spin(60);
        spin(30);
    });
    INFO("ta ", ta, " tb ", tb, " tab ", tab);
    CHECK(std::abs(tab - (ta + tb)) <= 0.10 * (ta + tb));
}

TEST_CASE("increment field in the small-step limit is dt * f(x0)") {
    auto sys = builtin_system("harmonic");
    Box region = make_box({{0.3, 0.9}, {-0.4, 0.4}});
    const double dt = 1e-8;
    IncrementField field = increment_field(sys, region, 3, dt, 1);
    CHECK(field.points.rows() == 9);
    for (long i = 0; i < field.points.rows(); ++i) {
        Vec f = eval_vector_field(sys, field.points.row(i).transpose());
        CHECK((field.increments[0].row(i).transpose() - dt * f).norm() <= 1e-6 * dt * (1 + f.norm()));
    }
    CHECK_THROWS_AS(increment_field(sys, region, 3, dt, 0), std::invalid_argument);
}

TEST_CASE("a full harmonic period returns to the start") {
    auto sys = builtin_system("harmonic");
    Box point = make_box({{1.0, 1.0}, {0.0, 0.0}});  // both axes pinned
    IncrementField field = increment_field(sys, point, 1, 2.0 * M_PI, 1);
    REQUIRE(field.points.rows() == 1);
    CHECK(field.increments[0].row(0).norm() < 1e-6);
}

TEST_CASE("the lorenz slice setup is accepted") {
    auto sys = builtin_system("lorenz");
    Box slice = make_box({{-9.0, -7.0}, {6.0, 8.0}, {27.0, 27.0}});
    IncrementField field = increment_field(sys, slice, 3, 0.008, 4);
    CHECK(field.points.rows() == 9);
    CHECK((field.points.col(2).array() == 27.0).all());
    for (const auto& inc : field.increments) CHECK(inc.allFinite());
    for (char d : field.diverged) CHECK(d == 0);
}

TEST_CASE("divergent grid points are flagged, not fatal") {
    SystemSpec blow;
    blow.name = "blowup";
    blow.dim = 1;
    blow.field = [](const Mat& x, Mat& d) { d.col(0) = x.col(0).array().square().matrix(); };
    blow.default_region = make_box({{-0.5, 2.5}});
    Box region = make_box({{-0.5, 2.5}});
    IncrementField field = increment_field(blow, region, 3, 0.6, 2);
    REQUIRE(field.points.rows() == 3);
    CHECK(field.diverged[0] == 0);  // x0 = -0.5 decays toward zero
    CHECK(field.diverged[2] == 1);  // x0 = 2.5 escapes before t = 0.4
    CHECK(field.increments[0].row(0).allFinite());
    CHECK(!field.increments[1].row(2).allFinite());
}
