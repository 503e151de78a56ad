#include <doctest.h>

#include <cmath>

#include "hits/hybrid.hpp"
#include "hits/rng.hpp"

using namespace hits;

namespace {

FlowMapModel zero_model(const std::vector<int>& dims, double dt, const std::string& system) {
    FlowMapModel m;
    m.system = system;
    m.dt = dt;
    m.layer_dims = dims;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        m.weights.push_back(Mat::Zero(dims[l + 1], dims[l]));
        m.biases.push_back(Vec::Zero(dims[l + 1]));
    }
    return m;
}

FlowMapModel random_model(const std::vector<int>& dims, double dt, const std::string& system,
                          std::uint64_t seed, double scale = 0.05) {
    FlowMapModel m = zero_model(dims, dt, system);
    Rng rng(seed);
    for (auto& w : m.weights)
        for (long i = 0; i < w.size(); ++i) w.data()[i] = scale * rng.uniform(-1, 1);
    for (auto& b : m.biases)
        for (long i = 0; i < b.size(); ++i) b[i] = scale * rng.uniform(-1, 1);
    return m;
}

}  // namespace

TEST_CASE("q = 0 reduces to the plain rk rollout bitwise") {
    auto sys = builtin_system("harmonic");
    HybridScheme scheme(RkTableau::named("rk4"), sys, 0.01);
    Vec x0(2);
    x0 << 0.6, -0.2;
    RolloutResult hy = hybrid_rollout(scheme, x0, 1.0);
    Trajectory rk = rollout_rk(RkTableau::named("rk4"), sys, x0, 0.01, 100);
    REQUIRE(hy.size() == 101);
    CHECK(hy.states == rk.states);
    CHECK(hy.provenance[0].kind == Provenance::Kind::initial);
    CHECK(hy.provenance[1].kind == Provenance::Kind::rk);
}

TEST_CASE("identity coarse model: the first segment equals pure rk from x0") {
    auto sys = builtin_system("harmonic");
    Hierarchy coarse({zero_model({2, 4, 2}, 0.5, "harmonic")});
    HybridScheme scheme(coarse, RkTableau::named("rk4"), sys, 0.1);
    Vec x0(2);
    x0 << 1.0, 0.0;
    RolloutResult hy = hybrid_rollout(scheme, x0, 2.0);
    Trajectory rk = rollout_rk(RkTableau::named("rk4"), sys, x0, 0.1, 4);
    // Fine states strictly before the first anchor restart.
    for (int k = 1; k <= 4; ++k) CHECK(hy.states.row(k) == rk.states.row(k));
    // Anchors are the (identity) neural states: all equal to x0.
    for (int a = 0; a <= 4; ++a) CHECK(hy.states.row(5 * a).transpose() == x0);
}

TEST_CASE("coarse anchors are bitwise identical to the multiscale rollout") {
    auto sys = builtin_system("cubic");
    Hierarchy coarse({random_model({2, 8, 2}, 1.0, "cubic", 5),
                      random_model({2, 8, 2}, 0.5, "cubic", 6)});
    HybridScheme scheme(coarse, RkTableau::named("rk4"), sys, 0.125);
    Mat x0(3, 2);
    Rng rng(8);
    for (long i = 0; i < x0.size(); ++i) x0.data()[i] = rng.uniform(-0.5, 0.5);

    BatchRolloutResult hy = hybrid_rollout_batch(scheme, x0, 3.0);
    BatchRolloutResult pure = multiscale_rollout_batch(coarse, x0, 3.0, 0.5);
    const long K = scheme.steps_per_anchor();
    REQUIRE(K == 4);
    for (int a = 0; a < pure.size(); ++a) {
        CHECK(hy.states[a * K] == pure.states[a]);
        CHECK(hy.provenance[a * K] == pure.provenance[a]);
    }
}

TEST_CASE("every multiple of h appears exactly once") {
    auto sys = builtin_system("hyperbolic");
    Hierarchy coarse({random_model({2, 6, 2}, 0.8, "hyperbolic", 9)});
    HybridScheme scheme(coarse, RkTableau::named("rk4"), sys, 0.1);
    Vec x0(2);
    x0 << 0.2, 0.4;
    RolloutResult hy = hybrid_rollout(scheme, x0, 2.4);
    REQUIRE(hy.size() == 25);
    for (int k = 0; k < hy.size(); ++k) CHECK(hy.times[k] == doctest::Approx(0.1 * k).epsilon(1e-13));
}

TEST_CASE("changing the coarse model leaves the first fine segment untouched") {
    auto sys = builtin_system("van_der_pol");
    auto model_a = random_model({2, 8, 2}, 1.0, "van_der_pol", 13);
    auto model_b = random_model({2, 8, 2}, 1.0, "van_der_pol", 14);
    Vec x0(2);
    x0 << 0.5, -0.5;

    HybridScheme sa(Hierarchy({model_a}), RkTableau::named("rk4"), sys, 0.25);
    HybridScheme sb(Hierarchy({model_b}), RkTableau::named("rk4"), sys, 0.25);
    RolloutResult ra = hybrid_rollout(sa, x0, 3.0);
    RolloutResult rb = hybrid_rollout(sb, x0, 3.0);

    // Times in (0, 1) depend only on x0 and the rk stepper.
    for (int k = 1; k < 4; ++k) CHECK(ra.states.row(k) == rb.states.row(k));
    // The first nontrivial anchor differs between the models.
    CHECK(ra.states.row(4) != rb.states.row(4));
}

TEST_CASE("fine step must divide the finest coarse step") {
    auto sys = builtin_system("harmonic");
    Hierarchy coarse({random_model({2, 4, 2}, 0.5, "harmonic", 2)});
    CHECK_THROWS_AS(HybridScheme(coarse, RkTableau::named("rk4"), sys, 0.3), std::invalid_argument);
}

TEST_CASE("hybrid divergence names the stage") {
    SystemSpec blow;
    blow.name = "blowup";
    blow.dim = 1;
    blow.field = [](const Mat& x, Mat& d) { d.col(0) = x.col(0).array().square().matrix(); };
    Hierarchy coarse({zero_model({1, 2, 1}, 1.0, "blowup")});
    HybridScheme scheme(coarse, RkTableau::named("euler"), blow, 0.25);
    Vec x0(1);
    x0 << 1e200;  // overflows within the first anchor interval
    CHECK_THROWS_AS(hybrid_rollout(scheme, x0, 2.0), DivergenceError);
}
