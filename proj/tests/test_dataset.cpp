#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hits/dataset.hpp"

using namespace hits;

namespace {

bool datasets_equal(const Dataset& a, const Dataset& b) {
    if (a.system != b.system || a.size() != b.size() || a.noise_fraction != b.noise_fraction ||
        a.seed != b.seed || a.split_tag != b.split_tag)
        return false;
    for (int i = 0; i < a.size(); ++i) {
        if (a.trajectories[i].t0 != b.trajectories[i].t0) return false;
        if (a.trajectories[i].dt != b.trajectories[i].dt) return false;
        if (a.trajectories[i].states != b.trajectories[i].states) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("initial conditions are uniform over the box and reproducible") {
    Box region = make_box({{-1.0, 1.0}, {-1.0, 1.0}});
    Mat pts = sample_initial_conditions(region, 1000, 42);
    for (int i = 0; i < pts.rows(); ++i) CHECK(region.contains(pts.row(i).transpose()));

    Mat again = sample_initial_conditions(region, 1000, 42);
    CHECK(pts == again);

    Mat big = sample_initial_conditions(region, 10000, 7);
    CHECK(std::abs(big.col(0).mean()) < 0.05);
    CHECK(std::abs(big.col(1).mean()) < 0.05);
}

TEST_CASE("degenerate boxes are rejected, pinned axes are allowed") {
    Box bad = make_box({{1.0, -1.0}});
    CHECK_THROWS_AS(sample_initial_conditions(bad, 10, 0), std::invalid_argument);

    Box pinned = make_box({{-1.0, 1.0}, {27.0, 27.0}});
    Mat pts = sample_initial_conditions(pinned, 50, 3);
    CHECK((pts.col(1).array() == 27.0).all());
}

TEST_CASE("unit-disk constraint keeps samples inside the disk") {
    Box region = make_box({{-1.0, 1.0}, {-1.0, 1.0}});
    Mat pts = sample_initial_conditions(region, 500, 11, RegionConstraint::unit_disk);
    for (int i = 0; i < pts.rows(); ++i) CHECK(pts.row(i).squaredNorm() <= 1.0);
}

TEST_CASE("dataset generation produces the requested shape") {
    auto sys = builtin_system("harmonic");
    Box region = make_box({{-1.0, 1.0}, {-1.0, 1.0}});
    Dataset ds = build_dataset(sys, region, 0.008, 5, 500, 9);
    CHECK(ds.size() == 500);
    for (const auto& tr : ds.trajectories) {
        CHECK(tr.states.rows() == 6);
        CHECK(tr.dt == 0.008);
    }
    CHECK(ds.noise_fraction == 0.0);

    // First states equal the sampled initial conditions exactly.
    Mat ics = sample_initial_conditions(region, 500, 9);
    for (int i = 0; i < 500; ++i) CHECK(ds.trajectories[i].states.row(0) == ics.row(i));
}

TEST_CASE("tiny dataset") {
    auto sys = builtin_system("cubic");
    Dataset ds = build_dataset(sys, sys.default_region, 0.1, 1, 1, 1);
    CHECK(ds.size() == 1);
    CHECK(ds.trajectories[0].states.rows() == 2);
    CHECK(sys.default_region.contains(ds.trajectories[0].states.row(0).transpose()));
}

TEST_CASE("burn-in advances the start away from the sampled point") {
    auto sys = builtin_system("lorenz");
    Dataset raw = build_dataset(sys, sys.default_region, 0.01, 5, 3, 21);
    Dataset cooked = build_dataset(sys, sys.default_region, 0.01, 5, 3, 21, Split::train, 5.0);
    for (int i = 0; i < 3; ++i)
        CHECK(raw.trajectories[i].states.row(0) != cooked.trajectories[i].states.row(0));
    // After 5 time units the state is on the attractor, far from the origin box.
    CHECK(cooked.trajectories[0].states.row(0).norm() > 1.0);
}

TEST_CASE("stride keeps every s-th state exactly") {
    auto sys = builtin_system("harmonic");
    Dataset ds = build_dataset(sys, sys.default_region, 0.01, 8, 10, 4);

    CHECK(datasets_equal(stride(ds, 1), ds));

    Dataset s4 = stride(ds, 4);
    CHECK(s4.dt() == doctest::Approx(0.04));
    CHECK(s4.steps() == 2);
    for (int i = 0; i < ds.size(); ++i) {
        CHECK(s4.trajectories[i].states.row(0) == ds.trajectories[i].states.row(0));
        CHECK(s4.trajectories[i].states.row(1) == ds.trajectories[i].states.row(4));
        CHECK(s4.trajectories[i].states.row(2) == ds.trajectories[i].states.row(8));
    }

    CHECK(datasets_equal(stride(stride(ds, 2), 2), stride(ds, 4)));

    CHECK_THROWS_AS(stride(ds, 9), std::invalid_argument);
    CHECK_THROWS_AS(stride(ds, 0), std::invalid_argument);
}

TEST_CASE("noise injection hits the configured variance") {
    auto sys = builtin_system("harmonic");
    Dataset clean = build_dataset(sys, sys.default_region, 0.05, 50, 100, 13);

    CHECK(datasets_equal(add_noise(clean, 0.0, 99), clean));

    auto added_variance = [&](const Dataset& noisy) {
        Vec mean = Vec::Zero(2), sq = Vec::Zero(2);
        long count = 0;
        for (int i = 0; i < clean.size(); ++i) {
            Mat diff = noisy.trajectories[i].states - clean.trajectories[i].states;
            mean += diff.colwise().sum().transpose();
            sq += diff.array().square().colwise().sum().matrix().transpose();
            count += diff.rows();
        }
        mean /= static_cast<double>(count);
        return (sq / static_cast<double>(count) - mean.cwiseProduct(mean)).eval();
    };

    // Component variance of the clean data.
    Vec mean = Vec::Zero(2), sq = Vec::Zero(2);
    long count = 0;
    for (const auto& tr : clean.trajectories) {
        mean += tr.states.colwise().sum().transpose();
        sq += tr.states.array().square().colwise().sum().matrix().transpose();
        count += tr.states.rows();
    }
    mean /= static_cast<double>(count);
    Vec var = sq / static_cast<double>(count) - mean.cwiseProduct(mean);

    Dataset n1 = add_noise(clean, 0.01, 99);
    Vec got1 = added_variance(n1);
    for (int c = 0; c < 2; ++c) CHECK(std::abs(got1[c] - 0.01 * var[c]) < 0.1 * 0.01 * var[c]);

    Dataset n2 = add_noise(clean, 0.02, 99);
    Vec got2 = added_variance(n2);
    for (int c = 0; c < 2; ++c) {
        const double ratio = got2[c] / got1[c];
        CHECK(ratio > 2.0 * 0.85);
        CHECK(ratio < 2.0 * 1.15);
    }

    CHECK(datasets_equal(add_noise(clean, 0.01, 99), n1));  // seeded determinism
    CHECK(n1.noise_fraction == 0.01);
}

TEST_CASE("dataset files round-trip bitwise") {
    auto sys = builtin_system("hopf");
    Dataset ds = build_dataset(sys, sys.default_region, 0.02, 7, 5, 31, Split::test);
    const std::string path = (std::filesystem::temp_directory_path() / "hits_ds_test.bin").string();
    save_dataset(ds, path);
    Dataset back = load_dataset(path);
    CHECK(datasets_equal(ds, back));

    // Corrupt the magic bytes.
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXX", 4);
    }
    CHECK_THROWS_AS(load_dataset(path), LoadError);
    try {
        load_dataset(path);
    } catch (const LoadError& e) {
        CHECK(e.kind() == LoadError::Kind::version_mismatch);
    }

    // Truncated payload.
    save_dataset(ds, path);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) / 2);
    try {
        load_dataset(path);
        FAIL("expected truncation error");
    } catch (const LoadError& e) {
        CHECK(e.kind() == LoadError::Kind::truncated);
    }
    std::filesystem::remove(path);
}
