#include "hits/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "hits/rng.hpp"

namespace hits {

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::validate: return "validate";
        case Split::test: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "validate") return Split::validate;
    if (s == "test") return Split::test;
    throw std::invalid_argument("unknown split tag: " + s);
}

Mat sample_initial_conditions(const Box& region, int n, std::uint64_t seed,
                              RegionConstraint constraint) {
    region.validate();
    require(n >= 1, "sample count must be >= 1");
    const int d = region.dim();
    Mat out(n, d);
    for (int i = 0; i < n; ++i) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(i));
        while (true) {
            for (int a = 0; a < d; ++a) out(i, a) = rng.uniform(region.axes[a].lo, region.axes[a].hi);
            if (constraint == RegionConstraint::none) break;
            if (out.row(i).squaredNorm() <= 1.0) break;
        }
    }
    return out;
}

Dataset build_dataset(const SystemSpec& system, const Box& region, double dt, int p, int n,
                      std::uint64_t seed, Split split, double burn_in, RegionConstraint constraint) {
    require(dt > 0.0, "dt must be positive");
    require(p >= 1, "p must be >= 1");
    require(region.dim() == system.dim, "region dimension mismatch for system " + system.name);

    Mat x0 = sample_initial_conditions(region, n, seed, constraint);
    if (burn_in > 0.0) {
        // Advance by burn_in in whole-dt chunks plus a remainder sample.
        const int whole = static_cast<int>(std::floor(burn_in / dt + 1e-9));
        const double rest = burn_in - whole * dt;
        try {
            if (whole >= 1) x0 = reference_trajectory_batch(system, x0, dt, whole).back();
            if (rest > 1e-12) x0 = reference_trajectory_batch(system, x0, rest, 1).back();
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string("burn-in: ") + e.what());
        }
    }

    Dataset ds;
    ds.system = system.name;
    ds.noise_fraction = 0.0;
    ds.seed = seed;
    ds.split_tag = split;
    ds.trajectories.resize(n);

    std::vector<Mat> samples;
    try {
        samples = reference_trajectory_batch(system, x0, dt, p);
    } catch (const DivergenceError& e) {
        throw DivergenceError(std::string("dataset generation: ") + e.what());
    }
    for (int b = 0; b < n; ++b) {
        Trajectory& tr = ds.trajectories[b];
        tr.t0 = 0.0;
        tr.dt = dt;
        tr.states.resize(p + 1, system.dim);
        for (int k = 0; k <= p; ++k) tr.states.row(k) = samples[k].row(b);
    }
    return ds;
}

Dataset stride(const Dataset& ds, int s) {
    require(s >= 1, "stride must be >= 1");
    if (s == 1) return ds;
    Dataset out;
    out.system = ds.system;
    out.noise_fraction = ds.noise_fraction;
    out.seed = ds.seed;
    out.split_tag = ds.split_tag;
    out.trajectories.reserve(ds.trajectories.size());
    for (const auto& tr : ds.trajectories) {
        require(tr.steps() >= s, "stride exceeds trajectory length");
        const int new_p = tr.steps() / s;
        Trajectory st;
        st.t0 = tr.t0;
        st.dt = tr.dt * s;
        st.states.resize(new_p + 1, tr.dim());
        for (int k = 0; k <= new_p; ++k) st.states.row(k) = tr.states.row(k * s);
        out.trajectories.push_back(std::move(st));
    }
    return out;
}

Dataset add_noise(const Dataset& ds, double fraction, std::uint64_t seed) {
    require(fraction >= 0.0, "noise fraction must be >= 0");
    if (fraction == 0.0) return ds;
    require(!ds.trajectories.empty(), "dataset is empty");

    const int d = ds.dim();
    // Population variance of each component over all states of all
    // trajectories.
    Vec mean = Vec::Zero(d), sq = Vec::Zero(d);
    long count = 0;
    for (const auto& tr : ds.trajectories) {
        mean += tr.states.colwise().sum().transpose();
        sq += tr.states.array().square().colwise().sum().matrix().transpose();
        count += tr.states.rows();
    }
    mean /= static_cast<double>(count);
    Vec variance = sq / static_cast<double>(count) - mean.cwiseProduct(mean);
    Vec sigma = (fraction * variance.array().max(0.0)).sqrt().matrix();

    Dataset out = ds;
    out.noise_fraction = fraction;
    for (std::size_t i = 0; i < out.trajectories.size(); ++i) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(i));
        Mat& st = out.trajectories[i].states;
        for (int r = 0; r < st.rows(); ++r) {
            for (int c = 0; c < d; ++c) st(r, c) += sigma[c] * rng.normal();
        }
    }
    return out;
}

namespace {

constexpr char kMagic[8] = {'H', 'I', 'T', 'S', 'D', 'S', '0', '1'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw LoadError(LoadError::Kind::truncated, "dataset file truncated");
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    auto len = read_pod<std::uint32_t>(is);
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (!is) throw LoadError(LoadError::Kind::truncated, "dataset file truncated");
    return s;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw LoadError(LoadError::Kind::io, "cannot open " + path + " for writing");
    os.write(kMagic, sizeof(kMagic));
    write_string(os, ds.system);
    write_string(os, to_string(ds.split_tag));
    write_pod<double>(os, ds.dt());
    write_pod<std::int64_t>(os, ds.steps());
    write_pod<std::int64_t>(os, ds.size());
    write_pod<std::int32_t>(os, ds.dim());
    write_pod<double>(os, ds.noise_fraction);
    write_pod<std::uint64_t>(os, ds.seed);
    for (const auto& tr : ds.trajectories) {
        write_pod<double>(os, tr.t0);
        // Row-major so the file reads as consecutive states.
        for (int r = 0; r < tr.states.rows(); ++r) {
            os.write(reinterpret_cast<const char*>(tr.states.row(r).eval().data()),
                     static_cast<std::streamsize>(sizeof(double) * tr.states.cols()));
        }
    }
    if (!os) throw LoadError(LoadError::Kind::io, "write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError(LoadError::Kind::io, "cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw LoadError(LoadError::Kind::version_mismatch, "not a hits dataset file: " + path);

    Dataset ds;
    ds.system = read_string(is);
    ds.split_tag = split_from_string(read_string(is));
    const double dt = read_pod<double>(is);
    const auto p = read_pod<std::int64_t>(is);
    const auto n = read_pod<std::int64_t>(is);
    const auto dim = read_pod<std::int32_t>(is);
    ds.noise_fraction = read_pod<double>(is);
    ds.seed = read_pod<std::uint64_t>(is);
    if (p < 1 || n < 1 || dim < 1)
        throw LoadError(LoadError::Kind::inconsistent, "dataset header has non-positive sizes");

    ds.trajectories.resize(n);
    for (auto& tr : ds.trajectories) {
        tr.t0 = read_pod<double>(is);
        tr.dt = dt;
        tr.states.resize(p + 1, dim);
        for (int r = 0; r <= p; ++r) {
            for (int c = 0; c < dim; ++c) tr.states(r, c) = read_pod<double>(is);
        }
    }
    return ds;
}

}  // namespace hits
