#ifndef HITS_DATASET_HPP
#define HITS_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hits/dynamics.hpp"
#include "hits/types.hpp"

namespace hits {

enum class Split { train, validate, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

/// A set of uniformly sampled trajectories of one system, all sharing dt and
/// state dimension.
struct Dataset {
    std::string system;
    std::vector<Trajectory> trajectories;
    double noise_fraction = 0.0;
    std::uint64_t seed = 0;
    Split split_tag = Split::train;

    int size() const { return static_cast<int>(trajectories.size()); }
    double dt() const { return trajectories.empty() ? 0.0 : trajectories.front().dt; }
    int dim() const { return trajectories.empty() ? 0 : trajectories.front().dim(); }
    int steps() const { return trajectories.empty() ? 0 : trajectories.front().steps(); }
};

/// Restricts initial-condition sampling beyond the axis box.
enum class RegionConstraint {
    none,
    unit_disk,  // keep samples with |x|^2 <= 1 (rejection sampling)
};

/// n i.i.d. uniform samples from the box (optionally constrained), one per
/// row. Substream k of `seed` drives sample k, so the result is independent
/// of evaluation order. Throws std::invalid_argument for a box with
/// lower > upper (degenerate lower == upper axes pin that coordinate).
Mat sample_initial_conditions(const Box& region, int n, std::uint64_t seed,
                              RegionConstraint constraint = RegionConstraint::none);

/// Simulates n trajectories of p steps at step dt from uniformly sampled
/// initial conditions. burn_in > 0 first advances each sample by that much
/// model time and starts the recorded trajectory from the burned-in state.
/// A divergence error names the trajectory index.
Dataset build_dataset(const SystemSpec& system, const Box& region, double dt, int p, int n,
                      std::uint64_t seed, Split split = Split::train, double burn_in = 0.0,
                      RegionConstraint constraint = RegionConstraint::none);

/// Keeps every s-th state of every trajectory: new dt = dt*s, new p =
/// floor(p/s). States are copied, never re-simulated.
Dataset stride(const Dataset& ds, int s);

/// Adds independent zero-mean Gaussian noise to every state component, with
/// per-component variance = fraction * (empirical variance of that component
/// over all states of all trajectories). fraction == 0 returns the dataset
/// bitwise-unchanged. One substream per trajectory.
Dataset add_noise(const Dataset& ds, double fraction, std::uint64_t seed);

/// Binary persistence; round-trips bitwise. Layout documented in
/// docs/formats.md.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace hits

#endif
