#pragma once

#include "quanta/core.hpp"
#include "quanta/random.hpp"

namespace quanta {

struct SimConfig {
    double mean_rate = 0.0625;  // target photons / pixel / frame
    std::uint64_t seed = 0;
};

// q such that the rate map q * reference has the requested mean. Throws when
// the reference mean is not positive.
double rate_scale(const DenseVolume& reference, double mean_rate);

// Per-voxel Bernoulli draws with activation probability 1 - exp(-q * n_i),
// which is distributionally identical to Poisson sampling clipped at 1.
// Frame t draws from stream (seed, t), so results do not depend on threading.
BitVolume simulate_quanta(const DenseVolume& reference, const SimConfig& cfg);

// Built-in reference scene: a Gaussian blob orbiting over a static sine
// texture. Deterministic in its parameters; values are non-negative.
struct ToyConfig {
    Shape3 shape{128, 64, 64};
    double base = 0.05;        // uniform floor
    double texture_amp = 0.4;  // static pattern amplitude
    double blob_amp = 2.0;     // moving blob peak over the floor
    double blob_sigma = 5.0;   // blob radius, pixels
    double orbit_radius = 0.3; // fraction of the smaller spatial extent
    double period = 64.0;      // frames per revolution
};

DenseVolume toy_scene(const ToyConfig& cfg);

}  // namespace quanta
