#pragma once

#include <span>
#include <string>
#include <vector>

#include "quanta/core.hpp"
#include "quanta/random.hpp"

namespace quanta {

// Detector model for one exposure window: photon arrivals are Poisson(lambda)
// but only the indicator k>=1 is recorded, so the voxel is Bernoulli with
// activation probability 1 - exp(-lambda).
struct TruncatedPoisson {
    double lambda = 0.0;
    double p_zero() const;
    double p_one() const;
};

// P(k >= 1 | lambda) = 1 - exp(-lambda). Throws for negative lambda.
double activation_prob(double lambda);

struct ThinResult {
    BitVolume input;
    BitVolume target;
};

// p-thinning of the photon events: every 1-voxel is routed to `input` with
// probability p, else to `target`; 0-voxels stay 0 on both sides and consume
// no randomness. Draw order is linear voxel order.
ThinResult thin(const BitVolume& raw, double p, Rng& rng);

// voxel-wise event count across equally shaped volumes
DenseVolume superpose(std::span<const BitVolume> stack);

// Sum every `window` consecutive frames; a trailing partial window is
// dropped. The counts are binomial, not Poisson.
DenseVolume bin_temporal(const BitVolume& v, std::int64_t window);

// ---------------------------------------------------------------------------
// Statistical self-test battery (also driven by the `stats-check` CLI).
// Each check validates one distributional claim of the photon model against
// an oracle that does not share code with the implementation under test.

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct BatteryConfig {
    std::uint64_t seed = 1;
    // partition invariant sweep
    int partition_volumes = 10000;
    // per-lambda activation rate checks
    std::vector<double> lambdas = {0.01, 0.0625, 0.5};
    std::int64_t activation_draws = 1'000'000;
    // Bernoulli vs Poisson-then-clip equivalence
    std::int64_t equivalence_draws = 1'000'000;
    double equivalence_alpha = 0.01;
};

std::vector<CheckResult> run_stats_battery(const BatteryConfig& cfg);

// Reference Poisson sampler (inversion by sequential search). Used only as
// the oracle side of the equivalence checks.
int poisson_draw(double lambda, Rng& rng);

}  // namespace quanta
