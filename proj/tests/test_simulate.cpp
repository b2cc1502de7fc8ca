#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "quanta/simulate.hpp"
#include "quanta/stats.hpp"

using namespace quanta;

TEST_CASE("rate scale arithmetic") {
    DenseVolume ref(Shape3{1, 2, 2});
    for (std::int64_t i = 0; i < 4; ++i) ref[i] = 2.0f;
    CHECK(rate_scale(ref, 0.0625) == doctest::Approx(0.03125));

    for (std::int64_t i = 0; i < 4; ++i) ref[i] = 1.0f;
    CHECK(rate_scale(ref, 0.07) == doctest::Approx(0.07));

    DenseVolume zeros(Shape3{1, 2, 2});
    CHECK_THROWS_AS(rate_scale(zeros, 0.0625), std::invalid_argument);
}

TEST_CASE("scaled rate map hits the requested mean") {
    const ToyConfig toy{Shape3{8, 32, 32}, 0.05, 0.4, 2.0, 5.0, 0.3, 64.0};
    const DenseVolume ref = toy_scene(toy);
    const double q = rate_scale(ref, 0.0625);
    double mean = 0.0;
    for (std::int64_t i = 0; i < ref.volume(); ++i) mean += q * ref[i];
    mean /= static_cast<double>(ref.volume());
    CHECK(mean == doctest::Approx(0.0625).epsilon(1e-6));
}

TEST_CASE("simulate_quanta basics") {
    SUBCASE("negative reference is rejected") {
        DenseVolume bad(Shape3{1, 1, 2});
        bad[0] = -1.0f;
        bad[1] = 1.0f;
        CHECK_THROWS_AS(simulate_quanta(bad, SimConfig{0.05, 1}), std::invalid_argument);
    }

    SUBCASE("deterministic in (reference, config, seed)") {
        const DenseVolume ref = toy_scene(ToyConfig{Shape3{6, 16, 16}});
        const BitVolume a = simulate_quanta(ref, SimConfig{0.06, 42});
        const BitVolume b = simulate_quanta(ref, SimConfig{0.06, 42});
        const BitVolume c = simulate_quanta(ref, SimConfig{0.06, 43});
        CHECK(a.bytes() == b.bytes());
        CHECK(a.bytes() != c.bytes());
    }
}

TEST_CASE("constant rate map activates at 1 - exp(-lambda)") {
    const double lambda = 0.0625;
    const Shape3 s{64, 128, 128};  // ~1e6 voxels
    DenseVolume ref(s);
    for (std::int64_t i = 0; i < s.volume(); ++i) ref[i] = 1.0f;
    const BitVolume sim = simulate_quanta(ref, SimConfig{lambda, 7});
    const double p = activation_prob(lambda);
    const double rate = static_cast<double>(sim.popcount()) / static_cast<double>(s.volume());
    const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(s.volume()));
    CHECK(std::fabs(rate - p) < 3.0 * sigma);
    CHECK(p == doctest::Approx(0.060576).epsilon(1e-4));
}

TEST_CASE("non-constant rate maps activate strictly below 1 - exp(-mean)") {
    // Jensen: E[1 - exp(-q n_i)] < 1 - exp(-mean(q n_i)) for non-constant maps
    const double lambda_bar = 0.0625;
    DenseVolume ref(Shape3{64, 64, 64});
    for (std::int64_t i = 0; i < ref.volume(); ++i)
        ref[i] = (i % 4 == 0) ? 4.0f : 0.001f;  // high-contrast map widens the gap
    const double q = rate_scale(ref, lambda_bar);

    double expected_rate = 0.0;
    for (std::int64_t i = 0; i < ref.volume(); ++i)
        expected_rate += activation_prob(q * ref[i]);
    expected_rate /= static_cast<double>(ref.volume());
    const double upper = activation_prob(lambda_bar);
    CHECK(expected_rate < upper);

    const BitVolume sim = simulate_quanta(ref, SimConfig{lambda_bar, 11});
    const double rate = static_cast<double>(sim.popcount()) / static_cast<double>(ref.volume());
    const double sigma =
        std::sqrt(expected_rate * (1.0 - expected_rate) / static_cast<double>(ref.volume()));
    CHECK(std::fabs(rate - expected_rate) < 3.0 * sigma);
    // the empirical rate also sits below the constant-map bound
    CHECK(rate + 3.0 * sigma < upper);
}

TEST_CASE("toy scene is positive, finite, and actually moves") {
    const ToyConfig cfg{Shape3{16, 32, 32}};
    const DenseVolume v = toy_scene(cfg);
    CHECK(v.all_finite());
    for (std::int64_t i = 0; i < v.volume(); ++i) CHECK(v[i] > 0.0f);
    // the blob's orbit changes frames
    double diff = 0.0;
    for (std::int64_t i = 0; i < 32 * 32; ++i)
        diff += std::fabs(v[i] - v[8 * 32 * 32 + i]);
    CHECK(diff > 1.0);
}
