#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "quanta/sampler.hpp"
#include "quanta/stats.hpp"

using namespace quanta;

namespace {

BitVolume random_bits(const Shape3& s, double density, Rng& rng) {
    BitVolume v(s);
    for (std::int64_t i = 0; i < s.volume(); ++i)
        if (rng.next_double() < density) v.set_linear(i, 1);
    return v;
}

void check_triple(const SplitTriple& t, const BitVolume& data, const CropSpec& c) {
    const BitVolume raw = crop(data, c);
    const std::int64_t n = raw.volume();
    for (std::int64_t i = 0; i < n; ++i) {
        const int in = t.input.get_linear(i);
        const int tar = t.target.get_linear(i);
        CHECK((in & tar) == 0);
        CHECK((in | tar) == raw.get_linear(i));
        CHECK(t.mask.get_linear(i) == 1 - in);
    }
    CHECK(t.input.popcount() + t.target.popcount() == raw.popcount());
    CHECK(t.mask.popcount() == n - t.input.popcount());
}

}  // namespace

TEST_CASE("draw_p") {
    Rng rng(1, 0);

    SamplerConfig fixed;
    fixed.p_mode = PMode::fixed;
    fixed.p_max = 0.5;
    for (int i = 0; i < 10; ++i) CHECK(draw_p(fixed, rng) == 0.5);

    SamplerConfig uni;
    uni.p_min = 0.0;
    uni.p_max = 1.0;
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double p = draw_p(uni, rng);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        sum += p;
    }
    CHECK(std::fabs(sum / n - 0.5) < 3.0 * std::sqrt(1.0 / 12.0 / n));

    // default range mirrors the near-one upper bound
    const SamplerConfig def;
    CHECK(def.p_max == doctest::Approx(1.0 - 1e-6));
    CHECK(def.p_min == 0.0);

    SamplerConfig bad;
    bad.p_min = 0.7;
    bad.p_max = 0.3;
    CHECK_THROWS_AS(draw_p(bad, rng), std::invalid_argument);
}

TEST_CASE("sample_triple endpoints") {
    Rng rng(5, 0);
    const BitVolume data = random_bits(Shape3{8, 16, 16}, 0.3, rng);
    SamplerConfig cfg;
    cfg.crop = Shape3{4, 8, 8};
    cfg.p_mode = PMode::fixed;

    SUBCASE("p = 1 sends everything to the input") {
        cfg.p_max = 1.0;
        const SampleOut s = sample_triple(data, cfg, rng);
        const BitVolume raw = crop(data, s.crop);
        CHECK(s.triple.input.bytes() == raw.bytes());
        CHECK(s.triple.target.popcount() == 0);
        CHECK(s.triple.mask.popcount() == raw.volume() - raw.popcount());
    }

    SUBCASE("p = 0 sends everything to the target") {
        cfg.p_max = 0.0;
        cfg.p_min = 0.0;
        const SampleOut s = sample_triple(data, cfg, rng);
        const BitVolume raw = crop(data, s.crop);
        CHECK(s.triple.input.popcount() == 0);
        CHECK(s.triple.target.bytes() == raw.bytes());
        CHECK(s.triple.mask.popcount() == raw.volume());
    }

    SUBCASE("crop larger than data is rejected") {
        cfg.crop = Shape3{16, 16, 16};
        CHECK_THROWS_AS(sample_triple(data, cfg, rng), std::invalid_argument);
    }
}

TEST_CASE("triples always satisfy the split invariants") {
    Rng rng(6, 0);
    const BitVolume data = random_bits(Shape3{10, 20, 20}, 0.4, rng);
    SamplerConfig cfg;
    cfg.crop = Shape3{4, 8, 8};
    for (int it = 0; it < 50; ++it) {
        const SampleOut s = sample_triple(data, cfg, rng);
        CHECK(crop_in_bounds(data.shape(), s.crop));
        CHECK(s.p >= cfg.p_min);
        CHECK(s.p <= cfg.p_max);
        check_triple(s.triple, data, s.crop);
    }
}

TEST_CASE("marginal rates follow p at a fixed split probability") {
    // constant-density data at rate rho split at p: input rate ~ p*rho,
    // target rate ~ (1-p)*rho
    Rng rng(17, 0);
    const double rho = 0.3, p = 0.7;
    const BitVolume data = random_bits(Shape3{16, 64, 64}, rho, rng);
    SamplerConfig cfg;
    cfg.crop = Shape3{8, 32, 32};
    cfg.p_mode = PMode::fixed;
    cfg.p_max = p;

    double in_count = 0, tar_count = 0, voxels = 0;
    for (int it = 0; it < 60; ++it) {
        const SampleOut s = sample_triple(data, cfg, rng);
        in_count += static_cast<double>(s.triple.input.popcount());
        tar_count += static_cast<double>(s.triple.target.popcount());
        voxels += static_cast<double>(cfg.crop.volume());
    }
    const double sigma_in = std::sqrt(p * rho * (1 - p * rho) / voxels);
    CHECK(std::fabs(in_count / voxels - p * rho) < 4.0 * sigma_in);
    const double q = (1 - p) * rho;
    const double sigma_tar = std::sqrt(q * (1 - q) / voxels);
    CHECK(std::fabs(tar_count / voxels - q) < 4.0 * sigma_tar);
}

TEST_CASE("resampling the same crop gives fresh splits") {
    Rng rng(23, 0);
    const BitVolume data = random_bits(Shape3{8, 32, 32}, 0.5, rng);
    SamplerConfig cfg;
    cfg.crop = Shape3{8, 32, 32};  // pin the crop position: only one origin
    cfg.p_mode = PMode::fixed;
    cfg.p_max = 0.5;
    const SampleOut a = sample_triple(data, cfg, rng);
    const SampleOut b = sample_triple(data, cfg, rng);
    CHECK(a.crop.t0 == b.crop.t0);
    CHECK(a.triple.input.bytes() != b.triple.input.bytes());
    // both are valid partitions of the same raw crop
    check_triple(a.triple, data, a.crop);
    check_triple(b.triple, data, b.crop);
}

TEST_CASE("augmentation preserves the triple invariants") {
    Rng rng(29, 0);
    const BitVolume data = random_bits(Shape3{6, 12, 12}, 0.4, rng);
    SamplerConfig cfg;
    cfg.crop = Shape3{3, 8, 8};
    cfg.augment_flip_transpose = true;
    const SampleOut s = sample_triple(data, cfg, rng);

    SUBCASE("identity op changes nothing") {
        const SplitTriple t = apply_flip_transpose(s.triple, kAugNone);
        CHECK(t.input.bytes() == s.triple.input.bytes());
        CHECK(t.mask.bytes() == s.triple.mask.bytes());
    }

    SUBCASE("flips are involutions") {
        for (const unsigned op : {unsigned(kAugFlipY), unsigned(kAugFlipX),
                                  kAugFlipY | kAugFlipX}) {
            const SplitTriple once = apply_flip_transpose(s.triple, op);
            const SplitTriple twice = apply_flip_transpose(once, op);
            CHECK(twice.input.bytes() == s.triple.input.bytes());
            CHECK(twice.target.bytes() == s.triple.target.bytes());
            CHECK(twice.mask.bytes() == s.triple.mask.bytes());
        }
    }

    SUBCASE("augmented triples still partition their raw crop") {
        for (int it = 0; it < 10; ++it) {
            const SplitTriple t = augment(s.triple, cfg, rng);
            const std::int64_t n = t.input.volume();
            for (std::int64_t i = 0; i < n; ++i) {
                CHECK((t.input.get_linear(i) & t.target.get_linear(i)) == 0);
                CHECK(t.mask.get_linear(i) == 1 - t.input.get_linear(i));
            }
            CHECK(t.input.popcount() == s.triple.input.popcount());
            CHECK(t.target.popcount() == s.triple.target.popcount());
        }
    }

    SUBCASE("transpose requires square spatial dims") {
        SamplerConfig rect = cfg;
        rect.crop = Shape3{3, 4, 8};
        Rng r2(31, 0);
        const SampleOut sr = sample_triple(data, rect, r2);
        CHECK_THROWS_AS(apply_flip_transpose(sr.triple, kAugTranspose), std::invalid_argument);
        // the random path never draws transpose for rectangular crops
        for (int it = 0; it < 20; ++it) CHECK_NOTHROW(augment(sr.triple, rect, r2));
    }
}
