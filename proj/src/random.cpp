#include "quanta/random.hpp"

#include <cmath>

namespace quanta {
namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

// 64-bit finalizer (murmur3 variant); full avalanche
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 33;
    z *= 0xff51afd7ed558ccdULL;
    z ^= z >> 33;
    z *= 0xc4ceb9fe1a85ec53ULL;
    z ^= z >> 33;
    return z;
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix64(seed + kGamma) ^ mix64(stream * kGamma + 1)) {}

std::uint64_t Rng::next_u64() { return mix64(key_ + (++counter_) * kGamma); }

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::next_below(std::uint64_t n) {
    // rejection sampling kills modulo bias
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

double Rng::next_gaussian() {
    if (have_gauss_) {
        have_gauss_ = false;
        return spare_gauss_;
    }
    double u1 = next_double();
    const double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_gauss_ = r * std::sin(a);
    have_gauss_ = true;
    return r * std::cos(a);
}

Rng Rng::split(std::uint64_t substream) const {
    Rng child;
    child.seed_ = seed_;
    child.stream_ = stream_;
    child.key_ = mix64(key_ ^ mix64(substream + kGamma));
    return child;
}

}  // namespace quanta
