#pragma once

#include <cstdint>

namespace quanta {

// Counter-based random source. Draw i of stream (seed, stream) is a pure
// function of (seed, stream, i), so sequences can be replayed or handed to
// parallel consumers without shared state. Identical (seed, stream) gives an
// identical sequence; distinct stream ids give independent sequences.
class Rng {
public:
    Rng() : Rng(0, 0) {}
    Rng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64();
    // uniform in [0, 1), 53-bit resolution
    double next_double();
    // uniform in [0, n), unbiased
    std::uint64_t next_below(std::uint64_t n);
    // gaussian via Box-Muller, mean 0 std 1
    double next_gaussian();

    // independent child stream; derived purely from the parent identity
    Rng split(std::uint64_t substream) const;

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    bool have_gauss_ = false;
    double spare_gauss_ = 0.0;
};

}  // namespace quanta
