#include "quanta/simulate.hpp"

#include <cmath>
#include <stdexcept>

#include "quanta/parallel.hpp"
#include "quanta/stats.hpp"

namespace quanta {

double rate_scale(const DenseVolume& reference, double mean_rate) {
    if (!(mean_rate > 0.0)) throw std::invalid_argument("rate_scale: mean rate must be > 0");
    const double m = reference.mean();
    if (!(m > 0.0)) throw std::invalid_argument("rate_scale: reference mean must be > 0");
    return mean_rate / m;
}

BitVolume simulate_quanta(const DenseVolume& reference, const SimConfig& cfg) {
    const std::int64_t n = reference.volume();
    for (std::int64_t i = 0; i < n; ++i)
        if (!(reference[i] >= 0.0f))
            throw std::invalid_argument("simulate_quanta: negative or non-finite reference value");
    const double q = rate_scale(reference, cfg.mean_rate);

    const Shape3 s = reference.shape();
    const std::int64_t frame = s.h * s.w;
    // one stream per frame, so the draw for a voxel does not depend on how
    // frames are distributed over threads; bit packing happens afterwards
    // because frames can share a byte
    std::vector<std::uint8_t> hits(static_cast<std::size_t>(n), 0);
    parallel_for(0, s.t, [&](std::int64_t t_lo, std::int64_t t_hi) {
        for (std::int64_t t = t_lo; t < t_hi; ++t) {
            Rng rng(cfg.seed, static_cast<std::uint64_t>(t));
            for (std::int64_t j = 0; j < frame; ++j) {
                const std::int64_t i = t * frame + j;
                const double p = activation_prob(q * reference[i]);
                hits[static_cast<std::size_t>(i)] = rng.next_double() < p ? 1 : 0;
            }
        }
    });
    BitVolume out(s);
    for (std::int64_t i = 0; i < n; ++i)
        if (hits[static_cast<std::size_t>(i)]) out.set_linear(i, 1);
    return out;
}

DenseVolume toy_scene(const ToyConfig& cfg) {
    validate_shape(cfg.shape);
    const Shape3 s = cfg.shape;
    DenseVolume out(s);
    const double cy = 0.5 * static_cast<double>(s.h - 1);
    const double cx = 0.5 * static_cast<double>(s.w - 1);
    const double radius = cfg.orbit_radius * static_cast<double>(std::min(s.h, s.w));
    const double inv2s2 = 1.0 / (2.0 * cfg.blob_sigma * cfg.blob_sigma);
    const double tau = 6.283185307179586476925286766559;
    for (std::int64_t t = 0; t < s.t; ++t) {
        const double phase = tau * static_cast<double>(t) / cfg.period;
        const double by = cy + radius * std::sin(phase);
        const double bx = cx + radius * std::cos(phase);
        for (std::int64_t y = 0; y < s.h; ++y)
            for (std::int64_t x = 0; x < s.w; ++x) {
                const double tex =
                    0.5 * (1.0 + std::sin(tau * 3.0 * y / s.h) * std::sin(tau * 3.0 * x / s.w));
                const double dy = static_cast<double>(y) - by;
                const double dx = static_cast<double>(x) - bx;
                const double blob = std::exp(-(dy * dy + dx * dx) * inv2s2);
                out.at(t, y, x) =
                    static_cast<float>(cfg.base + cfg.texture_amp * tex + cfg.blob_amp * blob);
            }
    }
    return out;
}

}  // namespace quanta
