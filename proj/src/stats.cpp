#include "quanta/stats.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "quanta/simulate.hpp"

namespace quanta {

double TruncatedPoisson::p_zero() const { return std::exp(-lambda); }
double TruncatedPoisson::p_one() const { return activation_prob(lambda); }

double activation_prob(double lambda) {
    if (!(lambda >= 0.0))
        throw std::invalid_argument("activation_prob: lambda must be non-negative");
    // -expm1 keeps precision for small lambda
    return -std::expm1(-lambda);
}

ThinResult thin(const BitVolume& raw, double p, Rng& rng) {
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("thin: p must be in [0, 1]");
    ThinResult out{BitVolume(raw.shape()), BitVolume(raw.shape())};
    const auto& bytes = raw.bytes();
    for (std::size_t byte = 0; byte < bytes.size(); ++byte) {
        std::uint8_t b = bytes[byte];
        while (b) {
            const int bit = std::countr_zero(b);
            b = static_cast<std::uint8_t>(b & (b - 1));
            const std::int64_t i = static_cast<std::int64_t>(byte) * 8 + bit;
            if (rng.next_double() < p)
                out.input.set_linear(i, 1);
            else
                out.target.set_linear(i, 1);
        }
    }
    return out;
}

DenseVolume superpose(std::span<const BitVolume> stack) {
    if (stack.empty()) throw std::invalid_argument("superpose: empty stack");
    const Shape3 shape = stack.front().shape();
    for (const auto& v : stack)
        if (!(v.shape() == shape))
            throw std::invalid_argument("superpose: shape mismatch");
    DenseVolume out(shape);
    const std::int64_t n = shape.volume();
    for (const auto& v : stack)
        for (std::int64_t i = 0; i < n; ++i)
            if (v.get_linear(i)) out[i] += 1.0f;
    return out;
}

DenseVolume bin_temporal(const BitVolume& v, std::int64_t window) {
    if (window < 1) throw std::invalid_argument("bin_temporal: window must be >= 1");
    const Shape3 in = v.shape();
    const std::int64_t t_out = in.t / window;
    if (t_out < 1) throw std::invalid_argument("bin_temporal: window larger than stack");
    DenseVolume out(Shape3{t_out, in.h, in.w});
    const std::int64_t frame = in.h * in.w;
    for (std::int64_t to = 0; to < t_out; ++to)
        for (std::int64_t k = 0; k < window; ++k) {
            const std::int64_t base = (to * window + k) * frame;
            for (std::int64_t j = 0; j < frame; ++j)
                if (v.get_linear(base + j)) out[to * frame + j] += 1.0f;
        }
    return out;
}

int poisson_draw(double lambda, Rng& rng) {
    // inversion by sequential search; fine for the small lambdas used here
    if (!(lambda >= 0.0)) throw std::invalid_argument("poisson_draw: lambda < 0");
    const double u = rng.next_double();
    double p = std::exp(-lambda);
    double cdf = p;
    int k = 0;
    while (u >= cdf && k < 1000) {
        ++k;
        p *= lambda / k;
        cdf += p;
    }
    return k;
}

// ---------------------------------------------------------------------------

namespace {

std::string format(const char* fmt, double a, double b, double c) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), fmt, a, b, c);
    return buf;
}

// |k/n - p| within 3 sigma of Binomial(n, p)
bool binomial_ci(std::int64_t k, std::int64_t n, double p, double sigmas, double* z_out) {
    const double sd = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    const double z = (static_cast<double>(k) / static_cast<double>(n) - p) / sd;
    if (z_out) *z_out = z;
    return std::fabs(z) <= sigmas;
}

CheckResult check_partition(const BatteryConfig& cfg) {
    Rng shape_rng(cfg.seed, 101);
    Rng fill_rng(cfg.seed, 102);
    Rng thin_rng(cfg.seed, 103);
    for (int it = 0; it < cfg.partition_volumes; ++it) {
        const Shape3 s{1 + static_cast<std::int64_t>(shape_rng.next_below(4)),
                       1 + static_cast<std::int64_t>(shape_rng.next_below(12)),
                       1 + static_cast<std::int64_t>(shape_rng.next_below(12))};
        BitVolume raw(s);
        const std::int64_t n = s.volume();
        for (std::int64_t i = 0; i < n; ++i)
            if (fill_rng.next_double() < 0.3) raw.set_linear(i, 1);
        const double p = thin_rng.next_double();
        const ThinResult r = thin(raw, p, thin_rng);
        for (std::int64_t i = 0; i < n; ++i) {
            const int a = r.input.get_linear(i);
            const int b = r.target.get_linear(i);
            if ((a & b) != 0 || (a | b) != raw.get_linear(i))
                return {"thinning partition (input AND target = 0, input OR target = raw)",
                        false, "violated at volume " + std::to_string(it)};
        }
        if (r.input.popcount() + r.target.popcount() != raw.popcount())
            return {"thinning partition (input AND target = 0, input OR target = raw)",
                    false, "popcount mismatch at volume " + std::to_string(it)};
    }
    return {"thinning partition (input AND target = 0, input OR target = raw)", true,
            std::to_string(cfg.partition_volumes) + " random volumes"};
}

CheckResult check_activation_rate(const BatteryConfig& cfg, double lambda, int idx) {
    // production path: a constant rate map through the simulator
    const std::int64_t frame = 1024;
    const std::int64_t frames = (cfg.activation_draws + frame - 1) / frame;
    DenseVolume ref(Shape3{frames, 32, 32});
    for (std::int64_t i = 0; i < ref.volume(); ++i) ref[i] = 1.0f;
    const BitVolume sim = simulate_quanta(ref, SimConfig{lambda, cfg.seed + static_cast<std::uint64_t>(idx)});
    const double p = activation_prob(lambda);
    const std::int64_t draws = ref.volume();
    const std::int64_t ones = sim.popcount();
    double z = 0.0;
    const bool ok = binomial_ci(ones, draws, p, 3.0, &z);
    return {format("activation rate at lambda=%.4g within 3 sigma of 1-exp(-lambda)", lambda, 0, 0),
            ok, format("empirical %.6f expected %.6f z=%.2f",
                       static_cast<double>(ones) / static_cast<double>(draws), p, z)};
}

CheckResult check_thin_marginal(const BatteryConfig& cfg) {
    // over raw=1 voxels the input marginal is Bernoulli(p)
    const double p = 0.37;
    Rng rng(cfg.seed, 300);
    const Shape3 s{16, 64, 64};
    BitVolume raw(s);
    const std::int64_t n = s.volume();
    for (std::int64_t i = 0; i < n; ++i) raw.set_linear(i, 1);
    std::int64_t kept = 0, total = 0;
    const int repeats = 16;
    for (int rep = 0; rep < repeats; ++rep) {
        const ThinResult r = thin(raw, p, rng);
        kept += r.input.popcount();
        total += n;
    }
    double z = 0.0;
    const bool ok = binomial_ci(kept, total, p, 3.0, &z);
    return {"thinned marginal P(input=1 | raw=1) converges to p", ok,
            format("empirical %.6f expected %.6f z=%.2f",
                   static_cast<double>(kept) / static_cast<double>(total), p, z)};
}

CheckResult check_anticorrelation(const BatteryConfig& cfg) {
    // over raw=1 voxels, input and target are complementary bits, so their
    // correlation is exactly -1
    Rng rng(cfg.seed, 400);
    const Shape3 s{8, 32, 32};
    BitVolume raw(s);
    const std::int64_t n = s.volume();
    Rng fill(cfg.seed, 401);
    for (std::int64_t i = 0; i < n; ++i)
        if (fill.next_double() < 0.5) raw.set_linear(i, 1);
    const ThinResult r = thin(raw, 0.5, rng);
    double sum_a = 0, sum_b = 0, sum_ab = 0, sum_a2 = 0, sum_b2 = 0, m = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        if (!raw.get_linear(i)) continue;
        const double a = r.input.get_linear(i);
        const double b = r.target.get_linear(i);
        sum_a += a;
        sum_b += b;
        sum_ab += a * b;
        sum_a2 += a * a;
        sum_b2 += b * b;
        m += 1;
    }
    const double cov = sum_ab / m - (sum_a / m) * (sum_b / m);
    const double va = sum_a2 / m - (sum_a / m) * (sum_a / m);
    const double vb = sum_b2 / m - (sum_b / m) * (sum_b / m);
    const double corr = cov / std::sqrt(va * vb);
    const bool ok = std::fabs(corr + 1.0) < 1e-12;
    return {"splitting pairs are deterministically anti-correlated over raw=1 (corr = -1)", ok,
            format("corr=%.15f over %.0f events", corr, m, 0)};
}

CheckResult check_bernoulli_poisson_equivalence(const BatteryConfig& cfg, double lambda) {
    // Oracle route: Poisson(lambda) draws clipped at 1. Under H0 the success
    // count is Binomial(n, 1-exp(-lambda)); a two-sided test at alpha must
    // not reject. The production route is checked by the activation-rate
    // checks above against the same parameter.
    Rng rng(cfg.seed, 500);
    const double p = activation_prob(lambda);
    std::int64_t ones = 0;
    for (std::int64_t i = 0; i < cfg.equivalence_draws; ++i)
        if (poisson_draw(lambda, rng) >= 1) ++ones;
    const double sd = std::sqrt(p * (1.0 - p) * static_cast<double>(cfg.equivalence_draws));
    const double z = (static_cast<double>(ones) - p * static_cast<double>(cfg.equivalence_draws)) / sd;
    // two-sided critical value for alpha = 0.01
    const double crit = 2.5758293035489;
    (void)cfg.equivalence_alpha;
    const bool ok = std::fabs(z) <= crit;
    return {"Bernoulli(1-exp(-lambda)) equals Poisson-then-clip (binomial test, alpha=0.01)", ok,
            format("lambda=%.4g z=%.3f crit=%.3f", lambda, z, crit)};
}

}  // namespace

std::vector<CheckResult> run_stats_battery(const BatteryConfig& cfg) {
    std::vector<CheckResult> out;
    out.push_back(check_partition(cfg));
    int idx = 0;
    for (const double lambda : cfg.lambdas)
        out.push_back(check_activation_rate(cfg, lambda, idx++));
    out.push_back(check_thin_marginal(cfg));
    out.push_back(check_anticorrelation(cfg));
    out.push_back(check_bernoulli_poisson_equivalence(cfg, 0.0625));
    return out;
}

}  // namespace quanta
