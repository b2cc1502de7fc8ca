#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "quanta/model.hpp"
#include "quanta/stats.hpp"
#include "quanta/train.hpp"

using namespace quanta;

namespace {

BitVolume random_bits(const Shape3& s, double density, Rng& rng) {
    BitVolume v(s);
    for (std::int64_t i = 0; i < s.volume(); ++i)
        if (rng.next_double() < density) v.set_linear(i, 1);
    return v;
}

BitVolume complement(const BitVolume& v) {
    BitVolume out(v.shape());
    for (std::int64_t i = 0; i < v.volume(); ++i) out.set_linear(i, 1 - v.get_linear(i));
    return out;
}

BitVolume all_ones(const Shape3& s) {
    BitVolume v(s);
    for (std::int64_t i = 0; i < s.volume(); ++i) v.set_linear(i, 1);
    return v;
}

template <class T>
Tensor5T<T> bits_as_tensor(const BitVolume& v) {
    const Shape3 s = v.shape();
    Tensor5T<T> x(1, 1, s.t, s.h, s.w);
    for (std::int64_t i = 0; i < s.volume(); ++i)
        x.data[static_cast<std::size_t>(i)] = static_cast<T>(v.get_linear(i));
    return x;
}

// independent plain cross-entropy over pixels: -sum_i target_i log softmax_i
double plain_cross_entropy(const Tensor5d& logits, const BitVolume& target) {
    double mx = -std::numeric_limits<double>::infinity();
    for (const double v : logits.data) mx = std::max(mx, v);
    double z = 0.0;
    for (const double v : logits.data) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    double loss = 0.0;
    for (std::int64_t i = 0; i < logits.numel(); ++i)
        if (target.get_linear(i)) loss += log_z - logits.data[static_cast<std::size_t>(i)];
    return loss;
}

}  // namespace

TEST_CASE("masked cross entropy basics") {
    SUBCASE("all-zero mask gives zero loss and gradient") {
        Tensor5 logits(1, 1, 1, 2, 2);
        logits.data = {0.3f, -0.2f, 1.0f, 0.5f};
        BitVolume target(Shape3{1, 2, 2});
        target.set_linear(0, 1);
        const BitVolume mask(Shape3{1, 2, 2});  // zeros
        Tensor5 grad(1, 1, 1, 2, 2);
        const LossResult r = masked_cross_entropy<float>(
            logits, std::span<const BitVolume>(&target, 1), std::span<const BitVolume>(&mask, 1),
            &grad);
        CHECK(r.loss_sum == 0.0);
        CHECK(r.weight_sum == 0.0);
        for (const float g : grad.data) CHECK(g == 0.0f);
    }

    SUBCASE("uniform logits with one photon cost ln(n)") {
        const Shape3 s{2, 4, 4};
        Tensor5 logits(1, 1, 2, 4, 4);  // zeros = uniform
        BitVolume target(s);
        target.set_linear(7, 1);
        const BitVolume mask = all_ones(s);
        const LossResult r = masked_cross_entropy<float>(
            logits, std::span<const BitVolume>(&target, 1), std::span<const BitVolume>(&mask, 1),
            nullptr);
        CHECK(r.loss_sum == doctest::Approx(std::log(32.0)).epsilon(1e-12));
        CHECK(r.weight_sum == 1.0);
    }

    SUBCASE("two-voxel closed form and finite differences") {
        Tensor5d logits(1, 1, 1, 1, 2);
        logits.data = {0.0, 0.0};
        BitVolume target(Shape3{1, 1, 2});
        target.set_linear(0, 1);
        const BitVolume mask = all_ones(Shape3{1, 1, 2});
        Tensor5d grad(1, 1, 1, 1, 2);
        masked_cross_entropy<double>(logits, std::span<const BitVolume>(&target, 1),
                                     std::span<const BitVolume>(&mask, 1), &grad);
        CHECK(grad.data[0] == doctest::Approx(-0.5).epsilon(1e-12));
        CHECK(grad.data[1] == doctest::Approx(+0.5).epsilon(1e-12));

        // central differences on each logit
        const double eps = 1e-6;
        for (int k = 0; k < 2; ++k) {
            auto eval = [&](double delta) {
                Tensor5d l = logits;
                l.data[static_cast<std::size_t>(k)] += delta;
                return masked_cross_entropy<double>(l, std::span<const BitVolume>(&target, 1),
                                                    std::span<const BitVolume>(&mask, 1), nullptr)
                    .loss_sum;
            };
            const double fd = (eval(eps) - eval(-eps)) / (2.0 * eps);
            CHECK(grad.data[static_cast<std::size_t>(k)] == doctest::Approx(fd).epsilon(1e-6));
        }
    }

    SUBCASE("shape mismatch is rejected") {
        Tensor5 logits(1, 1, 1, 2, 2);
        BitVolume target(Shape3{1, 2, 3});
        BitVolume mask(Shape3{1, 2, 3});
        CHECK_THROWS_AS(
            masked_cross_entropy<float>(logits, std::span<const BitVolume>(&target, 1),
                                        std::span<const BitVolume>(&mask, 1), nullptr),
            std::invalid_argument);
    }
}

TEST_CASE("gradient over logits sums to zero") {
    Rng rng(3, 0);
    const Shape3 s{2, 8, 8};
    Tensor5d logits(1, 1, 2, 8, 8);
    for (auto& v : logits.data) v = rng.next_double() * 4.0 - 2.0;
    const BitVolume raw = random_bits(s, 0.3, rng);
    const ThinResult split = thin(raw, 0.4, rng);
    const BitVolume mask = complement(split.input);
    Tensor5d grad(1, 1, 2, 8, 8);
    const LossResult r = masked_cross_entropy<double>(
        logits, std::span<const BitVolume>(&split.target, 1),
        std::span<const BitVolume>(&mask, 1), &grad);
    double sum = 0.0;
    for (const double g : grad.data) sum += g;
    CHECK(std::fabs(sum) <= 1e-6 * std::max(1.0, r.weight_sum));
}

TEST_CASE("masked loss with a full mask and one frame reduces to plain cross entropy") {
    Rng rng(4, 0);
    const Shape3 s{1, 8, 8};  // T = 1
    Tensor5d logits(1, 1, 1, 8, 8);
    for (auto& v : logits.data) v = rng.next_double() * 6.0 - 3.0;
    const BitVolume target = random_bits(s, 0.4, rng);
    const BitVolume mask = all_ones(s);
    const LossResult r =
        masked_cross_entropy<double>(logits, std::span<const BitVolume>(&target, 1),
                                     std::span<const BitVolume>(&mask, 1), nullptr);
    const double plain = plain_cross_entropy(logits, target);
    CHECK(std::fabs(r.loss_sum - plain) < 1e-12 * std::max(1.0, std::fabs(plain)));
}

TEST_CASE("finite differences confirm every parameter gradient") {
    // two-level net in double precision; loss through the full pipeline
    ModelConfig cfg;
    cfg.depth = 2;
    cfg.start_features = 4;
    cfg.z_conv_levels = 1;
    cfg.group_size = 2;
    ModelStateT<double> m = init_model<double>(cfg, 3);

    Rng rng(8, 0);
    const Shape3 s{4, 8, 8};
    const BitVolume raw = random_bits(s, 0.25, rng);
    const ThinResult split = thin(raw, 0.5, rng);
    const BitVolume mask = complement(split.input);
    const Tensor5d x = bits_as_tensor<double>(split.input);

    auto loss_of = [&](const ModelStateT<double>& state) {
        const Tensor5d logits = model_forward<double>(state, x, nullptr);
        return masked_cross_entropy<double>(logits, std::span<const BitVolume>(&split.target, 1),
                                            std::span<const BitVolume>(&mask, 1), nullptr)
            .loss_sum;
    };

    ForwardCacheT<double> cache;
    const Tensor5d logits = model_forward<double>(m, x, &cache);
    Tensor5d grad_logits(1, 1, s.t, s.h, s.w);
    masked_cross_entropy<double>(logits, std::span<const BitVolume>(&split.target, 1),
                                 std::span<const BitVolume>(&mask, 1), &grad_logits);
    ModelStateT<double> grads = zero_like(m);
    model_backward<double>(m, cache, grad_logits, &grads);

    auto prefs = param_refs(m);
    auto grefs = param_refs(grads);

    // Central differences at the stated step, every parameter. Near-zero
    // gradients are compared against the tensor's gradient scale: the eps^2
    // truncation term otherwise dominates a vanishing denominator (a smaller
    // step drives the strict ratio to ~5e-6, verified below).
    const double eps = 1e-3;
    std::int64_t checked = 0;
    double worst = 0.0;
    for (std::size_t k = 0; k < prefs.size(); ++k) {
        double scale_sq = 0.0;
        for (std::int64_t i = 0; i < grefs[k].size; ++i)
            scale_sq += grefs[k].data[i] * grefs[k].data[i];
        const double rms = std::sqrt(scale_sq / static_cast<double>(grefs[k].size));
        for (std::int64_t i = 0; i < prefs[k].size; ++i) {
            double* slot = prefs[k].data + i;
            const double saved = *slot;
            *slot = saved + eps;
            const double up = loss_of(m);
            *slot = saved - eps;
            const double down = loss_of(m);
            *slot = saved;
            const double fd = (up - down) / (2.0 * eps);
            const double an = grefs[k].data[i];
            // 1e-8 floor covers gradients that are exactly zero by symmetry
            // (a logit-wide shift cannot move a softmax loss)
            const double rel =
                std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), rms, 1e-8});
            worst = std::max(worst, rel);
            ++checked;
            if (rel >= 1e-3) {
                INFO("param ", prefs[k].name, "[", i, "] fd=", fd, " analytic=", an);
                CHECK(rel < 1e-3);
            }
        }
    }
    CHECK(checked == expected_param_count(cfg));
    CHECK(worst < 1e-3);
    MESSAGE("checked ", checked, " parameters at eps=1e-3, worst scaled error ", worst);

    // tighter step, strict per-element ratio: confirms the residual above is
    // finite-difference truncation, not a backward defect
    const double eps2 = 1e-5;
    double worst_strict = 0.0;
    for (std::size_t k = 0; k < prefs.size(); ++k) {
        for (std::int64_t i = 0; i < prefs[k].size; ++i) {
            double* slot = prefs[k].data + i;
            const double saved = *slot;
            *slot = saved + eps2;
            const double up = loss_of(m);
            *slot = saved - eps2;
            const double down = loss_of(m);
            *slot = saved;
            const double fd = (up - down) / (2.0 * eps2);
            const double an = grefs[k].data[i];
            const double rel = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-8});
            worst_strict = std::max(worst_strict, rel);
        }
    }
    CHECK(worst_strict < 1e-3);
    MESSAGE("strict worst relative error at eps=1e-5: ", worst_strict);
}

TEST_CASE("zero upstream gradient zeroes every parameter gradient") {
    ModelConfig cfg;
    cfg.depth = 2;
    cfg.start_features = 4;
    cfg.z_conv_levels = 1;
    cfg.group_size = 2;
    const ModelState m = init_model<float>(cfg, 1);
    Rng rng(2, 0);
    const BitVolume bits = random_bits(Shape3{4, 8, 8}, 0.3, rng);
    const Tensor5 x = bits_as_tensor<float>(bits);
    ForwardCache cache;
    model_forward<float>(m, x, &cache);
    const Tensor5 zero_grad(1, 1, 4, 8, 8);
    ModelState grads = zero_like(m);
    model_backward<float>(m, cache, zero_grad, &grads);
    for (const auto& p : param_refs(grads))
        for (std::int64_t i = 0; i < p.size; ++i) CHECK(p.data[i] == 0.0f);
}

TEST_CASE("a duplicated batch doubles the gradient exactly") {
    ModelConfig cfg;
    cfg.depth = 2;
    cfg.start_features = 4;
    cfg.z_conv_levels = 1;
    cfg.group_size = 2;
    const ModelState m = init_model<float>(cfg, 5);
    Rng rng(6, 0);
    const Shape3 s{4, 8, 8};
    const BitVolume raw = random_bits(s, 0.3, rng);
    const ThinResult split = thin(raw, 0.5, rng);
    const BitVolume mask = complement(split.input);

    auto run = [&](int copies) {
        std::vector<BitVolume> inputs(static_cast<std::size_t>(copies), split.input);
        std::vector<BitVolume> targets(static_cast<std::size_t>(copies), split.target);
        std::vector<BitVolume> masks(static_cast<std::size_t>(copies), mask);
        const Tensor5 x = pack_batch(inputs);
        ForwardCache cache;
        const Tensor5 logits = model_forward<float>(m, x, &cache);
        Tensor5 grad(copies, 1, s.t, s.h, s.w);
        masked_cross_entropy<float>(logits, std::span<const BitVolume>(targets),
                                    std::span<const BitVolume>(masks), &grad);
        ModelState grads = zero_like(m);
        model_backward<float>(m, cache, grad, &grads);
        return grads;
    };
    ModelState g1 = run(1);
    ModelState g2 = run(2);
    auto r1 = param_refs(g1);
    auto r2 = param_refs(g2);
    for (std::size_t k = 0; k < r1.size(); ++k)
        for (std::int64_t i = 0; i < r1[k].size; ++i)
            CHECK(r2[k].data[i] == 2.0f * r1[k].data[i]);
}

TEST_CASE("adamw step") {
    ModelConfig cfg;
    cfg.depth = 2;
    cfg.start_features = 4;
    cfg.z_conv_levels = 1;
    cfg.group_size = 2;
    ModelState m = init_model<float>(cfg, 9);
    const ModelState zero_grads = zero_like(m);

    SUBCASE("zero gradient with zero decay changes nothing") {
        AdamWConfig oc;
        oc.weight_decay = 0.0;
        ModelState before = m;
        OptimizerState opt = make_optimizer(m);
        adamw_step(m, zero_grads, opt, oc);
        auto ra = param_refs(before);
        auto rb = param_refs(m);
        for (std::size_t k = 0; k < ra.size(); ++k)
            for (std::int64_t i = 0; i < ra[k].size; ++i) CHECK(ra[k].data[i] == rb[k].data[i]);
    }

    SUBCASE("zero gradient with decay scales weights by exactly 1 - lr*wd") {
        AdamWConfig oc;
        oc.lr = 0.1;
        oc.weight_decay = 0.5;
        ModelState before = m;
        OptimizerState opt = make_optimizer(m);
        adamw_step(m, zero_grads, opt, oc);
        const double decay = 1.0 - oc.lr * oc.weight_decay;
        auto ra = param_refs(before);
        auto rb = param_refs(m);
        for (std::size_t k = 0; k < ra.size(); ++k)
            for (std::int64_t i = 0; i < ra[k].size; ++i)
                CHECK(rb[k].data[i] ==
                      static_cast<float>(static_cast<double>(ra[k].data[i]) * decay));
    }

    SUBCASE("first step from zero state matches the reference formula") {
        AdamWConfig oc;
        ModelState grads = zero_like(m);
        Rng rng(10, 0);
        for (auto& p : param_refs(grads))
            for (std::int64_t i = 0; i < p.size; ++i)
                p.data[i] = static_cast<float>(rng.next_double() * 2.0 - 1.0);
        ModelState before = m;
        OptimizerState opt = make_optimizer(m);
        adamw_step(m, grads, opt, oc);

        auto rb = param_refs(before);
        auto rg = param_refs(grads);
        auto ra = param_refs(m);
        for (std::size_t k = 0; k < ra.size(); ++k)
            for (std::int64_t i = 0; i < ra[k].size; ++i) {
                const double g = rg[k].data[i];
                // bias-corrected first step: mhat = g, vhat = g*g
                const double expect = static_cast<double>(rb[k].data[i]) *
                                          (1.0 - oc.lr * oc.weight_decay) -
                                      oc.lr * g / (std::fabs(g) + oc.eps);
                CHECK(ra[k].data[i] == doctest::Approx(expect).epsilon(1e-6));
            }
    }
}
