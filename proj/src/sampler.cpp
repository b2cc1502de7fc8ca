#include "quanta/sampler.hpp"

#include <stdexcept>

#include "quanta/stats.hpp"

namespace quanta {

double draw_p(const SamplerConfig& cfg, Rng& rng) {
    if (!(cfg.p_min >= 0.0 && cfg.p_min <= cfg.p_max && cfg.p_max <= 1.0))
        throw std::invalid_argument("draw_p: need 0 <= p_min <= p_max <= 1");
    if (cfg.p_mode == PMode::fixed) return cfg.p_max;
    return cfg.p_min + (cfg.p_max - cfg.p_min) * rng.next_double();
}

SampleOut sample_triple(const BitVolume& data, const SamplerConfig& cfg, Rng& rng) {
    const Shape3 d = data.shape();
    const Shape3 c = cfg.crop;
    if (c.t > d.t || c.h > d.h || c.w > d.w)
        throw std::invalid_argument("sample_triple: crop larger than data");

    SampleOut out;
    out.crop.t0 = static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(d.t - c.t + 1)));
    out.crop.y0 = static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(d.h - c.h + 1)));
    out.crop.x0 = static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(d.w - c.w + 1)));
    out.crop.size = c;
    out.p = draw_p(cfg, rng);

    const BitVolume raw = crop(data, out.crop);
    ThinResult split = thin(raw, out.p, rng);
    BitVolume mask(c);
    const std::int64_t n = c.volume();
    for (std::int64_t i = 0; i < n; ++i) mask.set_linear(i, 1 - split.input.get_linear(i));
    out.triple = SplitTriple{std::move(split.input), std::move(split.target), std::move(mask)};
    return out;
}

namespace {

BitVolume transform(const BitVolume& v, unsigned ops) {
    const Shape3 s = v.shape();
    const bool transpose = ops & kAugTranspose;
    const Shape3 os = transpose ? Shape3{s.t, s.w, s.h} : s;
    BitVolume out(os);
    for (std::int64_t t = 0; t < s.t; ++t)
        for (std::int64_t y = 0; y < s.h; ++y)
            for (std::int64_t x = 0; x < s.w; ++x) {
                std::int64_t yy = (ops & kAugFlipY) ? s.h - 1 - y : y;
                std::int64_t xx = (ops & kAugFlipX) ? s.w - 1 - x : x;
                if (transpose) std::swap(yy, xx);
                if (v.get(t, y, x)) out.set(t, yy, xx, 1);
            }
    return out;
}

}  // namespace

SplitTriple apply_flip_transpose(const SplitTriple& t, unsigned ops) {
    if ((ops & kAugTranspose) && t.input.shape().h != t.input.shape().w)
        throw std::invalid_argument("transpose requires a square spatial crop");
    return SplitTriple{transform(t.input, ops), transform(t.target, ops),
                       transform(t.mask, ops)};
}

SplitTriple augment(const SplitTriple& t, const SamplerConfig& cfg, Rng& rng) {
    if (!cfg.augment_flip_transpose) return t;
    unsigned ops = 0;
    if (rng.next_double() < 0.5) ops |= kAugFlipY;
    if (rng.next_double() < 0.5) ops |= kAugFlipX;
    if (t.input.shape().h == t.input.shape().w && rng.next_double() < 0.5)
        ops |= kAugTranspose;
    return apply_flip_transpose(t, ops);
}

}  // namespace quanta
