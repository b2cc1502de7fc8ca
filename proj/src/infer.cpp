#include "quanta/infer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "quanta/stats.hpp"
#include "quanta/train.hpp"

namespace quanta {
namespace {

std::vector<std::int64_t> axis_origins(std::int64_t extent, std::int64_t tile, double overlap) {
    const std::int64_t stride =
        std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(
                                      static_cast<double>(tile) * (1.0 - overlap))));
    std::vector<std::int64_t> origins;
    for (std::int64_t o = 0;; o += stride) {
        if (o + tile >= extent) {
            origins.push_back(extent - tile);  // clamp the final tile to the boundary
            break;
        }
        origins.push_back(o);
    }
    return origins;
}

}  // namespace

std::vector<CropSpec> tile_plan(const Shape3& volume, const Shape3& tile, double overlap) {
    if (tile.t > volume.t || tile.h > volume.h || tile.w > volume.w)
        throw std::invalid_argument("tile_plan: tile larger than volume");
    if (!(overlap >= 0.0 && overlap < 1.0))
        throw std::invalid_argument("tile_plan: overlap must be in [0, 1)");
    const auto ts = axis_origins(volume.t, tile.t, overlap);
    const auto ys = axis_origins(volume.h, tile.h, overlap);
    const auto xs = axis_origins(volume.w, tile.w, overlap);
    std::vector<CropSpec> out;
    out.reserve(ts.size() * ys.size() * xs.size());
    for (const auto t : ts)
        for (const auto y : ys)
            for (const auto x : xs) out.push_back(CropSpec{t, y, x, tile});
    return out;
}

DenseVolume logits_to_intensity(const Tensor5& logits, double photon_count) {
    if (logits.n() != 1 || logits.c() != 1)
        throw std::invalid_argument("logits_to_intensity: expected a single-sample tensor");
    if (!(photon_count >= 0.0))
        throw std::invalid_argument("logits_to_intensity: negative photon count");
    const std::int64_t plane = logits.plane();
    const float* l = logits.slab(0, 0);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i < plane; ++i) mx = std::max(mx, static_cast<double>(l[i]));
    double z = 0.0;
    for (std::int64_t i = 0; i < plane; ++i) z += std::exp(static_cast<double>(l[i]) - mx);
    DenseVolume out(Shape3{logits.t(), logits.h(), logits.w()});
    const double scale = photon_count / z;
    for (std::int64_t i = 0; i < plane; ++i)
        out[i] = static_cast<float>(std::exp(static_cast<double>(l[i]) - mx) * scale);
    return out;
}

DenseVolume predict(const ModelState& m, const BitVolume& bits, const InferConfig& cfg) {
    const Shape3 vs = bits.shape();
    const Shape3 tile{std::min(cfg.tile.t, vs.t), std::min(cfg.tile.h, vs.h),
                      std::min(cfg.tile.w, vs.w)};
    if (tile.t % m.config.temporal_multiple() != 0 ||
        tile.h % m.config.spatial_multiple() != 0 || tile.w % m.config.spatial_multiple() != 0)
        throw std::invalid_argument("predict: tile dims incompatible with the model");
    if (!(cfg.shot_p > 0.0 && cfg.shot_p <= 1.0))
        throw std::invalid_argument("predict: shot_p must be in (0, 1]");

    // per-voxel tile weight: flat, or a separable Hann window for feathered
    // overlaps (never zero, so lone-coverage voxels stay defined)
    std::vector<double> tile_weight(static_cast<std::size_t>(tile.volume()), 1.0);
    if (cfg.blend == TileBlend::cosine) {
        const double pi = 3.14159265358979323846;
        auto hann = [&](std::int64_t i, std::int64_t n) {
            const double s = std::sin(pi * (static_cast<double>(i) + 0.5) / static_cast<double>(n));
            return 1e-3 + s * s;
        };
        std::int64_t i = 0;
        for (std::int64_t t = 0; t < tile.t; ++t)
            for (std::int64_t y = 0; y < tile.h; ++y)
                for (std::int64_t x = 0; x < tile.w; ++x, ++i)
                    tile_weight[static_cast<std::size_t>(i)] =
                        hann(t, tile.t) * hann(y, tile.h) * hann(x, tile.w);
    }

    const auto tiles = tile_plan(vs, tile, cfg.overlap);
    DenseVolume sum(vs);
    std::vector<double> weight(static_cast<std::size_t>(vs.volume()), 0.0);
    for (const auto& spec : tiles) {
        const BitVolume piece = crop(bits, spec);
        const Tensor5 x = pack_batch(std::span<const BitVolume>(&piece, 1));
        const Tensor5 logits = model_forward<float>(m, x, nullptr);
        // the tile's photon count, unbiased when the input was thinned
        const double count = static_cast<double>(piece.popcount()) / cfg.shot_p;
        const DenseVolume intensity = logits_to_intensity(logits, count);
        std::int64_t i = 0;
        for (std::int64_t t = 0; t < tile.t; ++t)
            for (std::int64_t y = 0; y < tile.h; ++y) {
                const std::int64_t base =
                    ((spec.t0 + t) * vs.h + (spec.y0 + y)) * vs.w + spec.x0;
                for (std::int64_t x2 = 0; x2 < tile.w; ++x2, ++i) {
                    const double w = tile_weight[static_cast<std::size_t>(i)];
                    sum[base + x2] += static_cast<float>(w * intensity[i]);
                    weight[static_cast<std::size_t>(base + x2)] += w;
                }
            }
    }
    for (std::int64_t i = 0; i < vs.volume(); ++i)
        sum[i] = static_cast<float>(sum[i] / weight[static_cast<std::size_t>(i)]);
    return sum;
}

DenseVolume multi_shot(const ModelState& m, const BitVolume& raw, const InferConfig& cfg) {
    if (cfg.shots < 1) throw std::invalid_argument("multi_shot: need at least one shot");
    std::vector<DenseVolume> outputs;
    outputs.reserve(static_cast<std::size_t>(cfg.shots));
    for (int k = 0; k < cfg.shots; ++k) {
        if (cfg.shot_p < 1.0) {
            Rng rng(cfg.seed, 0x5807 + static_cast<std::uint64_t>(k));
            const ThinResult t = thin(raw, cfg.shot_p, rng);
            outputs.push_back(predict(m, t.input, cfg));
        } else {
            outputs.push_back(predict(m, raw, cfg));
        }
    }
    const std::int64_t n = raw.volume();
    DenseVolume out(raw.shape());
    if (cfg.combine == ShotCombine::mean) {
        for (const auto& o : outputs)
            for (std::int64_t i = 0; i < n; ++i) out[i] += o[i];
        const float inv = 1.0f / static_cast<float>(cfg.shots);
        for (std::int64_t i = 0; i < n; ++i) out[i] *= inv;
    } else {
        std::vector<float> vals(outputs.size());
        for (std::int64_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < outputs.size(); ++k) vals[k] = outputs[k][i];
            std::sort(vals.begin(), vals.end());
            const std::size_t mid = vals.size() / 2;
            out[i] = vals.size() % 2 ? vals[mid] : 0.5f * (vals[mid - 1] + vals[mid]);
        }
    }
    return out;
}

}  // namespace quanta
