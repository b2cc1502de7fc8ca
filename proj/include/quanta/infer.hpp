#pragma once

#include <vector>

#include "quanta/core.hpp"
#include "quanta/model.hpp"
#include "quanta/random.hpp"

namespace quanta {

enum class ShotCombine { mean, median };
enum class TileBlend { uniform, cosine };

struct InferConfig {
    Shape3 tile{16, 64, 64};
    double overlap = 0.5;  // fraction of the tile shared with its neighbour
    int shots = 1;
    double shot_p = 1.0;   // thinning probability applied to the raw volume
    ShotCombine combine = ShotCombine::mean;
    TileBlend blend = TileBlend::uniform;  // cosine: Hann-weighted overlap feathering
    std::uint64_t seed = 0;
};

// Tiles covering the volume: strides of tile*(1-overlap) per axis, with the
// final tile clamped to the boundary. Every voxel is covered at least once.
std::vector<CropSpec> tile_plan(const Shape3& volume, const Shape3& tile, double overlap);

// softmax(logits) * photon_count for a single-sample logit tensor; the sum
// of the result equals photon_count up to accumulation error
DenseVolume logits_to_intensity(const Tensor5& logits, double photon_count);

// Tiled forward over the given bits. Per tile the logits become an intensity
// map carrying the tile's photon count (unbiased by 1/shot_p when the input
// was thinned); overlapping voxels are averaged uniformly. Tiles run in a
// fixed order, so the result does not depend on threading.
DenseVolume predict(const ModelState& m, const BitVolume& bits, const InferConfig& cfg);

// k independent thinnings of the raw volume at shot_p, each predicted, then
// combined voxel-wise (mean or median). shot_p = 1 with k shots just repeats
// the same input.
DenseVolume multi_shot(const ModelState& m, const BitVolume& raw, const InferConfig& cfg);

}  // namespace quanta
