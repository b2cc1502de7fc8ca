#pragma once

#include "quanta/core.hpp"
#include "quanta/random.hpp"

namespace quanta {

enum class PMode { uniform, fixed };

struct SamplerConfig {
    Shape3 crop{16, 64, 64};
    double p_min = 0.0;
    double p_max = 1.0 - 1e-6;
    PMode p_mode = PMode::uniform;
    bool augment_flip_transpose = false;
};

// One training sample. Always satisfies input AND target = 0,
// input OR target = raw crop, mask = bitwise complement of input.
struct SplitTriple {
    BitVolume input;
    BitVolume target;
    BitVolume mask;
};

// uniform on [p_min, p_max]; fixed mode always returns p_max
double draw_p(const SamplerConfig& cfg, Rng& rng);

struct SampleOut {
    SplitTriple triple;
    double p = 0.0;
    CropSpec crop;
};

// Random in-bounds crop, fresh thinning at a freshly drawn p, complement
// mask. Every call produces a new split; pairs are never cached.
SampleOut sample_triple(const BitVolume& data, const SamplerConfig& cfg, Rng& rng);

// spatial ops applied identically to input/target/mask
enum AugmentOp : unsigned {
    kAugNone = 0,
    kAugFlipY = 1,
    kAugFlipX = 2,
    kAugTranspose = 4,  // swaps h and w; requires a square spatial crop
};

SplitTriple apply_flip_transpose(const SplitTriple& t, unsigned ops);

// draws a random op combination; transpose is only drawn for square crops
SplitTriple augment(const SplitTriple& t, const SamplerConfig& cfg, Rng& rng);

}  // namespace quanta
