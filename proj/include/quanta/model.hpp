#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "quanta/model_ops.hpp"
#include "quanta/tensor.hpp"

namespace quanta {

enum class NormKind { group, none };

// Hybrid 3D/2D residual U-Net. Levels below z_conv_levels convolve and pool
// in (t, h, w); deeper levels keep the temporal extent frozen and work in
// (h, w) only. Down blocks run conv-norm-act three times with a residual sum
// of the first conv output added after the second conv. Up transitions pixel
// shuffle (x2 per pooled dim), restore channels with a 1x1x1 conv, then
// concatenate the skip and run the same three-conv block.
struct ModelConfig {
    int depth = 3;
    int start_features = 8;
    int depth_scale = 2;
    int z_conv_levels = 1;
    int group_size = 4;  // channels per normalization group
    NormKind norm = NormKind::group;

    void validate() const;
    int features(int level) const;
    bool level_3d(int level) const { return level < z_conv_levels; }
    int temporal_pools() const { return std::min(z_conv_levels, depth - 1); }
    std::int64_t temporal_multiple() const { return std::int64_t(1) << temporal_pools(); }
    std::int64_t spatial_multiple() const { return std::int64_t(1) << (depth - 1); }
    // groups for a layer of `channels` channels
    int groups_for(int channels) const { return channels / group_size; }

    std::string describe() const;     // canonical one-line form
    std::uint64_t fingerprint() const;  // hash of describe()
    bool operator==(const ModelConfig&) const = default;
};

template <class T>
struct ConvParamT {
    Tensor5T<T> w;       // (out_c, in_c, kt, kh, kw)
    std::vector<T> b;    // out_c
};

template <class T>
struct NormParamT {
    std::vector<T> gamma, beta;  // per channel
};

template <class T>
struct ConvBlockT {
    ConvParamT<T> conv1, conv2, conv3;
    NormParamT<T> n1, n2, n3;
};

template <class T>
struct UpBlockT {
    ConvParamT<T> expand;  // 1x1x1 after the pixel shuffle
    NormParamT<T> ne;
    ConvBlockT<T> block;
};

template <class T>
struct ModelStateT {
    ModelConfig config;
    std::vector<ConvBlockT<T>> down;  // depth blocks; the last is the bottleneck
    std::vector<UpBlockT<T>> up;      // up[i] produces the level-i resolution
    ConvParamT<T> out_conv;           // 1x1x1 to a single logit channel
    std::uint64_t init_seed = 0;
    std::int64_t step_count = 0;
};

using ModelState = ModelStateT<float>;

// ---------------------------------------------------------------------------

template <class T>
struct ConvBlockCacheT {
    Tensor5T<T> x, c1, g1, a1, r, g2, a2, c3, g3, a3;
    NormCache n1, n2, n3;
};

template <class T>
struct ForwardCacheT {
    Tensor5T<T> input;
    std::vector<ConvBlockCacheT<T>> down;
    std::vector<std::vector<std::int64_t>> pool_argmax;  // per down level except the last
    // per up level: shuffle output, expand conv output, its norm output
    struct UpPre {
        Tensor5T<T> shuf, e, ge;
        NormCache ne;
    };
    std::vector<UpPre> up_pre;
    std::vector<ConvBlockCacheT<T>> up_block;
};

using ForwardCache = ForwardCacheT<float>;

// Weights uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)), biases zero, norm scale
// one / shift zero. Same seed, same parameters.
template <class T>
ModelStateT<T> init_model(const ModelConfig& cfg, std::uint64_t seed);

// same structure as `like`, every parameter zero (gradient / moment buffers)
template <class T>
ModelStateT<T> zero_like(const ModelStateT<T>& like);

// x must be (n, 1, t, h, w) with t divisible by temporal_multiple() and h, w
// by spatial_multiple(). Returns logits of the same shape. Pass a cache to
// enable a subsequent backward.
template <class T>
Tensor5T<T> model_forward(const ModelStateT<T>& m, const Tensor5T<T>& x,
                          ForwardCacheT<T>* cache);

// Gradients of the scalar loss with upstream grad_logits; writes into a
// zeroed state-shaped container.
template <class T>
void model_backward(const ModelStateT<T>& m, const ForwardCacheT<T>& cache,
                    const Tensor5T<T>& grad_logits, ModelStateT<T>* grads);

// ---------------------------------------------------------------------------
// deterministic parameter enumeration (checkpoints, optimizer, tests)

template <class T>
struct ParamRef {
    std::string name;
    T* data;
    std::int64_t size;
    std::array<std::int64_t, 5> dims;  // weight tensors keep their dims; vectors use (n,1,1,1,1)
};

template <class T>
std::vector<ParamRef<T>> param_refs(ModelStateT<T>& m);

template <class T>
std::int64_t param_count(const ModelStateT<T>& m);

// Closed-form parameter count implied by the config; guards drift between
// the architecture and its description.
std::int64_t expected_param_count(const ModelConfig& cfg);

// ---------------------------------------------------------------------------
// checkpoint container: "QCK1", u32 JSON header length, JSON header (config,
// fingerprint, seed, step count, parameter names/dims in order), then each
// parameter tensor as raw float32 LE. Layout details in docs/formats.md.

void save_checkpoint(const ModelState& m, const std::string& path);
ModelState load_checkpoint(const std::string& path);

extern template ModelStateT<float> init_model<float>(const ModelConfig&, std::uint64_t);
extern template ModelStateT<double> init_model<double>(const ModelConfig&, std::uint64_t);
extern template ModelStateT<float> zero_like<float>(const ModelStateT<float>&);
extern template ModelStateT<double> zero_like<double>(const ModelStateT<double>&);
extern template Tensor5T<float> model_forward<float>(const ModelStateT<float>&,
                                                     const Tensor5T<float>&,
                                                     ForwardCacheT<float>*);
extern template Tensor5T<double> model_forward<double>(const ModelStateT<double>&,
                                                       const Tensor5T<double>&,
                                                       ForwardCacheT<double>*);
extern template void model_backward<float>(const ModelStateT<float>&,
                                           const ForwardCacheT<float>&, const Tensor5T<float>&,
                                           ModelStateT<float>*);
extern template void model_backward<double>(const ModelStateT<double>&,
                                            const ForwardCacheT<double>&,
                                            const Tensor5T<double>&, ModelStateT<double>*);
extern template std::vector<ParamRef<float>> param_refs<float>(ModelStateT<float>&);
extern template std::vector<ParamRef<double>> param_refs<double>(ModelStateT<double>&);
extern template std::int64_t param_count<float>(const ModelStateT<float>&);
extern template std::int64_t param_count<double>(const ModelStateT<double>&);

}  // namespace quanta
