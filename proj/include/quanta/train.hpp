#pragma once

#include <span>
#include <vector>

#include "quanta/model.hpp"
#include "quanta/sampler.hpp"
#include "quanta/tensor.hpp"

namespace quanta {

struct LossResult {
    double loss_sum = 0.0;    // -sum_i w_i * log softmax(logits)_i, summed over samples
    double weight_sum = 0.0;  // total photon weight W; per-photon loss = loss_sum / W
    double per_photon() const { return weight_sum > 0.0 ? loss_sum / weight_sum : 0.0; }
};

// Photon-prediction objective. The softmax spans each sample's full crop
// volume (per sample within the batch); the per-voxel weight is
// w_i = mask_i * target_i, and the logit gradient is W * softmax - w.
// Accumulation runs in 64-bit. Targets/masks hold one BitVolume per batch
// sample with the logits' (t, h, w) dims.
template <class T>
LossResult masked_cross_entropy(const Tensor5T<T>& logits, std::span<const BitVolume> targets,
                                std::span<const BitVolume> masks, Tensor5T<T>* grad_logits);

extern template LossResult masked_cross_entropy<float>(const Tensor5T<float>&,
                                                       std::span<const BitVolume>,
                                                       std::span<const BitVolume>,
                                                       Tensor5T<float>*);
extern template LossResult masked_cross_entropy<double>(const Tensor5T<double>&,
                                                        std::span<const BitVolume>,
                                                        std::span<const BitVolume>,
                                                        Tensor5T<double>*);

// bits cast to {0,1} floats as a (batch, 1, t, h, w) tensor
Tensor5 pack_batch(std::span<const BitVolume> bits);

// ---------------------------------------------------------------------------

struct AdamWConfig {
    double lr = 3.2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct OptimizerState {
    ModelState m;  // first moments, zero-initialized, same shapes as the model
    ModelState v;  // second moments
    std::int64_t step = 0;
};

OptimizerState make_optimizer(const ModelState& model);

// Bias-corrected moment update with decoupled decay: theta *= (1 - lr*wd)
// independent of the gradient, then theta -= lr * mhat / (sqrt(vhat) + eps).
void adamw_step(ModelState& params, const ModelState& grads, OptimizerState& opt,
                const AdamWConfig& cfg);

// ---------------------------------------------------------------------------

struct TrainConfig {
    int epochs = 10;
    int steps_per_epoch = 100;
    int batch = 2;
    AdamWConfig opt;
    int patience = 20;
    std::uint64_t seed = 0;
    SamplerConfig sampler;
    ModelConfig model;
    bool masked = true;        // w = mask * target; off = w = target (diagnostic)
    bool fresh_splits = true;  // off reuses one fixed batch of pairs (diagnostic)
    double val_fraction = 0.1;
    int val_batches = 4;
};

enum class TrainStatus { completed, early_stopped, aborted_non_finite };

struct HistoryRow {
    int epoch = 0;
    std::int64_t step = 0;       // global step index
    double train_loss = 0.0;     // per photon
    double val_loss = 0.0;       // per photon, valid when has_val
    bool has_val = false;
};

struct TrainResult {
    ModelState best;   // lowest validation loss seen
    ModelState last;   // state at the final executed step
    std::vector<HistoryRow> history;
    TrainStatus status = TrainStatus::completed;
    double best_val = 0.0;
    int best_epoch = -1;
};

// Fresh (crop, p, thinning) per sample per step; per-epoch validation on the
// held-out trailing frames with a fixed split seed; keeps the best-validation
// checkpoint and stops early after `patience` epochs without improvement.
TrainResult train_loop(const BitVolume& data, const TrainConfig& cfg);

void write_history_csv(const std::vector<HistoryRow>& history, const std::string& path);

}  // namespace quanta
