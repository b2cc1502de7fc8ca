#include "quanta/train.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "quanta/io.hpp"
#include "quanta/parallel.hpp"

namespace quanta {

template <class T>
LossResult masked_cross_entropy(const Tensor5T<T>& logits, std::span<const BitVolume> targets,
                                std::span<const BitVolume> masks, Tensor5T<T>* grad_logits) {
    const std::int64_t N = logits.n();
    if (logits.c() != 1)
        throw std::invalid_argument("masked_cross_entropy: expected one logit channel");
    if (static_cast<std::int64_t>(targets.size()) != N ||
        static_cast<std::int64_t>(masks.size()) != N)
        throw std::invalid_argument("masked_cross_entropy: batch size mismatch");
    const std::int64_t plane = logits.plane();
    for (std::int64_t n = 0; n < N; ++n) {
        const Shape3 want{logits.t(), logits.h(), logits.w()};
        if (!(targets[static_cast<std::size_t>(n)].shape() == want) ||
            !(masks[static_cast<std::size_t>(n)].shape() == want))
            throw std::invalid_argument("masked_cross_entropy: volume shape mismatch");
    }

    std::vector<double> loss_n(static_cast<std::size_t>(N), 0.0);
    std::vector<double> weight_n(static_cast<std::size_t>(N), 0.0);
    parallel_for(0, N, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t n = lo; n < hi; ++n) {
            const T* l = logits.slab(n, 0);
            const BitVolume& tar = targets[static_cast<std::size_t>(n)];
            const BitVolume& msk = masks[static_cast<std::size_t>(n)];
            double mx = -std::numeric_limits<double>::infinity();
            for (std::int64_t i = 0; i < plane; ++i)
                mx = std::max(mx, static_cast<double>(l[i]));
            double z = 0.0;
            for (std::int64_t i = 0; i < plane; ++i)
                z += std::exp(static_cast<double>(l[i]) - mx);
            const double log_z = mx + std::log(z);
            double weight = 0.0, loss = 0.0;
            for (std::int64_t i = 0; i < plane; ++i) {
                if (tar.get_linear(i) & msk.get_linear(i)) {
                    weight += 1.0;
                    loss += log_z - static_cast<double>(l[i]);
                }
            }
            if (grad_logits) {
                T* g = grad_logits->slab(n, 0);
                const double inv_z = 1.0 / z;
                for (std::int64_t i = 0; i < plane; ++i) {
                    const double soft = std::exp(static_cast<double>(l[i]) - mx) * inv_z;
                    const double w = (tar.get_linear(i) & msk.get_linear(i)) ? 1.0 : 0.0;
                    g[i] = static_cast<T>(weight * soft - w);
                }
            }
            loss_n[static_cast<std::size_t>(n)] = loss;
            weight_n[static_cast<std::size_t>(n)] = weight;
        }
    });
    LossResult out;
    for (std::int64_t n = 0; n < N; ++n) {
        out.loss_sum += loss_n[static_cast<std::size_t>(n)];
        out.weight_sum += weight_n[static_cast<std::size_t>(n)];
    }
    return out;
}

template LossResult masked_cross_entropy<float>(const Tensor5T<float>&,
                                                std::span<const BitVolume>,
                                                std::span<const BitVolume>, Tensor5T<float>*);
template LossResult masked_cross_entropy<double>(const Tensor5T<double>&,
                                                 std::span<const BitVolume>,
                                                 std::span<const BitVolume>, Tensor5T<double>*);

// ---------------------------------------------------------------------------

OptimizerState make_optimizer(const ModelState& model) {
    OptimizerState opt;
    opt.m = zero_like(model);
    opt.v = zero_like(model);
    return opt;
}

void adamw_step(ModelState& params, const ModelState& grads, OptimizerState& opt,
                const AdamWConfig& cfg) {
    opt.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.step));
    const double decay = 1.0 - cfg.lr * cfg.weight_decay;

    auto pr = param_refs(params);
    auto gr = param_refs(const_cast<ModelState&>(grads));
    auto mr = param_refs(opt.m);
    auto vr = param_refs(opt.v);
    for (std::size_t k = 0; k < pr.size(); ++k) {
        float* p = pr[k].data;
        const float* g = gr[k].data;
        float* m = mr[k].data;
        float* v = vr[k].data;
        for (std::int64_t i = 0; i < pr[k].size; ++i) {
            const double gi = static_cast<double>(g[i]);
            const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gi;
            const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * gi * gi;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            const double update = (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps);
            p[i] = static_cast<float>(static_cast<double>(p[i]) * decay - cfg.lr * update);
        }
    }
}

// ---------------------------------------------------------------------------

Tensor5 pack_batch(std::span<const BitVolume> bits) {
    if (bits.empty()) throw std::invalid_argument("pack_batch: empty batch");
    const Shape3 s = bits.front().shape();
    Tensor5 x(static_cast<std::int64_t>(bits.size()), 1, s.t, s.h, s.w);
    const std::int64_t plane = s.volume();
    for (std::size_t n = 0; n < bits.size(); ++n) {
        if (!(bits[n].shape() == s)) throw std::invalid_argument("pack_batch: shape mismatch");
        float* dst = x.slab(static_cast<std::int64_t>(n), 0);
        for (std::int64_t i = 0; i < plane; ++i)
            dst[i] = bits[n].get_linear(i) ? 1.0f : 0.0f;
    }
    return x;
}

namespace {

BitVolume all_ones(const Shape3& s) {
    BitVolume v(s);
    const std::int64_t n = s.volume();
    for (std::int64_t i = 0; i < n; ++i) v.set_linear(i, 1);
    return v;
}

struct Batch {
    std::vector<BitVolume> inputs, targets, masks;
};

Batch draw_batch(const BitVolume& data, const TrainConfig& cfg, Rng& rng) {
    Batch b;
    for (int i = 0; i < cfg.batch; ++i) {
        SampleOut s = sample_triple(data, cfg.sampler, rng);
        SplitTriple t = cfg.sampler.augment_flip_transpose
                            ? augment(s.triple, cfg.sampler, rng)
                            : std::move(s.triple);
        b.inputs.push_back(std::move(t.input));
        b.targets.push_back(std::move(t.target));
        b.masks.push_back(std::move(t.mask));
    }
    return b;
}

double run_batch_loss(const ModelState& model, const Batch& b, bool masked, double* weight_sum) {
    const Tensor5 x = pack_batch(b.inputs);
    const Tensor5 logits = model_forward<float>(model, x, nullptr);
    std::vector<BitVolume> ones;
    if (!masked)
        for (const auto& m : b.masks) ones.push_back(all_ones(m.shape()));
    const LossResult r = masked_cross_entropy<float>(
        logits, std::span<const BitVolume>(b.targets),
        std::span<const BitVolume>(masked ? b.masks : ones), nullptr);
    if (weight_sum) *weight_sum = r.weight_sum;
    return r.loss_sum;
}

double validation_loss(const ModelState& model, const BitVolume& val_data,
                       const TrainConfig& cfg) {
    // fixed stream per epoch: the same crops and splits every time, so the
    // curve is comparable across epochs
    Rng rng(cfg.seed, 0x5A11DA7E);
    double loss = 0.0, weight = 0.0;
    for (int i = 0; i < cfg.val_batches; ++i) {
        const Batch b = draw_batch(val_data, cfg, rng);
        double w = 0.0;
        loss += run_batch_loss(model, b, cfg.masked, &w);
        weight += w;
    }
    return weight > 0.0 ? loss / weight : 0.0;
}

}  // namespace

TrainResult train_loop(const BitVolume& data, const TrainConfig& cfg) {
    cfg.model.validate();
    const Shape3 ds = data.shape();
    const Shape3 cs = cfg.sampler.crop;
    if (cs.t > ds.t || cs.h > ds.h || cs.w > ds.w)
        throw std::invalid_argument("train_loop: data smaller than the crop");

    TrainResult res;
    ModelState model = init_model<float>(cfg.model, cfg.seed);
    res.best = model;
    res.last = model;
    if (cfg.epochs <= 0) return res;

    // hold out the trailing fraction of frames for validation
    std::int64_t val_t = std::max<std::int64_t>(
        cs.t, static_cast<std::int64_t>(std::llround(cfg.val_fraction * static_cast<double>(ds.t))));
    if (ds.t - val_t < cs.t)
        throw std::invalid_argument("train_loop: not enough frames for a validation split");
    const BitVolume train_data = crop(data, CropSpec{0, 0, 0, Shape3{ds.t - val_t, ds.h, ds.w}});
    const BitVolume val_data =
        crop(data, CropSpec{ds.t - val_t, 0, 0, Shape3{val_t, ds.h, ds.w}});

    OptimizerState opt = make_optimizer(model);
    Rng train_rng(cfg.seed, 0x7247);

    Batch fixed;
    if (!cfg.fresh_splits) {
        Rng fixed_rng(cfg.seed, 0xF17ED);
        fixed = draw_batch(train_data, cfg, fixed_rng);
    }

    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    std::int64_t gstep = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int step = 0; step < cfg.steps_per_epoch; ++step, ++gstep) {
            const Batch batch = cfg.fresh_splits ? draw_batch(train_data, cfg, train_rng) : fixed;
            const Tensor5 x = pack_batch(batch.inputs);
            ForwardCache cache;
            const Tensor5 logits = model_forward<float>(model, x, &cache);

            std::vector<BitVolume> ones;
            if (!cfg.masked)
                for (const auto& m : batch.masks) ones.push_back(all_ones(m.shape()));
            Tensor5 grad(logits.n(), 1, logits.t(), logits.h(), logits.w());
            const LossResult lr = masked_cross_entropy<float>(
                logits, std::span<const BitVolume>(batch.targets),
                std::span<const BitVolume>(cfg.masked ? batch.masks : ones), &grad);

            const double train_loss = lr.per_photon();
            if (!std::isfinite(train_loss)) {
                res.status = TrainStatus::aborted_non_finite;
                res.last = model;
                res.last.step_count = gstep;
                return res;
            }
            res.history.push_back(HistoryRow{epoch, gstep, train_loss, 0.0, false});

            ModelState grads = zero_like(model);
            model_backward<float>(model, cache, grad, &grads);
            adamw_step(model, grads, opt, cfg.opt);
        }
        model.step_count = gstep;

        const double vloss = validation_loss(model, val_data, cfg);
        if (!res.history.empty()) {
            res.history.back().val_loss = vloss;
            res.history.back().has_val = true;
        }
        if (vloss < best_val) {
            best_val = vloss;
            res.best = model;
            res.best_val = vloss;
            res.best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best >= cfg.patience) {
                res.status = TrainStatus::early_stopped;
                break;
            }
        }
    }
    res.last = model;
    return res;
}

void write_history_csv(const std::vector<HistoryRow>& history, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(IoErrc::write_failed, "cannot open " + path + " for writing");
    out << "epoch,step,train_loss,val_loss\n";
    char buf[64];
    auto num = [&buf](double v) {
        const auto r = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, r.ptr);
    };
    for (const auto& row : history) {
        out << row.epoch << ',' << row.step << ',' << num(row.train_loss) << ',';
        if (row.has_val) out << num(row.val_loss);
        out << '\n';
    }
    if (!out) throw IoError(IoErrc::write_failed, "short write on " + path);
}

}  // namespace quanta
