#include "quanta/configs.hpp"

#include <json.hpp>
#include <set>
#include <stdexcept>

namespace quanta {
namespace {

using ordered_json = nlohmann::ordered_json;

void reject_unknown(const ordered_json& j, const std::set<std::string>& known,
                    const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!known.contains(key))
            throw std::invalid_argument("unknown key \"" + key + "\" in " + where);
}

ordered_json shape_json(const Shape3& s) { return ordered_json::array({s.t, s.h, s.w}); }

Shape3 shape_from(const ordered_json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3)
        throw std::invalid_argument(where + " must be a [t, h, w] array");
    return Shape3{j[0].get<std::int64_t>(), j[1].get<std::int64_t>(), j[2].get<std::int64_t>()};
}

ordered_json sampler_json(const SamplerConfig& c) {
    ordered_json j;
    j["crop"] = shape_json(c.crop);
    j["p_min"] = c.p_min;
    j["p_max"] = c.p_max;
    j["p_mode"] = c.p_mode == PMode::uniform ? "uniform" : "fixed";
    j["augment_flip_transpose"] = c.augment_flip_transpose;
    return j;
}

SamplerConfig sampler_from(const ordered_json& j) {
    reject_unknown(j, {"crop", "p_min", "p_max", "p_mode", "augment_flip_transpose"}, "sampler");
    SamplerConfig c;
    if (j.contains("crop")) c.crop = shape_from(j["crop"], "sampler.crop");
    if (j.contains("p_min")) c.p_min = j["p_min"].get<double>();
    if (j.contains("p_max")) c.p_max = j["p_max"].get<double>();
    if (j.contains("p_mode")) {
        const std::string m = j["p_mode"].get<std::string>();
        if (m == "uniform")
            c.p_mode = PMode::uniform;
        else if (m == "fixed")
            c.p_mode = PMode::fixed;
        else
            throw std::invalid_argument("sampler.p_mode must be uniform or fixed");
    }
    if (j.contains("augment_flip_transpose"))
        c.augment_flip_transpose = j["augment_flip_transpose"].get<bool>();
    return c;
}

ordered_json model_json(const ModelConfig& c) {
    ordered_json j;
    j["depth"] = c.depth;
    j["start_features"] = c.start_features;
    j["depth_scale"] = c.depth_scale;
    j["z_conv_levels"] = c.z_conv_levels;
    j["group_size"] = c.group_size;
    j["norm"] = c.norm == NormKind::group ? "group" : "none";
    return j;
}

ModelConfig model_from(const ordered_json& j) {
    reject_unknown(
        j, {"depth", "start_features", "depth_scale", "z_conv_levels", "group_size", "norm"},
        "model");
    ModelConfig c;
    if (j.contains("depth")) c.depth = j["depth"].get<int>();
    if (j.contains("start_features")) c.start_features = j["start_features"].get<int>();
    if (j.contains("depth_scale")) c.depth_scale = j["depth_scale"].get<int>();
    if (j.contains("z_conv_levels")) c.z_conv_levels = j["z_conv_levels"].get<int>();
    if (j.contains("group_size")) c.group_size = j["group_size"].get<int>();
    if (j.contains("norm")) {
        const std::string n = j["norm"].get<std::string>();
        if (n == "group")
            c.norm = NormKind::group;
        else if (n == "none")
            c.norm = NormKind::none;
        else
            throw std::invalid_argument("model.norm must be group or none");
    }
    return c;
}

}  // namespace

std::string to_json_text(const TrainConfig& cfg) {
    ordered_json j;
    j["epochs"] = cfg.epochs;
    j["steps_per_epoch"] = cfg.steps_per_epoch;
    j["batch"] = cfg.batch;
    j["lr"] = cfg.opt.lr;
    j["beta1"] = cfg.opt.beta1;
    j["beta2"] = cfg.opt.beta2;
    j["weight_decay"] = cfg.opt.weight_decay;
    j["patience"] = cfg.patience;
    j["seed"] = cfg.seed;
    j["masked"] = cfg.masked;
    j["fresh_splits"] = cfg.fresh_splits;
    j["val_fraction"] = cfg.val_fraction;
    j["val_batches"] = cfg.val_batches;
    j["sampler"] = sampler_json(cfg.sampler);
    j["model"] = model_json(cfg.model);
    return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
    const ordered_json j = ordered_json::parse(text);
    reject_unknown(j,
                   {"epochs", "steps_per_epoch", "batch", "lr", "beta1", "beta2", "weight_decay",
                    "patience", "seed", "masked", "fresh_splits", "val_fraction", "val_batches",
                    "sampler", "model"},
                   "train config");
    TrainConfig c;
    if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
    if (j.contains("steps_per_epoch")) c.steps_per_epoch = j["steps_per_epoch"].get<int>();
    if (j.contains("batch")) c.batch = j["batch"].get<int>();
    if (j.contains("lr")) c.opt.lr = j["lr"].get<double>();
    if (j.contains("beta1")) c.opt.beta1 = j["beta1"].get<double>();
    if (j.contains("beta2")) c.opt.beta2 = j["beta2"].get<double>();
    if (j.contains("weight_decay")) c.opt.weight_decay = j["weight_decay"].get<double>();
    if (j.contains("patience")) c.patience = j["patience"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("masked")) c.masked = j["masked"].get<bool>();
    if (j.contains("fresh_splits")) c.fresh_splits = j["fresh_splits"].get<bool>();
    if (j.contains("val_fraction")) c.val_fraction = j["val_fraction"].get<double>();
    if (j.contains("val_batches")) c.val_batches = j["val_batches"].get<int>();
    if (j.contains("sampler")) c.sampler = sampler_from(j["sampler"]);
    if (j.contains("model")) c.model = model_from(j["model"]);
    return c;
}

std::string to_json_text(const InferConfig& cfg) {
    ordered_json j;
    j["tile"] = shape_json(cfg.tile);
    j["overlap"] = cfg.overlap;
    j["shots"] = cfg.shots;
    j["shot_p"] = cfg.shot_p;
    j["combine"] = cfg.combine == ShotCombine::mean ? "mean" : "median";
    j["blend"] = cfg.blend == TileBlend::uniform ? "uniform" : "cosine";
    j["seed"] = cfg.seed;
    return j.dump(2);
}

InferConfig infer_config_from_json(const std::string& text) {
    const ordered_json j = ordered_json::parse(text);
    reject_unknown(j, {"tile", "overlap", "shots", "shot_p", "combine", "blend", "seed"},
                   "infer config");
    InferConfig c;
    if (j.contains("tile")) c.tile = shape_from(j["tile"], "infer.tile");
    if (j.contains("overlap")) c.overlap = j["overlap"].get<double>();
    if (j.contains("shots")) c.shots = j["shots"].get<int>();
    if (j.contains("shot_p")) c.shot_p = j["shot_p"].get<double>();
    if (j.contains("combine")) {
        const std::string m = j["combine"].get<std::string>();
        if (m == "mean")
            c.combine = ShotCombine::mean;
        else if (m == "median")
            c.combine = ShotCombine::median;
        else
            throw std::invalid_argument("infer.combine must be mean or median");
    }
    if (j.contains("blend")) {
        const std::string b = j["blend"].get<std::string>();
        if (b == "uniform")
            c.blend = TileBlend::uniform;
        else if (b == "cosine")
            c.blend = TileBlend::cosine;
        else
            throw std::invalid_argument("infer.blend must be uniform or cosine");
    }
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    return c;
}

}  // namespace quanta
