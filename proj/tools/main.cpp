// quanta: reconstruct dense intensity video from sparse 1-bit photon stacks.
// Subcommands cover the full pipeline: toy reference generation, quanta
// simulation, split inspection, temporal binning, self-supervised training,
// tiled inference, metrics, and hot-pixel correction.

#include <CLI11.hpp>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "quanta/configs.hpp"
#include "quanta/infer.hpp"
#include "quanta/io.hpp"
#include "quanta/metrics.hpp"
#include "quanta/parallel.hpp"
#include "quanta/sampler.hpp"
#include "quanta/simulate.hpp"
#include "quanta/stats.hpp"
#include "quanta/train.hpp"

using namespace quanta;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

Shape3 parse_shape(const std::string& text) {
    Shape3 s;
    const auto e = text.data() + text.size();
    auto p = std::from_chars(text.data(), e, s.t);
    if (p.ec != std::errc() || p.ptr == e || *p.ptr != ',')
        throw std::invalid_argument("expected t,h,w: " + text);
    p = std::from_chars(p.ptr + 1, e, s.h);
    if (p.ec != std::errc() || p.ptr == e || *p.ptr != ',')
        throw std::invalid_argument("expected t,h,w: " + text);
    p = std::from_chars(p.ptr + 1, e, s.w);
    if (p.ec != std::errc() || p.ptr != e)
        throw std::invalid_argument("expected t,h,w: " + text);
    validate_shape(s);
    return s;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoErrc::open_failed, "cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

ordered_json stats_json(const SeriesStats& s) {
    ordered_json j;
    j["mean"] = s.mean;
    j["std"] = s.stddev;
    j["min"] = s.min;
    j["max"] = s.max;
    return j;
}

struct ToyArgs {
    std::string out;
    std::int64_t frames = 128, height = 64, width = 64;
    ToyConfig cfg;
};

struct SimArgs {
    std::string ref, out;
    double rate = 0.0625;
    std::uint64_t seed = 0;
};

struct SplitArgs {
    std::string in, prefix;
    double p = 0.5;
    std::uint64_t seed = 0;
};

struct BinArgs {
    std::string in, out;
    std::int64_t window = 8;
};

struct TrainArgs {
    std::string data, out, history, config;
    TrainConfig cfg;
    std::string crop;
    bool fixed_pairs = false, unmasked = false;
};

struct InferArgs {
    std::string model, in, out, config, preview_dir;
    InferConfig cfg;
    std::string tile;
    bool median = false, feather = false;
};

struct MetricsArgs {
    std::string pred, gt, csv;
};

struct HotfixArgs {
    std::string in, out;
    double z = 10.0;
};

int run_toy(const ToyArgs& a) {
    ToyConfig cfg = a.cfg;
    cfg.shape = Shape3{a.frames, a.height, a.width};
    const DenseVolume scene = toy_scene(cfg);
    write_qds(scene, a.out);
    ordered_json j;
    j["out"] = a.out;
    j["shape"] = {cfg.shape.t, cfg.shape.h, cfg.shape.w};
    j["mean"] = scene.mean();
    std::cout << j.dump() << "\n";
    return kExitOk;
}

int run_simulate(const SimArgs& a) {
    const DenseVolume ref = read_qds(a.ref);
    const double q = rate_scale(ref, a.rate);
    const BitVolume bits = simulate_quanta(ref, SimConfig{a.rate, a.seed});
    write_qbs(bits, a.out);
    ordered_json j;
    j["out"] = a.out;
    j["q"] = q;
    j["photons"] = bits.popcount();
    j["rate"] = static_cast<double>(bits.popcount()) / static_cast<double>(bits.volume());
    std::cout << j.dump() << "\n";
    return kExitOk;
}

int run_split(const SplitArgs& a) {
    const BitVolume raw = read_qbs(a.in);
    Rng rng(a.seed, 0);
    const ThinResult split = thin(raw, a.p, rng);
    BitVolume mask(raw.shape());
    for (std::int64_t i = 0; i < raw.volume(); ++i)
        mask.set_linear(i, 1 - split.input.get_linear(i));
    const std::string prefix = a.prefix.empty() ? a.in : a.prefix;
    write_qbs(split.input, prefix + ".input.qbs");
    write_qbs(split.target, prefix + ".target.qbs");
    write_qbs(mask, prefix + ".mask.qbs");
    ordered_json j;
    j["p"] = a.p;
    j["raw_photons"] = raw.popcount();
    j["input_photons"] = split.input.popcount();
    j["target_photons"] = split.target.popcount();
    std::cout << j.dump() << "\n";
    return kExitOk;
}

int run_bin(const BinArgs& a) {
    const BitVolume bits = read_qbs(a.in);
    const DenseVolume binned = bin_temporal(bits, a.window);
    write_qds(binned, a.out);
    ordered_json j;
    j["out"] = a.out;
    j["frames"] = binned.shape().t;
    std::cout << j.dump() << "\n";
    return kExitOk;
}

int run_train(TrainArgs& a, const CLI::App* sub) {
    TrainConfig cfg = a.config.empty() ? a.cfg : train_config_from_json(read_text_file(a.config));
    if (!a.config.empty()) {
        // explicit flags override file values
        if (sub->count("--epochs")) cfg.epochs = a.cfg.epochs;
        if (sub->count("--steps")) cfg.steps_per_epoch = a.cfg.steps_per_epoch;
        if (sub->count("--batch")) cfg.batch = a.cfg.batch;
        if (sub->count("--lr")) cfg.opt.lr = a.cfg.opt.lr;
        if (sub->count("--seed")) cfg.seed = a.cfg.seed;
        if (sub->count("--patience")) cfg.patience = a.cfg.patience;
        if (sub->count("--p-min")) cfg.sampler.p_min = a.cfg.sampler.p_min;
        if (sub->count("--p-max")) cfg.sampler.p_max = a.cfg.sampler.p_max;
    }
    if (sub->count("--crop")) cfg.sampler.crop = parse_shape(a.crop);
    if (a.fixed_pairs) cfg.fresh_splits = false;
    if (a.unmasked) cfg.masked = false;

    const BitVolume data = read_qbs(a.data);
    const TrainResult r = train_loop(data, cfg);
    if (!a.out.empty())
        save_checkpoint(r.status == TrainStatus::aborted_non_finite ? r.last : r.best, a.out);
    if (!a.history.empty()) write_history_csv(r.history, a.history);

    ordered_json j;
    j["status"] = r.status == TrainStatus::completed       ? "completed"
                  : r.status == TrainStatus::early_stopped ? "early_stopped"
                                                           : "aborted_non_finite";
    j["steps"] = static_cast<std::int64_t>(r.history.size());
    j["best_epoch"] = r.best_epoch;
    j["best_val"] = r.best_val;
    std::cout << j.dump() << "\n";
    if (r.status == TrainStatus::aborted_non_finite) {
        std::cerr << "training aborted on a non-finite loss; diagnostic checkpoint written\n";
        return kExitNumeric;
    }
    return kExitOk;
}

int run_infer(InferArgs& a, const CLI::App* sub) {
    InferConfig cfg = a.config.empty() ? a.cfg : infer_config_from_json(read_text_file(a.config));
    if (!a.config.empty()) {
        if (sub->count("--shots")) cfg.shots = a.cfg.shots;
        if (sub->count("--shot-p")) cfg.shot_p = a.cfg.shot_p;
        if (sub->count("--overlap")) cfg.overlap = a.cfg.overlap;
        if (sub->count("--seed")) cfg.seed = a.cfg.seed;
    }
    if (sub->count("--tile")) cfg.tile = parse_shape(a.tile);
    if (a.median) cfg.combine = ShotCombine::median;
    if (a.feather) cfg.blend = TileBlend::cosine;

    const ModelState m = load_checkpoint(a.model);
    const BitVolume raw = read_qbs(a.in);
    const DenseVolume out = multi_shot(m, raw, cfg);
    write_qds(out, a.out);
    if (!a.preview_dir.empty()) {
        for (std::int64_t t = 0; t < out.shape().t; ++t) {
            char name[32];
            std::snprintf(name, sizeof(name), "/frame_%05lld.pgm", static_cast<long long>(t));
            export_pgm_frame(out, t, a.preview_dir + name);
        }
    }
    ordered_json j;
    j["out"] = a.out;
    j["photons"] = raw.popcount();
    double sum = 0.0;
    for (std::int64_t i = 0; i < out.volume(); ++i) sum += out[i];
    j["intensity_sum"] = sum;
    std::cout << j.dump() << "\n";
    return kExitOk;
}

int run_metrics(const MetricsArgs& a) {
    const DenseVolume pred = read_qds(a.pred);
    const DenseVolume gt = read_qds(a.gt);
    const MetricReport r = evaluate(pred, gt);
    if (!a.csv.empty()) {
        std::ofstream out(a.csv, std::ios::trunc);
        if (!out) throw IoError(IoErrc::write_failed, "cannot open " + a.csv);
        out << "frame,psnr,ssim\n";
        for (std::size_t i = 0; i < r.psnr.size(); ++i)
            out << i << ',' << format_double(r.psnr[i]) << ',' << format_double(r.ssim[i])
                << '\n';
    }
    ordered_json j;
    j["frames"] = static_cast<std::int64_t>(r.psnr.size());
    j["psnr"] = stats_json(r.psnr_stats);
    j["ssim"] = stats_json(r.ssim_stats);
    std::cout << j.dump() << "\n";
    return kExitOk;
}

int run_hotfix(const HotfixArgs& a) {
    const DenseVolume in = read_qds(a.in);
    const HotPixelResult r = hot_pixel_correct(in, a.z);
    write_qds(r.corrected, a.out);
    ordered_json j;
    j["out"] = a.out;
    ordered_json flagged = ordered_json::array();
    for (const auto& [y, x] : r.flagged) flagged.push_back({y, x});
    j["flagged"] = flagged;
    std::cout << j.dump() << "\n";
    return kExitOk;
}

int run_stats_check(std::uint64_t seed) {
    BatteryConfig cfg;
    cfg.seed = seed;
    bool all = true;
    for (const auto& r : run_stats_battery(cfg)) {
        std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << " (" << r.detail << ")\n";
        all &= r.pass;
    }
    return all ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quanta: dense video reconstruction from sparse 1-bit photon stacks"};
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "worker threads; results are identical for any count");

    ToyArgs toy;
    auto* toy_cmd = app.add_subcommand("toy", "generate the built-in reference scene");
    toy_cmd->add_option("--out", toy.out, "output .qds path")->required();
    toy_cmd->add_option("--frames", toy.frames);
    toy_cmd->add_option("--height", toy.height);
    toy_cmd->add_option("--width", toy.width);
    toy_cmd->add_option("--base", toy.cfg.base);
    toy_cmd->add_option("--texture-amp", toy.cfg.texture_amp);
    toy_cmd->add_option("--blob-amp", toy.cfg.blob_amp);
    toy_cmd->add_option("--blob-sigma", toy.cfg.blob_sigma);
    toy_cmd->add_option("--orbit", toy.cfg.orbit_radius);
    toy_cmd->add_option("--period", toy.cfg.period);

    SimArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Bernoulli photon sampling from a reference");
    sim_cmd->add_option("--ref", sim.ref, "reference .qds")->required();
    sim_cmd->add_option("--rate", sim.rate, "target mean photons/pixel/frame");
    sim_cmd->add_option("--seed", sim.seed);
    sim_cmd->add_option("--out", sim.out, "output .qbs path")->required();

    SplitArgs split;
    auto* split_cmd = app.add_subcommand("split", "emit one thinning as input/target/mask files");
    split_cmd->add_option("--in", split.in, "raw .qbs")->required();
    split_cmd->add_option("--p", split.p, "keep probability for the input half");
    split_cmd->add_option("--seed", split.seed);
    split_cmd->add_option("--out-prefix", split.prefix, "defaults to the input path");

    BinArgs bin;
    auto* bin_cmd = app.add_subcommand("bin", "temporal binning baseline");
    bin_cmd->add_option("--in", bin.in, "raw .qbs")->required();
    bin_cmd->add_option("--window", bin.window, "frames per bin");
    bin_cmd->add_option("--out", bin.out, "output .qds")->required();

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "self-supervised training on a photon stack");
    train_cmd->add_option("--data", train.data, "raw .qbs")->required();
    train_cmd->add_option("--out", train.out, "checkpoint path");
    train_cmd->add_option("--history", train.history, "loss history .csv");
    train_cmd->add_option("--config", train.config, "JSON training config");
    train_cmd->add_option("--epochs", train.cfg.epochs);
    train_cmd->add_option("--steps", train.cfg.steps_per_epoch);
    train_cmd->add_option("--batch", train.cfg.batch);
    train_cmd->add_option("--lr", train.cfg.opt.lr);
    train_cmd->add_option("--seed", train.cfg.seed);
    train_cmd->add_option("--patience", train.cfg.patience);
    train_cmd->add_option("--p-min", train.cfg.sampler.p_min);
    train_cmd->add_option("--p-max", train.cfg.sampler.p_max);
    train_cmd->add_option("--crop", train.crop, "crop t,h,w");
    train_cmd->add_flag("--fixed-pairs", train.fixed_pairs,
                        "diagnostic: reuse one batch instead of fresh splits");
    train_cmd->add_flag("--unmasked", train.unmasked, "diagnostic: drop the complement mask");

    InferArgs infer;
    auto* infer_cmd = app.add_subcommand("infer", "tiled reconstruction of a photon stack");
    infer_cmd->add_option("--model", infer.model, "checkpoint path")->required();
    infer_cmd->add_option("--in", infer.in, "raw .qbs")->required();
    infer_cmd->add_option("--out", infer.out, "output .qds")->required();
    infer_cmd->add_option("--config", infer.config, "JSON inference config");
    infer_cmd->add_option("--tile", infer.tile, "tile t,h,w");
    infer_cmd->add_option("--overlap", infer.cfg.overlap);
    infer_cmd->add_option("--shots", infer.cfg.shots);
    infer_cmd->add_option("--shot-p", infer.cfg.shot_p);
    infer_cmd->add_option("--seed", infer.cfg.seed);
    infer_cmd->add_flag("--median", infer.median, "combine shots by median instead of mean");
    infer_cmd->add_flag("--feather", infer.feather, "Hann-weighted overlap blending");
    infer_cmd->add_option("--preview-dir", infer.preview_dir, "export per-frame PGM previews");

    MetricsArgs metrics;
    auto* metrics_cmd = app.add_subcommand("metrics", "frame-wise PSNR/SSIM report");
    metrics_cmd->add_option("--pred", metrics.pred, "prediction .qds")->required();
    metrics_cmd->add_option("--gt", metrics.gt, "ground-truth .qds")->required();
    metrics_cmd->add_option("--csv", metrics.csv, "per-frame output csv");

    HotfixArgs hotfix;
    auto* hotfix_cmd = app.add_subcommand("hotfix", "flag and median-replace hot pixels");
    hotfix_cmd->add_option("--in", hotfix.in, "input .qds")->required();
    hotfix_cmd->add_option("--out", hotfix.out, "output .qds")->required();
    hotfix_cmd->add_option("--z", hotfix.z, "MAD threshold");

    std::uint64_t stats_seed = 1;
    auto* stats_cmd = app.add_subcommand("stats-check", "run the photon statistics battery");
    stats_cmd->add_option("--seed", stats_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    set_thread_count(threads);
    try {
        if (toy_cmd->parsed()) return run_toy(toy);
        if (sim_cmd->parsed()) return run_simulate(sim);
        if (split_cmd->parsed()) return run_split(split);
        if (bin_cmd->parsed()) return run_bin(bin);
        if (train_cmd->parsed()) return run_train(train, train_cmd);
        if (infer_cmd->parsed()) return run_infer(infer, infer_cmd);
        if (metrics_cmd->parsed()) return run_metrics(metrics);
        if (hotfix_cmd->parsed()) return run_hotfix(hotfix);
        if (stats_cmd->parsed()) return run_stats_check(stats_seed);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitUsage;
}
