#include "quanta/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "quanta/io.hpp"
#include "quanta/random.hpp"

namespace quanta {

void ModelConfig::validate() const {
    if (depth < 1) throw std::invalid_argument("model: depth must be >= 1");
    if (start_features < 1 || depth_scale < 1)
        throw std::invalid_argument("model: features must be >= 1");
    if (z_conv_levels < 0 || z_conv_levels > depth)
        throw std::invalid_argument("model: z_conv_levels must be in [0, depth]");
    if (norm == NormKind::group) {
        if (group_size < 1 || start_features % group_size != 0)
            throw std::invalid_argument("model: start_features must be divisible by group_size");
    }
    for (int i = 0; i + 1 < depth; ++i) {
        const int factor = level_3d(i) ? 8 : 4;
        if (features(i + 1) % factor != 0)
            throw std::invalid_argument(
                "model: features at each level must allow the pixel shuffle factor");
    }
}

int ModelConfig::features(int level) const {
    int f = start_features;
    for (int i = 0; i < level; ++i) f *= depth_scale;
    return f;
}

std::string ModelConfig::describe() const {
    return "depth=" + std::to_string(depth) + " start_features=" + std::to_string(start_features) +
           " depth_scale=" + std::to_string(depth_scale) +
           " z_conv_levels=" + std::to_string(z_conv_levels) +
           " group_size=" + std::to_string(group_size) +
           " norm=" + (norm == NormKind::group ? "group" : "none");
}

std::uint64_t ModelConfig::fingerprint() const {
    // FNV-1a over the canonical description
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : describe()) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------

namespace {

template <class T>
Tensor5T<T> like(const Tensor5T<T>& t) {
    return Tensor5T<T>(t.n(), t.c(), t.t(), t.h(), t.w());
}

template <class T>
void norm_forward(const ModelConfig& cfg, int channels, const NormParamT<T>& np,
                  const Tensor5T<T>& x, Tensor5T<T>& y, NormCache* nc) {
    if (cfg.norm == NormKind::group)
        ops::group_norm_forward(x, cfg.groups_for(channels), np.gamma, np.beta, y, nc);
    else
        y = x;
}

template <class T>
void norm_backward(const ModelConfig& cfg, int channels, const NormParamT<T>& np,
                   const Tensor5T<T>& x, const NormCache& nc, const Tensor5T<T>& gy,
                   Tensor5T<T>& gx, NormParamT<T>* gnp) {
    if (cfg.norm == NormKind::group)
        ops::group_norm_backward(x, cfg.groups_for(channels), np.gamma, nc, gy, gx,
                                 gnp ? &gnp->gamma : nullptr, gnp ? &gnp->beta : nullptr);
    else
        gx = gy;
}

// conv -> norm -> act, conv -> norm(+residual of first conv) -> act, then a
// third conv with the same norm/act treatment
template <class T>
Tensor5T<T> block_forward(const ModelConfig& cfg, const ConvBlockT<T>& p, int features,
                          const Tensor5T<T>& x, ConvBlockCacheT<T>* cc) {
    const std::int64_t N = x.n(), TT = x.t(), H = x.h(), W = x.w();
    Tensor5T<T> c1(N, features, TT, H, W);
    ops::conv3d_forward(x, p.conv1.w, p.conv1.b, c1);
    Tensor5T<T> g1 = like(c1);
    norm_forward(cfg, features, p.n1, c1, g1, cc ? &cc->n1 : nullptr);
    Tensor5T<T> a1 = like(g1);
    ops::gelu_forward(g1, a1);

    Tensor5T<T> r = like(c1);
    ops::conv3d_forward(a1, p.conv2.w, p.conv2.b, r);
    ops::add_inplace(r, c1);
    Tensor5T<T> g2 = like(r);
    norm_forward(cfg, features, p.n2, r, g2, cc ? &cc->n2 : nullptr);
    Tensor5T<T> a2 = like(g2);
    ops::gelu_forward(g2, a2);

    Tensor5T<T> c3 = like(a2);
    ops::conv3d_forward(a2, p.conv3.w, p.conv3.b, c3);
    Tensor5T<T> g3 = like(c3);
    norm_forward(cfg, features, p.n3, c3, g3, cc ? &cc->n3 : nullptr);
    Tensor5T<T> a3 = like(g3);
    ops::gelu_forward(g3, a3);

    if (cc) {
        cc->x = x;
        cc->c1 = std::move(c1);
        cc->g1 = std::move(g1);
        cc->a1 = std::move(a1);
        cc->r = std::move(r);
        cc->g2 = std::move(g2);
        cc->a2 = std::move(a2);
        cc->c3 = std::move(c3);
        cc->g3 = std::move(g3);
        cc->a3 = a3;
    }
    return a3;
}

template <class T>
Tensor5T<T> block_backward(const ModelConfig& cfg, const ConvBlockT<T>& p, int features,
                           const ConvBlockCacheT<T>& cc, const Tensor5T<T>& gout,
                           ConvBlockT<T>* gp) {
    Tensor5T<T> gg3 = like(cc.g3);
    ops::gelu_backward(cc.g3, gout, gg3);
    Tensor5T<T> gc3 = like(cc.c3);
    norm_backward(cfg, features, p.n3, cc.c3, cc.n3, gg3, gc3, gp ? &gp->n3 : nullptr);
    Tensor5T<T> ga2 = like(cc.a2);
    ops::conv3d_backward(cc.a2, p.conv3.w, gc3, &ga2, gp ? &gp->conv3.w : nullptr,
                         gp ? &gp->conv3.b : nullptr);

    Tensor5T<T> gg2 = like(cc.g2);
    ops::gelu_backward(cc.g2, ga2, gg2);
    Tensor5T<T> gr = like(cc.r);
    norm_backward(cfg, features, p.n2, cc.r, cc.n2, gg2, gr, gp ? &gp->n2 : nullptr);
    Tensor5T<T> ga1 = like(cc.a1);
    ops::conv3d_backward(cc.a1, p.conv2.w, gr, &ga1, gp ? &gp->conv2.w : nullptr,
                         gp ? &gp->conv2.b : nullptr);

    Tensor5T<T> gg1 = like(cc.g1);
    ops::gelu_backward(cc.g1, ga1, gg1);
    Tensor5T<T> gc1 = like(cc.c1);
    norm_backward(cfg, features, p.n1, cc.c1, cc.n1, gg1, gc1, gp ? &gp->n1 : nullptr);
    ops::add_inplace(gc1, gr);  // residual branch

    Tensor5T<T> gx = like(cc.x);
    ops::conv3d_backward(cc.x, p.conv1.w, gc1, &gx, gp ? &gp->conv1.w : nullptr,
                         gp ? &gp->conv1.b : nullptr);
    return gx;
}

}  // namespace

// ---------------------------------------------------------------------------

template <class T>
ModelStateT<T> init_model(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ModelStateT<T> m;
    m.config = cfg;
    m.init_seed = seed;

    const bool with_norm = cfg.norm == NormKind::group;
    auto make_conv = [](int oc, int ic, int kt, int kh, int kw) {
        ConvParamT<T> c;
        c.w = Tensor5T<T>(oc, ic, kt, kh, kw);
        c.b.assign(static_cast<std::size_t>(oc), T(0));
        return c;
    };
    auto make_norm = [&](int channels) {
        NormParamT<T> n;
        if (with_norm) {
            n.gamma.assign(static_cast<std::size_t>(channels), T(0));
            n.beta.assign(static_cast<std::size_t>(channels), T(0));
        }
        return n;
    };
    auto make_block = [&](int oc, int ic, int kt) {
        ConvBlockT<T> b;
        b.conv1 = make_conv(oc, ic, kt, 3, 3);
        b.conv2 = make_conv(oc, oc, kt, 3, 3);
        b.conv3 = make_conv(oc, oc, kt, 3, 3);
        b.n1 = make_norm(oc);
        b.n2 = make_norm(oc);
        b.n3 = make_norm(oc);
        return b;
    };

    m.down.reserve(cfg.depth);
    for (int i = 0; i < cfg.depth; ++i) {
        const int kt = cfg.level_3d(i) ? 3 : 1;
        const int ic = i == 0 ? 1 : cfg.features(i - 1);
        m.down.push_back(make_block(cfg.features(i), ic, kt));
    }
    m.up.resize(static_cast<std::size_t>(std::max(0, cfg.depth - 1)));
    for (int i = cfg.depth - 2; i >= 0; --i) {
        const int kt = cfg.level_3d(i) ? 3 : 1;
        const int r = cfg.level_3d(i) ? 8 : 4;
        const int f = cfg.features(i);
        UpBlockT<T>& u = m.up[static_cast<std::size_t>(i)];
        u.expand = make_conv(f, cfg.features(i + 1) / r, 1, 1, 1);
        u.ne = make_norm(f);
        u.block = make_block(f, 2 * f, kt);
    }
    m.out_conv = make_conv(1, cfg.features(0), 1, 1, 1);

    Rng rng(seed, 0x1717);
    for (auto& p : param_refs(m)) {
        if (p.name.ends_with(".weight")) {
            const double fan_in = static_cast<double>(p.dims[1] * p.dims[2] * p.dims[3] * p.dims[4]);
            const double bound = std::sqrt(1.0 / fan_in);
            for (std::int64_t i = 0; i < p.size; ++i)
                p.data[i] = static_cast<T>((2.0 * rng.next_double() - 1.0) * bound);
        } else if (p.name.ends_with(".gamma")) {
            for (std::int64_t i = 0; i < p.size; ++i) p.data[i] = T(1);
        }
        // biases and shifts stay zero
    }
    return m;
}

template <class T>
ModelStateT<T> zero_like(const ModelStateT<T>& likes) {
    ModelStateT<T> out = likes;
    for (auto& p : param_refs(out))
        for (std::int64_t i = 0; i < p.size; ++i) p.data[i] = T(0);
    return out;
}

template <class T>
Tensor5T<T> model_forward(const ModelStateT<T>& m, const Tensor5T<T>& x,
                          ForwardCacheT<T>* cache) {
    const ModelConfig& cfg = m.config;
    if (x.c() != 1) throw std::invalid_argument("model_forward: expected one input channel");
    if (x.t() % cfg.temporal_multiple() != 0 || x.h() % cfg.spatial_multiple() != 0 ||
        x.w() % cfg.spatial_multiple() != 0)
        throw std::invalid_argument("model_forward: input dims not divisible for this depth");

    const int depth = cfg.depth;
    if (cache) {
        cache->input = x;
        cache->down.assign(static_cast<std::size_t>(depth), {});
        cache->pool_argmax.assign(static_cast<std::size_t>(depth - 1), {});
        cache->up_pre.assign(static_cast<std::size_t>(depth - 1), {});
        cache->up_block.assign(static_cast<std::size_t>(depth - 1), {});
    }

    std::vector<Tensor5T<T>> skips(static_cast<std::size_t>(depth));
    Tensor5T<T> cur = x;
    for (int i = 0; i < depth; ++i) {
        Tensor5T<T> a3 = block_forward(cfg, m.down[static_cast<std::size_t>(i)], cfg.features(i),
                                       cur, cache ? &cache->down[static_cast<std::size_t>(i)]
                                                  : nullptr);
        if (i < depth - 1) {
            const int ptf = cfg.level_3d(i) ? 2 : 1;
            Tensor5T<T> pooled(a3.n(), a3.c(), a3.t() / ptf, a3.h() / 2, a3.w() / 2);
            std::vector<std::int64_t> local_argmax;
            ops::maxpool_forward(a3, ptf, 2, 2, pooled,
                                 cache ? cache->pool_argmax[static_cast<std::size_t>(i)]
                                       : local_argmax);
            skips[static_cast<std::size_t>(i)] = std::move(a3);
            cur = std::move(pooled);
        } else {
            cur = std::move(a3);
        }
    }

    for (int i = depth - 2; i >= 0; --i) {
        const int rt = cfg.level_3d(i) ? 2 : 1;
        const int r = rt * 4;
        const int f = cfg.features(i);
        Tensor5T<T> shuf(cur.n(), cur.c() / r, cur.t() * rt, cur.h() * 2, cur.w() * 2);
        ops::pixel_shuffle_forward(cur, rt, 2, 2, shuf);
        Tensor5T<T> e(shuf.n(), f, shuf.t(), shuf.h(), shuf.w());
        const UpBlockT<T>& u = m.up[static_cast<std::size_t>(i)];
        ops::conv3d_forward(shuf, u.expand.w, u.expand.b, e);
        Tensor5T<T> ge = like(e);
        norm_forward(cfg, f, u.ne, e, ge,
                     cache ? &cache->up_pre[static_cast<std::size_t>(i)].ne : nullptr);
        Tensor5T<T> ae = like(ge);
        ops::gelu_forward(ge, ae);
        Tensor5T<T> cat(ae.n(), 2 * f, ae.t(), ae.h(), ae.w());
        ops::concat_channels(ae, skips[static_cast<std::size_t>(i)], cat);
        if (cache) {
            auto& pre = cache->up_pre[static_cast<std::size_t>(i)];
            pre.shuf = std::move(shuf);
            pre.e = std::move(e);
            pre.ge = std::move(ge);
        }
        cur = block_forward(cfg, u.block, f, cat,
                            cache ? &cache->up_block[static_cast<std::size_t>(i)] : nullptr);
    }

    Tensor5T<T> logits(cur.n(), 1, cur.t(), cur.h(), cur.w());
    ops::conv3d_forward(cur, m.out_conv.w, m.out_conv.b, logits);
    return logits;
}

template <class T>
void model_backward(const ModelStateT<T>& m, const ForwardCacheT<T>& cache,
                    const Tensor5T<T>& grad_logits, ModelStateT<T>* grads) {
    const ModelConfig& cfg = m.config;
    const int depth = cfg.depth;

    const Tensor5T<T>& top_in =
        depth >= 2 ? cache.up_block[0].a3 : cache.down.back().a3;
    Tensor5T<T> g = like(top_in);
    ops::conv3d_backward(top_in, m.out_conv.w, grad_logits, &g, &grads->out_conv.w,
                         &grads->out_conv.b);

    // back through the up path; collect skip gradients per level
    std::vector<Tensor5T<T>> g_skip(static_cast<std::size_t>(depth));
    for (int i = 0; i <= depth - 2; ++i) {
        const int rt = cfg.level_3d(i) ? 2 : 1;
        const int r = rt * 4;
        const int f = cfg.features(i);
        const UpBlockT<T>& u = m.up[static_cast<std::size_t>(i)];
        const auto& pre = cache.up_pre[static_cast<std::size_t>(i)];
        Tensor5T<T> gcat =
            block_backward(cfg, u.block, f, cache.up_block[static_cast<std::size_t>(i)], g,
                           &grads->up[static_cast<std::size_t>(i)].block);
        Tensor5T<T> gae(gcat.n(), f, gcat.t(), gcat.h(), gcat.w());
        g_skip[static_cast<std::size_t>(i)] = Tensor5T<T>(gcat.n(), f, gcat.t(), gcat.h(), gcat.w());
        ops::split_channels(gcat, gae, g_skip[static_cast<std::size_t>(i)]);
        Tensor5T<T> gge = like(pre.ge);
        ops::gelu_backward(pre.ge, gae, gge);
        Tensor5T<T> ge_ = like(pre.e);
        norm_backward(cfg, f, u.ne, pre.e, pre.ne, gge, ge_,
                      &grads->up[static_cast<std::size_t>(i)].ne);
        Tensor5T<T> gshuf = like(pre.shuf);
        ops::conv3d_backward(pre.shuf, u.expand.w, ge_, &gshuf,
                             &grads->up[static_cast<std::size_t>(i)].expand.w,
                             &grads->up[static_cast<std::size_t>(i)].expand.b);
        Tensor5T<T> gdeep(gshuf.n(), gshuf.c() * r, gshuf.t() / rt, gshuf.h() / 2,
                          gshuf.w() / 2);
        ops::pixel_shuffle_backward(gshuf, rt, 2, 2, gdeep);
        g = std::move(gdeep);
    }

    // back through the down path; g holds the gradient at down[i].a3
    for (int i = depth - 1; i >= 0; --i) {
        Tensor5T<T> gx =
            block_backward(cfg, m.down[static_cast<std::size_t>(i)], cfg.features(i),
                           cache.down[static_cast<std::size_t>(i)], g,
                           &grads->down[static_cast<std::size_t>(i)]);
        if (i > 0) {
            const auto& below = cache.down[static_cast<std::size_t>(i - 1)].a3;
            Tensor5T<T> gpool = like(below);
            ops::maxpool_backward(cache.pool_argmax[static_cast<std::size_t>(i - 1)], gx, gpool);
            ops::add_inplace(gpool, g_skip[static_cast<std::size_t>(i - 1)]);
            g = std::move(gpool);
        }
    }
}

// ---------------------------------------------------------------------------

template <class T>
std::vector<ParamRef<T>> param_refs(ModelStateT<T>& m) {
    std::vector<ParamRef<T>> out;
    const bool with_norm = m.config.norm == NormKind::group;
    auto add_tensor = [&](const std::string& name, Tensor5T<T>& t) {
        out.push_back(ParamRef<T>{name, t.data.data(), t.numel(), t.dims});
    };
    auto add_vector = [&](const std::string& name, std::vector<T>& v) {
        out.push_back(ParamRef<T>{name, v.data(), static_cast<std::int64_t>(v.size()),
                                  {static_cast<std::int64_t>(v.size()), 1, 1, 1, 1}});
    };
    auto add_conv = [&](const std::string& prefix, ConvParamT<T>& c) {
        add_tensor(prefix + ".weight", c.w);
        add_vector(prefix + ".bias", c.b);
    };
    auto add_norm = [&](const std::string& prefix, NormParamT<T>& n) {
        if (!with_norm) return;
        add_vector(prefix + ".gamma", n.gamma);
        add_vector(prefix + ".beta", n.beta);
    };
    auto add_block = [&](const std::string& prefix, ConvBlockT<T>& b) {
        add_conv(prefix + ".conv1", b.conv1);
        add_norm(prefix + ".norm1", b.n1);
        add_conv(prefix + ".conv2", b.conv2);
        add_norm(prefix + ".norm2", b.n2);
        add_conv(prefix + ".conv3", b.conv3);
        add_norm(prefix + ".norm3", b.n3);
    };
    for (int i = 0; i < m.config.depth; ++i)
        add_block("down" + std::to_string(i), m.down[static_cast<std::size_t>(i)]);
    for (int i = m.config.depth - 2; i >= 0; --i) {
        const std::string prefix = "up" + std::to_string(i);
        UpBlockT<T>& u = m.up[static_cast<std::size_t>(i)];
        add_conv(prefix + ".expand", u.expand);
        add_norm(prefix + ".expand_norm", u.ne);
        add_block(prefix, u.block);
    }
    add_conv("out", m.out_conv);
    return out;
}

template <class T>
std::int64_t param_count(const ModelStateT<T>& m) {
    auto& mutable_m = const_cast<ModelStateT<T>&>(m);
    std::int64_t total = 0;
    for (const auto& p : param_refs(mutable_m)) total += p.size;
    return total;
}

std::int64_t expected_param_count(const ModelConfig& cfg) {
    // Every conv contributes out*in*kt*kh*kw weights plus out biases; every
    // norm (when enabled) contributes 2*channels. Down blocks hold three
    // convs at their level's kernel; up blocks add a 1x1x1 expand conv; the
    // head is a 1x1x1 conv to one channel.
    const std::int64_t nrm = cfg.norm == NormKind::group ? 2 : 0;
    std::int64_t total = 0;
    for (int i = 0; i < cfg.depth; ++i) {
        const std::int64_t k = (cfg.level_3d(i) ? 3 : 1) * 9;
        const std::int64_t f = cfg.features(i);
        const std::int64_t ic = i == 0 ? 1 : cfg.features(i - 1);
        total += f * ic * k + f + nrm * f;
        total += 2 * (f * f * k + f + nrm * f);
    }
    for (int i = 0; i <= cfg.depth - 2; ++i) {
        const std::int64_t k = (cfg.level_3d(i) ? 3 : 1) * 9;
        const std::int64_t r = cfg.level_3d(i) ? 8 : 4;
        const std::int64_t f = cfg.features(i);
        total += f * (cfg.features(i + 1) / r) + f + nrm * f;  // expand
        total += f * (2 * f) * k + f + nrm * f;                // conv1 on the concat
        total += 2 * (f * f * k + f + nrm * f);
    }
    total += cfg.features(0) + 1;  // head
    return total;
}

// ---------------------------------------------------------------------------

namespace {

using ordered_json = nlohmann::ordered_json;

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

ordered_json arch_json(const ModelConfig& cfg) {
    ordered_json a;
    a["depth"] = cfg.depth;
    a["start_features"] = cfg.start_features;
    a["depth_scale"] = cfg.depth_scale;
    a["z_conv_levels"] = cfg.z_conv_levels;
    a["group_size"] = cfg.group_size;
    a["norm"] = cfg.norm == NormKind::group ? "group" : "none";
    return a;
}

ModelConfig arch_from_json(const ordered_json& a) {
    ModelConfig cfg;
    cfg.depth = a.at("depth").get<int>();
    cfg.start_features = a.at("start_features").get<int>();
    cfg.depth_scale = a.at("depth_scale").get<int>();
    cfg.z_conv_levels = a.at("z_conv_levels").get<int>();
    cfg.group_size = a.at("group_size").get<int>();
    const std::string n = a.at("norm").get<std::string>();
    if (n == "group")
        cfg.norm = NormKind::group;
    else if (n == "none")
        cfg.norm = NormKind::none;
    else
        throw IoError(IoErrc::fingerprint_mismatch, "checkpoint: unknown norm kind");
    return cfg;
}

}  // namespace

void save_checkpoint(const ModelState& m, const std::string& path) {
    auto refs = param_refs(const_cast<ModelState&>(m));
    ordered_json j;
    j["format_version"] = 1;
    j["arch"] = arch_json(m.config);
    j["fingerprint"] = hex64(m.config.fingerprint());
    j["init_seed"] = m.init_seed;
    j["step_count"] = m.step_count;
    ordered_json params = ordered_json::array();
    for (const auto& p : refs) {
        ordered_json e;
        e["name"] = p.name;
        e["dims"] = p.dims;
        params.push_back(e);
    }
    j["params"] = params;
    const std::string header = j.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrc::write_failed, "cannot open " + path + " for writing");
    out.write("QCK1", 4);
    const std::uint32_t len = static_cast<std::uint32_t>(header.size());
    char lenb[4] = {static_cast<char>(len & 0xff), static_cast<char>((len >> 8) & 0xff),
                    static_cast<char>((len >> 16) & 0xff), static_cast<char>((len >> 24) & 0xff)};
    out.write(lenb, 4);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& p : refs)
        out.write(reinterpret_cast<const char*>(p.data),
                  static_cast<std::streamsize>(p.size * 4));
    if (!out) throw IoError(IoErrc::write_failed, "short write on " + path);
}

ModelState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrc::open_failed, "cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "QCK1", 4) != 0)
        throw IoError(IoErrc::bad_magic, path + ": bad checkpoint magic");
    unsigned char lenb[4];
    in.read(reinterpret_cast<char*>(lenb), 4);
    if (!in) throw IoError(IoErrc::truncated, path + ": truncated header");
    const std::uint32_t len = static_cast<std::uint32_t>(lenb[0]) | (lenb[1] << 8) |
                              (lenb[2] << 16) | (static_cast<std::uint32_t>(lenb[3]) << 24);
    std::string header(len, '\0');
    in.read(header.data(), len);
    if (!in) throw IoError(IoErrc::truncated, path + ": truncated header");
    ordered_json j;
    try {
        j = ordered_json::parse(header);
    } catch (const std::exception& e) {
        throw IoError(IoErrc::bad_magic, path + ": unparsable checkpoint header");
    }

    const ModelConfig cfg = arch_from_json(j.at("arch"));
    if (j.at("fingerprint").get<std::string>() != hex64(cfg.fingerprint()))
        throw IoError(IoErrc::fingerprint_mismatch,
                      path + ": architecture fingerprint mismatch");

    ModelState m = init_model<float>(cfg, j.at("init_seed").get<std::uint64_t>());
    m.step_count = j.at("step_count").get<std::int64_t>();
    auto refs = param_refs(m);
    const auto& plist = j.at("params");
    if (plist.size() != refs.size())
        throw IoError(IoErrc::fingerprint_mismatch, path + ": parameter list mismatch");
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (plist[i].at("name").get<std::string>() != refs[i].name)
            throw IoError(IoErrc::fingerprint_mismatch,
                          path + ": parameter name mismatch at " + refs[i].name);
        in.read(reinterpret_cast<char*>(refs[i].data),
                static_cast<std::streamsize>(refs[i].size * 4));
        if (!in) throw IoError(IoErrc::truncated, path + ": truncated parameter payload");
    }
    return m;
}

// ---------------------------------------------------------------------------

template ModelStateT<float> init_model<float>(const ModelConfig&, std::uint64_t);
template ModelStateT<double> init_model<double>(const ModelConfig&, std::uint64_t);
template ModelStateT<float> zero_like<float>(const ModelStateT<float>&);
template ModelStateT<double> zero_like<double>(const ModelStateT<double>&);
template Tensor5T<float> model_forward<float>(const ModelStateT<float>&, const Tensor5T<float>&,
                                              ForwardCacheT<float>*);
template Tensor5T<double> model_forward<double>(const ModelStateT<double>&,
                                                const Tensor5T<double>&, ForwardCacheT<double>*);
template void model_backward<float>(const ModelStateT<float>&, const ForwardCacheT<float>&,
                                    const Tensor5T<float>&, ModelStateT<float>*);
template void model_backward<double>(const ModelStateT<double>&, const ForwardCacheT<double>&,
                                     const Tensor5T<double>&, ModelStateT<double>*);
template std::vector<ParamRef<float>> param_refs<float>(ModelStateT<float>&);
template std::vector<ParamRef<double>> param_refs<double>(ModelStateT<double>&);
template std::int64_t param_count<float>(const ModelStateT<float>&);
template std::int64_t param_count<double>(const ModelStateT<double>&);

}  // namespace quanta
