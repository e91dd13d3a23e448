#include "radifusion/backbone.hpp"

#include <cmath>

#include "radifusion/error.hpp"
#include "radifusion/rng.hpp"

namespace radif {

namespace {

void check_config(const BackboneConfig& cfg) {
    if (cfg.stem_channels < 1 || cfg.layer_channels.empty() || cfg.blocks_per_layer < 1 || cfg.embed_dim < 1 ||
        cfg.temporal_kernel < 1)
        throw Error::validation("invalid backbone configuration");
    if (cfg.shift_layer != 0 && cfg.nonlocal_layer != 0)
        throw Error::validation("at most one attention kind may be enabled");
    const int nl = static_cast<int>(cfg.layer_channels.size());
    for (int l : {cfg.shift_layer, cfg.nonlocal_layer})
        if (l < 0 || l > nl) throw Error::validation("attention layer index out of range");
    if (!cfg.layer_strides.empty() && static_cast<int>(cfg.layer_strides.size()) != nl)
        throw Error::validation("layer_strides must match layer_channels");
}

Tensor he_conv(Rng& rng, int cout, int cin, int kt, int kh, int kw) {
    Tensor w({cout, cin, kt, kh, kw});
    const double scale = std::sqrt(2.0 / (static_cast<double>(cin) * kt * kh * kw));
    for (std::int64_t i = 0; i < w.size(); ++i) w[i] = rng.gaussian(0.0, scale);
    return w;
}

} // namespace

std::vector<int> BackboneConfig::strides() const {
    if (!layer_strides.empty()) return layer_strides;
    std::vector<int> s(layer_channels.size(), 2);
    s[0] = 1;
    return s;
}

int BackboneConfig::total_stride() const {
    int total = 2; // stem
    for (int s : strides()) total *= s;
    return total;
}

Backbone Backbone::build(const BackboneConfig& cfg, std::uint64_t seed) {
    check_config(cfg);
    Backbone b;
    b.cfg_ = cfg;
    Rng rng(Rng::derive(seed, 0xbac0));

    auto put = [&](const std::string& name, Tensor t) { b.params_.emplace(name, std::move(t)); };

    put("stem.w", he_conv(rng, cfg.stem_channels, 1, 1, 3, 3));
    put("stem.scale", Tensor::full({cfg.stem_channels}, 1.0));
    put("stem.shift", Tensor::zeros({cfg.stem_channels}));

    const std::vector<int> strides = cfg.strides();
    int in_ch = cfg.stem_channels;
    for (std::size_t l = 0; l < cfg.layer_channels.size(); ++l) {
        const int out_ch = cfg.layer_channels[l];
        for (int blk = 0; blk < cfg.blocks_per_layer; ++blk) {
            const std::string pre = "l" + std::to_string(l + 1) + ".b" + std::to_string(blk) + ".";
            const int stride = blk == 0 ? strides[l] : 1;
            const int block_in = blk == 0 ? in_ch : out_ch;
            const int kt = blk == 0 ? cfg.temporal_kernel : 1;
            put(pre + "conv1.w", he_conv(rng, out_ch, block_in, kt, 3, 3));
            put(pre + "n1.scale", Tensor::full({out_ch}, 1.0));
            put(pre + "n1.shift", Tensor::zeros({out_ch}));
            put(pre + "conv2.w", he_conv(rng, out_ch, out_ch, 1, 3, 3));
            put(pre + "n2.scale", Tensor::full({out_ch}, 1.0));
            put(pre + "n2.shift", Tensor::zeros({out_ch}));
            if (stride != 1 || block_in != out_ch) put(pre + "skip.w", he_conv(rng, out_ch, block_in, 1, 1, 1));
        }
        in_ch = out_ch;
    }

    const int attn_layer = cfg.shift_layer != 0 ? cfg.shift_layer : cfg.nonlocal_layer;
    if (attn_layer != 0) {
        const int c = cfg.layer_channels[static_cast<std::size_t>(attn_layer - 1)];
        if (cfg.shift_layer != 0) {
            ShiftConfig sc = cfg.shift_flags;
            sc.c_in = c;
            const int cb = sc.bottleneck();
            const double ps = 1.0 / std::sqrt(static_cast<double>(c));
            const double fs = 1.0 / std::sqrt(static_cast<double>(cb));
            auto gm = [&](int r, int cc, double s) {
                Tensor t({r, cc});
                for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.gaussian(0.0, s);
                return t;
            };
            put("attn.wq", gm(c, cb, ps));
            if (!sc.share_query_key) put("attn.wk", gm(c, cb, ps));
            put("attn.wv", gm(c, cb, ps));
            put("attn.fcq_w", gm(cb, 1, fs));
            put("attn.fcq_b", Tensor::zeros({1}));
            if (!sc.share_alpha_beta) {
                put("attn.fck_w", gm(cb, 1, fs));
                put("attn.fck_b", Tensor::zeros({1}));
            }
            put("attn.wo", Tensor::zeros({cb, c})); // identity start
        } else {
            const int cb = std::max(1, c / 2);
            const double ps = 1.0 / std::sqrt(static_cast<double>(c));
            auto gm = [&](int r, int cc, double s) {
                Tensor t({r, cc});
                for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.gaussian(0.0, s);
                return t;
            };
            put("attn.theta", gm(c, cb, ps));
            put("attn.phi", gm(c, cb, ps));
            put("attn.g", gm(c, cb, ps));
            put("attn.wo", Tensor::zeros({cb, c}));
        }
    }

    const int c_last = cfg.layer_channels.back();
    Tensor hw({c_last, cfg.embed_dim});
    const double hs = std::sqrt(2.0 / static_cast<double>(c_last));
    for (std::int64_t i = 0; i < hw.size(); ++i) hw[i] = rng.gaussian(0.0, hs);
    put("head.w", std::move(hw));
    put("head.b", Tensor::zeros({cfg.embed_dim}));
    return b;
}

VarId Backbone::Vars::at(const std::string& name) const {
    const auto it = ids.find(name);
    if (it == ids.end()) throw Error::runtime("unknown backbone parameter: " + name);
    return it->second;
}

Backbone::Vars Backbone::register_params(Tape& tape, bool requires_grad) const {
    Vars v;
    for (const auto& [name, tensor] : params_) v.ids.emplace(name, tape.input(tensor, requires_grad));
    return v;
}

Backbone::Out Backbone::forward(Tape& tape, const Vars& vars, VarId video) const {
    const Tensor& xv = tape.value(video);
    if (xv.rank() != 4 || xv.dim(0) != 1)
        throw Error::validation("backbone expects a [1,T,H,W] video, got " + shape_str(xv.shape()));
    const int h = xv.dim(2), w = xv.dim(3);
    const int total = cfg_.total_stride();
    if (h % total != 0 || w % total != 0)
        throw Error::validation("spatial dims " + std::to_string(h) + "x" + std::to_string(w) +
                                " must be divisible by the total stride " + std::to_string(total));

    // per-channel affine in place of batch statistics
    auto affine = [&](VarId x, const std::string& scale, const std::string& shift) {
        const int c = tape.value(x).dim(0);
        const VarId s = tape.reshape(vars.at(scale), {c, 1, 1, 1});
        const VarId b = tape.reshape(vars.at(shift), {c, 1, 1, 1});
        return tape.add(tape.mul(x, s), b);
    };

    Conv3dOpts stem_opts;
    stem_opts.stride = 2;
    stem_opts.pad = 1;
    stem_opts.temporal = cfg_.temporal;
    VarId x = tape.relu(affine(tape.conv3d(video, vars.at("stem.w"), stem_opts), "stem.scale", "stem.shift"));

    Out out;
    const std::vector<int> strides = cfg_.strides();
    const int attn_layer = cfg_.shift_layer != 0 ? cfg_.shift_layer : cfg_.nonlocal_layer;
    for (std::size_t l = 0; l < cfg_.layer_channels.size(); ++l) {
        for (int blk = 0; blk < cfg_.blocks_per_layer; ++blk) {
            const std::string pre = "l" + std::to_string(l + 1) + ".b" + std::to_string(blk) + ".";
            const int stride = blk == 0 ? strides[l] : 1;
            const bool reshaped = vars.ids.count(pre + "skip.w") != 0;

            Conv3dOpts o1;
            o1.stride = stride;
            o1.pad = 1;
            o1.temporal = cfg_.temporal;
            VarId hvar = tape.relu(affine(tape.conv3d(x, vars.at(pre + "conv1.w"), o1), pre + "n1.scale", pre + "n1.shift"));
            Conv3dOpts o2;
            o2.pad = 1;
            o2.temporal = cfg_.temporal;
            hvar = affine(tape.conv3d(hvar, vars.at(pre + "conv2.w"), o2), pre + "n2.scale", pre + "n2.shift");

            VarId skip = x;
            if (reshaped) {
                Conv3dOpts os;
                os.stride = stride;
                os.temporal = cfg_.temporal;
                skip = tape.conv3d(x, vars.at(pre + "skip.w"), os);
            }
            x = tape.relu(tape.add(hvar, skip));
        }

        if (attn_layer == static_cast<int>(l) + 1) {
            const Tensor& fv = tape.value(x);
            const int c = fv.dim(0), ft = fv.dim(1), fh = fv.dim(2), fw = fv.dim(3);
            const int n = ft * fh * fw;
            const VarId flat = tape.transpose(tape.reshape(x, {c, n})); // [n, c]
            VarId mixed;
            if (cfg_.shift_layer != 0) {
                ShiftConfig sc = cfg_.shift_flags;
                sc.c_in = c;
                ShiftParams p;
                p.wq = vars.at("attn.wq");
                if (!sc.share_query_key) p.wk = vars.at("attn.wk");
                p.wv = vars.at("attn.wv");
                p.fcq_w = vars.at("attn.fcq_w");
                p.fcq_b = vars.at("attn.fcq_b");
                if (!sc.share_alpha_beta) {
                    p.fck_w = vars.at("attn.fck_w");
                    p.fck_b = vars.at("attn.fck_b");
                }
                p.wo = vars.at("attn.wo");
                ShiftOut so = shift_forward(tape, flat, sc, p);
                mixed = so.y;
                out.alpha = so.alpha;
                out.beta = so.beta;
            } else {
                NonlocalParams p;
                p.theta = vars.at("attn.theta");
                p.phi = vars.at("attn.phi");
                p.g = vars.at("attn.g");
                p.wo = vars.at("attn.wo");
                mixed = nonlocal_forward(tape, flat, std::max(1, c / 2), p, cfg_.nonlocal_cap);
            }
            out.at = ft;
            out.ah = fh;
            out.aw = fw;
            x = tape.reshape(tape.transpose(mixed), {c, ft, fh, fw});
        }
    }

    // global average pool, then the embedding projection
    const Tensor& fv = tape.value(x);
    const int c = fv.dim(0);
    const VarId pooled = tape.reduce_mean(tape.reshape(x, {c, static_cast<int>(fv.size()) / c}), 1); // [c]
    const VarId emb = tape.add(tape.matmul(tape.reshape(pooled, {1, c}), vars.at("head.w")), vars.at("head.b"));
    out.embedding = tape.reshape(emb, {cfg_.embed_dim});
    return out;
}

Tensor inflate(const Tensor& w2d, int t) {
    if (t < 1) throw Error::validation("temporal extent must be at least 1");
    std::vector<int> s = w2d.shape();
    if (s.size() == 5) {
        if (s[2] != 1) throw Error::validation("inflation source must have temporal extent 1, got " + shape_str(s));
        s.erase(s.begin() + 2);
    }
    if (s.size() != 4) throw Error::validation("inflation expects a [Cout,Cin,k,k] kernel, got " + shape_str(w2d.shape()));
    Tensor out({s[0], s[1], t, s[2], s[3]});
    const std::int64_t plane = static_cast<std::int64_t>(s[2]) * s[3];
    const std::int64_t pairs = static_cast<std::int64_t>(s[0]) * s[1];
    for (std::int64_t p = 0; p < pairs; ++p)
        for (int tt = 0; tt < t; ++tt)
            for (std::int64_t i = 0; i < plane; ++i)
                out[(p * t + tt) * plane + i] = w2d[p * plane + i] / t;
    return out;
}

Backbone inflate_backbone(const Backbone& b2d, int t) {
    if (b2d.config().temporal_kernel != 1)
        throw Error::validation("inflation source must be a temporal-extent-1 backbone");
    BackboneConfig cfg = b2d.config();
    cfg.temporal_kernel = t;
    Backbone b3d = Backbone::build(cfg, 0);
    b3d.params() = b2d.params();
    for (std::size_t l = 0; l < cfg.layer_channels.size(); ++l) {
        const std::string name = "l" + std::to_string(l + 1) + ".b0.conv1.w";
        b3d.params()[name] = inflate(b2d.params().at(name), t);
    }
    return b3d;
}

double static_equivalence_check(const Backbone& b2d, const Backbone& b3d, const Tensor& frame, int t_frames) {
    if (frame.rank() != 2) throw Error::validation("expected an [H,W] frame, got " + shape_str(frame.shape()));
    if (t_frames < 1) throw Error::validation("need at least one frame");
    {
        BackboneConfig a = b2d.config(), b = b3d.config();
        a.temporal_kernel = b.temporal_kernel = 0;
        if (a.layer_channels != b.layer_channels || a.stem_channels != b.stem_channels ||
            a.blocks_per_layer != b.blocks_per_layer || a.embed_dim != b.embed_dim ||
            a.shift_layer != b.shift_layer || a.nonlocal_layer != b.nonlocal_layer)
            throw Error::validation("backbone architectures differ");
    }
    const int h = frame.dim(0), w = frame.dim(1);

    Tape t2;
    Backbone::Vars v2 = b2d.register_params(t2, false);
    const VarId single = t2.input(Tensor({1, 1, h, w}, frame.vec()));
    const Tensor e2 = t2.value(b2d.forward(t2, v2, single).embedding);

    Tensor video({1, t_frames, h, w});
    for (int tt = 0; tt < t_frames; ++tt)
        for (std::int64_t i = 0; i < frame.size(); ++i) video[tt * frame.size() + i] = frame[i];
    Tape t3;
    Backbone::Vars v3 = b3d.register_params(t3, false);
    const Tensor e3 = t3.value(b3d.forward(t3, v3, t3.input(video)).embedding);

    if (!e2.same_shape(e3)) throw Error::validation("embedding dims differ");
    double diff = 0.0;
    for (std::int64_t i = 0; i < e2.size(); ++i) diff = std::max(diff, std::abs(e2[i] - e3[i]));
    return diff;
}

} // namespace radif
