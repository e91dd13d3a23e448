#include "radifusion/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "radifusion/error.hpp"

namespace radif {

namespace {

void check_config(const ShiftConfig& cfg) {
    if (cfg.c_in < 1) throw Error::validation("attention needs at least one input channel");
    const int cb = cfg.bottleneck();
    if (cb < 1 || cb > cfg.c_in)
        throw Error::validation("bottleneck width " + std::to_string(cb) + " must lie in [1, " +
                                std::to_string(cfg.c_in) + "]");
}

Tensor gaussian_matrix(Rng& rng, int rows, int cols, double scale) {
    Tensor t({rows, cols});
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.gaussian(0.0, scale);
    return t;
}

} // namespace

int ShiftConfig::bottleneck() const { return c_b > 0 ? c_b : std::max(1, c_in / 2); }

std::vector<std::pair<std::string, VarId>> ShiftParams::vars() const {
    std::vector<std::pair<std::string, VarId>> v;
    const std::pair<const char*, VarId> all[] = {{"wq", wq},       {"wk", wk},       {"wv", wv},
                                                 {"fcq_w", fcq_w}, {"fcq_b", fcq_b}, {"fck_w", fck_w},
                                                 {"fck_b", fck_b}, {"wo", wo}};
    for (const auto& [name, id] : all)
        if (id >= 0) v.emplace_back(name, id);
    return v;
}

ShiftParams shift_params_init(Tape& tape, const ShiftConfig& cfg, Rng& rng, double out_scale) {
    check_config(cfg);
    const int c = cfg.c_in, cb = cfg.bottleneck();
    const double proj_scale = 1.0 / std::sqrt(static_cast<double>(c));
    const double fc_scale = 1.0 / std::sqrt(static_cast<double>(cb));

    ShiftParams p;
    p.wq = tape.input(gaussian_matrix(rng, c, cb, proj_scale), true);
    if (!cfg.share_query_key) p.wk = tape.input(gaussian_matrix(rng, c, cb, proj_scale), true);
    p.wv = tape.input(gaussian_matrix(rng, c, cb, proj_scale), true);
    p.fcq_w = tape.input(gaussian_matrix(rng, cb, 1, fc_scale), true);
    p.fcq_b = tape.input(Tensor::zeros({1}), true);
    if (!cfg.share_alpha_beta) {
        p.fck_w = tape.input(gaussian_matrix(rng, cb, 1, fc_scale), true);
        p.fck_b = tape.input(Tensor::zeros({1}), true);
    }
    p.wo = tape.input(out_scale == 0.0 ? Tensor::zeros({cb, c}) : gaussian_matrix(rng, cb, c, out_scale * fc_scale),
                      true);
    return p;
}

ShiftOut shift_forward(Tape& tape, VarId x, const ShiftConfig& cfg, const ShiftParams& p) {
    check_config(cfg);
    const Tensor& xv = tape.value(x);
    if (xv.rank() != 2 || xv.dim(1) != cfg.c_in)
        throw Error::validation("attention input must be [n," + std::to_string(cfg.c_in) + "], got " +
                                shape_str(xv.shape()));
    const int n = xv.dim(0);
    const VarId wk = cfg.share_query_key ? p.wq : p.wk;
    const VarId fck_w = cfg.share_alpha_beta ? p.fcq_w : p.fck_w;
    const VarId fck_b = cfg.share_alpha_beta ? p.fcq_b : p.fck_b;
    if (p.wq < 0 || wk < 0 || p.wv < 0 || p.fcq_w < 0 || p.fcq_b < 0 || fck_w < 0 || fck_b < 0 || p.wo < 0)
        throw Error::validation("attention parameters are incomplete for this configuration");

    const VarId q = tape.matmul(x, p.wq); // [n, cb]
    const VarId k = tape.matmul(x, wk);
    const VarId v = tape.matmul(x, p.wv);

    // position distribution from the query scorer
    const VarId alpha = tape.softmax(tape.add(tape.matmul(q, p.fcq_w), p.fcq_b), 0); // [n,1]

    // per-position scalar summary of Q, scaled by alpha
    const VarId qsum = tape.reshape(tape.reduce_sum(q, 1), {n, 1});
    const VarId qvec = tape.mul(alpha, qsum); // [n,1]

    // modulate the key path and score it for beta
    const VarId pmat = tape.mul(qvec, k); // broadcast across channels -> [n, cb]
    const VarId beta = tape.softmax(tape.add(tape.matmul(pmat, fck_w), fck_b), 0);

    const VarId ksrc = cfg.global_key_from_p ? pmat : k;
    const VarId ksum = tape.reshape(tape.reduce_sum(ksrc, 1), {n, 1});
    const VarId kvec = tape.mul(beta, ksum);

    VarId u = tape.mul(kvec, v); // [n, cb]
    if (cfg.query_value_addition) u = tape.add(u, q);

    const VarId y = tape.add(x, tape.matmul(u, p.wo));
    return {y, alpha, beta};
}

std::vector<std::pair<std::string, VarId>> NonlocalParams::vars() const {
    std::vector<std::pair<std::string, VarId>> v;
    const std::pair<const char*, VarId> all[] = {{"theta", theta}, {"phi", phi}, {"g", g}, {"wo", wo}};
    for (const auto& [name, id] : all)
        if (id >= 0) v.emplace_back(name, id);
    return v;
}

NonlocalParams nonlocal_params_init(Tape& tape, int c_in, int c_b, Rng& rng, double out_scale) {
    if (c_in < 1 || c_b < 1 || c_b > c_in) throw Error::validation("invalid attention dimensions");
    const double scale = 1.0 / std::sqrt(static_cast<double>(c_in));
    NonlocalParams p;
    p.theta = tape.input(gaussian_matrix(rng, c_in, c_b, scale), true);
    p.phi = tape.input(gaussian_matrix(rng, c_in, c_b, scale), true);
    p.g = tape.input(gaussian_matrix(rng, c_in, c_b, scale), true);
    p.wo = tape.input(out_scale == 0.0 ? Tensor::zeros({c_b, c_in})
                                       : gaussian_matrix(rng, c_b, c_in, out_scale / std::sqrt(static_cast<double>(c_b))),
                      true);
    return p;
}

VarId nonlocal_forward(Tape& tape, VarId x, int c_b, const NonlocalParams& p, std::int64_t n_cap) {
    const Tensor& xv = tape.value(x);
    if (xv.rank() != 2) throw Error::validation("attention input must be [n,C], got " + shape_str(xv.shape()));
    const std::int64_t n = xv.dim(0);
    if (n > n_cap)
        throw Error::validation("refusing " + std::to_string(n) + "x" + std::to_string(n) +
                                " attention matrix (cap " + std::to_string(n_cap) + " positions)");
    if (c_b < 1 || c_b > xv.dim(1)) throw Error::validation("invalid bottleneck width");
    if (p.theta < 0 || p.phi < 0 || p.g < 0 || p.wo < 0) throw Error::validation("attention parameters missing");

    const VarId th = tape.matmul(x, p.theta); // [n, cb]
    const VarId ph = tape.matmul(x, p.phi);
    const VarId gg = tape.matmul(x, p.g);
    const VarId attn = tape.softmax(tape.matmul(th, tape.transpose(ph)), 1); // rows sum to 1
    const VarId mixed = tape.matmul(attn, gg);                               // [n, cb]
    return tape.add(x, tape.matmul(mixed, p.wo));
}

std::int64_t count_params(AttentionKind kind, int c, int c_b) {
    if (c < 1 || c_b < 1) throw Error::validation("invalid attention dimensions");
    const std::int64_t proj = 4LL * c * c_b; // three inputs + one output transform
    if (kind == AttentionKind::nonlocal) return proj;
    return proj + 2LL * (c_b + 1); // two biased scalar scorers
}

std::int64_t count_params(const ShiftConfig& cfg) {
    check_config(cfg);
    const int cb = cfg.bottleneck();
    std::int64_t total = count_params(AttentionKind::shift, cfg.c_in, cb);
    if (cfg.share_query_key) total -= static_cast<std::int64_t>(cfg.c_in) * cb;
    if (cfg.share_alpha_beta) total -= cb + 1;
    return total;
}

std::int64_t count_macs(AttentionKind kind, int c, int c_b, std::int64_t n) {
    if (c < 1 || c_b < 1 || n < 1) throw Error::validation("invalid attention dimensions");
    const std::int64_t proj = 3LL * n * c * c_b;  // Q/K/V or theta/phi/g
    const std::int64_t out = static_cast<std::int64_t>(n) * c_b * c;
    if (kind == AttentionKind::nonlocal) return proj + 2LL * n * n * c_b + out;
    // two scalar scorers, two channel sums, two broadcast products
    return proj + 6LL * n * c_b + out;
}

std::vector<AttentionPoint> top_attention_points(const Tensor& alpha, int k, int t, int h, int w) {
    const std::int64_t n = alpha.size();
    if (t < 1 || h < 1 || w < 1 || static_cast<std::int64_t>(t) * h * w != n)
        throw Error::validation("dims " + std::to_string(t) + "x" + std::to_string(h) + "x" + std::to_string(w) +
                                " do not cover " + std::to_string(n) + " attention weights");
    if (k < 1 || k > n) throw Error::validation("k must lie in [1, " + std::to_string(n) + "], got " + std::to_string(k));

    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
        if (alpha[a] != alpha[b]) return alpha[a] > alpha[b];
        return a < b;
    });

    std::vector<AttentionPoint> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const std::int64_t flat = order[static_cast<std::size_t>(i)];
        AttentionPoint pt;
        pt.t = static_cast<int>(flat / (static_cast<std::int64_t>(h) * w));
        pt.y = static_cast<int>(flat / w % h);
        pt.x = static_cast<int>(flat % w);
        pt.weight = alpha[flat];
        out.push_back(pt);
    }
    return out;
}

} // namespace radif
