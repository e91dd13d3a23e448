#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "radifusion/rng.hpp"
#include "radifusion/tape.hpp"

namespace radif {

// Additive spatial attention over a flattened [n, C] feature map: two
// softmax-weighted global summaries (alpha over a query projection, beta
// over a key projection) modulate the value path, which re-enters through a
// residual connection.
struct ShiftConfig {
    int c_in = 0;
    int c_b = 0; // bottleneck width; <= 0 selects c_in / 2
    bool share_query_key = false;    // reuse W_Q for the key projection
    bool share_alpha_beta = false;   // reuse the alpha scorer for beta
    bool query_value_addition = false; // add Q into the value path
    bool global_key_from_p = false;  // summarize p instead of K for beta
    int bottleneck() const;
};

// Tape-resident parameters. Shared slots stay at -1 and are absent from
// vars(); only FC scorers carry biases.
struct ShiftParams {
    VarId wq = -1, wk = -1, wv = -1; // [C, C_b] projections
    VarId fcq_w = -1, fcq_b = -1;    // [C_b, 1] + [1] alpha scorer
    VarId fck_w = -1, fck_b = -1;    // beta scorer
    VarId wo = -1;                   // [C_b, C] output transform
    std::vector<std::pair<std::string, VarId>> vars() const;
};

struct ShiftOut {
    VarId y;     // [n, C]
    VarId alpha; // [n, 1], position distribution
    VarId beta;  // [n, 1]
};

// out_scale 0 zero-fills the output transform so the block starts as an
// identity.
ShiftParams shift_params_init(Tape& tape, const ShiftConfig& cfg, Rng& rng, double out_scale = 0.0);
ShiftOut shift_forward(Tape& tape, VarId x, const ShiftConfig& cfg, const ShiftParams& p);

// Dot-product (embedded Gaussian) attention baseline with an explicit n x n
// attention matrix.
struct NonlocalParams {
    VarId theta = -1, phi = -1, g = -1; // [C, C_b], bias-free
    VarId wo = -1;                      // [C_b, C]
    std::vector<std::pair<std::string, VarId>> vars() const;
};

NonlocalParams nonlocal_params_init(Tape& tape, int c_in, int c_b, Rng& rng, double out_scale = 0.0);
VarId nonlocal_forward(Tape& tape, VarId x, int c_b, const NonlocalParams& p, std::int64_t n_cap = std::int64_t{1} << 16);

enum class AttentionKind { shift, nonlocal };

// Analytic parameter / multiply-accumulate counts for an [n, C] input.
std::int64_t count_params(AttentionKind kind, int c, int c_b);
std::int64_t count_params(const ShiftConfig& cfg); // honors the sharing flags
std::int64_t count_macs(AttentionKind kind, int c, int c_b, std::int64_t n);

struct AttentionPoint {
    int t = 0, y = 0, x = 0;
    double weight = 0.0;
};

// k largest alpha entries unflattened to (t, y, x), descending weight, ties
// by flat index.
std::vector<AttentionPoint> top_attention_points(const Tensor& alpha, int k, int t, int h, int w);

} // namespace radif
