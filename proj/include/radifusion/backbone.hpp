#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "radifusion/attention.hpp"
#include "radifusion/tape.hpp"

namespace radif {

// Small residual 3D CNN over a single-channel video [1,T,H,W]. The first
// conv of every residual layer carries the temporal extent t; all other
// convs are 1x3x3. Normalization is a per-channel learned affine.
struct BackboneConfig {
    int stem_channels = 16;
    std::vector<int> layer_channels = {16, 32, 64, 128};
    std::vector<int> layer_strides = {}; // empty selects {1, 2, 2, ...}
    int blocks_per_layer = 2;
    int temporal_kernel = 3;
    int shift_layer = 0;    // 1-based layer after which the block sits; 0 = none
    int nonlocal_layer = 0; // mutually exclusive with shift_layer
    int embed_dim = 128;
    TemporalPad temporal = TemporalPad::replicate;
    ShiftConfig shift_flags;              // sharing/addition flags; dims filled at build
    std::int64_t nonlocal_cap = std::int64_t{1} << 16;

    std::vector<int> strides() const;
    int total_stride() const; // stem stride 2 times the layer strides
};

class Backbone {
public:
    Backbone() = default;
    static Backbone build(const BackboneConfig& cfg, std::uint64_t seed);

    const BackboneConfig& config() const { return cfg_; }
    std::map<std::string, Tensor>& params() { return params_; }
    const std::map<std::string, Tensor>& params() const { return params_; }

    struct Vars {
        std::map<std::string, VarId> ids;
        VarId at(const std::string& name) const;
    };
    Vars register_params(Tape& tape, bool requires_grad = true) const;

    struct Out {
        VarId embedding = -1;          // [embed_dim]
        VarId alpha = -1, beta = -1;   // position distributions when attention is on
        int at = 0, ah = 0, aw = 0;    // grid dims of the attention input
    };
    Out forward(Tape& tape, const Vars& vars, VarId video) const;

private:
    BackboneConfig cfg_;
    std::map<std::string, Tensor> params_;
};

// Temporal inflation of a 2D kernel [Cout,Cin,k,k] (or [Cout,Cin,1,k,k]):
// t planes, each the source kernel divided by t.
Tensor inflate(const Tensor& w2d, int t);

// Copy of a temporal-extent-1 backbone with every layer's first conv
// inflated to extent t.
Backbone inflate_backbone(const Backbone& b2d, int t);

// Runs the 2D net on one frame and the inflated net on the frame repeated
// T times; returns the max abs difference between the two embeddings.
double static_equivalence_check(const Backbone& b2d, const Backbone& b3d, const Tensor& frame, int t_frames);

} // namespace radif
