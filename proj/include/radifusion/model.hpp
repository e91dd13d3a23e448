#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "radifusion/backbone.hpp"
#include "radifusion/dataset.hpp"
#include "radifusion/head_fusion.hpp"
#include "radifusion/preprocess.hpp"

namespace radif {

// The complete risk model: a shared video backbone, the shared fusion
// layer over (embedding, standardized texture features, age), and the
// learned two-scale gate. The fixed gate component w_f never enters the
// trainable set.
struct Model {
    BackboneConfig backbone_cfg;
    Backbone net;
    Tensor fusion_w; // [embed_dim + kRadiomicsDim + 1, 1]
    Tensor fusion_b; // [1]
    bool use_gate = false;
    double gate_w_f = 0.4;
    Tensor gate_theta_t; // [1]
    Tensor gate_theta_s; // [1]
    std::vector<double> feat_mean, feat_std; // per-feature standardization
    NormalizationStats pixel_stats;          // scalar pixel normalization
};

Model make_model(const BackboneConfig& cfg, std::uint64_t seed, bool use_gate,
                 const GateState& gate = make_gate());

// Everything the optimizer may update, by name.
std::map<std::string, Tensor*> trainable_params(Model& m);

struct ModelVars {
    Backbone::Vars backbone;
    VarId fusion_w = -1, fusion_b = -1;
    VarId gate_t = -1, gate_s = -1;
    std::map<std::string, VarId> by_name; // mirrors trainable_params keys
};
ModelVars register_model(const Model& m, Tape& tape, bool requires_grad);

struct PatientForward {
    std::array<VarId, kNumViews> logits{-1, -1, -1, -1};
    VarId fused = -1; // probability
    Backbone::Out view0;
};
PatientForward model_forward(const Model& m, Tape& tape, const ModelVars& vars, const PatientData& patient);

// Inference without gradient bookkeeping.
struct PatientScores {
    ViewLogits logits;
    double fused = 0.0;
    double gamma = 0.0; // bilateral asymmetry of the per-view sigmoid scores
};
PatientScores predict_patient(const Model& m, const PatientData& patient);

// Directory layout: model.json (config, gate, statistics, tensor index)
// plus one RDF1 file per weight tensor.
void save_model(const Model& m, const std::string& dir);
Model load_model(const std::string& dir);

} // namespace radif
