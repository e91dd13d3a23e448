#include "radifusion/model.hpp"

#include <cmath>
#include <filesystem>

#include "json.hpp"
#include "radifusion/error.hpp"
#include "radifusion/io.hpp"
#include "radifusion/radiomics.hpp"
#include "radifusion/rng.hpp"

namespace radif {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::map<std::string, const Tensor*> tensors_by_name(const Model& m) {
    std::map<std::string, const Tensor*> out;
    for (const auto& [name, t] : m.net.params()) out[name] = &t;
    out["fusion.w"] = &m.fusion_w;
    out["fusion.b"] = &m.fusion_b;
    return out;
}

json backbone_to_json(const BackboneConfig& c) {
    return json{{"stem_channels", c.stem_channels},
                {"layer_channels", c.layer_channels},
                {"layer_strides", c.layer_strides},
                {"blocks_per_layer", c.blocks_per_layer},
                {"temporal_kernel", c.temporal_kernel},
                {"shift_layer", c.shift_layer},
                {"nonlocal_layer", c.nonlocal_layer},
                {"embed_dim", c.embed_dim},
                {"temporal_pad", c.temporal == TemporalPad::replicate ? "replicate" : "zero"},
                {"share_query_key", c.shift_flags.share_query_key},
                {"share_alpha_beta", c.shift_flags.share_alpha_beta},
                {"query_value_addition", c.shift_flags.query_value_addition},
                {"global_key_from_p", c.shift_flags.global_key_from_p},
                {"nonlocal_cap", c.nonlocal_cap}};
}

BackboneConfig backbone_from_json(const json& j) {
    BackboneConfig c;
    c.stem_channels = j.at("stem_channels").get<int>();
    c.layer_channels = j.at("layer_channels").get<std::vector<int>>();
    c.layer_strides = j.at("layer_strides").get<std::vector<int>>();
    c.blocks_per_layer = j.at("blocks_per_layer").get<int>();
    c.temporal_kernel = j.at("temporal_kernel").get<int>();
    c.shift_layer = j.at("shift_layer").get<int>();
    c.nonlocal_layer = j.at("nonlocal_layer").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.temporal = j.at("temporal_pad").get<std::string>() == "zero" ? TemporalPad::zero : TemporalPad::replicate;
    c.shift_flags.share_query_key = j.at("share_query_key").get<bool>();
    c.shift_flags.share_alpha_beta = j.at("share_alpha_beta").get<bool>();
    c.shift_flags.query_value_addition = j.at("query_value_addition").get<bool>();
    c.shift_flags.global_key_from_p = j.at("global_key_from_p").get<bool>();
    c.nonlocal_cap = j.at("nonlocal_cap").get<std::int64_t>();
    return c;
}

} // namespace

Model make_model(const BackboneConfig& cfg, std::uint64_t seed, bool use_gate, const GateState& gate) {
    Model m;
    m.backbone_cfg = cfg;
    m.net = Backbone::build(cfg, Rng::derive(seed, 0xB0));
    const int fan_in = cfg.embed_dim + kRadiomicsDim + 1;
    m.fusion_w = Tensor({fan_in, 1});
    Rng rng(Rng::derive(seed, 0xF0));
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::int64_t i = 0; i < m.fusion_w.size(); ++i) m.fusion_w[i] = scale * rng.gaussian();
    m.fusion_b = Tensor({1});
    m.use_gate = use_gate;
    m.gate_w_f = gate.w_f;
    m.gate_theta_t = Tensor::scalar(gate.w_theta_t);
    m.gate_theta_s = Tensor::scalar(gate.w_theta_s);
    m.feat_mean.assign(kRadiomicsDim, 0.0);
    m.feat_std.assign(kRadiomicsDim, 1.0);
    return m;
}

std::map<std::string, Tensor*> trainable_params(Model& m) {
    std::map<std::string, Tensor*> out;
    for (auto& [name, t] : m.net.params()) out[name] = &t;
    out["fusion.w"] = &m.fusion_w;
    out["fusion.b"] = &m.fusion_b;
    if (m.use_gate) {
        out["gate.theta_t"] = &m.gate_theta_t;
        out["gate.theta_s"] = &m.gate_theta_s;
    }
    return out;
}

ModelVars register_model(const Model& m, Tape& tape, bool requires_grad) {
    ModelVars v;
    v.backbone = m.net.register_params(tape, requires_grad);
    v.by_name = v.backbone.ids;
    v.fusion_w = tape.input(m.fusion_w, requires_grad);
    v.fusion_b = tape.input(m.fusion_b, requires_grad);
    v.by_name["fusion.w"] = v.fusion_w;
    v.by_name["fusion.b"] = v.fusion_b;
    if (m.use_gate) {
        v.gate_t = tape.input(m.gate_theta_t, requires_grad);
        v.gate_s = tape.input(m.gate_theta_s, requires_grad);
        v.by_name["gate.theta_t"] = v.gate_t;
        v.by_name["gate.theta_s"] = v.gate_s;
    }
    return v;
}

PatientForward model_forward(const Model& m, Tape& tape, const ModelVars& vars, const PatientData& patient) {
    PatientForward out;
    if (patient.age_category != 1 && patient.age_category != 2)
        throw Error::validation("patient " + patient.id + " age category must be 1 or 2");
    const VarId age = tape.input(Tensor::scalar(static_cast<double>(patient.age_category)));
    for (int v = 0; v < kNumViews; ++v) {
        const Tensor& video = patient.videos[static_cast<std::size_t>(v)];
        if (video.rank() != 3)
            throw Error::validation("patient " + patient.id + " view " + view_name(static_cast<View>(v)) +
                                    " video must be [T,H,W]");
        Tensor normalized = normalize(video, m.pixel_stats);
        const VarId vid =
            tape.input(Tensor({1, video.dim(0), video.dim(1), video.dim(2)},
                              std::vector<double>(normalized.data(), normalized.data() + normalized.size())));
        Backbone::Out bo = m.net.forward(tape, vars.backbone, vid);
        if (v == 0) out.view0 = bo;
        const std::vector<double> z =
            standardize_features(patient.features[static_cast<std::size_t>(v)], m.feat_mean, m.feat_std);
        const VarId zv = tape.input(Tensor({static_cast<int>(z.size())}, z));
        out.logits[static_cast<std::size_t>(v)] = fuse_view(tape, bo.embedding, zv, age, vars.fusion_w, vars.fusion_b);
    }
    const VarId lcc = out.logits[0], rcc = out.logits[1], lmlo = out.logits[2], rmlo = out.logits[3];
    out.fused = m.use_gate ? combine_gated(tape, lcc, rcc, lmlo, rmlo, vars.gate_t, vars.gate_s, m.gate_w_f)
                           : combine_average(tape, lcc, rcc, lmlo, rmlo);
    return out;
}

PatientScores predict_patient(const Model& m, const PatientData& patient) {
    Tape tape;
    ModelVars vars = register_model(m, tape, false);
    PatientForward fw = model_forward(m, tape, vars, patient);
    PatientScores s;
    s.logits.lcc = tape.value(fw.logits[0])[0];
    s.logits.rcc = tape.value(fw.logits[1])[0];
    s.logits.lmlo = tape.value(fw.logits[2])[0];
    s.logits.rmlo = tape.value(fw.logits[3])[0];
    s.fused = tape.value(fw.fused)[0];
    s.gamma = asymmetry(per_view_scores(s.logits));
    return s;
}

void save_model(const Model& m, const std::string& dir) {
    fs::create_directories(dir);
    json tensors = json::array();
    for (const auto& [name, t] : tensors_by_name(m)) {
        const std::string file = name + ".rdf1";
        write_rdf1((fs::path(dir) / file).string(), *t);
        tensors.push_back({{"name", name}, {"file", file}, {"shape", t->shape()}});
    }
    json j{{"backbone", backbone_to_json(m.backbone_cfg)},
           {"use_gate", m.use_gate},
           {"gate", json{{"w_f", m.gate_w_f}, {"theta_t", m.gate_theta_t[0]}, {"theta_s", m.gate_theta_s[0]}}},
           {"pixel_stats", json{{"mean", m.pixel_stats.mean}, {"std", m.pixel_stats.std_dev}, {"fold", m.pixel_stats.fold_id}}},
           {"feature_mean", m.feat_mean},
           {"feature_std", m.feat_std},
           {"tensors", tensors}};
    write_text_file((fs::path(dir) / "model.json").string(), j.dump(2) + "\n");
}

Model load_model(const std::string& dir) {
    const std::string index_path = (fs::path(dir) / "model.json").string();
    json j = json::parse(read_text_file(index_path), nullptr, false);
    if (j.is_discarded()) throw Error::validation("malformed model index " + index_path);
    Model m;
    try {
        m.backbone_cfg = backbone_from_json(j.at("backbone"));
        m.net = Backbone::build(m.backbone_cfg, 0);
        m.use_gate = j.at("use_gate").get<bool>();
        m.gate_w_f = j.at("gate").at("w_f").get<double>();
        m.gate_theta_t = Tensor::scalar(j.at("gate").at("theta_t").get<double>());
        m.gate_theta_s = Tensor::scalar(j.at("gate").at("theta_s").get<double>());
        m.pixel_stats.mean = j.at("pixel_stats").at("mean").get<double>();
        m.pixel_stats.std_dev = j.at("pixel_stats").at("std").get<double>();
        m.pixel_stats.fold_id = j.at("pixel_stats").at("fold").get<int>();
        m.feat_mean = j.at("feature_mean").get<std::vector<double>>();
        m.feat_std = j.at("feature_std").get<std::vector<double>>();

        std::map<std::string, json> listed;
        for (const json& t : j.at("tensors")) listed[t.at("name").get<std::string>()] = t;
        m.fusion_w = Tensor({m.backbone_cfg.embed_dim + kRadiomicsDim + 1, 1});
        m.fusion_b = Tensor({1});
        auto expected = tensors_by_name(m);
        if (listed.size() != expected.size())
            throw Error::validation("model index lists " + std::to_string(listed.size()) + " tensors, expected " +
                                    std::to_string(expected.size()));
        for (auto& [name, t] : m.net.params()) {
            auto it = listed.find(name);
            if (it == listed.end()) throw Error::validation("model index is missing tensor " + name);
            Tensor loaded = read_rdf1((fs::path(dir) / it->second.at("file").get<std::string>()).string());
            if (loaded.shape() != t.shape())
                throw Error::validation("tensor " + name + " has unexpected shape in " + dir);
            t = std::move(loaded);
        }
        m.fusion_w = read_rdf1((fs::path(dir) / listed.at("fusion.w").at("file").get<std::string>()).string());
        m.fusion_b = read_rdf1((fs::path(dir) / listed.at("fusion.b").at("file").get<std::string>()).string());
        if (m.fusion_w.shape() != std::vector<int>{m.backbone_cfg.embed_dim + kRadiomicsDim + 1, 1} ||
            m.fusion_b.shape() != std::vector<int>{1})
            throw Error::validation("fusion tensors have unexpected shapes in " + dir);
    } catch (const json::exception& ex) {
        throw Error::validation("model index " + index_path + ": " + ex.what());
    }
    if (m.feat_mean.size() != static_cast<std::size_t>(kRadiomicsDim) || m.feat_std.size() != m.feat_mean.size())
        throw Error::validation("model feature statistics must cover all " + std::to_string(kRadiomicsDim) +
                                " features");
    return m;
}

} // namespace radif
