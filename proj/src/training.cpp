#include "radifusion/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "radifusion/error.hpp"
#include "radifusion/rng.hpp"

namespace radif {

void TrainConfig::validate() const {
    if (epochs < 1) throw Error::validation("epochs must be at least 1");
    if (batch_patients < 1) throw Error::validation("batch_patients must be at least 1");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error::validation("lr must be finite and non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw Error::validation("adam betas must lie in [0,1)");
    if (!(eps > 0.0)) throw Error::validation("adam eps must be positive");
    if (!(filter_percentile > 0.0 && filter_percentile <= 100.0))
        throw Error::validation("filter_percentile must lie in (0,100]");
}

namespace {
constexpr double kClipLo = 1e-7;
constexpr double kClipHi = 1.0 - 1e-7;

void check_target(double target) {
    if (!(target >= 0.0 && target <= 1.0)) throw Error::validation("loss target must lie in [0,1]");
}
} // namespace

double bce(double pred, double target) {
    check_target(target);
    const double p = std::min(std::max(pred, kClipLo), kClipHi);
    return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

VarId bce_loss(Tape& tape, VarId pred, double target) {
    check_target(target);
    // max(x, lo) = lo + relu(x - lo); min(x, hi) = hi - relu(hi - x)
    VarId p = tape.affine(tape.relu(tape.affine(pred, 1.0, -kClipLo)), 1.0, kClipLo);
    p = tape.affine(tape.relu(tape.affine(p, -1.0, kClipHi)), -1.0, kClipHi);
    const VarId lp = tape.log(p);
    const VarId lq = tape.log(tape.affine(p, -1.0, 1.0));
    return tape.neg(tape.add(tape.affine(lp, target, 0.0), tape.affine(lq, 1.0 - target, 0.0)));
}

void adam_step(const std::map<std::string, Tensor*>& params, const std::map<std::string, Tensor>& grads,
               AdamState& st, double lr, double beta1, double beta2, double eps) {
    if (grads.size() != params.size())
        throw Error::validation("gradient set covers " + std::to_string(grads.size()) + " tensors, expected " +
                                std::to_string(params.size()));
    if (st.m.empty() && st.steps == 0) {
        for (const auto& [name, t] : params) {
            st.m.emplace(name, Tensor::zeros(t->shape()));
            st.v.emplace(name, Tensor::zeros(t->shape()));
        }
    }
    if (st.m.size() != params.size())
        throw Error::validation("optimizer state does not match the parameter set");
    ++st.steps;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.steps));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.steps));
    for (const auto& [name, t] : params) {
        const auto git = grads.find(name);
        if (git == grads.end()) throw Error::validation("missing gradient for parameter " + name);
        const Tensor& g = git->second;
        if (g.shape() != t->shape()) throw Error::validation("gradient shape mismatch for parameter " + name);
        Tensor& mt = st.m.at(name);
        Tensor& vt = st.v.at(name);
        for (std::int64_t i = 0; i < g.size(); ++i) {
            if (!std::isfinite(g[i])) throw Error::runtime("non-finite gradient in parameter " + name);
            mt[i] = beta1 * mt[i] + (1.0 - beta1) * g[i];
            vt[i] = beta2 * vt[i] + (1.0 - beta2) * g[i] * g[i];
            (*t)[i] -= lr * (mt[i] / bc1) / (std::sqrt(vt[i] / bc2) + eps);
        }
    }
}

namespace {

double target_for(const PatientData& p, LabelSource labels) {
    if (labels == LabelSource::hard) return static_cast<double>(p.label);
    if (!(p.y_soft >= 0.0 && p.y_soft <= 1.0))
        throw Error::validation("patient " + p.id + " lacks a soft label; attach pseudo-labels first");
    return p.y_soft;
}

} // namespace

TrainResult train(Model model, const std::vector<PatientData>& patients, const TrainConfig& cfg, LabelSource labels,
                  const std::string& tag, std::uint64_t stream, std::vector<std::string>* log_lines,
                  const EpochHook& hook) {
    cfg.validate();
    if (patients.empty()) throw Error::validation("training set is empty");
    for (const PatientData& p : patients) target_for(p, labels); // fail before any update

    auto params = trainable_params(model);
    AdamState st;
    Rng shuffle_rng(Rng::derive(cfg.seed, 0x7E000 + stream));
    std::vector<std::size_t> order(patients.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult res;
    const std::size_t n = patients.size();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_patients)) {
            const std::size_t bn = std::min(static_cast<std::size_t>(cfg.batch_patients), n - start);
            std::map<std::string, Tensor> grads;
            for (const auto& [name, t] : params) grads.emplace(name, Tensor::zeros(t->shape()));
            const double inv_bn = 1.0 / static_cast<double>(bn);
            for (std::size_t k = 0; k < bn; ++k) {
                const PatientData& p = patients[order[start + k]];
                Tape tape;
                ModelVars vars = register_model(model, tape, true);
                PatientForward fw = model_forward(model, tape, vars, p);
                const VarId loss = bce_loss(tape, fw.fused, target_for(p, labels));
                tape.backward(loss);
                const double lv = tape.value(loss)[0];
                if (!std::isfinite(lv)) throw Error::runtime("non-finite loss for patient " + p.id);
                epoch_loss += lv;
                for (auto& [name, g] : grads) {
                    const Tensor& pg = tape.grad(vars.by_name.at(name));
                    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += inv_bn * pg[i];
                }
            }
            adam_step(params, grads, st, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
            ++res.steps;
        }
        const double mean_loss = epoch_loss / static_cast<double>(n);
        res.log.push_back({epoch, mean_loss});
        if (log_lines) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%s epoch %d/%d loss %.6f", tag.c_str(), epoch + 1, cfg.epochs, mean_loss);
            log_lines->push_back(buf);
        }
        if (hook) hook(epoch + 1, model);
    }
    res.model = std::move(model);
    return res;
}

std::vector<PatientData> pseudo_label(const Model& teacher, std::vector<PatientData> patients) {
    for (PatientData& p : patients) {
        const PatientScores s = predict_patient(teacher, p);
        p.y_soft = s.fused;
        p.gamma = s.gamma;
    }
    return patients;
}

double nearest_rank_percentile(std::vector<double> values, double pct) {
    if (values.empty()) throw Error::validation("percentile of an empty set");
    if (!(pct > 0.0 && pct <= 100.0)) throw Error::validation("percentile must lie in (0,100]");
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    auto rank = static_cast<std::size_t>(std::ceil(pct * static_cast<double>(n) / 100.0));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return values[rank - 1];
}

double control_gamma_percentile(const std::vector<PatientData>& patients, double pct) {
    std::vector<double> gammas;
    for (const PatientData& p : patients) {
        if (p.label != 0) continue;
        if (!(p.gamma >= 0.0))
            throw Error::validation("control " + p.id + " has no asymmetry score; attach pseudo-labels first");
        gammas.push_back(p.gamma);
    }
    if (gammas.empty()) throw Error::validation("no controls to filter");
    return nearest_rank_percentile(std::move(gammas), pct);
}

std::vector<PatientData> filter_controls_at(const std::vector<PatientData>& patients, double threshold) {
    if (!std::isfinite(threshold)) throw Error::validation("filter threshold must be finite");
    std::vector<PatientData> kept;
    for (const PatientData& p : patients) {
        if (p.label != 0) {
            kept.push_back(p);
            continue;
        }
        if (!(p.gamma >= 0.0))
            throw Error::validation("control " + p.id + " has no asymmetry score; attach pseudo-labels first");
        if (p.gamma < threshold) kept.push_back(p);
    }
    return kept;
}

std::vector<PatientData> filter_controls(const std::vector<PatientData>& patients, double pct) {
    return filter_controls_at(patients, control_gamma_percentile(patients, pct));
}

FinetuneResult two_stage_finetune(const Model& teacher, const std::vector<PatientData>& patients,
                                  const TrainConfig& cfg, std::vector<std::string>* log_lines,
                                  const EpochHook& hook) {
    cfg.validate();
    if (cfg.epochs % 2 != 0) throw Error::validation("two-stage finetuning needs an even epoch budget");

    const std::vector<PatientData> soft = pseudo_label(teacher, patients);
    Model start;
    if (cfg.warm_start_finetune) {
        start = teacher;
    } else {
        start = make_model(teacher.backbone_cfg, Rng::derive(cfg.seed, 0xF7), teacher.use_gate,
                           make_gate(0.6, teacher.gate_w_f));
        start.feat_mean = teacher.feat_mean;
        start.feat_std = teacher.feat_std;
        start.pixel_stats = teacher.pixel_stats;
    }

    TrainConfig half = cfg;
    half.epochs = cfg.epochs / 2;
    const LabelSource src = cfg.hard_labels_finetune ? LabelSource::hard : LabelSource::soft;

    TrainResult s1 = train(std::move(start), soft, half, src, "stage1", 1, log_lines, hook);

    FinetuneResult out;
    out.stage1 = s1.model;
    out.threshold = control_gamma_percentile(soft, cfg.filter_percentile);
    const std::vector<PatientData> filtered = filter_controls_at(soft, out.threshold);
    out.n_soft = soft.size();
    out.n_filtered = filtered.size();

    EpochHook stage2_hook;
    if (hook)
        stage2_hook = [&hook, &half](int epoch, const Model& m) { hook(half.epochs + epoch, m); };
    TrainResult s2 = train(std::move(s1.model), filtered, half, src, "stage2", 2, log_lines, stage2_hook);
    out.model = std::move(s2.model);
    out.log_stage1 = std::move(s1.log);
    out.log_stage2 = std::move(s2.log);
    out.steps = s1.steps + s2.steps;
    return out;
}

} // namespace radif
