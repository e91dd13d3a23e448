#include "radifusion/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <variant>

#include "json.hpp"
#include "radifusion/attention.hpp"
#include "radifusion/error.hpp"
#include "radifusion/evaluation.hpp"
#include "radifusion/head_fusion.hpp"
#include "radifusion/io.hpp"
#include "radifusion/preprocess.hpp"
#include "radifusion/radiomics.hpp"
#include "radifusion/rng.hpp"

namespace radif {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------- config

namespace {

struct Field {
    const char* name;
    std::variant<std::string RunConfig::*, int RunConfig::*, double RunConfig::*, bool RunConfig::*,
                 std::uint64_t RunConfig::*, std::int64_t RunConfig::*, std::vector<int> RunConfig::*,
                 std::array<double, 3> RunConfig::*>
        ptr;
};

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        {"out_dir", &RunConfig::out_dir},
        {"manifest", &RunConfig::manifest},
        {"preprocessed", &RunConfig::preprocessed},
        {"features", &RunConfig::features},
        {"model_dir", &RunConfig::model_dir},
        {"predictions", &RunConfig::predictions},
        {"compare", &RunConfig::compare},
        {"patient", &RunConfig::patient},
        {"view", &RunConfig::view},
        {"seed", &RunConfig::seed},
        {"threads", &RunConfig::threads},
        {"n_patients", &RunConfig::n_patients},
        {"case_fraction", &RunConfig::case_fraction},
        {"category_mix", &RunConfig::category_mix},
        {"screenings_mix", &RunConfig::screenings_mix},
        {"image_size", &RunConfig::image_size},
        {"signal_strength", &RunConfig::signal_strength},
        {"size", &RunConfig::size},
        {"frames", &RunConfig::frames},
        {"history_fill", &RunConfig::history_fill},
        {"stem_channels", &RunConfig::stem_channels},
        {"layer_channels", &RunConfig::layer_channels},
        {"layer_strides", &RunConfig::layer_strides},
        {"blocks_per_layer", &RunConfig::blocks_per_layer},
        {"temporal_kernel", &RunConfig::temporal_kernel},
        {"embed_dim", &RunConfig::embed_dim},
        {"attention", &RunConfig::attention},
        {"attention_layer", &RunConfig::attention_layer},
        {"temporal_pad", &RunConfig::temporal_pad},
        {"nonlocal_cap", &RunConfig::nonlocal_cap},
        {"share_query_key", &RunConfig::share_query_key},
        {"share_alpha_beta", &RunConfig::share_alpha_beta},
        {"query_value_addition", &RunConfig::query_value_addition},
        {"global_key_from_p", &RunConfig::global_key_from_p},
        {"use_gate", &RunConfig::use_gate},
        {"gate_init", &RunConfig::gate_init},
        {"gate_fixed", &RunConfig::gate_fixed},
        {"epochs", &RunConfig::epochs},
        {"batch_patients", &RunConfig::batch_patients},
        {"lr", &RunConfig::lr},
        {"beta1", &RunConfig::beta1},
        {"beta2", &RunConfig::beta2},
        {"adam_eps", &RunConfig::adam_eps},
        {"filter_percentile", &RunConfig::filter_percentile},
        {"hard_labels_finetune", &RunConfig::hard_labels_finetune},
        {"warm_start_finetune", &RunConfig::warm_start_finetune},
        {"checkpoint_every", &RunConfig::checkpoint_every},
        {"n_folds", &RunConfig::n_folds},
        {"val_fold", &RunConfig::val_fold},
        {"test_fraction", &RunConfig::test_fraction},
        {"n_boot", &RunConfig::n_boot},
        {"alpha", &RunConfig::alpha},
        {"horizon", &RunConfig::horizon},
        {"bench_n", &RunConfig::bench_n},
        {"bench_c", &RunConfig::bench_c},
        {"bench_cb", &RunConfig::bench_cb},
        {"top_k", &RunConfig::top_k},
    };
    return f;
}

[[noreturn]] void bad_field(const std::string& where, const char* name, const char* expected) {
    throw Error::validation(where + ": field '" + std::string(name) + "' must be " + expected);
}

void read_field(RunConfig& cfg, const Field& f, const json& v, const std::string& where) {
    std::visit(
        [&](auto member) {
            using T = std::remove_reference_t<decltype(cfg.*member)>;
            if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) bad_field(where, f.name, "a string");
                cfg.*member = v.get<std::string>();
            } else if constexpr (std::is_same_v<T, int>) {
                if (!v.is_number_integer()) bad_field(where, f.name, "an integer");
                cfg.*member = v.get<int>();
            } else if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) bad_field(where, f.name, "a number");
                cfg.*member = v.get<double>();
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) bad_field(where, f.name, "a boolean");
                cfg.*member = v.get<bool>();
            } else if constexpr (std::is_same_v<T, std::uint64_t>) {
                if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
                    bad_field(where, f.name, "a non-negative integer");
                cfg.*member = v.get<std::uint64_t>();
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                if (!v.is_number_integer()) bad_field(where, f.name, "an integer");
                cfg.*member = v.get<std::int64_t>();
            } else if constexpr (std::is_same_v<T, std::vector<int>>) {
                if (!v.is_array()) bad_field(where, f.name, "an integer array");
                std::vector<int> out;
                for (const json& e : v) {
                    if (!e.is_number_integer()) bad_field(where, f.name, "an integer array");
                    out.push_back(e.get<int>());
                }
                cfg.*member = std::move(out);
            } else {
                static_assert(std::is_same_v<T, std::array<double, 3>>);
                if (!v.is_array() || v.size() != 3) bad_field(where, f.name, "an array of 3 numbers");
                std::array<double, 3> out{};
                for (std::size_t i = 0; i < 3; ++i) {
                    if (!v[i].is_number()) bad_field(where, f.name, "an array of 3 numbers");
                    out[i] = v[i].get<double>();
                }
                cfg.*member = out;
            }
        },
        f.ptr);
}

void write_field(const RunConfig& cfg, const Field& f, ordered_json& out) {
    std::visit(
        [&](auto member) {
            using T = std::remove_reference_t<decltype(cfg.*member)>;
            if constexpr (std::is_same_v<T, std::array<double, 3>>) {
                out[f.name] = std::vector<double>((cfg.*member).begin(), (cfg.*member).end());
            } else {
                out[f.name] = cfg.*member;
            }
        },
        f.ptr);
}

} // namespace

void apply_config_json(RunConfig& cfg, const std::string& text, const std::string& where) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error::validation(where + ": malformed JSON");
    if (!j.is_object()) throw Error::validation(where + ": top level must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        const Field* found = nullptr;
        for (const Field& f : fields())
            if (key == f.name) {
                found = &f;
                break;
            }
        if (!found) throw Error::validation(where + ": unknown field '" + key + "'");
        read_field(cfg, *found, value, where);
    }
}

RunConfig run_config_from_json(const std::string& text, const std::string& where) {
    RunConfig cfg;
    apply_config_json(cfg, text, where);
    return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
    ordered_json out;
    for (const Field& f : fields()) write_field(cfg, f, out);
    return out.dump(2) + "\n";
}

const std::vector<std::string>& run_config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const Field& f : fields()) k.emplace_back(f.name);
        return k;
    }();
    return keys;
}

CohortConfig cohort_config(const RunConfig& cfg) {
    CohortConfig c;
    c.n_patients = cfg.n_patients;
    c.case_fraction = cfg.case_fraction;
    c.category_mix = cfg.category_mix;
    c.screenings_mix = cfg.screenings_mix;
    c.image_size = cfg.image_size;
    c.signal_strength = cfg.signal_strength;
    c.seed = cfg.seed;
    return c;
}

BackboneConfig backbone_config(const RunConfig& cfg) {
    BackboneConfig b;
    b.stem_channels = cfg.stem_channels;
    b.layer_channels = cfg.layer_channels;
    b.layer_strides = cfg.layer_strides;
    b.blocks_per_layer = cfg.blocks_per_layer;
    b.temporal_kernel = cfg.temporal_kernel;
    b.embed_dim = cfg.embed_dim;
    b.nonlocal_cap = cfg.nonlocal_cap;
    b.shift_flags.share_query_key = cfg.share_query_key;
    b.shift_flags.share_alpha_beta = cfg.share_alpha_beta;
    b.shift_flags.query_value_addition = cfg.query_value_addition;
    b.shift_flags.global_key_from_p = cfg.global_key_from_p;
    if (cfg.temporal_pad == "replicate")
        b.temporal = TemporalPad::replicate;
    else if (cfg.temporal_pad == "zero")
        b.temporal = TemporalPad::zero;
    else
        throw Error::validation("field 'temporal_pad' must be 'replicate' or 'zero'");
    const int n_layers = static_cast<int>(cfg.layer_channels.size());
    if (cfg.attention == "none") {
        b.shift_layer = 0;
        b.nonlocal_layer = 0;
    } else if (cfg.attention == "shift" || cfg.attention == "nonlocal") {
        if (cfg.attention_layer < 1 || cfg.attention_layer > n_layers)
            throw Error::validation("field 'attention_layer' must name a layer between 1 and " +
                                    std::to_string(n_layers));
        (cfg.attention == "shift" ? b.shift_layer : b.nonlocal_layer) = cfg.attention_layer;
    } else {
        throw Error::validation("field 'attention' must be 'shift', 'nonlocal' or 'none'");
    }
    return b;
}

TrainConfig train_config(const RunConfig& cfg) {
    TrainConfig t;
    t.epochs = cfg.epochs;
    t.batch_patients = cfg.batch_patients;
    t.lr = cfg.lr;
    t.beta1 = cfg.beta1;
    t.beta2 = cfg.beta2;
    t.eps = cfg.adam_eps;
    t.seed = cfg.seed;
    t.filter_percentile = cfg.filter_percentile;
    t.hard_labels_finetune = cfg.hard_labels_finetune;
    t.warm_start_finetune = cfg.warm_start_finetune;
    return t;
}

HistoryFill history_fill_mode(const RunConfig& cfg) {
    if (cfg.history_fill == "oldest_available") return HistoryFill::oldest_available;
    if (cfg.history_fill == "current") return HistoryFill::current;
    throw Error::validation("field 'history_fill' must be 'oldest_available' or 'current'");
}

// ---------------------------------------------------------------- shared

namespace {

std::string fmt_g(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void require_field(const std::string& value, const char* name) {
    if (value.empty()) throw Error::validation(std::string("field '") + name + "' is required for this command");
}

fs::path open_run_dir(const RunConfig& cfg) {
    require_field(cfg.out_dir, "out_dir");
    fs::create_directories(cfg.out_dir);
    write_text_file((fs::path(cfg.out_dir) / "resolved_config.json").string(), run_config_to_json(cfg));
    return {cfg.out_dir};
}

std::string sibling(const std::string& anchor_file, const std::string& relative) {
    return (fs::path(anchor_file).parent_path() / relative).string();
}

HorizonMode horizon_mode(const RunConfig& cfg) {
    if (cfg.horizon == "cumulative") return HorizonMode::cumulative;
    if (cfg.horizon == "exclusive") return HorizonMode::exclusive;
    throw Error::validation("field 'horizon' must be 'cumulative' or 'exclusive'");
}

bool two_class(const std::vector<Prediction>& preds) {
    bool has0 = false, has1 = false;
    for (const Prediction& p : preds) (p.label ? has1 : has0) = true;
    return has0 && has1;
}

// cases belonging to time horizon `which` (1y / 2y / beyond) plus every
// control; mirrors horizon_aucs
std::vector<Prediction> horizon_subset(const std::vector<Prediction>& preds, HorizonMode mode, int which) {
    std::vector<Prediction> out;
    for (const Prediction& p : preds) {
        if (p.label == 0) {
            out.push_back(p);
            continue;
        }
        const bool in = mode == HorizonMode::cumulative ? (p.category >= 1 && p.category <= which)
                                                        : (p.category == which);
        if (in) out.push_back(p);
    }
    return out;
}

json auc_entry(const std::vector<Prediction>& preds, const RunConfig& cfg, std::uint64_t stream) {
    if (preds.empty() || !two_class(preds)) return nullptr;
    const double a = auc(preds);
    const Interval ci = bootstrap_ci(preds, cfg.n_boot, cfg.alpha, Rng::derive(cfg.seed, stream));
    return json{{"value", a}, {"ci", {ci.lo, ci.hi}}};
}

json make_report(const std::vector<Prediction>& preds, const RunConfig& cfg) {
    const HorizonMode mode = horizon_mode(cfg);
    int n_cases = 0;
    for (const Prediction& p : preds) n_cases += p.label;
    json r;
    r["n"] = preds.size();
    r["n_cases"] = n_cases;
    r["horizon_mode"] = cfg.horizon;
    r["auc_overall"] = auc_entry(preds, cfg, 0xC10);
    r["auc_1y"] = auc_entry(horizon_subset(preds, mode, 1), cfg, 0xC11);
    r["auc_2y"] = auc_entry(horizon_subset(preds, mode, 2), cfg, 0xC12);
    r["auc_gt2y"] = auc_entry(horizon_subset(preds, mode, 3), cfg, 0xC13);
    return r;
}

std::vector<Prediction> predictions_for(const Model& m, const std::vector<PatientData>& patients) {
    std::vector<Prediction> out;
    out.reserve(patients.size());
    for (const PatientData& p : patients)
        out.push_back({p.id, predict_patient(m, p).fused, p.label, p.category});
    return out;
}

std::string auc_text(const json& entry) {
    if (entry.is_null()) return "n/a";
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.4f (ci %.4f..%.4f)", entry["value"].get<double>(),
                  entry["ci"][0].get<double>(), entry["ci"][1].get<double>());
    return buf;
}

double auc_value(const json& entry) {
    return entry.is_null() ? std::nan("") : entry["value"].get<double>();
}

// the split assignment, the train/val/test partition of the loaded cohort
struct Partition {
    std::vector<PatientData> train, val, test;
};

Partition partition_patients(const std::vector<PatientData>& data, const RunConfig& cfg) {
    if (cfg.n_folds < 2) throw Error::validation("field 'n_folds' must be at least 2");
    if (cfg.val_fold < 0 || cfg.val_fold >= cfg.n_folds)
        throw Error::validation("field 'val_fold' must lie in [0, n_folds)");
    std::vector<std::pair<std::string, int>> pairs;
    pairs.reserve(data.size());
    for (const PatientData& p : data) pairs.emplace_back(p.id, p.label);
    const SplitPlan plan = split(pairs, cfg.seed, cfg.n_folds, cfg.test_fraction);
    std::set<std::string> test_ids(plan.test_ids.begin(), plan.test_ids.end());
    std::set<std::string> val_ids(plan.folds[static_cast<std::size_t>(cfg.val_fold)].begin(),
                                  plan.folds[static_cast<std::size_t>(cfg.val_fold)].end());
    Partition part;
    for (const PatientData& p : data) {
        if (test_ids.count(p.id))
            part.test.push_back(p);
        else if (val_ids.count(p.id))
            part.val.push_back(p);
        else
            part.train.push_back(p);
    }
    if (part.train.empty()) throw Error::validation("the training split is empty; loosen the fold settings");
    return part;
}

void write_splits(const fs::path& dir, const Partition& part) {
    auto ids = [](const std::vector<PatientData>& v) {
        std::vector<std::string> out;
        for (const PatientData& p : v) out.push_back(p.id);
        return out;
    };
    json j{{"train", ids(part.train)}, {"val", ids(part.val)}, {"test", ids(part.test)}};
    write_text_file((dir / "splits.json").string(), j.dump(2) + "\n");
}

// training-fold statistics: scalar pixel stats over every video, and
// per-feature mean / population sd pooled across patients and views
void fit_statistics(Model& m, const std::vector<PatientData>& train, int fold_id) {
    std::vector<Tensor> vids;
    vids.reserve(train.size() * kNumViews);
    for (const PatientData& p : train)
        for (const Tensor& v : p.videos) vids.push_back(v);
    m.pixel_stats = compute_stats(vids, fold_id);

    std::vector<double> mean(static_cast<std::size_t>(kFeatureCount), 0.0);
    std::vector<double> sd(static_cast<std::size_t>(kFeatureCount), 0.0);
    const double n = static_cast<double>(train.size() * kNumViews);
    for (const PatientData& p : train)
        for (const auto& f : p.features)
            for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += f[i];
    for (double& v : mean) v /= n;
    for (const PatientData& p : train)
        for (const auto& f : p.features)
            for (std::size_t i = 0; i < sd.size(); ++i) sd[i] += (f[i] - mean[i]) * (f[i] - mean[i]);
    for (double& v : sd) v = std::sqrt(v / n);
    m.feat_mean = std::move(mean);
    m.feat_std = std::move(sd);
}

void write_train_log(const fs::path& path, const std::vector<std::pair<std::string, std::vector<EpochLog>>>& parts) {
    std::string out = "epoch,split,loss\n";
    for (const auto& [split_name, log] : parts)
        for (const EpochLog& e : log)
            out += std::to_string(e.epoch + 1) + "," + split_name + "," + fmt_g(e.loss) + "\n";
    write_text_file(path.string(), out);
}

EpochHook checkpoint_hook(const RunConfig& cfg, const fs::path& dir, int total_epochs) {
    if (cfg.checkpoint_every <= 0) return {};
    const int every = cfg.checkpoint_every;
    return [dir, every, total_epochs](int epoch, const Model& m) {
        if (epoch % every != 0 || epoch == total_epochs) return; // the final model is saved anyway
        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%04d", epoch);
        save_model(m, (dir / "checkpoints" / name).string());
    };
}

void write_roc_csv(const fs::path& path, const std::vector<Prediction>& preds) {
    std::string out = "fpr,tpr\n";
    for (const auto& [fpr, tpr] : roc_points(preds)) out += fmt_g(fpr) + "," + fmt_g(tpr) + "\n";
    write_text_file(path.string(), out);
}

} // namespace

// ---------------------------------------------------------------- commands

std::string run_gen_synthetic(const RunConfig& cfg) {
    CohortConfig cc = cohort_config(cfg);
    validate(cc);
    const fs::path dir = open_run_dir(cfg);
    const Manifest m = generate_cohort(cc, cfg.out_dir);
    const std::string text = summary_text(describe_cohort(m));
    write_text_file((dir / "summary.txt").string(), text);
    return text;
}

std::string run_preprocess(const RunConfig& cfg) {
    require_field(cfg.manifest, "manifest");
    if (cfg.size < 8) throw Error::validation("field 'size' must be at least 8");
    if (cfg.frames < 1) throw Error::validation("field 'frames' must be at least 1");
    const HistoryFill fill = history_fill_mode(cfg);
    const Manifest m = read_manifest(cfg.manifest);
    const fs::path dir = open_run_dir(cfg);
    fs::create_directories(dir / "videos");

    std::map<std::string, std::array<std::string, kNumViews>> video_paths;
    for (const PatientRecord& p : m.patients) {
        std::array<std::string, kNumViews> paths;
        for (int v = 0; v < kNumViews; ++v) {
            std::vector<Tensor> history; // most recent first, as the exams are ordered
            for (const ExamRecord& e : p.exams) {
                const Tensor img = read_view_image(cfg.manifest, e.view_paths[static_cast<std::size_t>(v)]);
                history.push_back(resize_pad(otsu_segment(img).segmented, cfg.size));
            }
            const Tensor video = stack_screenings(history, cfg.frames, fill);
            const std::string rel =
                "videos/" + p.id + "_" + view_name(static_cast<View>(v)) + ".rdf1";
            write_rdf1((dir / rel).string(), video);
            paths[static_cast<std::size_t>(v)] = rel;
        }
        video_paths[p.id] = paths;
    }
    write_preprocessed_index((dir / "preprocessed.json").string(), cfg.size, cfg.frames, m.patients, video_paths);
    return "preprocessed " + std::to_string(m.patients.size()) + " patients to " + std::to_string(cfg.frames) +
           "x" + std::to_string(cfg.size) + "x" + std::to_string(cfg.size) + " videos under " + dir.string();
}

std::string run_extract_features(const RunConfig& cfg) {
    require_field(cfg.manifest, "manifest");
    const Manifest m = read_manifest(cfg.manifest);
    const fs::path dir = open_run_dir(cfg);

    std::vector<FeatureRow> rows;
    for (const PatientRecord& p : m.patients)
        for (const ExamRecord& e : p.exams)
            for (int v = 0; v < kNumViews; ++v) {
                const Tensor img = read_view_image(cfg.manifest, e.view_paths[static_cast<std::size_t>(v)]);
                FeatureRow r;
                r.patient_id = p.id;
                r.screening_index = e.screening_index;
                r.view = static_cast<View>(v);
                r.values = extract_all(img, otsu_segment(img).mask);
                rows.push_back(std::move(r));
            }
    write_feature_csv((dir / "features.csv").string(), rows);
    return "extracted " + std::to_string(kFeatureCount) + " features for " + std::to_string(rows.size()) +
           " (patient, screening, view) rows into " + (dir / "features.csv").string();
}

TrainOutcome run_train(const RunConfig& cfg) {
    require_field(cfg.preprocessed, "preprocessed");
    require_field(cfg.features, "features");
    const TrainConfig tc = train_config(cfg);
    tc.validate();
    const BackboneConfig bb = backbone_config(cfg);

    const std::vector<PatientData> data = load_patient_data(cfg.preprocessed, cfg.features);
    const Partition part = partition_patients(data, cfg);
    const fs::path dir = open_run_dir(cfg);
    write_splits(dir, part);

    Model model = make_model(bb, cfg.seed, cfg.use_gate, make_gate(cfg.gate_init, cfg.gate_fixed));
    fit_statistics(model, part.train, cfg.val_fold);

    std::vector<std::string> lines;
    const TrainResult res = train(std::move(model), part.train, tc, LabelSource::hard, "train", 0, &lines,
                                  checkpoint_hook(cfg, dir, tc.epochs));
    save_model(res.model, (dir / "model").string());
    write_train_log(dir / "train_log.csv", {{"train", res.log}});

    TrainOutcome out;
    out.model_dir = (dir / "model").string();
    json report_val, report_test;
    const std::pair<const char*, const std::vector<PatientData>*> eval_sets[] = {{"val", &part.val},
                                                                                 {"test", &part.test}};
    for (const auto& [name, subset] : eval_sets) {
        const std::vector<Prediction> preds = predictions_for(res.model, *subset);
        write_predictions_csv((dir / ("predictions_" + std::string(name) + ".csv")).string(), preds);
        const json rep = make_report(preds, cfg);
        write_text_file((dir / ("report_" + std::string(name) + ".json")).string(), rep.dump(2) + "\n");
        (std::string(name) == "val" ? report_val : report_test) = rep;
    }
    out.val_auc = auc_value(report_val["auc_overall"]);
    out.test_auc = auc_value(report_test["auc_overall"]);
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "trained %zu patients for %d epochs (%lld updates)\nval  AUC %s over %zu patients\ntest AUC %s over %zu patients\nmodel: %s",
                  part.train.size(), tc.epochs, static_cast<long long>(res.steps),
                  auc_text(report_val["auc_overall"]).c_str(), part.val.size(),
                  auc_text(report_test["auc_overall"]).c_str(), part.test.size(), out.model_dir.c_str());
    out.summary = buf;
    return out;
}

FinetuneOutcome run_finetune_baf(const RunConfig& cfg) {
    require_field(cfg.preprocessed, "preprocessed");
    require_field(cfg.features, "features");
    require_field(cfg.model_dir, "model_dir");
    const TrainConfig tc = train_config(cfg);
    tc.validate();
    if (tc.epochs % 2 != 0) throw Error::validation("field 'epochs' must be even for the two-stage finetune");

    const Model teacher = load_model(cfg.model_dir);
    const std::vector<PatientData> data = load_patient_data(cfg.preprocessed, cfg.features);
    const Partition part = partition_patients(data, cfg);
    const fs::path dir = open_run_dir(cfg);
    write_splits(dir, part);

    std::vector<std::string> lines;
    const FinetuneResult fr =
        two_stage_finetune(teacher, part.train, tc, &lines, checkpoint_hook(cfg, dir, tc.epochs));
    save_model(fr.stage1, (dir / "stage1").string());
    save_model(fr.model, (dir / "model").string());
    // global epoch numbering across the stages, matching the checkpoints
    std::vector<EpochLog> s2 = fr.log_stage2;
    for (EpochLog& e : s2) e.epoch += tc.epochs / 2;
    write_train_log(dir / "train_log.csv", {{"stage1", fr.log_stage1}, {"stage2", s2}});

    FinetuneOutcome out;
    out.model_dir = (dir / "model").string();
    out.n_soft = static_cast<int>(fr.n_soft);
    out.n_filtered = static_cast<int>(fr.n_filtered);
    out.threshold = fr.threshold;

    json report_test, report_stage1;
    const std::tuple<const char*, const Model*, const std::vector<PatientData>*> eval_sets[] = {
        {"val", &fr.model, &part.val},
        {"test", &fr.model, &part.test},
        {"stage1_val", &fr.stage1, &part.val},
        {"stage1_test", &fr.stage1, &part.test}};
    for (const auto& [name, model, subset] : eval_sets) {
        const std::vector<Prediction> preds = predictions_for(*model, *subset);
        write_predictions_csv((dir / ("predictions_" + std::string(name) + ".csv")).string(), preds);
        const json rep = make_report(preds, cfg);
        write_text_file((dir / ("report_" + std::string(name) + ".json")).string(), rep.dump(2) + "\n");
        if (std::string(name) == "test") report_test = rep;
        if (std::string(name) == "stage1_test") report_stage1 = rep;
    }
    out.final_test_auc = auc_value(report_test["auc_overall"]);
    out.stage1_test_auc = auc_value(report_stage1["auc_overall"]);

    json baf{{"n_soft", out.n_soft}, {"n_filtered", out.n_filtered}, {"threshold", out.threshold}};
    write_text_file((dir / "baf.json").string(), baf.dump(2) + "\n");

    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "finetuned on %d soft-labeled patients; stage two kept %d (control asymmetry cut %.6f)\n"
                  "stage1 test AUC %s\nfinal  test AUC %s\nmodel: %s",
                  out.n_soft, out.n_filtered, out.threshold, auc_text(report_stage1["auc_overall"]).c_str(),
                  auc_text(report_test["auc_overall"]).c_str(), out.model_dir.c_str());
    out.summary = buf;
    return out;
}

std::string run_eval(const RunConfig& cfg) {
    require_field(cfg.predictions, "predictions");
    const std::vector<Prediction> preds = read_predictions_csv(cfg.predictions);
    const HorizonMode mode = horizon_mode(cfg);
    const fs::path dir = open_run_dir(cfg);

    json rep = make_report(preds, cfg);
    if (two_class(preds)) write_roc_csv(dir / "roc_overall.csv", preds);
    const std::pair<const char*, int> horizons[] = {{"roc_1y.csv", 1}, {"roc_2y.csv", 2}, {"roc_gt2y.csv", 3}};
    for (const auto& [fname, which] : horizons) {
        const std::vector<Prediction> sub = horizon_subset(preds, mode, which);
        if (!sub.empty() && two_class(sub)) write_roc_csv(dir / fname, sub);
    }

    if (!cfg.compare.empty()) {
        const std::vector<Prediction> other = read_predictions_csv(cfg.compare);
        std::map<std::string, Prediction> by_id;
        for (const Prediction& p : other)
            if (!by_id.emplace(p.patient_id, p).second)
                throw Error::validation("comparison predictions repeat patient " + p.patient_id);
        if (other.size() != preds.size())
            throw Error::validation("comparison predictions cover a different cohort");
        std::vector<double> a, b;
        std::vector<int> labels;
        for (const Prediction& p : preds) {
            auto it = by_id.find(p.patient_id);
            if (it == by_id.end())
                throw Error::validation("comparison predictions are missing patient " + p.patient_id);
            if (it->second.label != p.label)
                throw Error::validation("comparison predictions disagree on the label of patient " + p.patient_id);
            a.push_back(p.score);
            b.push_back(it->second.score);
            labels.push_back(p.label);
        }
        const DelongResult d = delong_test(a, b, labels);
        rep["delong"] = {{"auc_a", d.auc_a}, {"auc_b", d.auc_b}, {"z", d.z}, {"p", d.p}};
    }

    const std::string text = rep.dump(2) + "\n";
    write_text_file((dir / "report.json").string(), text);
    return text;
}

std::string run_bench_attention(const RunConfig& cfg) {
    if (cfg.bench_n.empty()) throw Error::validation("field 'bench_n' must list at least one sequence length");
    for (int n : cfg.bench_n)
        if (n < 1) throw Error::validation("field 'bench_n' entries must be positive");
    if (cfg.bench_c < 1 || cfg.bench_cb < 1)
        throw Error::validation("fields 'bench_c' and 'bench_cb' must be positive");

    const int c = cfg.bench_c, cb = cfg.bench_cb;
    char buf[160];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-9s %8s %12s %16s %12s\n", "kernel", "n", "params", "macs", "wall_ms");
    out += buf;

    std::vector<std::pair<int, std::array<double, 2>>> walls; // per n: shift, nonlocal
    for (int n : cfg.bench_n) {
        std::array<double, 2> w{};
        for (int k = 0; k < 2; ++k) {
            const AttentionKind kind = k == 0 ? AttentionKind::shift : AttentionKind::nonlocal;
            Rng rng(Rng::derive(cfg.seed, 0xBE00 + static_cast<std::uint64_t>(n) * 2 + static_cast<std::uint64_t>(k)));
            Tensor x({n, c});
            for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.gaussian(0.0, 0.5);
            Tape tape;
            double ms = 0.0;
            if (kind == AttentionKind::shift) {
                ShiftConfig sc;
                sc.c_in = c;
                sc.c_b = cb;
                const ShiftParams p = shift_params_init(tape, sc, rng, 0.1);
                const VarId xv = tape.input(std::move(x));
                const auto t0 = std::chrono::steady_clock::now();
                const ShiftOut so = shift_forward(tape, xv, sc, p);
                tape.value(so.y);
                ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            } else {
                const NonlocalParams p = nonlocal_params_init(tape, c, cb, rng, 0.1);
                const VarId xv = tape.input(std::move(x));
                const auto t0 = std::chrono::steady_clock::now();
                const VarId y = nonlocal_forward(tape, xv, cb, p, std::max<std::int64_t>(cfg.nonlocal_cap, n));
                tape.value(y);
                ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            }
            w[static_cast<std::size_t>(k)] = ms;
            std::snprintf(buf, sizeof(buf), "%-9s %8d %12lld %16lld %12.2f\n",
                          kind == AttentionKind::shift ? "shift" : "nonlocal", n,
                          static_cast<long long>(count_params(kind, c, cb)),
                          static_cast<long long>(count_macs(kind, c, cb, n)), ms);
            out += buf;
        }
        walls.emplace_back(n, w);
    }
    for (const auto& [n, w] : walls) {
        const double mac_ratio = static_cast<double>(count_macs(AttentionKind::nonlocal, c, cb, n)) /
                                 static_cast<double>(count_macs(AttentionKind::shift, c, cb, n));
        std::snprintf(buf, sizeof(buf), "n=%d: nonlocal/shift mac ratio %.2f, wall ratio %.2f\n", n, mac_ratio,
                      w[0] > 0.0 ? w[1] / w[0] : 0.0);
        out += buf;
    }
    if (!cfg.out_dir.empty()) {
        const fs::path dir = open_run_dir(cfg);
        write_text_file((dir / "bench.txt").string(), out);
    }
    return out;
}

std::string run_export_attention(const RunConfig& cfg) {
    require_field(cfg.model_dir, "model_dir");
    require_field(cfg.preprocessed, "preprocessed");
    if (cfg.top_k < 1) throw Error::validation("field 'top_k' must be positive");
    const Model m = load_model(cfg.model_dir);
    if (m.backbone_cfg.shift_layer == 0 && m.backbone_cfg.nonlocal_layer == 0)
        throw Error::validation("the model carries no attention block to export");

    json idx = json::parse(read_text_file(cfg.preprocessed), nullptr, false);
    if (idx.is_discarded() || !idx.contains("patients") || !idx["patients"].is_array() || idx["patients"].empty())
        throw Error::validation("preprocessed index " + cfg.preprocessed + " is unusable");
    const View view = view_from_name(cfg.view);
    json entry;
    for (const json& jp : idx["patients"])
        if (cfg.patient.empty() || jp.value("id", "") == cfg.patient) {
            entry = jp;
            break;
        }
    if (entry.is_null())
        throw Error::validation("patient '" + cfg.patient + "' is not in the preprocessed index");
    const std::string id = entry.value("id", "");
    const std::string rel = entry.at("videos").at(view_name(view)).get<std::string>();
    const Tensor video = read_rdf1(sibling(cfg.preprocessed, rel));
    if (video.rank() != 3) throw Error::validation("video " + rel + " must be rank 3");
    const int T = video.dim(0), H = video.dim(1), W = video.dim(2);

    const Tensor norm = normalize(video, m.pixel_stats);
    Tape tape;
    const Backbone::Vars vars = m.net.register_params(tape, false);
    const VarId vid = tape.input(Tensor({1, T, H, W}, std::vector<double>(norm.data(), norm.data() + norm.size())));
    const Backbone::Out bout = m.net.forward(tape, vars, vid);
    if (bout.alpha < 0)
        throw Error::validation("the attention block exposes no position distribution to export");
    const Tensor alpha = tape.value(bout.alpha);

    const fs::path dir = open_run_dir(cfg);
    const int k = std::min<int>(cfg.top_k, static_cast<int>(alpha.size()));
    std::string csv = "rank,frame,row,col,weight\n";
    int rank = 1;
    for (const AttentionPoint& p : top_attention_points(alpha, k, bout.at, bout.ah, bout.aw))
        csv += std::to_string(rank++) + "," + std::to_string(p.t) + "," + std::to_string(p.y) + "," +
               std::to_string(p.x) + "," + fmt_g(p.weight) + "\n";
    write_text_file((dir / "attention_topk.csv").string(), csv);

    double amax = 0.0;
    for (std::int64_t i = 0; i < alpha.size(); ++i) amax = std::max(amax, alpha[i]);
    double vmin = video[0], vmax = video[0];
    for (std::int64_t i = 0; i < video.size(); ++i) {
        vmin = std::min(vmin, video[i]);
        vmax = std::max(vmax, video[i]);
    }
    const double vspan = vmax > vmin ? vmax - vmin : 1.0;
    for (int t = 0; t < bout.at; ++t) {
        Tensor heat({bout.ah, bout.aw});
        for (int y = 0; y < bout.ah; ++y)
            for (int x = 0; x < bout.aw; ++x)
                heat[static_cast<std::int64_t>(y) * bout.aw + x] =
                    amax > 0.0
                        ? alpha[(static_cast<std::int64_t>(t) * bout.ah + y) * bout.aw + x] / amax * 255.0
                        : 0.0;
        const Tensor up = resize_pad(heat, H);
        char name[48];
        std::snprintf(name, sizeof(name), "attention_f%02d.pgm", t);
        write_pgm((dir / name).string(), up);

        Tensor overlay({H, W});
        const int vt = std::min(t, T - 1); // attention grid frames track video frames
        for (std::int64_t i = 0; i < overlay.size(); ++i) {
            const double base = (video[static_cast<std::int64_t>(vt) * H * W + i] - vmin) / vspan * 255.0;
            overlay[i] = 0.5 * base + 0.5 * up[i];
        }
        std::snprintf(name, sizeof(name), "overlay_f%02d.pgm", t);
        write_pgm((dir / name).string(), overlay);
    }
    return "exported top-" + std::to_string(k) + " attention points and " + std::to_string(bout.at) +
           " heatmap/overlay frames for patient " + id + " view " + view_name(view) + " into " + dir.string();
}

std::string run_describe(const RunConfig& cfg) {
    std::string text;
    if (!cfg.model_dir.empty()) {
        const Model m = load_model(cfg.model_dir);
        std::int64_t n_params = m.fusion_w.size() + m.fusion_b.size() + (m.use_gate ? 2 : 0);
        for (const auto& [name, t] : m.net.params()) n_params += t.size();
        char buf[512];
        std::snprintf(buf, sizeof(buf),
                      "model %s\n  parameters: %lld\n  embed_dim: %d, layers: %zu, blocks per layer: %d\n"
                      "  attention: %s (layer %d)\n  gate: %s (fixed %.3f)\n  pixel stats: mean %.6g sd %.6g (fold %d)\n",
                      cfg.model_dir.c_str(), static_cast<long long>(n_params), m.backbone_cfg.embed_dim,
                      m.backbone_cfg.layer_channels.size(), m.backbone_cfg.blocks_per_layer,
                      m.backbone_cfg.shift_layer      ? "additive"
                      : m.backbone_cfg.nonlocal_layer ? "nonlocal"
                                                      : "none",
                      std::max(m.backbone_cfg.shift_layer, m.backbone_cfg.nonlocal_layer),
                      m.use_gate ? "learned" : "off", m.gate_w_f, m.pixel_stats.mean, m.pixel_stats.std_dev,
                      m.pixel_stats.fold_id);
        text += buf;
    }
    if (!cfg.manifest.empty()) text += summary_text(describe_cohort(read_manifest(cfg.manifest)));
    if (text.empty())
        throw Error::validation("describe needs a 'manifest' or a 'model_dir'");
    if (!cfg.out_dir.empty()) {
        const fs::path dir = open_run_dir(cfg);
        write_text_file((dir / "describe.txt").string(), text);
    }
    return text;
}

// ---------------------------------------------------------------- grad check

namespace {

Tensor rand_tensor(Rng& rng, std::vector<int> shape, double lo, double hi) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// scalarize through a fixed random weighting so permuted/transposed
// gradients cannot cancel out
VarId pin(Tape& tape, VarId y, Rng& rng) {
    const Tensor& v = tape.value(y);
    Tensor w(v.shape());
    for (std::int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(0.25, 1.75);
    return tape.reduce_sum(tape.mul(y, tape.input(std::move(w))));
}

} // namespace

GradCheckReport run_grad_check(const RunConfig& cfg) {
    GradCheckReport rep;
    Rng rng(Rng::derive(cfg.seed, 0x6DC3));
    std::vector<std::pair<std::string, double>> results;

    // central-difference step: for values of order one the roundoff term
    // |f| eps_mach / step crosses the step^2 truncation term near 1e-5, and
    // the deep compositions below are roundoff-limited well past 1e-6
    constexpr double kFdStep = 1e-5;

    // the pin weights are re-derived per evaluation so the analytic pass and
    // every finite-difference probe see the same scalarization
    auto check1 = [&](const char* name, const std::function<VarId(Tape&, VarId)>& f, const Tensor& x) {
        const std::uint64_t salt = 0x9100 + results.size();
        results.emplace_back(name, grad_check(
                                       [&, salt](Tape& t, VarId v) {
                                           Rng pin_rng(Rng::derive(cfg.seed, salt));
                                           return pin(t, f(t, v), pin_rng);
                                       },
                                       x, kFdStep));
    };
    auto check_multi = [&](const char* name, const std::function<VarId(Tape&, const std::vector<VarId>&)>& f,
                           std::vector<Tensor> xs) {
        const std::uint64_t salt = 0x9800 + results.size();
        results.emplace_back(name, grad_check_multi(
                                       [&, salt](Tape& t, const std::vector<VarId>& vs) {
                                           Rng pin_rng(Rng::derive(cfg.seed, salt));
                                           return pin(t, f(t, vs), pin_rng);
                                       },
                                       std::move(xs), kFdStep));
    };

    const Tensor a23 = rand_tensor(rng, {2, 3}, -1.2, 1.2);
    const Tensor b23 = rand_tensor(rng, {2, 3}, -1.1, 1.3);
    const Tensor b3 = rand_tensor(rng, {3}, 0.4, 1.6); // positive: doubles as divisor
    const Tensor pos23 = rand_tensor(rng, {2, 3}, 0.3, 1.8);
    const Tensor off23 = rand_tensor(rng, {2, 3}, 0.15, 1.1); // clear of the relu/abs kink

    check_multi("add", [](Tape& t, const std::vector<VarId>& v) { return t.add(v[0], v[1]); }, {a23, b23});
    check_multi("sub", [](Tape& t, const std::vector<VarId>& v) { return t.sub(v[0], v[1]); }, {a23, b23});
    check_multi("mul", [](Tape& t, const std::vector<VarId>& v) { return t.mul(v[0], v[1]); }, {a23, b23});
    check_multi("div", [](Tape& t, const std::vector<VarId>& v) { return t.div(v[0], v[1]); }, {a23, b3});
    check1("neg", [](Tape& t, VarId v) { return t.neg(v); }, a23);
    check1("sigmoid", [](Tape& t, VarId v) { return t.sigmoid(v); }, a23);
    check1("tanh", [](Tape& t, VarId v) { return t.tanh(v); }, a23);
    check1("exp", [](Tape& t, VarId v) { return t.exp(v); }, a23);
    check1("log", [](Tape& t, VarId v) { return t.log(v); }, pos23);
    check1("abs", [](Tape& t, VarId v) { return t.abs(v); }, off23);
    check1("relu", [](Tape& t, VarId v) { return t.relu(v); }, off23);
    check1("affine", [](Tape& t, VarId v) { return t.affine(v, 1.7, -0.3); }, a23);
    check_multi("matmul", [](Tape& t, const std::vector<VarId>& v) { return t.matmul(v[0], v[1]); },
                {rand_tensor(rng, {3, 4}, -1, 1), rand_tensor(rng, {4, 2}, -1, 1)});
    check1("transpose", [](Tape& t, VarId v) { return t.transpose(v); }, a23);
    check1("reshape", [](Tape& t, VarId v) { return t.reshape(v, {3, 2}); }, a23);
    check_multi("concat", [](Tape& t, const std::vector<VarId>& v) { return t.concat({v[0], v[1]}, 1); },
                {a23, b23});
    check1("softmax", [](Tape& t, VarId v) { return t.softmax(v, 1); }, a23);
    check1("reduce_sum", [](Tape& t, VarId v) { return t.reduce_sum(v, 1); }, a23);
    check1("reduce_mean", [](Tape& t, VarId v) { return t.reduce_mean(v, 0); }, a23);
    // distinct entries keep the arg-extremum stable under the probe step
    Tensor distinct({2, 3});
    for (std::int64_t i = 0; i < distinct.size(); ++i) distinct[i] = 0.37 * static_cast<double>(i) - 0.9;
    check1("reduce_max", [](Tape& t, VarId v) { return t.reduce_max(v, 1); }, distinct);
    check1("reduce_min", [](Tape& t, VarId v) { return t.reduce_min(v, 0); }, distinct);

    Conv3dOpts copts;
    copts.stride = 2;
    copts.pad = 1;
    check_multi("conv3d",
                [copts](Tape& t, const std::vector<VarId>& v) { return t.conv3d(v[0], v[1], copts); },
                {rand_tensor(rng, {2, 3, 5, 5}, -1, 1), rand_tensor(rng, {3, 2, 3, 3, 3}, -0.6, 0.6)});

    {
        ShiftConfig sc;
        sc.c_in = 4;
        sc.c_b = 2;
        check_multi("shift_block",
                    [sc](Tape& t, const std::vector<VarId>& v) {
                        ShiftParams p;
                        p.wq = v[1];
                        p.wk = v[2];
                        p.wv = v[3];
                        p.fcq_w = v[4];
                        p.fcq_b = v[5];
                        p.fck_w = v[6];
                        p.fck_b = v[7];
                        p.wo = v[8];
                        return shift_forward(t, v[0], sc, p).y;
                    },
                    {rand_tensor(rng, {6, 4}, -1, 1), rand_tensor(rng, {4, 2}, -0.7, 0.7),
                     rand_tensor(rng, {4, 2}, -0.7, 0.7), rand_tensor(rng, {4, 2}, -0.7, 0.7),
                     rand_tensor(rng, {2, 1}, -0.7, 0.7), rand_tensor(rng, {1}, -0.2, 0.2),
                     rand_tensor(rng, {2, 1}, -0.7, 0.7), rand_tensor(rng, {1}, -0.2, 0.2),
                     rand_tensor(rng, {2, 4}, -0.7, 0.7)});
    }
    check_multi("nonlocal_block",
                [](Tape& t, const std::vector<VarId>& v) {
                    NonlocalParams p;
                    p.theta = v[1];
                    p.phi = v[2];
                    p.g = v[3];
                    p.wo = v[4];
                    return nonlocal_forward(t, v[0], 2, p);
                },
                {rand_tensor(rng, {5, 4}, -1, 1), rand_tensor(rng, {4, 2}, -0.7, 0.7),
                 rand_tensor(rng, {4, 2}, -0.7, 0.7), rand_tensor(rng, {4, 2}, -0.7, 0.7),
                 rand_tensor(rng, {2, 4}, -0.7, 0.7)});

    {
        BackboneConfig bc;
        bc.stem_channels = 2;
        bc.layer_channels = {2};
        bc.layer_strides = {2};
        bc.blocks_per_layer = 1;
        bc.temporal_kernel = 3;
        bc.embed_dim = 3;
        bc.shift_layer = 1;
        const Backbone net = Backbone::build(bc, Rng::derive(cfg.seed, 0xBB));
        std::vector<std::string> names;
        std::vector<Tensor> xs;
        for (const auto& [name, t] : net.params()) {
            names.push_back(name);
            xs.push_back(t);
        }
        Rng vr(Rng::derive(cfg.seed, 0xB1D));
        xs.push_back(rand_tensor(vr, {1, 2, 8, 8}, 0.1, 0.9));
        check_multi("backbone",
                    [&net, &names](Tape& t, const std::vector<VarId>& v) {
                        Backbone::Vars vars;
                        for (std::size_t i = 0; i < names.size(); ++i) vars.ids[names[i]] = v[i];
                        return net.forward(t, vars, v.back()).embedding;
                    },
                    std::move(xs));
    }

    check_multi("gate",
                [](Tape& t, const std::vector<VarId>& v) {
                    return combine_gated(t, v[0], v[1], v[2], v[3], v[4], v[5], 0.4);
                },
                {Tensor::scalar(0.3), Tensor::scalar(-0.5), Tensor::scalar(0.7), Tensor::scalar(0.1),
                 Tensor::scalar(0.25), Tensor::scalar(-0.15)});
    check1("bce_chain", [](Tape& t, VarId v) { return bce_loss(t, t.sigmoid(v), 0.3); }, Tensor::scalar(0.4));

    char buf[96];
    rep.ok = true;
    for (const auto& [name, err] : results) {
        std::snprintf(buf, sizeof(buf), "%-15s max relative error %.3e\n", name.c_str(), err);
        rep.text += buf;
        rep.worst = std::max(rep.worst, err);
        if (!(err < 1e-6)) rep.ok = false;
    }
    std::snprintf(buf, sizeof(buf), "worst %.3e (%s)\n", rep.worst, rep.ok ? "all under 1e-6" : "FAILED");
    rep.text += buf;
    if (!cfg.out_dir.empty()) {
        const fs::path dir = open_run_dir(cfg);
        write_text_file((dir / "grad_check.txt").string(), rep.text);
    }
    return rep;
}

} // namespace radif
