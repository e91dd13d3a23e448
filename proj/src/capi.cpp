#include "radifusion.h"

#include <cstdlib>
#include <cstring>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "radifusion/dataset.hpp"
#include "radifusion/error.hpp"
#include "radifusion/head_fusion.hpp"
#include "radifusion/model.hpp"
#include "radifusion/pipeline.hpp"
#include "radifusion/radiomics.hpp"

using nlohmann::json;

extern "C" {

struct radif_model {
    radif::Model m;
};

struct radif_dataset {
    std::vector<radif::PatientData> patients;
    std::map<std::string, std::size_t> by_id;
};

} // extern "C"

namespace {

thread_local std::string g_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

// every API call funnels through here so the thread-local message and the
// exception-to-status mapping stay in one place
template <class F>
int guarded(F&& body) {
    g_error.clear();
    try {
        return body();
    } catch (const radif::Error& e) {
        g_error = e.what();
        return e.code() == radif::Errc::validation ? RADIF_EINVAL : RADIF_ERUNTIME;
    } catch (const std::exception& e) {
        g_error = e.what();
        return RADIF_ERUNTIME;
    }
}

int fail_invalid(const char* msg) {
    g_error = msg;
    return RADIF_EINVAL;
}

radif::RunConfig parse_config(const char* config_json) {
    radif::RunConfig cfg;
    radif::apply_config_json(cfg, config_json);
    return cfg;
}

// shared shape of the string-returning commands
template <class Run>
int run_command(const char* config_json, char** out, Run&& run) {
    if (!config_json) return fail_invalid("config_json must not be null");
    if (!out) return fail_invalid("the output pointer must not be null");
    *out = nullptr;
    return guarded([&] {
        *out = dup_string(run(parse_config(config_json)));
        return RADIF_OK;
    });
}

} // namespace

extern "C" {

const char* radif_version(void) { return "1.0.0"; }

const char* radif_last_error(void) { return g_error.c_str(); }

void radif_free(char* text) { std::free(text); }

char* radif_default_config(void) { return dup_string(radif::run_config_to_json(radif::RunConfig{})); }

int radif_merge_config(const char* base_json, const char* overlay_json, char** merged_out) {
    if (!base_json || !overlay_json) return fail_invalid("both configuration strings must be non-null");
    if (!merged_out) return fail_invalid("merged_out must not be null");
    *merged_out = nullptr;
    return guarded([&] {
        radif::RunConfig cfg;
        radif::apply_config_json(cfg, base_json, "base config");
        radif::apply_config_json(cfg, overlay_json, "overlay config");
        *merged_out = dup_string(radif::run_config_to_json(cfg));
        return RADIF_OK;
    });
}

int radif_gen_synthetic(const char* config_json, char** summary_out) {
    return run_command(config_json, summary_out, radif::run_gen_synthetic);
}

int radif_preprocess(const char* config_json, char** summary_out) {
    return run_command(config_json, summary_out, radif::run_preprocess);
}

int radif_extract_features(const char* config_json, char** summary_out) {
    return run_command(config_json, summary_out, radif::run_extract_features);
}

int radif_train(const char* config_json, char** summary_out) {
    return run_command(config_json, summary_out,
                       [](const radif::RunConfig& cfg) { return radif::run_train(cfg).summary; });
}

int radif_finetune_baf(const char* config_json, char** summary_out) {
    return run_command(config_json, summary_out,
                       [](const radif::RunConfig& cfg) { return radif::run_finetune_baf(cfg).summary; });
}

int radif_eval(const char* config_json, char** report_json_out) {
    return run_command(config_json, report_json_out, radif::run_eval);
}

int radif_bench_attention(const char* config_json, char** table_out) {
    return run_command(config_json, table_out, radif::run_bench_attention);
}

int radif_export_attention(const char* config_json, char** summary_out) {
    return run_command(config_json, summary_out, radif::run_export_attention);
}

int radif_describe(const char* config_json, char** text_out) {
    return run_command(config_json, text_out, radif::run_describe);
}

int radif_grad_check(const char* config_json, char** report_out, int* all_ok_out) {
    if (!config_json) return fail_invalid("config_json must not be null");
    if (!report_out) return fail_invalid("report_out must not be null");
    *report_out = nullptr;
    if (all_ok_out) *all_ok_out = 0;
    return guarded([&] {
        const radif::GradCheckReport rep = radif::run_grad_check(parse_config(config_json));
        *report_out = dup_string(rep.text);
        if (all_ok_out) *all_ok_out = rep.ok ? 1 : 0;
        return RADIF_OK;
    });
}

int radif_feature_count(void) { return radif::kFeatureCount; }

int radif_feature_name(int index, char** name_out) {
    if (!name_out) return fail_invalid("name_out must not be null");
    *name_out = nullptr;
    if (index < 0 || index >= radif::kFeatureCount) {
        g_error = "feature index " + std::to_string(index) + " is out of range 0.." +
                  std::to_string(radif::kFeatureCount - 1);
        return RADIF_EINVAL;
    }
    return guarded([&] {
        *name_out = dup_string(radif::feature_names()[static_cast<std::size_t>(index)]);
        return RADIF_OK;
    });
}

int radif_model_open(const char* model_dir, radif_model** out) {
    if (!model_dir) return fail_invalid("model_dir must not be null");
    if (!out) return fail_invalid("out must not be null");
    *out = nullptr;
    return guarded([&] {
        auto* handle = new radif_model{radif::load_model(model_dir)};
        *out = handle;
        return RADIF_OK;
    });
}

void radif_model_close(radif_model* model) { delete model; }

int radif_dataset_open(const char* preprocessed_index, const char* features_csv, radif_dataset** out) {
    if (!preprocessed_index || !features_csv) return fail_invalid("both dataset paths must be non-null");
    if (!out) return fail_invalid("out must not be null");
    *out = nullptr;
    return guarded([&] {
        auto handle = std::make_unique<radif_dataset>();
        handle->patients = radif::load_patient_data(preprocessed_index, features_csv);
        for (std::size_t i = 0; i < handle->patients.size(); ++i)
            handle->by_id.emplace(handle->patients[i].id, i);
        *out = handle.release();
        return RADIF_OK;
    });
}

void radif_dataset_close(radif_dataset* dataset) { delete dataset; }

int radif_dataset_size(const radif_dataset* dataset, int* n_out) {
    if (!dataset) return fail_invalid("dataset must not be null");
    if (!n_out) return fail_invalid("n_out must not be null");
    g_error.clear();
    *n_out = static_cast<int>(dataset->patients.size());
    return RADIF_OK;
}

int radif_dataset_id(const radif_dataset* dataset, int index, char** id_out) {
    if (!dataset) return fail_invalid("dataset must not be null");
    if (!id_out) return fail_invalid("id_out must not be null");
    *id_out = nullptr;
    if (index < 0 || index >= static_cast<int>(dataset->patients.size())) {
        g_error = "patient index " + std::to_string(index) + " is out of range";
        return RADIF_EINVAL;
    }
    return guarded([&] {
        *id_out = dup_string(dataset->patients[static_cast<std::size_t>(index)].id);
        return RADIF_OK;
    });
}

int radif_predict(const radif_model* model, const radif_dataset* dataset, const char* patient_id,
                  double* fused_out, double* gamma_out, double view_probs_out[4]) {
    if (!model || !dataset) return fail_invalid("model and dataset must not be null");
    if (!patient_id) return fail_invalid("patient_id must not be null");
    return guarded([&] {
        const auto it = dataset->by_id.find(patient_id);
        if (it == dataset->by_id.end())
            throw radif::Error::validation("patient '" + std::string(patient_id) +
                                           "' is not in the dataset");
        const radif::PatientScores s = radif::predict_patient(model->m, dataset->patients[it->second]);
        if (fused_out) *fused_out = s.fused;
        if (gamma_out) *gamma_out = s.gamma;
        if (view_probs_out) {
            const radif::ViewScores v = radif::per_view_scores(s.logits);
            view_probs_out[0] = v.lcc;
            view_probs_out[1] = v.rcc;
            view_probs_out[2] = v.lmlo;
            view_probs_out[3] = v.rmlo;
        }
        return RADIF_OK;
    });
}

} // extern "C"
