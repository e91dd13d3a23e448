// command-line front end; everything goes through the C API in radifusion.h
#include "radifusion.h"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

using nlohmann::json;

namespace {

std::string take(char* s) {
    std::string out = s ? s : "";
    radif_free(s);
    return out;
}

int fail(int rc) {
    std::fprintf(stderr, "error: %s\n", radif_last_error());
    return rc;
}

// one-line help per configuration field; the defaults come from the library
const std::map<std::string, const char*>& field_help() {
    static const std::map<std::string, const char*> help = {
        {"out_dir", "run directory; artifacts and a resolved_config.json snapshot land here"},
        {"manifest", "cohort manifest.json written by gen-synthetic"},
        {"preprocessed", "preprocessed.json index written by preprocess"},
        {"features", "features.csv table written by extract-features"},
        {"model_dir", "saved model directory written by train"},
        {"predictions", "predictions CSV to evaluate"},
        {"compare", "second predictions CSV for a paired AUC comparison"},
        {"patient", "patient id to export; empty picks the first in the index"},
        {"view", "mammographic view: LCC, RCC, LMLO or RMLO"},
        {"seed", "master RNG seed; a run is a pure function of it"},
        {"threads", "worker threads; 0 means all logical cores (compute is sequential in this build)"},
        {"n_patients", "cohort size"},
        {"case_fraction", "fraction of patients who develop cancer"},
        {"category_mix", "time-to-cancer mix among cases: within 1y, 1-2y, beyond 2y"},
        {"screenings_mix", "shares of patients with 1, 2, and 3+ screenings"},
        {"image_size", "synthetic image width; raw images are ~1.25x taller"},
        {"signal_strength", "malignancy signal scale; 0 erases the signal entirely"},
        {"size", "square side of each preprocessed frame"},
        {"frames", "screenings stacked per video, most recent first"},
        {"history_fill", "short-history padding: oldest_available or current"},
        {"stem_channels", "channels out of the stem convolution"},
        {"layer_channels", "channels per backbone stage, comma separated"},
        {"layer_strides", "spatial stride per backbone stage, comma separated"},
        {"blocks_per_layer", "residual blocks per stage"},
        {"temporal_kernel", "temporal extent of every 3D kernel"},
        {"embed_dim", "embedding width after global pooling"},
        {"attention", "attention block: none, shift or nonlocal"},
        {"attention_layer", "1-based stage the attention block follows"},
        {"temporal_pad", "temporal padding: replicate or zero"},
        {"nonlocal_cap", "max positions the non-local block attends over"},
        {"share_query_key", "attention variant: one projection for query and key"},
        {"share_alpha_beta", "attention variant: one score head for both distributions"},
        {"query_value_addition", "attention variant: add the query path into the value"},
        {"global_key_from_p", "attention variant: derive the global key from projected features"},
        {"use_gate", "fuse views with the learned two-scale gate instead of averaging"},
        {"gate_init", "initial effective gate scale"},
        {"gate_fixed", "fixed gate component excluded from training"},
        {"epochs", "training epochs (total across both stages for finetune-baf)"},
        {"batch_patients", "patients per optimizer step"},
        {"lr", "Adam learning rate"},
        {"beta1", "Adam first-moment decay"},
        {"beta2", "Adam second-moment decay"},
        {"adam_eps", "Adam denominator floor"},
        {"filter_percentile", "asymmetry percentile above which controls are dropped"},
        {"hard_labels_finetune", "finetune on hard labels instead of teacher soft labels"},
        {"warm_start_finetune", "start stage 1 from the teacher weights instead of fresh ones"},
        {"checkpoint_every", "save a checkpoint every N epochs; 0 keeps only the final model"},
        {"n_folds", "cross-validation folds carved from the non-test patients"},
        {"val_fold", "fold held out for validation"},
        {"test_fraction", "label-stratified share of patients held out for the test set"},
        {"n_boot", "bootstrap resamples behind every confidence interval"},
        {"alpha", "two-sided CI level, e.g. 0.05 for 95%"},
        {"horizon", "horizon AUC mode: cumulative or exclusive"},
        {"bench_n", "sequence lengths to benchmark, comma separated"},
        {"bench_c", "benchmark channel width"},
        {"bench_cb", "benchmark bottleneck width"},
        {"top_k", "attention points to list in the export"},
    };
    return help;
}

struct Command {
    const char* name;
    const char* help;
    int (*fn)(const char*, char**);
};

const Command kCommands[] = {
    {"gen-synthetic", "generate a synthetic screening cohort (manifest + images)", radif_gen_synthetic},
    {"preprocess", "segment, resize and stack each screening history into videos", radif_preprocess},
    {"extract-features", "compute texture features for every patient, screening and view",
     radif_extract_features},
    {"train", "train the risk model on the preprocessed cohort", radif_train},
    {"finetune-baf", "two-stage finetune driven by bilateral-asymmetry filtering", radif_finetune_baf},
    {"eval", "report AUCs, confidence intervals and ROC curves for a predictions file", radif_eval},
    {"bench-attention", "compare additive and non-local attention cost over sequence lengths",
     radif_bench_attention},
    {"export-attention", "dump one patient's attention distribution as CSV and heatmap overlays",
     radif_export_attention},
    {"grad-check", "audit every differentiable op against central differences", nullptr},
    {"describe", "summarize a cohort manifest or a saved model", nullptr},
};

// typed storage the CLI11 options bind to; only the chosen subcommand writes
struct FlagStore {
    std::map<std::string, long long> ints;
    std::map<std::string, double> doubles;
    std::map<std::string, std::string> strings;
    std::map<std::string, bool> bools;
    std::map<std::string, std::vector<long long>> int_lists;
    std::map<std::string, std::vector<double>> double_lists;
};

std::string default_display(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_array()) {
        std::string s;
        for (const auto& e : v) {
            if (!s.empty()) s += ',';
            s += e.dump();
        }
        return s;
    }
    return v.dump();
}

void add_field_flags(CLI::App* sub, const json& defaults, FlagStore& store,
                     std::map<std::string, CLI::Option*>& opts) {
    for (const auto& [key, value] : defaults.items()) {
        const std::string flag = "--" + key;
        const auto it = field_help().find(key);
        const std::string help = it == field_help().end() ? "" : it->second;
        CLI::Option* opt = nullptr;
        if (value.is_boolean()) {
            store.bools[key] = value.get<bool>();
            opt = sub->add_option(flag, store.bools[key], help);
        } else if (value.is_number_float()) {
            store.doubles[key] = value.get<double>();
            opt = sub->add_option(flag, store.doubles[key], help);
        } else if (value.is_number_integer() || value.is_number_unsigned()) {
            store.ints[key] = value.get<long long>();
            opt = sub->add_option(flag, store.ints[key], help);
        } else if (value.is_string()) {
            store.strings[key] = value.get<std::string>();
            opt = sub->add_option(flag, store.strings[key], help);
        } else if (value.is_array() && !value.empty() && value[0].is_number_float()) {
            store.double_lists[key] = value.get<std::vector<double>>();
            opt = sub->add_option(flag, store.double_lists[key], help)->delimiter(',');
        } else if (value.is_array()) {
            store.int_lists[key] = value.get<std::vector<long long>>();
            opt = sub->add_option(flag, store.int_lists[key], help)->delimiter(',');
        }
        if (opt) {
            opt->default_str(default_display(value));
            opts[key] = opt;
        }
    }
}

json overlay_from_flags(const json& defaults, const FlagStore& store,
                        const std::map<std::string, CLI::Option*>& opts) {
    json overlay = json::object();
    for (const auto& [key, opt] : opts) {
        if (opt->count() == 0) continue;
        const json& def = defaults.at(key);
        if (def.is_boolean())
            overlay[key] = store.bools.at(key);
        else if (def.is_number_float())
            overlay[key] = store.doubles.at(key);
        else if (def.is_number_integer() || def.is_number_unsigned())
            overlay[key] = store.ints.at(key);
        else if (def.is_string())
            overlay[key] = store.strings.at(key);
        else if (def.is_array() && !def.empty() && def[0].is_number_float())
            overlay[key] = store.double_lists.at(key);
        else
            overlay[key] = store.int_lists.at(key);
    }
    return overlay;
}

} // namespace

int main(int argc, char** argv) {
    const json defaults = json::parse(take(radif_default_config()));

    CLI::App app{"radif — longitudinal mammography risk pipeline"};
    app.set_version_flag("--version", radif_version());
    app.require_subcommand(1);

    FlagStore store;
    std::string config_path;
    std::map<const CLI::App*, const Command*> command_of;
    std::map<const CLI::App*, std::map<std::string, CLI::Option*>> options_of;
    for (const Command& cmd : kCommands) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->add_option("--config", config_path,
                        "JSON config file; explicitly passed flags override its values")
            ->check(CLI::ExistingFile);
        add_field_flags(sub, defaults, store, options_of[sub]);
        command_of[sub] = &cmd;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return RADIF_EINVAL;
    }

    const CLI::App* sub = app.get_subcommands().front();
    const Command& cmd = *command_of.at(sub);

    // defaults <- config file <- flags, later layers winning
    std::string config = defaults.dump();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        std::ostringstream text;
        text << in.rdbuf();
        if (!in.good() && !in.eof()) {
            std::fprintf(stderr, "error: cannot read %s\n", config_path.c_str());
            return RADIF_ERUNTIME;
        }
        char* merged = nullptr;
        if (const int rc = radif_merge_config(config.c_str(), text.str().c_str(), &merged)) return fail(rc);
        config = take(merged);
    }
    const json overlay = overlay_from_flags(defaults, store, options_of.at(sub));
    if (!overlay.empty()) {
        char* merged = nullptr;
        if (const int rc = radif_merge_config(config.c_str(), overlay.dump().c_str(), &merged))
            return fail(rc);
        config = take(merged);
    }

    std::string text;
    if (std::string(cmd.name) == "grad-check") {
        int ok = 0;
        char* out = nullptr;
        if (const int rc = radif_grad_check(config.c_str(), &out, &ok)) return fail(rc);
        text = take(out);
        std::fputs(text.c_str(), stdout);
        if (!ok) std::fprintf(stderr, "error: a gradient check exceeded the bound\n");
        return ok ? RADIF_OK : RADIF_ERUNTIME;
    }
    if (std::string(cmd.name) == "describe") {
        char* out = nullptr;
        if (const int rc = radif_describe(config.c_str(), &out)) return fail(rc);
        text = take(out);
    } else {
        char* out = nullptr;
        if (const int rc = cmd.fn(config.c_str(), &out)) return fail(rc);
        text = take(out);
    }
    std::fputs(text.c_str(), stdout);
    if (text.empty() || text.back() != '\n') std::fputc('\n', stdout);
    return RADIF_OK;
}
