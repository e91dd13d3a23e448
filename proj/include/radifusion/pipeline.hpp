#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "radifusion/backbone.hpp"
#include "radifusion/synth_cohort.hpp"
#include "radifusion/training.hpp"

namespace radif {

// Flat configuration shared by every command: cohort synthesis, video
// preprocessing, backbone topology, training, evaluation, and the
// benchmark / export utilities. JSON config files use exactly these field
// names; unknown keys are rejected; command-line flags override file
// values. Every command copies the fully resolved config into its run
// directory so a run can be replayed from that file alone.
struct RunConfig {
    // ---- paths ----
    std::string out_dir;      // run directory; every output lands here
    std::string manifest;     // cohort manifest JSON
    std::string preprocessed; // preprocessed index JSON
    std::string features;     // texture-feature CSV
    std::string model_dir;    // model checkpoint directory
    std::string predictions;  // predictions CSV (eval input)
    std::string compare;      // optional second predictions CSV (eval)
    std::string patient;      // export-attention target; empty = first
    std::string view = "LCC"; // export-attention view

    std::uint64_t seed = 0;
    int threads = 0; // 0 = all logical cores; compute is sequential today,
                     // so this only caps declared parallelism

    // ---- cohort synthesis ----
    int n_patients = 400;
    double case_fraction = 0.10;
    std::array<double, 3> category_mix = {0.60, 0.25, 0.15};
    std::array<double, 3> screenings_mix = {0.45, 0.35, 0.20};
    int image_size = 64;
    double signal_strength = 1.0;

    // ---- preprocessing ----
    int size = 64;   // output video height = width
    int frames = 2;  // stacked screenings per view
    std::string history_fill = "oldest_available"; // or "current"

    // ---- backbone ----
    int stem_channels = 8;
    std::vector<int> layer_channels = {8, 16};
    std::vector<int> layer_strides = {2, 2};
    int blocks_per_layer = 1;
    int temporal_kernel = 3;
    int embed_dim = 32;
    std::string attention = "shift"; // shift | nonlocal | none
    int attention_layer = 1;         // 1-based layer carrying the block
    std::string temporal_pad = "replicate"; // or "zero"
    std::int64_t nonlocal_cap = std::int64_t{1} << 16;
    bool share_query_key = false;
    bool share_alpha_beta = false;
    bool query_value_addition = false;
    bool global_key_from_p = false;

    // ---- fusion head ----
    bool use_gate = true;
    double gate_init = 0.6;  // effective per-orientation scale at start
    double gate_fixed = 0.4; // untrainable gate component

    // ---- training ----
    int epochs = 60; // even, so the two-stage finetune can split it
    int batch_patients = 12;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double filter_percentile = 90.0;
    bool hard_labels_finetune = false;
    bool warm_start_finetune = false;
    int checkpoint_every = 0; // 0 = final checkpoint only
    int n_folds = 5;
    int val_fold = 0;         // fold held out for validation
    double test_fraction = 0.2;

    // ---- evaluation ----
    int n_boot = 1000;
    double alpha = 0.05;
    std::string horizon = "cumulative"; // or "exclusive"

    // ---- bench-attention / export-attention ----
    std::vector<int> bench_n = {1024, 2048, 4096};
    int bench_c = 64;
    int bench_cb = 32;
    int top_k = 20;
};

// Overlays the keys present in `text` onto cfg; unknown keys and type
// mismatches are rejected with the offending field named.
void apply_config_json(RunConfig& cfg, const std::string& text, const std::string& where = "config");
RunConfig run_config_from_json(const std::string& text, const std::string& where = "config");
std::string run_config_to_json(const RunConfig& cfg);

// Field names in declaration order, e.g. for generating CLI flags.
const std::vector<std::string>& run_config_keys();

// Derived module configs (validated; errors name the offending field).
CohortConfig cohort_config(const RunConfig& cfg);
BackboneConfig backbone_config(const RunConfig& cfg);
TrainConfig train_config(const RunConfig& cfg);
HistoryFill history_fill_mode(const RunConfig& cfg);

// Commands. Each validates its inputs, writes its outputs under
// cfg.out_dir next to resolved_config.json, and returns a short human
// summary of what it did.
std::string run_gen_synthetic(const RunConfig& cfg);
std::string run_preprocess(const RunConfig& cfg);
std::string run_extract_features(const RunConfig& cfg);

struct TrainOutcome {
    std::string model_dir;
    double val_auc = 0.0, test_auc = 0.0; // NaN when the split is one-class
    std::string summary;
};
TrainOutcome run_train(const RunConfig& cfg);

struct FinetuneOutcome {
    std::string model_dir;
    double stage1_test_auc = 0.0, final_test_auc = 0.0;
    int n_soft = 0, n_filtered = 0;
    double threshold = 0.0;
    std::string summary;
};
FinetuneOutcome run_finetune_baf(const RunConfig& cfg);

// Returns the report JSON it also writes to out_dir/report.json.
std::string run_eval(const RunConfig& cfg);

// Parameter / MAC counts and wall time per kernel and sequence length.
std::string run_bench_attention(const RunConfig& cfg);

std::string run_export_attention(const RunConfig& cfg);

struct GradCheckReport {
    std::string text;   // one line per checked op
    double worst = 0.0; // largest relative error seen
    bool ok = false;    // every op under 1e-6
};
GradCheckReport run_grad_check(const RunConfig& cfg);

std::string run_describe(const RunConfig& cfg);

} // namespace radif
