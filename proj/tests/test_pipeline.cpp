#include "radifusion/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "radifusion/attention.hpp"
#include "radifusion/error.hpp"
#include "radifusion/evaluation.hpp"
#include "radifusion/io.hpp"
#include "radifusion/radiomics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using radif::RunConfig;

namespace {

fs::path scratch_root() {
    static const fs::path root = [] {
        const fs::path p = fs::temp_directory_path() / "radif_pipeline_tests";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

std::string slurp(const fs::path& p) { return radif::read_text_file(p.string()); }

// a complete desk-top run shared by the cases below: tiny cohort, short
// training, every stage chained through the on-disk artifacts
struct MiniRun {
    RunConfig base;
    fs::path cohort, prep, feat, train_dir, baf_dir;
    radif::TrainOutcome train_out;
    radif::FinetuneOutcome baf_out;
};

const MiniRun& mini() {
    static const MiniRun run = [] {
        MiniRun r;
        RunConfig& cfg = r.base;
        cfg.seed = 5;
        cfg.n_patients = 24;
        cfg.case_fraction = 0.25;
        cfg.image_size = 32;
        cfg.signal_strength = 1.8;
        cfg.size = 16;
        cfg.frames = 2;
        cfg.stem_channels = 2;
        cfg.layer_channels = {2};
        cfg.layer_strides = {2};
        cfg.blocks_per_layer = 1;
        cfg.temporal_kernel = 3;
        cfg.embed_dim = 4;
        cfg.attention = "shift";
        cfg.attention_layer = 1;
        cfg.epochs = 2;
        cfg.batch_patients = 4;
        cfg.lr = 0.02;
        cfg.n_folds = 3;
        cfg.val_fold = 0;
        cfg.test_fraction = 0.25;
        cfg.n_boot = 50;

        r.cohort = scratch_root() / "cohort";
        r.prep = scratch_root() / "prep";
        r.feat = scratch_root() / "feat";
        r.train_dir = scratch_root() / "train";
        r.baf_dir = scratch_root() / "baf";

        RunConfig c = cfg;
        c.out_dir = r.cohort.string();
        radif::run_gen_synthetic(c);

        c = cfg;
        c.out_dir = r.prep.string();
        c.manifest = (r.cohort / "manifest.json").string();
        radif::run_preprocess(c);

        c = cfg;
        c.out_dir = r.feat.string();
        c.manifest = (r.cohort / "manifest.json").string();
        radif::run_extract_features(c);

        c = cfg;
        c.out_dir = r.train_dir.string();
        c.preprocessed = (r.prep / "preprocessed.json").string();
        c.features = (r.feat / "features.csv").string();
        r.train_out = radif::run_train(c);

        c.out_dir = r.baf_dir.string();
        c.model_dir = r.train_out.model_dir;
        r.baf_out = radif::run_finetune_baf(c);
        return r;
    }();
    return run;
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char ch : text)
        if (ch == '\n') ++n;
    return n;
}

} // namespace

TEST_CASE("run configuration: defaults, round trip, and strict key checking") {
    const RunConfig def;
    CHECK(def.epochs == 60);
    CHECK(def.n_patients == 400);
    CHECK(def.size == 64);
    CHECK(def.frames == 2);
    CHECK(def.attention == "shift");
    CHECK(def.use_gate);
    CHECK(def.n_boot == 1000);

    // serialize -> parse returns the identical configuration
    const std::string text = radif::run_config_to_json(def);
    const RunConfig back = radif::run_config_from_json(text);
    CHECK(radif::run_config_to_json(back) == text);

    // the JSON names every declared field exactly once
    const json j = json::parse(text);
    CHECK(j.size() == radif::run_config_keys().size());
    for (const std::string& key : radif::run_config_keys()) CHECK(j.contains(key));

    // overlays only touch the keys present
    RunConfig cfg;
    radif::apply_config_json(cfg, R"({"epochs": 8, "lr": 0.5, "layer_channels": [3, 5]})");
    CHECK(cfg.epochs == 8);
    CHECK(cfg.lr == 0.5);
    CHECK(cfg.layer_channels == std::vector<int>{3, 5});
    CHECK(cfg.batch_patients == 12); // untouched

    // unknown keys and wrong types are named
    CHECK_THROWS_WITH_AS(radif::apply_config_json(cfg, R"({"epochz": 3})", "cfg"),
                         doctest::Contains("epochz"), radif::Error);
    CHECK_THROWS_WITH_AS(radif::apply_config_json(cfg, R"({"epochs": "three"})", "cfg"),
                         doctest::Contains("epochs"), radif::Error);
    CHECK_THROWS_WITH_AS(radif::apply_config_json(cfg, R"({"category_mix": [0.5, 0.5]})", "cfg"),
                         doctest::Contains("category_mix"), radif::Error);
    CHECK_THROWS_WITH_AS(radif::apply_config_json(cfg, R"({"seed": -4})", "cfg"), doctest::Contains("seed"),
                         radif::Error);
    CHECK_THROWS_AS(radif::apply_config_json(cfg, "[1,2]"), radif::Error);
    CHECK_THROWS_AS(radif::apply_config_json(cfg, "{nope"), radif::Error);

    // derived module configs honor the enum strings
    RunConfig bc;
    bc.attention = "nonlocal";
    bc.attention_layer = 2;
    CHECK(radif::backbone_config(bc).nonlocal_layer == 2);
    CHECK(radif::backbone_config(bc).shift_layer == 0);
    bc.attention = "none";
    CHECK(radif::backbone_config(bc).nonlocal_layer == 0);
    bc.attention = "shift";
    bc.attention_layer = 9;
    CHECK_THROWS_WITH_AS(radif::backbone_config(bc), doctest::Contains("attention_layer"), radif::Error);
    bc.attention = "sideways";
    CHECK_THROWS_AS(radif::backbone_config(bc), radif::Error);
    bc = RunConfig{};
    bc.temporal_pad = "wrap";
    CHECK_THROWS_WITH_AS(radif::backbone_config(bc), doctest::Contains("temporal_pad"), radif::Error);
    bc = RunConfig{};
    bc.history_fill = "newest";
    CHECK_THROWS_AS(radif::history_fill_mode(bc), radif::Error);
    CHECK(radif::history_fill_mode(RunConfig{}) == radif::HistoryFill::oldest_available);

    CHECK(radif::train_config(RunConfig{}).eps == 1e-8);
    CHECK(radif::cohort_config(RunConfig{}).n_patients == 400);
}

TEST_CASE("the synthetic chain leaves a complete, well-formed run directory trail") {
    const MiniRun& r = mini();

    // gen-synthetic
    CHECK(fs::exists(r.cohort / "manifest.json"));
    CHECK(fs::exists(r.cohort / "resolved_config.json"));
    const std::string summary = slurp(r.cohort / "summary.txt");
    CHECK(summary.find("24") != std::string::npos);
    const radif::Manifest m = radif::read_manifest((r.cohort / "manifest.json").string());
    REQUIRE(m.patients.size() == 24);

    // preprocess: every (patient, view) video with the declared dimensions
    CHECK(fs::exists(r.prep / "preprocessed.json"));
    int vids = 0;
    for (const auto& e : fs::directory_iterator(r.prep / "videos")) {
        const radif::Tensor v = radif::read_rdf1(e.path().string());
        REQUIRE(v.shape() == std::vector<int>{2, 16, 16});
        ++vids;
    }
    CHECK(vids == 24 * radif::kNumViews);

    // extract-features: one row per (patient, screening, view)
    std::size_t expect_rows = 0;
    for (const auto& p : m.patients) expect_rows += p.exams.size() * radif::kNumViews;
    const auto rows = radif::read_feature_csv((r.feat / "features.csv").string());
    CHECK(rows.size() == expect_rows);
    for (const auto& row : rows) {
        REQUIRE(row.values.size() == static_cast<std::size_t>(radif::kFeatureCount));
        for (double v : row.values) CHECK(std::isfinite(v));
    }

    // train: model, logs, predictions, reports, splits
    CHECK(fs::exists(r.train_dir / "model" / "model.json"));
    const std::string log = slurp(r.train_dir / "train_log.csv");
    CHECK(log.rfind("epoch,split,loss\n", 0) == 0);
    CHECK(count_lines(log) == 1 + r.base.epochs);
    CHECK(log.find(",train,") != std::string::npos);

    const json splits = json::parse(slurp(r.train_dir / "splits.json"));
    std::set<std::string> seen;
    for (const char* part : {"train", "val", "test"})
        for (const auto& id : splits[part]) seen.insert(id.get<std::string>());
    CHECK(seen.size() == 24); // a partition: every patient exactly once
    CHECK(splits["train"].size() + splits["val"].size() + splits["test"].size() == 24);

    const auto val_preds = radif::read_predictions_csv((r.train_dir / "predictions_val.csv").string());
    const auto test_preds = radif::read_predictions_csv((r.train_dir / "predictions_test.csv").string());
    CHECK(val_preds.size() == splits["val"].size());
    CHECK(test_preds.size() == splits["test"].size());
    for (const auto& p : test_preds) {
        CHECK(p.score > 0.0);
        CHECK(p.score < 1.0);
    }

    const json rep = json::parse(slurp(r.train_dir / "report_test.json"));
    CHECK(rep.contains("auc_overall"));
    CHECK(rep.contains("auc_1y"));
    CHECK(rep.contains("auc_2y"));
    CHECK(rep.contains("auc_gt2y"));
    if (!rep["auc_overall"].is_null()) {
        const double v = rep["auc_overall"]["value"].get<double>();
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(rep["auc_overall"]["ci"][0].get<double>() <= rep["auc_overall"]["ci"][1].get<double>());
    }

    // finetune-baf: stage checkpoints, combined log, bookkeeping
    CHECK(fs::exists(r.baf_dir / "stage1" / "model.json"));
    CHECK(fs::exists(r.baf_dir / "model" / "model.json"));
    const std::string blog = slurp(r.baf_dir / "train_log.csv");
    CHECK(count_lines(blog) == 1 + r.base.epochs); // epochs/2 per stage
    CHECK(blog.find(",stage1,") != std::string::npos);
    CHECK(blog.find(",stage2,") != std::string::npos);
    const json baf = json::parse(slurp(r.baf_dir / "baf.json"));
    CHECK(baf["n_soft"].get<int>() == splits["train"].size());
    CHECK(baf["n_filtered"].get<int>() <= baf["n_soft"].get<int>());
    CHECK(baf["threshold"].get<double>() >= 0.0);
    CHECK(r.baf_out.n_soft == baf["n_soft"].get<int>());
    CHECK(fs::exists(r.baf_dir / "predictions_stage1_test.csv"));

    // missing inputs fail with the field named
    RunConfig bad = r.base;
    bad.out_dir = (scratch_root() / "bad").string();
    bad.preprocessed = (r.prep / "preprocessed.json").string();
    CHECK_THROWS_WITH_AS(radif::run_train(bad), doctest::Contains("features"), radif::Error);
    bad.features = (r.feat / "features.csv").string();
    bad.preprocessed.clear();
    CHECK_THROWS_WITH_AS(radif::run_train(bad), doctest::Contains("preprocessed"), radif::Error);
}

TEST_CASE("training runs are deterministic and replay exactly from the resolved config") {
    const MiniRun& r = mini();

    RunConfig replay = radif::run_config_from_json(slurp(r.train_dir / "resolved_config.json"));
    replay.out_dir = (scratch_root() / "train_replay").string();
    const radif::TrainOutcome again = radif::run_train(replay);

    CHECK(slurp(fs::path(replay.out_dir) / "predictions_test.csv") ==
          slurp(r.train_dir / "predictions_test.csv"));
    CHECK(slurp(fs::path(replay.out_dir) / "predictions_val.csv") == slurp(r.train_dir / "predictions_val.csv"));
    CHECK(slurp(fs::path(replay.out_dir) / "train_log.csv") == slurp(r.train_dir / "train_log.csv"));
    CHECK(slurp(fs::path(replay.out_dir) / "report_test.json") == slurp(r.train_dir / "report_test.json"));
    CHECK(slurp(fs::path(replay.out_dir) / "model" / "model.json") == slurp(r.train_dir / "model" / "model.json"));
    for (const auto& e : fs::directory_iterator(r.train_dir / "model")) {
        const fs::path other = fs::path(replay.out_dir) / "model" / e.path().filename();
        REQUIRE(fs::exists(other));
        CHECK(slurp(other) == slurp(e.path()));
    }
    CHECK(again.test_auc == r.train_out.test_auc);

    // rerunning the cohort generator bit-reproduces the raw images too
    RunConfig regen = r.base;
    regen.out_dir = (scratch_root() / "cohort_replay").string();
    radif::run_gen_synthetic(regen);
    CHECK(slurp(fs::path(regen.out_dir) / "manifest.json") == slurp(r.cohort / "manifest.json"));
    int checked = 0;
    for (const auto& e : fs::directory_iterator(r.cohort / "images")) {
        if (++checked > 8) break;
        CHECK(slurp(fs::path(regen.out_dir) / "images" / e.path().filename()) == slurp(e.path()));
    }
}

TEST_CASE("periodic checkpoints appear on the requested epochs and load back") {
    const MiniRun& r = mini();
    RunConfig cfg = radif::run_config_from_json(slurp(r.train_dir / "resolved_config.json"));
    cfg.out_dir = (scratch_root() / "train_ckpt").string();
    cfg.checkpoint_every = 1;
    radif::run_train(cfg);
    CHECK(fs::exists(fs::path(cfg.out_dir) / "checkpoints" / "epoch_0001" / "model.json"));
    CHECK(!fs::exists(fs::path(cfg.out_dir) / "checkpoints" / "epoch_0002")); // final lives in model/
    const radif::Model ck = radif::load_model((fs::path(cfg.out_dir) / "checkpoints" / "epoch_0001").string());
    CHECK(ck.backbone_cfg.embed_dim == 4);
}

TEST_CASE("evaluation reports match the horizon oracles and gate the ROC files") {
    const fs::path dir = scratch_root() / "eval";
    fs::create_directories(dir);

    // hand-built cohort spanning the three horizons
    std::vector<radif::Prediction> preds;
    radif::Rng rng(77);
    for (int i = 0; i < 40; ++i) preds.push_back({"c" + std::to_string(i), rng.uniform(0.0, 0.55), 0, 0});
    for (int i = 0; i < 6; ++i) preds.push_back({"a" + std::to_string(i), rng.uniform(0.35, 1.0), 1, 1});
    for (int i = 0; i < 5; ++i) preds.push_back({"b" + std::to_string(i), rng.uniform(0.3, 0.9), 1, 2});
    for (int i = 0; i < 4; ++i) preds.push_back({"d" + std::to_string(i), rng.uniform(0.25, 0.85), 1, 3});
    const fs::path csv = dir / "preds.csv";
    radif::write_predictions_csv(csv.string(), preds);

    RunConfig cfg;
    cfg.predictions = csv.string();
    cfg.out_dir = (dir / "run").string();
    cfg.n_boot = 200;
    cfg.seed = 3;
    const json rep = json::parse(radif::run_eval(cfg));

    const radif::HorizonAucs h = radif::horizon_aucs(preds, radif::HorizonMode::cumulative);
    CHECK(rep["auc_overall"]["value"].get<double>() == doctest::Approx(radif::auc(preds)).epsilon(1e-15));
    CHECK(rep["auc_1y"]["value"].get<double>() == doctest::Approx(*h.one_year).epsilon(1e-15));
    CHECK(rep["auc_2y"]["value"].get<double>() == doctest::Approx(*h.two_year).epsilon(1e-15));
    CHECK(rep["auc_gt2y"]["value"].get<double>() == doctest::Approx(*h.beyond_two_year).epsilon(1e-15));
    for (const char* key : {"auc_overall", "auc_1y", "auc_2y", "auc_gt2y"}) {
        const double v = rep[key]["value"].get<double>();
        CHECK(rep[key]["ci"][0].get<double>() <= v);
        CHECK(rep[key]["ci"][1].get<double>() >= v);
    }
    for (const char* f : {"report.json", "roc_overall.csv", "roc_1y.csv", "roc_2y.csv", "roc_gt2y.csv"})
        CHECK(fs::exists(fs::path(cfg.out_dir) / f));

    // exclusive mode scores each bucket on its own
    RunConfig ex = cfg;
    ex.out_dir = (dir / "run_ex").string();
    ex.horizon = "exclusive";
    const json repx = json::parse(radif::run_eval(ex));
    const radif::HorizonAucs hx = radif::horizon_aucs(preds, radif::HorizonMode::exclusive);
    CHECK(repx["auc_2y"]["value"].get<double>() == doctest::Approx(*hx.two_year).epsilon(1e-15));

    // perfect separation: every horizon pins to 1.0
    std::vector<radif::Prediction> perfect;
    for (int i = 0; i < 12; ++i) perfect.push_back({"n" + std::to_string(i), 0.1 + 0.01 * i, 0, 0});
    for (int i = 0; i < 6; ++i) perfect.push_back({"p" + std::to_string(i), 0.8 + 0.01 * i, 1, 1 + i % 3});
    radif::write_predictions_csv((dir / "perfect.csv").string(), perfect);
    RunConfig pf = cfg;
    pf.predictions = (dir / "perfect.csv").string();
    pf.out_dir = (dir / "run_perfect").string();
    const json repp = json::parse(radif::run_eval(pf));
    for (const char* key : {"auc_overall", "auc_1y", "auc_2y", "auc_gt2y"})
        CHECK(repp[key]["value"].get<double>() == 1.0);

    // a one-class horizon reports null instead of fabricating a number
    std::vector<radif::Prediction> no1y;
    for (int i = 0; i < 10; ++i) no1y.push_back({"n" + std::to_string(i), 0.1 * i, 0, 0});
    for (int i = 0; i < 3; ++i) no1y.push_back({"p" + std::to_string(i), 0.5 + 0.1 * i, 1, 3});
    radif::write_predictions_csv((dir / "no1y.csv").string(), no1y);
    RunConfig n1 = cfg;
    n1.predictions = (dir / "no1y.csv").string();
    n1.out_dir = (dir / "run_no1y").string();
    n1.horizon = "exclusive";
    const json repn = json::parse(radif::run_eval(n1));
    CHECK(repn["auc_1y"].is_null());
    CHECK(!repn["auc_gt2y"].is_null());
    CHECK(!fs::exists(fs::path(n1.out_dir) / "roc_1y.csv"));

    // the paired comparison block appears only with a second file
    CHECK(!rep.contains("delong"));
    std::vector<radif::Prediction> other = preds;
    for (auto& p : other) p.score = 1.0 - p.score; // anti-correlated scores
    radif::write_predictions_csv((dir / "other.csv").string(), other);
    RunConfig cmp = cfg;
    cmp.compare = (dir / "other.csv").string();
    cmp.out_dir = (dir / "run_cmp").string();
    const json repc = json::parse(radif::run_eval(cmp));
    REQUIRE(repc.contains("delong"));
    CHECK(repc["delong"]["auc_a"].get<double>() == doctest::Approx(radif::auc(preds)).epsilon(1e-15));
    CHECK(repc["delong"]["p"].get<double>() < 0.05);

    // self-comparison degenerates to p = 1
    RunConfig same = cfg;
    same.compare = csv.string();
    same.out_dir = (dir / "run_same").string();
    const json reps = json::parse(radif::run_eval(same));
    CHECK(reps["delong"]["p"].get<double>() == 1.0);

    // label disagreement between the files is rejected
    std::vector<radif::Prediction> flipped = preds;
    flipped[0].label = 1;
    flipped[0].category = 2;
    radif::write_predictions_csv((dir / "flipped.csv").string(), flipped);
    RunConfig bad = cfg;
    bad.compare = (dir / "flipped.csv").string();
    bad.out_dir = (dir / "run_bad").string();
    CHECK_THROWS_AS(radif::run_eval(bad), radif::Error);
}

TEST_CASE("the attention bench reports the analytic counts for both kernels") {
    RunConfig cfg;
    cfg.bench_n = {8, 32};
    cfg.bench_c = 6;
    cfg.bench_cb = 3;
    cfg.out_dir = (scratch_root() / "bench").string();
    const std::string table = radif::run_bench_attention(cfg);

    CHECK(table.find("shift") != std::string::npos);
    CHECK(table.find("nonlocal") != std::string::npos);
    CHECK(table.find(std::to_string(radif::count_params(radif::AttentionKind::shift, 6, 3))) != std::string::npos);
    CHECK(table.find(std::to_string(radif::count_macs(radif::AttentionKind::nonlocal, 6, 3, 32))) !=
          std::string::npos);
    CHECK(table.find("mac ratio") != std::string::npos);
    CHECK(slurp(fs::path(cfg.out_dir) / "bench.txt") == table);

    RunConfig bad = cfg;
    bad.bench_n = {};
    CHECK_THROWS_WITH_AS(radif::run_bench_attention(bad), doctest::Contains("bench_n"), radif::Error);
    bad = cfg;
    bad.bench_cb = 0;
    CHECK_THROWS_AS(radif::run_bench_attention(bad), radif::Error);
}

TEST_CASE("attention export writes ranked points and image-sized heatmaps") {
    const MiniRun& r = mini();
    RunConfig cfg = r.base;
    cfg.model_dir = r.train_out.model_dir;
    cfg.preprocessed = (r.prep / "preprocessed.json").string();
    cfg.out_dir = (scratch_root() / "export").string();
    cfg.top_k = 5;
    const std::string msg = radif::run_export_attention(cfg);
    CHECK(msg.find("top-5") != std::string::npos);

    const std::string csv = slurp(fs::path(cfg.out_dir) / "attention_topk.csv");
    CHECK(csv.rfind("rank,frame,row,col,weight\n", 0) == 0);
    CHECK(count_lines(csv) == 1 + 5);
    // weights arrive in descending order
    std::vector<double> weights;
    std::size_t pos = csv.find('\n') + 1;
    while (pos < csv.size()) {
        const std::size_t eol = csv.find('\n', pos);
        const std::string line = csv.substr(pos, eol - pos);
        weights.push_back(std::stod(line.substr(line.rfind(',') + 1)));
        pos = eol + 1;
    }
    for (std::size_t i = 1; i < weights.size(); ++i) CHECK(weights[i] <= weights[i - 1]);

    for (int t = 0; t < 2; ++t) {
        char name[48];
        std::snprintf(name, sizeof(name), "attention_f%02d.pgm", t);
        const radif::Tensor heat = radif::read_pgm((fs::path(cfg.out_dir) / name).string());
        CHECK(heat.shape() == std::vector<int>{16, 16});
        std::snprintf(name, sizeof(name), "overlay_f%02d.pgm", t);
        const radif::Tensor over = radif::read_pgm((fs::path(cfg.out_dir) / name).string());
        CHECK(over.shape() == std::vector<int>{16, 16});
    }

    // a specific patient can be chosen; unknown ids are rejected
    RunConfig pick = cfg;
    pick.patient = radif::read_manifest((r.cohort / "manifest.json").string()).patients[3].id;
    pick.out_dir = (scratch_root() / "export_pick").string();
    CHECK(radif::run_export_attention(pick).find(pick.patient) != std::string::npos);
    pick.patient = "nobody";
    CHECK_THROWS_AS(radif::run_export_attention(pick), radif::Error);

    // a model without an attention block has nothing to export
    RunConfig plain = radif::run_config_from_json(slurp(r.train_dir / "resolved_config.json"));
    plain.attention = "none";
    plain.out_dir = (scratch_root() / "train_plain").string();
    const radif::TrainOutcome plain_out = radif::run_train(plain);
    RunConfig noexp = cfg;
    noexp.model_dir = plain_out.model_dir;
    noexp.out_dir = (scratch_root() / "export_none").string();
    CHECK_THROWS_AS(radif::run_export_attention(noexp), radif::Error);
}

TEST_CASE("the gradient self-check passes every op under the shipping bound") {
    RunConfig cfg;
    cfg.out_dir = (scratch_root() / "gradcheck").string();
    const radif::GradCheckReport rep = radif::run_grad_check(cfg);
    INFO(rep.text);
    CHECK(rep.ok);
    CHECK(rep.worst < 1e-6);
    CHECK(count_lines(rep.text) >= 26); // every op plus the summary line
    for (const char* op : {"add", "matmul", "softmax", "conv3d", "shift_block", "nonlocal_block", "backbone",
                           "gate", "bce_chain"})
        CHECK(rep.text.find(op) != std::string::npos);
    CHECK(slurp(fs::path(cfg.out_dir) / "grad_check.txt") == rep.text);
}

TEST_CASE("describe summarizes manifests and checkpoints") {
    const MiniRun& r = mini();
    RunConfig cfg;
    cfg.manifest = (r.cohort / "manifest.json").string();
    const std::string cohort_text = radif::run_describe(cfg);
    CHECK(cohort_text.find("24") != std::string::npos);

    RunConfig mc;
    mc.model_dir = r.train_out.model_dir;
    const std::string model_text = radif::run_describe(mc);
    CHECK(model_text.find("parameters") != std::string::npos);
    CHECK(model_text.find("additive") != std::string::npos);

    CHECK_THROWS_AS(radif::run_describe(RunConfig{}), radif::Error);
}
