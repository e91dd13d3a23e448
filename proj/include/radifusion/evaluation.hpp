#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace radif {

// One patient's score against ground truth. category encodes days from
// screening to diagnosis: 0 control, 1 within 60 days, 2 within 61-729
// days, 3 at 730 days or later. category 0 <=> label 0.
struct Prediction {
    std::string patient_id;
    double score = 0.0;
    int label = 0;
    int category = 0;
};

// Mann-Whitney AUC with ties counted 0.5. Needs both classes.
double auc(const std::vector<Prediction>& preds);

// How cases group into the diagnosis-time horizons: cumulative nests the
// case sets (1y = cat 1, 2y = cats 1-2, >2y = cats 1-3); exclusive scores
// each category on its own.
enum class HorizonMode { cumulative, exclusive };

struct HorizonAucs {
    std::optional<double> one_year, two_year, beyond_two_year;
};
HorizonAucs horizon_aucs(const std::vector<Prediction>& preds, HorizonMode mode = HorizonMode::cumulative);

struct Interval {
    double lo = 0.0, hi = 0.0;
};
// Percentile interval over patient-level resamples; single-class resamples
// are redrawn. Deterministic in seed.
Interval bootstrap_ci(const std::vector<Prediction>& preds, int n_boot = 1000, double alpha = 0.05,
                      std::uint64_t seed = 0);

struct DelongResult {
    double auc_a = 0.0, auc_b = 0.0;
    double z = 0.0, p = 1.0;
};
// Paired comparison of two score vectors over the same labels; two-sided
// normal p-value. Zero variance (e.g. identical scores) gives z=0, p=1.
DelongResult delong_test(const std::vector<double>& scores_a, const std::vector<double>& scores_b,
                         const std::vector<int>& labels);

struct SplitPlan {
    std::vector<std::string> test_ids;
    std::vector<std::vector<std::string>> folds;
    std::uint64_t seed = 0;
};
// Label-stratified held-out test split plus round-robin stratified folds.
SplitPlan split(const std::vector<std::pair<std::string, int>>& patients, std::uint64_t seed, int n_folds = 5,
                double test_fraction = 0.2);

// ROC staircase from (0,0) to (1,1), one point per distinct threshold.
std::vector<std::pair<double, double>> roc_points(const std::vector<Prediction>& preds);
double trapezoid_area(const std::vector<std::pair<double, double>>& pts);

// CSV columns: patient_id, score, label, category (header row included).
std::vector<Prediction> read_predictions_csv(const std::string& path);
void write_predictions_csv(const std::string& path, const std::vector<Prediction>& preds);

} // namespace radif
