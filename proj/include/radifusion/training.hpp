#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "radifusion/model.hpp"

namespace radif {

struct TrainConfig {
    int epochs = 60; // must be even so the two-stage finetune can split it
    int batch_patients = 12;
    double lr = 1e-4;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::uint64_t seed = 0;
    double filter_percentile = 90.0; // control asymmetry cut for stage two
    bool hard_labels_finetune = false;
    bool warm_start_finetune = false;
    void validate() const;
};

// binary cross entropy with predictions clipped to [1e-7, 1-1e-7];
// targets may be fractional
double bce(double pred, double target);
VarId bce_loss(Tape& tape, VarId pred, double target);

struct AdamState {
    std::map<std::string, Tensor> m, v;
    std::int64_t steps = 0;
};

// one update over the full parameter set; gradients must match the
// parameter names and shapes exactly, and a non-finite gradient aborts
// with the offending parameter's name
void adam_step(const std::map<std::string, Tensor*>& params, const std::map<std::string, Tensor>& grads,
               AdamState& st, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

enum class LabelSource { hard, soft };

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;
};

struct TrainResult {
    Model model;
    std::vector<EpochLog> log;
    std::int64_t steps = 0; // optimizer updates taken
};

// called with the 1-based count of completed epochs and the live model,
// e.g. for periodic checkpointing; must not mutate the model
using EpochHook = std::function<void(int epoch, const Model& current)>;

// minibatch training of the fused patient score against hard labels or
// previously attached soft labels; `stream` decorrelates the shuffles of
// independent phases that share one seed
TrainResult train(Model model, const std::vector<PatientData>& patients, const TrainConfig& cfg, LabelSource labels,
                  const std::string& tag = "train", std::uint64_t stream = 0,
                  std::vector<std::string>* log_lines = nullptr, const EpochHook& hook = {});

// attach the teacher's fused score as y_soft and record the bilateral
// asymmetry of its per-view scores as gamma
std::vector<PatientData> pseudo_label(const Model& teacher, std::vector<PatientData> patients);

// k-th smallest with k = ceil(pct/100 * n); pct in (0, 100]
double nearest_rank_percentile(std::vector<double> values, double pct);

// the percentile of control gammas used as the stage-two cut
double control_gamma_percentile(const std::vector<PatientData>& patients, double pct);

// keep every case and the controls with gamma strictly below the threshold
std::vector<PatientData> filter_controls_at(const std::vector<PatientData>& patients, double threshold);
std::vector<PatientData> filter_controls(const std::vector<PatientData>& patients, double pct);

struct FinetuneResult {
    Model stage1;
    Model model; // after the filtered second stage
    std::vector<EpochLog> log_stage1, log_stage2;
    std::int64_t steps = 0;
    std::size_t n_soft = 0, n_filtered = 0;
    double threshold = 0.0; // control gamma cut actually applied
};

// stage one trains on the whole soft-labeled set for half the epoch
// budget (fresh weights unless warm_start_finetune), stage two continues
// on the asymmetry-filtered subset for the other half with a fresh
// optimizer; the hook sees the global epoch count across both stages
FinetuneResult two_stage_finetune(const Model& teacher, const std::vector<PatientData>& patients,
                                  const TrainConfig& cfg, std::vector<std::string>* log_lines = nullptr,
                                  const EpochHook& hook = {});

} // namespace radif
