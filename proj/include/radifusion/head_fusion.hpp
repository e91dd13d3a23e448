#pragma once

#include <vector>

#include "radifusion/tape.hpp"

namespace radif {

inline constexpr int kRadiomicsDim = 122;

// Pre-sigmoid outputs of the shared fully connected layer, one per view.
struct ViewLogits {
    double lcc = 0.0, rcc = 0.0, lmlo = 0.0, rmlo = 0.0;
};

struct ViewScores {
    double lcc = 0.0, rcc = 0.0, lmlo = 0.0, rmlo = 0.0;
};

// View-combination gate. The fixed component w_f never trains; the
// effective per-orientation scales are w_f + tanh(w_theta).
struct GateState {
    double w_f = 0.4;
    double w_theta_t = 0.0; // CC views
    double w_theta_s = 0.0; // MLO views
    double scale_t() const;
    double scale_s() const;
};

// Gate whose effective scales both start at init_scale; requires
// |init_scale - fixed| < 1 so tanh can reach it.
GateState make_gate(double init_scale = 0.6, double fixed = 0.4);

// z-score against per-feature statistics; zero-variance features pass as 0
std::vector<double> standardize_features(const std::vector<double>& raw, const std::vector<double>& mean,
                                         const std::vector<double>& std_dev);

// logit = w . concat(embedding, radiomics_z, age) + b with one shared (w, b)
// across the four views; age_category is 1 or 2
double fuse_view(const std::vector<double>& embedding, const std::vector<double>& radiomics_z, int age_category,
                 const std::vector<double>& w, double b);

double combine_average(const ViewLogits& v);
// direct-scale form used by the gate and by homogeneity checks
double combine_gated_scales(const ViewLogits& v, double w_t, double w_s, double eps = 1e-3);
double combine_gated(const ViewLogits& v, const GateState& g, double eps = 1e-3);

ViewScores per_view_scores(const ViewLogits& v);
double asymmetry(const ViewScores& s);

// tape versions for training; logits and parameters are {1} scalars, w_f
// stays a plain constant so no gradient can reach it
VarId fuse_view(Tape& tape, VarId embedding, VarId radiomics_z, VarId age, VarId w, VarId b);
VarId combine_average(Tape& tape, VarId lcc, VarId rcc, VarId lmlo, VarId rmlo);
VarId combine_gated(Tape& tape, VarId lcc, VarId rcc, VarId lmlo, VarId rmlo, VarId w_theta_t, VarId w_theta_s,
                    double w_f, double eps = 1e-3);

} // namespace radif
