#include "radifusion/head_fusion.hpp"

#include <cmath>
#include <string>

#include "radifusion/error.hpp"
#include "radifusion/radiomics.hpp"

namespace radif {

static_assert(kRadiomicsDim == kFeatureCount, "fusion head width follows the feature extractor");

double GateState::scale_t() const { return w_f + std::tanh(w_theta_t); }
double GateState::scale_s() const { return w_f + std::tanh(w_theta_s); }

GateState make_gate(double init_scale, double fixed) {
    const double want = init_scale - fixed;
    if (!(std::abs(want) < 1.0))
        throw Error::validation("gate init " + std::to_string(init_scale) + " unreachable from fixed component " +
                                std::to_string(fixed));
    GateState g;
    g.w_f = fixed;
    g.w_theta_t = std::atanh(want);
    g.w_theta_s = g.w_theta_t;
    return g;
}

std::vector<double> standardize_features(const std::vector<double>& raw, const std::vector<double>& mean,
                                         const std::vector<double>& std_dev) {
    if (raw.size() != mean.size() || raw.size() != std_dev.size())
        throw Error::validation("feature statistics length mismatch");
    std::vector<double> z(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) z[i] = std_dev[i] > 0.0 ? (raw[i] - mean[i]) / std_dev[i] : 0.0;
    return z;
}

double fuse_view(const std::vector<double>& embedding, const std::vector<double>& radiomics_z, int age_category,
                 const std::vector<double>& w, double b) {
    if (static_cast<int>(radiomics_z.size()) != kRadiomicsDim)
        throw Error::validation("expected " + std::to_string(kRadiomicsDim) + " texture features, got " +
                                std::to_string(radiomics_z.size()));
    if (age_category != 1 && age_category != 2)
        throw Error::validation("age category must be 1 or 2, got " + std::to_string(age_category));
    if (w.size() != embedding.size() + radiomics_z.size() + 1)
        throw Error::validation("fusion weight length " + std::to_string(w.size()) + " does not match input width " +
                                std::to_string(embedding.size() + radiomics_z.size() + 1));
    // accumulate the dot product first, bias last: same order as the graph path
    double acc = 0.0;
    std::size_t k = 0;
    for (double v : embedding) acc += w[k++] * v;
    for (double v : radiomics_z) acc += w[k++] * v;
    acc += w[k] * static_cast<double>(age_category);
    return acc + b;
}

double combine_average(const ViewLogits& v) { return sigmoid_scalar((v.lcc + v.rcc + v.lmlo + v.rmlo) / 4.0); }

double combine_gated_scales(const ViewLogits& v, double w_t, double w_s, double eps) {
    if (!(w_t + w_s > eps))
        throw Error::runtime("gate collapsed: combined scale " + std::to_string(w_t + w_s) + " <= " +
                             std::to_string(eps));
    return sigmoid_scalar((w_t * v.lcc + w_t * v.rcc + w_s * v.lmlo + w_s * v.rmlo) / (2.0 * w_t + 2.0 * w_s));
}

double combine_gated(const ViewLogits& v, const GateState& g, double eps) {
    return combine_gated_scales(v, g.scale_t(), g.scale_s(), eps);
}

ViewScores per_view_scores(const ViewLogits& v) {
    return {sigmoid_scalar(v.lcc), sigmoid_scalar(v.rcc), sigmoid_scalar(v.lmlo), sigmoid_scalar(v.rmlo)};
}

double asymmetry(const ViewScores& s) { return std::abs((s.lcc + s.lmlo) - (s.rcc + s.rmlo)); }

VarId fuse_view(Tape& tape, VarId embedding, VarId radiomics_z, VarId age, VarId w, VarId b) {
    const int e = static_cast<int>(tape.value(embedding).size());
    const int r = static_cast<int>(tape.value(radiomics_z).size());
    if (r != kRadiomicsDim) throw Error::validation("expected " + std::to_string(kRadiomicsDim) + " texture features");
    if (tape.value(w).rank() != 2 || tape.value(w).dim(0) != e + r + 1 || tape.value(w).dim(1) != 1)
        throw Error::validation("fusion weights must be [" + std::to_string(e + r + 1) + ",1], got " +
                                shape_str(tape.value(w).shape()));
    const VarId feats = tape.concat({tape.reshape(embedding, {e}), tape.reshape(radiomics_z, {r}), tape.reshape(age, {1})}, 0);
    const VarId logit = tape.add(tape.matmul(tape.reshape(feats, {1, e + r + 1}), w), b);
    return tape.reshape(logit, {1});
}

VarId combine_average(Tape& tape, VarId lcc, VarId rcc, VarId lmlo, VarId rmlo) {
    const VarId sum = tape.add(tape.add(lcc, rcc), tape.add(lmlo, rmlo));
    return tape.sigmoid(tape.affine(sum, 0.25, 0.0));
}

VarId combine_gated(Tape& tape, VarId lcc, VarId rcc, VarId lmlo, VarId rmlo, VarId w_theta_t, VarId w_theta_s,
                    double w_f, double eps) {
    const VarId wt = tape.affine(tape.tanh(w_theta_t), 1.0, w_f);
    const VarId ws = tape.affine(tape.tanh(w_theta_s), 1.0, w_f);
    if (!(tape.value(wt)[0] + tape.value(ws)[0] > eps))
        throw Error::runtime("gate collapsed: combined scale " + std::to_string(tape.value(wt)[0] + tape.value(ws)[0]) +
                             " <= " + std::to_string(eps));
    const VarId num = tape.add(tape.mul(wt, tape.add(lcc, rcc)), tape.mul(ws, tape.add(lmlo, rmlo)));
    const VarId den = tape.affine(tape.add(wt, ws), 2.0, 0.0);
    return tape.sigmoid(tape.div(num, den));
}

} // namespace radif
