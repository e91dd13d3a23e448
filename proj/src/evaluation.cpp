#include "radifusion/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "radifusion/error.hpp"
#include "radifusion/rng.hpp"

namespace radif {

namespace {

void check_consistent(const Prediction& p) {
    if (p.label != 0 && p.label != 1)
        throw Error::validation("prediction label must be 0 or 1, got " + std::to_string(p.label));
    if (p.category < 0 || p.category > 3)
        throw Error::validation("prediction category must be 0..3, got " + std::to_string(p.category));
    if ((p.category == 0) != (p.label == 0))
        throw Error::validation("category 0 must coincide with label 0 (patient " + p.patient_id + ")");
    if (!std::isfinite(p.score)) throw Error::validation("non-finite score for patient " + p.patient_id);
}

// Shared rank sweep over (score, label) pairs. Ties add half a pair.
double auc_pairs(std::vector<std::pair<double, int>> sl) {
    std::int64_t n_pos = 0, n_neg = 0;
    for (const auto& [s, l] : sl) (l ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) throw Error::validation("AUC needs at least one case and one control");
    std::sort(sl.begin(), sl.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double concordant = 0.0;
    std::int64_t neg_below = 0;
    std::size_t i = 0;
    while (i < sl.size()) {
        std::size_t j = i;
        std::int64_t pos_here = 0, neg_here = 0;
        while (j < sl.size() && sl[j].first == sl[i].first) {
            (sl[j].second ? pos_here : neg_here)++;
            ++j;
        }
        concordant += static_cast<double>(pos_here) *
                      (static_cast<double>(neg_below) + 0.5 * static_cast<double>(neg_here));
        neg_below += neg_here;
        i = j;
    }
    return concordant / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

} // namespace

double auc(const std::vector<Prediction>& preds) {
    std::vector<std::pair<double, int>> sl;
    sl.reserve(preds.size());
    for (const Prediction& p : preds) {
        check_consistent(p);
        sl.emplace_back(p.score, p.label);
    }
    return auc_pairs(std::move(sl));
}

HorizonAucs horizon_aucs(const std::vector<Prediction>& preds, HorizonMode mode) {
    for (const Prediction& p : preds) check_consistent(p);
    auto sub_auc = [&](int cat_lo, int cat_hi) -> std::optional<double> {
        std::vector<std::pair<double, int>> sl;
        std::int64_t cases = 0;
        for (const Prediction& p : preds) {
            if (p.label == 0) {
                sl.emplace_back(p.score, 0);
            } else if (p.category >= cat_lo && p.category <= cat_hi) {
                sl.emplace_back(p.score, 1);
                ++cases;
            }
        }
        if (cases == 0 || cases == static_cast<std::int64_t>(sl.size())) return std::nullopt;
        return auc_pairs(std::move(sl));
    };
    HorizonAucs out;
    if (mode == HorizonMode::cumulative) {
        out.one_year = sub_auc(1, 1);
        out.two_year = sub_auc(1, 2);
        out.beyond_two_year = sub_auc(1, 3);
    } else {
        out.one_year = sub_auc(1, 1);
        out.two_year = sub_auc(2, 2);
        out.beyond_two_year = sub_auc(3, 3);
    }
    return out;
}

Interval bootstrap_ci(const std::vector<Prediction>& preds, int n_boot, double alpha, std::uint64_t seed) {
    if (n_boot < 1) throw Error::validation("bootstrap needs n_boot >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error::validation("bootstrap alpha must be in (0,1)");
    auc(preds); // validates the input itself supports an AUC
    const std::size_t n = preds.size();
    std::vector<double> stats;
    stats.reserve(static_cast<std::size_t>(n_boot));
    for (int b = 0; b < n_boot; ++b) {
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(b)));
        std::vector<std::pair<double, int>> sl(n);
        for (;;) {
            int pos = 0, neg = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const Prediction& p = preds[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(n) - 1))];
                sl[i] = {p.score, p.label};
                (p.label ? pos : neg)++;
            }
            if (pos > 0 && neg > 0) break; // single-class resample: redraw
        }
        stats.push_back(auc_pairs(sl));
    }
    std::sort(stats.begin(), stats.end());
    auto nearest_rank = [&](double q) {
        std::int64_t r = static_cast<std::int64_t>(std::ceil(q * static_cast<double>(n_boot)));
        r = std::max<std::int64_t>(1, std::min<std::int64_t>(r, n_boot));
        return stats[static_cast<std::size_t>(r - 1)];
    };
    return {nearest_rank(alpha / 2.0), nearest_rank(1.0 - alpha / 2.0)};
}

DelongResult delong_test(const std::vector<double>& scores_a, const std::vector<double>& scores_b,
                         const std::vector<int>& labels) {
    const std::size_t n = labels.size();
    if (scores_a.size() != n || scores_b.size() != n)
        throw Error::validation("DeLong inputs must have one score per label in both models");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw Error::validation("DeLong labels must be 0 or 1");
        (labels[i] ? pos : neg).push_back(i);
    }
    if (pos.size() < 2 || neg.size() < 2)
        throw Error::validation("DeLong needs at least two cases and two controls");
    const double m = static_cast<double>(pos.size());
    const double k = static_cast<double>(neg.size());

    auto psi = [](double x, double y) { return x > y ? 1.0 : (x == y ? 0.5 : 0.0); };
    // Placement values: V10[i] ranks case i against all controls, V01[j]
    // ranks control j against all cases.
    auto placements = [&](const std::vector<double>& s, std::vector<double>& v10, std::vector<double>& v01) {
        v10.assign(pos.size(), 0.0);
        v01.assign(neg.size(), 0.0);
        for (std::size_t i = 0; i < pos.size(); ++i)
            for (std::size_t j = 0; j < neg.size(); ++j) {
                const double w = psi(s[pos[i]], s[neg[j]]);
                v10[i] += w;
                v01[j] += w;
            }
        for (double& v : v10) v /= k;
        for (double& v : v01) v /= m;
    };
    std::vector<double> a10, a01, b10, b01;
    placements(scores_a, a10, a01);
    placements(scores_b, b10, b01);
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    DelongResult r;
    r.auc_a = mean(a10);
    r.auc_b = mean(b10);
    auto cov = [](const std::vector<double>& x, double mx, const std::vector<double>& y, double my) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
        return s / static_cast<double>(x.size() - 1);
    };
    const double s10 = cov(a10, r.auc_a, a10, r.auc_a) + cov(b10, r.auc_b, b10, r.auc_b) -
                       2.0 * cov(a10, r.auc_a, b10, r.auc_b);
    const double s01 = cov(a01, 1.0 - r.auc_a, a01, 1.0 - r.auc_a) + cov(b01, 1.0 - r.auc_b, b01, 1.0 - r.auc_b) -
                       2.0 * cov(a01, 1.0 - r.auc_a, b01, 1.0 - r.auc_b);
    const double var = s10 / m + s01 / k;
    if (!(var > 0.0)) {
        r.z = 0.0;
        r.p = 1.0;
        return r;
    }
    r.z = (r.auc_a - r.auc_b) / std::sqrt(var);
    r.p = std::erfc(std::abs(r.z) / std::sqrt(2.0)); // two-sided normal tail
    return r;
}

SplitPlan split(const std::vector<std::pair<std::string, int>>& patients, std::uint64_t seed, int n_folds,
                double test_fraction) {
    if (patients.size() < 10) throw Error::validation("split needs at least 10 patients");
    if (n_folds < 2) throw Error::validation("split needs at least 2 folds");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw Error::validation("test fraction must be in (0,1)");
    std::vector<std::string> by_class[2];
    for (const auto& [id, label] : patients) {
        if (label != 0 && label != 1) throw Error::validation("split labels must be 0 or 1");
        by_class[label].push_back(id);
    }
    if (by_class[0].empty() || by_class[1].empty())
        throw Error::validation("split needs both cases and controls");

    SplitPlan plan;
    plan.seed = seed;
    plan.folds.assign(static_cast<std::size_t>(n_folds), {});
    Rng rng(Rng::derive(seed, 0x5B17));
    for (int label = 1; label >= 0; --label) { // cases first so their fold spread is the tightest
        auto& ids = by_class[label];
        rng.shuffle(ids);
        std::int64_t take = std::llround(test_fraction * static_cast<double>(ids.size()));
        take = std::max<std::int64_t>(0, std::min<std::int64_t>(take, static_cast<std::int64_t>(ids.size()) - 1));
        for (std::int64_t i = 0; i < take; ++i) plan.test_ids.push_back(ids[static_cast<std::size_t>(i)]);
        for (std::size_t i = static_cast<std::size_t>(take); i < ids.size(); ++i)
            plan.folds[(i - static_cast<std::size_t>(take)) % static_cast<std::size_t>(n_folds)].push_back(ids[i]);
    }
    return plan;
}

std::vector<std::pair<double, double>> roc_points(const std::vector<Prediction>& preds) {
    std::vector<std::pair<double, int>> sl;
    std::int64_t n_pos = 0, n_neg = 0;
    for (const Prediction& p : preds) {
        check_consistent(p);
        sl.emplace_back(p.score, p.label);
        (p.label ? n_pos : n_neg)++;
    }
    if (n_pos == 0 || n_neg == 0) throw Error::validation("ROC needs at least one case and one control");
    std::sort(sl.begin(), sl.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::pair<double, double>> pts;
    pts.emplace_back(0.0, 0.0);
    std::int64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < sl.size()) {
        std::size_t j = i;
        while (j < sl.size() && sl[j].first == sl[i].first) {
            (sl[j].second ? tp : fp)++;
            ++j;
        }
        pts.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                         static_cast<double>(tp) / static_cast<double>(n_pos));
        i = j;
    }
    return pts;
}

double trapezoid_area(const std::vector<std::pair<double, double>>& pts) {
    double area = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        area += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) * 0.5;
    return area;
}

std::vector<Prediction> read_predictions_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error::runtime("cannot open predictions file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error::validation("empty predictions file: " + path);
    std::vector<Prediction> preds;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, score_s, label_s, cat_s;
        if (!std::getline(ss, id, ',') || !std::getline(ss, score_s, ',') || !std::getline(ss, label_s, ',') ||
            !std::getline(ss, cat_s))
            throw Error::validation("malformed predictions row at " + path + ":" + std::to_string(line_no));
        Prediction p;
        p.patient_id = id;
        try {
            p.score = std::stod(score_s);
            p.label = std::stoi(label_s);
            p.category = std::stoi(cat_s);
        } catch (const std::exception&) {
            throw Error::validation("unparseable predictions row at " + path + ":" + std::to_string(line_no));
        }
        check_consistent(p);
        preds.push_back(std::move(p));
    }
    if (preds.empty()) throw Error::validation("predictions file has no rows: " + path);
    return preds;
}

void write_predictions_csv(const std::string& path, const std::vector<Prediction>& preds) {
    std::ofstream out(path);
    if (!out) throw Error::runtime("cannot write predictions file: " + path);
    out << "patient_id,score,label,category\n";
    char buf[64];
    for (const Prediction& p : preds) {
        std::snprintf(buf, sizeof buf, "%.17g", p.score);
        out << p.patient_id << ',' << buf << ',' << p.label << ',' << p.category << '\n';
    }
    if (!out) throw Error::runtime("failed writing predictions file: " + path);
}

} // namespace radif
