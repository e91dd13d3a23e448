#include "radifusion/synth_cohort.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "radifusion/error.hpp"
#include "radifusion/io.hpp"
#include "radifusion/rng.hpp"

namespace radif {

namespace fs = std::filesystem;

namespace {

// Largest-remainder apportionment of n into len(mix) integer counts.
std::vector<int> apportion(int n, const std::vector<double>& mix) {
    std::vector<int> counts(mix.size());
    std::vector<std::pair<double, std::size_t>> rema;
    int assigned = 0;
    for (std::size_t i = 0; i < mix.size(); ++i) {
        const double exact = mix[i] * n;
        counts[i] = static_cast<int>(std::floor(exact));
        assigned += counts[i];
        rema.push_back({exact - std::floor(exact), i});
    }
    std::stable_sort(rema.begin(), rema.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int k = 0; k < n - assigned; ++k) counts[rema[static_cast<std::size_t>(k)].second]++;
    return counts;
}

struct BreastShape {
    double x0, y0, a, b; // half-ellipse anchored at the chest-wall edge
};

BreastShape shape_for(View v, int h, int w) {
    const bool left = view_is_left(v);
    const bool cc = view_is_cc(v);
    BreastShape s;
    s.x0 = left ? 0.0 : static_cast<double>(w - 1);
    if (cc) {
        s.y0 = 0.50 * h;
        s.a = 0.80 * w;
        s.b = 0.42 * h;
    } else {
        s.y0 = 0.55 * h;
        s.a = 0.72 * w;
        s.b = 0.55 * h;
    }
    return s;
}

bool in_breast(const BreastShape& s, int y, int x) {
    const double dx = (x - s.x0) / s.a;
    const double dy = (y - s.y0) / s.b;
    return dx * dx + dy * dy <= 1.0;
}

// Bilinear upsample of a coarse g x g grid to h x w.
double coarse_at(const std::vector<double>& grid, int g, int h, int w, int y, int x) {
    const double gy = (g - 1) * static_cast<double>(y) / std::max(1, h - 1);
    const double gx = (g - 1) * static_cast<double>(x) / std::max(1, w - 1);
    const int y0 = std::min(g - 2, static_cast<int>(gy)), x0 = std::min(g - 2, static_cast<int>(gx));
    const double fy = gy - y0, fx = gx - x0;
    const double v00 = grid[static_cast<std::size_t>(y0) * g + x0];
    const double v01 = grid[static_cast<std::size_t>(y0) * g + x0 + 1];
    const double v10 = grid[static_cast<std::size_t>(y0 + 1) * g + x0];
    const double v11 = grid[static_cast<std::size_t>(y0 + 1) * g + x0 + 1];
    return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
}

} // namespace

void validate(const CohortConfig& cfg) {
    if (cfg.n_patients < 20) throw Error::validation("cohort needs at least 20 patients");
    if (!(cfg.case_fraction > 0.0 && cfg.case_fraction < 1.0))
        throw Error::validation("case fraction must be in (0,1)");
    double cat_sum = 0.0, scr_sum = 0.0;
    for (double v : cfg.category_mix) {
        if (v < 0.0) throw Error::validation("category mix entries must be non-negative");
        cat_sum += v;
    }
    for (double v : cfg.screenings_mix) {
        if (v < 0.0) throw Error::validation("screenings mix entries must be non-negative");
        scr_sum += v;
    }
    if (std::abs(cat_sum - 1.0) > 1e-9) throw Error::validation("category mix must sum to 1");
    if (std::abs(scr_sum - 1.0) > 1e-9) throw Error::validation("screenings mix must sum to 1");
    if (cfg.image_size < 16) throw Error::validation("image size must be at least 16");
    if (!(cfg.signal_strength >= 0.0)) throw Error::validation("signal strength must be >= 0");
}

Manifest generate_cohort(const CohortConfig& cfg, const std::string& out_dir) {
    validate(cfg);
    fs::create_directories(fs::path(out_dir) / "images");

    const int n = cfg.n_patients;
    const int n_cases = static_cast<int>(std::llround(cfg.case_fraction * n));
    auto cat_counts = apportion(n_cases, {cfg.category_mix[0], cfg.category_mix[1], cfg.category_mix[2]});

    // category per patient: cases get 1/2/3 in exact proportion, controls 0
    std::vector<int> categories;
    for (int c = 0; c < 3; ++c) categories.insert(categories.end(), static_cast<std::size_t>(cat_counts[static_cast<std::size_t>(c)]), c + 1);
    categories.resize(static_cast<std::size_t>(n), 0);
    Rng master(Rng::derive(cfg.seed, 0xC0));
    master.shuffle(categories);

    const int w = cfg.image_size;
    const int h = static_cast<int>(std::llround(1.25 * cfg.image_size));
    const int g = std::max(4, cfg.image_size / 8);
    const double cat_factor[3] = {1.0, 0.7, 0.45};

    Manifest manifest;
    for (int i = 0; i < n; ++i) {
        Rng prng(Rng::derive(cfg.seed, 0xA000 + static_cast<std::uint64_t>(i)));
        PatientRecord rec;
        {
            std::ostringstream id;
            id << 'p' << std::setw(4) << std::setfill('0') << i;
            rec.id = id.str();
        }
        rec.category = categories[static_cast<std::size_t>(i)];
        rec.label = rec.category > 0 ? 1 : 0;
        const int screenings =
            1 + static_cast<int>(prng.categorical({cfg.screenings_mix[0], cfg.screenings_mix[1], cfg.screenings_mix[2]}));
        // age follows the label-conditional cohort proportions
        rec.age_category = prng.bernoulli(rec.label ? 0.37 : 0.49) ? 1 : 2;
        const bool blob_left = prng.bernoulli(0.5);

        // per-view lesion geometry and static texture
        struct ViewPlan {
            double sigma, cx, cy;
            std::vector<double> grid;
        };
        std::array<ViewPlan, kNumViews> plans;
        for (int v = 0; v < kNumViews; ++v) {
            ViewPlan& pl = plans[static_cast<std::size_t>(v)];
            pl.sigma = cfg.image_size * prng.uniform(0.08, 0.13);
            const double fx = prng.uniform(0.18, 0.45);
            pl.cx = view_is_left(static_cast<View>(v)) ? fx * w : (1.0 - fx) * w;
            pl.cy = prng.uniform(0.35, 0.65) * h;
            pl.grid.resize(static_cast<std::size_t>(g) * g);
            for (double& c : pl.grid) c = prng.gaussian(0.0, 0.12);
        }

        for (int k = 0; k < screenings; ++k) {
            ExamRecord exam;
            exam.screening_index = k;
            for (int v = 0; v < kNumViews; ++v) {
                const View view = static_cast<View>(v);
                const ViewPlan& pl = plans[static_cast<std::size_t>(v)];
                const BreastShape shape = shape_for(view, h, w);
                const bool lesion_here = rec.label == 1 && view_is_left(view) == blob_left;
                const double amp = lesion_here ? 0.25 * cfg.signal_strength *
                                                     cat_factor[static_cast<std::size_t>(rec.category - 1)] *
                                                     std::pow(0.55, k)
                                               : 0.0;
                Tensor img({h, w});
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        const double jitter = prng.gaussian(0.0, 0.02);
                        if (!in_breast(shape, y, x)) continue;
                        double val = 0.5 + coarse_at(pl.grid, g, h, w, y, x) + jitter;
                        if (amp > 0.0) {
                            const double dx = x - pl.cx, dy = y - pl.cy;
                            val += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * pl.sigma * pl.sigma));
                        }
                        img.at({y, x}) = std::clamp(val, 0.08, 2.5);
                    }
                // occasional bright scanner label in the far corner; the
                // largest-component rule is expected to drop it
                if (prng.bernoulli(0.3)) {
                    const int m = static_cast<int>(prng.uniform_int(3, 5));
                    const int x0 = view_is_left(view) ? w - m : 0;
                    for (int y = 0; y < m; ++y)
                        for (int x = x0; x < x0 + m; ++x) img.at({y, x}) = 0.9;
                }
                std::ostringstream file;
                file << "images/" << rec.id << "_s" << k << '_' << view_name(view) << ".rdf1";
                write_rdf1((fs::path(out_dir) / file.str()).string(), img);
                exam.view_paths[static_cast<std::size_t>(v)] = file.str();
            }
            rec.exams.push_back(std::move(exam));
        }
        manifest.patients.push_back(std::move(rec));
    }
    write_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);
    return manifest;
}

CohortSummary describe_cohort(const Manifest& manifest) {
    CohortSummary s;
    s.n_patients = static_cast<int>(manifest.patients.size());
    for (const PatientRecord& p : manifest.patients) {
        (p.label ? s.n_cases : s.n_controls)++;
        s.by_category[static_cast<std::size_t>(p.category)]++;
        s.by_age[static_cast<std::size_t>(p.age_category - 1)]++;
        const int scr = std::min<int>(3, static_cast<int>(p.exams.size()));
        s.by_screenings[static_cast<std::size_t>(scr - 1)]++;
    }
    return s;
}

std::string summary_text(const CohortSummary& s) {
    std::ostringstream out;
    out << "patients: " << s.n_patients << " (" << s.n_cases << " cases, " << s.n_controls << " controls)\n";
    out << "category counts: control=" << s.by_category[0] << " cat1=" << s.by_category[1]
        << " cat2=" << s.by_category[2] << " cat3=" << s.by_category[3] << "\n";
    out << "age categories: 40-55=" << s.by_age[0] << " 55+=" << s.by_age[1] << "\n";
    out << "screenings per patient: 1x" << s.by_screenings[0] << " 2x" << s.by_screenings[1] << " 3x"
        << s.by_screenings[2] << "\n";
    return out.str();
}

} // namespace radif
