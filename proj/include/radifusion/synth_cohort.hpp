#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "radifusion/dataset.hpp"

namespace radif {

// Desk-scale longitudinal cohort with a planted one-sided lesion signal.
// Cases carry a Gaussian blob in one breast whose amplitude grows toward
// the current exam; controls are texture-symmetric in expectation.
struct CohortConfig {
    int n_patients = 400;
    double case_fraction = 0.10;
    std::array<double, 3> category_mix = {0.60, 0.25, 0.15}; // categories 1/2/3 among cases
    std::array<double, 3> screenings_mix = {0.45, 0.35, 0.20}; // 1/2/3 available screenings
    int image_size = 64;          // width; raw images are ~1.25x taller
    double signal_strength = 1.0; // 0 removes the planted signal entirely
    std::uint64_t seed = 0;
};

void validate(const CohortConfig& cfg);

// Writes manifest.json plus images/ under out_dir and returns the manifest.
Manifest generate_cohort(const CohortConfig& cfg, const std::string& out_dir);

struct CohortSummary {
    int n_patients = 0, n_cases = 0, n_controls = 0;
    std::array<int, 4> by_category{};   // 0..3
    std::array<int, 2> by_age{};        // age categories 1, 2
    std::array<int, 3> by_screenings{}; // 1, 2, 3 exams
};

CohortSummary describe_cohort(const Manifest& manifest);
std::string summary_text(const CohortSummary& s);

} // namespace radif
