#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "radifusion/preprocess.hpp"
#include "radifusion/tensor.hpp"

namespace radif {

// On-disk cohort description. Exams are ordered most-recent-first
// (screening_index 0 = current exam); every exam carries all four views.
struct ExamRecord {
    int screening_index = 0;
    std::array<std::string, kNumViews> view_paths; // indexed by View
};

struct PatientRecord {
    std::string id;
    int label = 0;        // 1 = case
    int category = 0;     // 0 control, 1/2/3 time-to-diagnosis bucket
    int age_category = 1; // 1 = 40-55, 2 = 55+
    std::vector<ExamRecord> exams;
};

struct Manifest {
    std::vector<PatientRecord> patients;
};

Manifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const Manifest& manifest);

// Loads a view image next to the manifest; dispatches on extension
// (.rdf1 / .pgm).
Tensor read_view_image(const std::string& manifest_path, const std::string& relative);

// A patient ready for the model: stacked per-view videos plus the raw
// (un-standardized) texture feature vector of the current exam per view.
// y_soft and gamma stay negative until pseudo-labeling fills them.
struct PatientData {
    std::string id;
    int label = 0, category = 0, age_category = 1;
    std::array<Tensor, kNumViews> videos; // [T, size, size]
    std::array<std::vector<double>, kNumViews> features;
    double y_soft = -1.0;
    double gamma = -1.0;
};

// Preprocessed-cohort index: size/frame count plus per-patient video paths.
void write_preprocessed_index(const std::string& path, int size, int frames,
                              const std::vector<PatientRecord>& patients,
                              const std::map<std::string, std::array<std::string, kNumViews>>& video_paths);

// One extracted texture-feature vector for a (patient, screening, view)
// triple.
struct FeatureRow {
    std::string patient_id;
    int screening_index = 0;
    View view = View::LCC;
    std::vector<double> values;
};

// CSV feature table. Header: patient_id, screening_index, view, then the
// named feature columns; one row per (patient, screening, view); values
// survive a write/read round trip exactly.
void write_feature_csv(const std::string& path, const std::vector<FeatureRow>& rows);
std::vector<FeatureRow> read_feature_csv(const std::string& path);

// Assembles PatientData from a preprocessed index and a feature CSV; the
// model consumes only the current exam (screening 0), which must carry
// all four views per patient.
std::vector<PatientData> load_patient_data(const std::string& preproc_index_path,
                                           const std::string& features_path);

} // namespace radif
