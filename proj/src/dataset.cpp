#include "radifusion/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <set>

#include "json.hpp"
#include "radifusion/error.hpp"
#include "radifusion/io.hpp"
#include "radifusion/radiomics.hpp"

namespace radif {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_json_file(const std::string& path) {
    const std::string text = read_text_file(path);
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error::validation("malformed JSON in " + path);
    return j;
}

void check_patient(const PatientRecord& p, const std::string& where) {
    if (p.id.empty()) throw Error::validation(where + ": patient with empty id");
    if (p.label != 0 && p.label != 1)
        throw Error::validation(where + ": patient " + p.id + " label must be 0 or 1");
    if (p.category < 0 || p.category > 3)
        throw Error::validation(where + ": patient " + p.id + " category must be 0..3");
    if ((p.category == 0) != (p.label == 0))
        throw Error::validation(where + ": patient " + p.id + " category 0 must coincide with label 0");
    if (p.age_category != 1 && p.age_category != 2)
        throw Error::validation(where + ": patient " + p.id + " age category must be 1 or 2");
}

std::string sibling_path(const std::string& anchor_file, const std::string& relative) {
    return (fs::path(anchor_file).parent_path() / relative).string();
}

} // namespace

Manifest read_manifest(const std::string& path) {
    json j = parse_json_file(path);
    if (!j.is_object() || !j.contains("patients") || !j["patients"].is_array())
        throw Error::validation("manifest " + path + " must be an object with a patients array");
    Manifest m;
    std::set<std::string> ids;
    for (const json& jp : j["patients"]) {
        PatientRecord p;
        try {
            p.id = jp.at("id").get<std::string>();
            p.label = jp.at("label").get<int>();
            p.category = jp.at("category").get<int>();
            p.age_category = jp.at("age_category").get<int>();
            for (const json& je : jp.at("exams")) {
                ExamRecord e;
                e.screening_index = je.at("screening_index").get<int>();
                const json& views = je.at("views");
                for (int v = 0; v < kNumViews; ++v) {
                    const char* name = view_name(static_cast<View>(v));
                    if (!views.contains(name))
                        throw Error::validation("manifest " + path + ": patient " + p.id + " exam " +
                                                std::to_string(e.screening_index) + " is missing view " + name);
                    e.view_paths[static_cast<std::size_t>(v)] = views.at(name).get<std::string>();
                }
                p.exams.push_back(std::move(e));
            }
        } catch (const json::exception& ex) {
            throw Error::validation("manifest " + path + ": " + ex.what());
        }
        check_patient(p, "manifest " + path);
        if (p.exams.empty()) throw Error::validation("manifest " + path + ": patient " + p.id + " has no exams");
        std::sort(p.exams.begin(), p.exams.end(),
                  [](const ExamRecord& a, const ExamRecord& b) { return a.screening_index < b.screening_index; });
        for (std::size_t k = 0; k < p.exams.size(); ++k)
            if (p.exams[k].screening_index != static_cast<int>(k))
                throw Error::validation("manifest " + path + ": patient " + p.id +
                                        " screening indices must be 0..k-1 without gaps");
        if (!ids.insert(p.id).second)
            throw Error::validation("manifest " + path + ": duplicate patient id " + p.id);
        m.patients.push_back(std::move(p));
    }
    return m;
}

void write_manifest(const std::string& path, const Manifest& manifest) {
    json patients = json::array();
    for (const PatientRecord& p : manifest.patients) {
        check_patient(p, "manifest");
        json exams = json::array();
        for (const ExamRecord& e : p.exams) {
            json views;
            for (int v = 0; v < kNumViews; ++v)
                views[view_name(static_cast<View>(v))] = e.view_paths[static_cast<std::size_t>(v)];
            exams.push_back({{"screening_index", e.screening_index}, {"views", views}});
        }
        patients.push_back({{"id", p.id},
                            {"label", p.label},
                            {"category", p.category},
                            {"age_category", p.age_category},
                            {"exams", exams}});
    }
    write_text_file(path, json{{"patients", patients}}.dump(2) + "\n");
}

Tensor read_view_image(const std::string& manifest_path, const std::string& relative) {
    const std::string full = sibling_path(manifest_path, relative);
    const std::string ext = fs::path(full).extension().string();
    if (ext == ".rdf1") return read_rdf1(full);
    if (ext == ".pgm") return read_pgm(full);
    throw Error::validation("unsupported image extension on " + relative + " (expected .rdf1 or .pgm)");
}

void write_preprocessed_index(const std::string& path, int size, int frames,
                              const std::vector<PatientRecord>& patients,
                              const std::map<std::string, std::array<std::string, kNumViews>>& video_paths) {
    json jp = json::array();
    for (const PatientRecord& p : patients) {
        auto it = video_paths.find(p.id);
        if (it == video_paths.end())
            throw Error::validation("preprocessed index: no video paths for patient " + p.id);
        json videos;
        for (int v = 0; v < kNumViews; ++v)
            videos[view_name(static_cast<View>(v))] = it->second[static_cast<std::size_t>(v)];
        jp.push_back({{"id", p.id},
                      {"label", p.label},
                      {"category", p.category},
                      {"age_category", p.age_category},
                      {"videos", videos}});
    }
    write_text_file(path, json{{"size", size}, {"frames", frames}, {"patients", jp}}.dump(2) + "\n");
}

namespace {

std::string feature_csv_header() {
    std::string h = "patient_id,screening_index,view";
    for (const std::string& name : feature_names()) {
        h += ',';
        h += name;
    }
    return h;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

} // namespace

void write_feature_csv(const std::string& path, const std::vector<FeatureRow>& rows) {
    std::string out = feature_csv_header() + "\n";
    char buf[64];
    for (const FeatureRow& r : rows) {
        if (r.patient_id.empty() || r.patient_id.find(',') != std::string::npos ||
            r.patient_id.find('\n') != std::string::npos)
            throw Error::validation("feature row has an empty or unusable patient id");
        if (r.screening_index < 0)
            throw Error::validation("feature row for " + r.patient_id + " has a negative screening index");
        if (r.values.size() != static_cast<std::size_t>(kFeatureCount))
            throw Error::validation("feature row for " + r.patient_id + " view " + view_name(r.view) + " carries " +
                                    std::to_string(r.values.size()) + " values, expected " +
                                    std::to_string(kFeatureCount));
        out += r.patient_id;
        out += ',' + std::to_string(r.screening_index);
        out += ',';
        out += view_name(r.view);
        for (double v : r.values) {
            std::snprintf(buf, sizeof(buf), ",%.17g", v);
            out += buf;
        }
        out += '\n';
    }
    write_text_file(path, out);
}

std::vector<FeatureRow> read_feature_csv(const std::string& path) {
    const std::string text = read_text_file(path);
    std::vector<FeatureRow> rows;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pos = eol + 1;
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != feature_csv_header())
                throw Error::validation("feature table " + path + " has an unexpected header");
            continue;
        }
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != static_cast<std::size_t>(3 + kFeatureCount))
            throw Error::validation("feature table " + path + " line " + std::to_string(line_no) + " has " +
                                    std::to_string(f.size()) + " fields, expected " +
                                    std::to_string(3 + kFeatureCount));
        FeatureRow r;
        r.patient_id = f[0];
        try {
            r.screening_index = std::stoi(f[1]);
            r.view = view_from_name(f[2]);
            r.values.reserve(static_cast<std::size_t>(kFeatureCount));
            for (int k = 0; k < kFeatureCount; ++k) {
                std::size_t used = 0;
                const double v = std::stod(f[static_cast<std::size_t>(3 + k)], &used);
                if (used != f[static_cast<std::size_t>(3 + k)].size()) throw std::invalid_argument("trailing junk");
                r.values.push_back(v);
            }
        } catch (const std::exception&) {
            throw Error::validation("feature table " + path + " line " + std::to_string(line_no) +
                                    " is not parseable");
        }
        if (r.screening_index < 0)
            throw Error::validation("feature table " + path + " line " + std::to_string(line_no) +
                                    " has a negative screening index");
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<PatientData> load_patient_data(const std::string& preproc_index_path,
                                           const std::string& features_path) {
    json j = parse_json_file(preproc_index_path);
    if (!j.contains("patients") || !j["patients"].is_array())
        throw Error::validation("preprocessed index " + preproc_index_path + " must contain a patients array");
    const int size = j.value("size", 0);
    const int frames = j.value("frames", 0);
    if (size < 1 || frames < 1)
        throw Error::validation("preprocessed index " + preproc_index_path + " lacks valid size/frames");
    // current-exam rows only; later screenings are evaluation-time context
    std::map<std::string, std::array<std::vector<double>, kNumViews>> features;
    for (FeatureRow& r : read_feature_csv(features_path)) {
        if (r.screening_index != 0) continue;
        auto& slot = features[r.patient_id][static_cast<std::size_t>(r.view)];
        if (!slot.empty())
            throw Error::validation("feature table " + features_path + " repeats patient " + r.patient_id +
                                    " view " + view_name(r.view) + " at screening 0");
        slot = std::move(r.values);
    }
    std::vector<PatientData> out;
    for (const json& jp : j["patients"]) {
        PatientData d;
        PatientRecord rec;
        try {
            d.id = rec.id = jp.at("id").get<std::string>();
            d.label = rec.label = jp.at("label").get<int>();
            d.category = rec.category = jp.at("category").get<int>();
            d.age_category = rec.age_category = jp.at("age_category").get<int>();
            for (int v = 0; v < kNumViews; ++v) {
                const std::string rel = jp.at("videos").at(view_name(static_cast<View>(v))).get<std::string>();
                Tensor video = read_rdf1(sibling_path(preproc_index_path, rel));
                if (video.rank() != 3 || video.dim(0) != frames || video.dim(1) != size || video.dim(2) != size)
                    throw Error::validation("video " + rel + " does not match the index dimensions");
                d.videos[static_cast<std::size_t>(v)] = std::move(video);
            }
        } catch (const json::exception& ex) {
            throw Error::validation("preprocessed index " + preproc_index_path + ": " + ex.what());
        }
        check_patient(rec, "preprocessed index");
        auto fit = features.find(d.id);
        if (fit == features.end())
            throw Error::validation("feature table is missing patient " + d.id);
        for (int v = 0; v < kNumViews; ++v)
            if (fit->second[static_cast<std::size_t>(v)].empty())
                throw Error::validation("feature table is missing patient " + d.id + " view " +
                                        view_name(static_cast<View>(v)) + " at screening 0");
        d.features = fit->second;
        out.push_back(std::move(d));
    }
    if (out.empty()) throw Error::validation("preprocessed index " + preproc_index_path + " lists no patients");
    return out;
}

} // namespace radif
