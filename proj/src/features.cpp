#include "dmlann/features.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "csv_util.hpp"
#include "dmlann/parallel.hpp"

namespace dmlann {

namespace fs = std::filesystem;

std::vector<LabeledFeature> extract_directory(const fs::path& dir, const HogParams& params,
                                              unsigned threads) {
    validate(params);
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());

    std::vector<fs::path> classes;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory()) classes.push_back(entry.path());
    std::sort(classes.begin(), classes.end());
    if (classes.empty()) throw std::runtime_error("no class subdirectories in " + dir.string());

    struct Job {
        std::string label;
        fs::path file;
    };
    std::vector<Job> jobs;
    for (const auto& cls : classes) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(cls))
            if (entry.is_regular_file()) files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (auto& f : files) jobs.push_back({cls.filename().string(), std::move(f)});
    }

    std::vector<std::optional<LabeledFeature>> slots(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t i) {
        ImageGray img;
        try {
            img = load_image(jobs[i].file);
        } catch (const std::exception&) {
            return;
        }
        LabeledFeature rec;
        rec.label = jobs[i].label;
        rec.path = fs::relative(jobs[i].file, dir).generic_string();
        rec.features = extract_hog(img, params);
        slots[i] = std::move(rec);
    });

    std::vector<LabeledFeature> out;
    for (const auto& cls : classes) {
        const std::string label = cls.filename().string();
        const bool any = std::any_of(slots.begin(), slots.end(),
                                     [&](const auto& s) { return s && s->label == label; });
        if (!any) throw std::runtime_error("class '" + label + "' has no readable images");
    }
    for (auto& s : slots) {
        if (!s) continue;
        if (!out.empty() && (s->features.geometry != out.front().features.geometry ||
                             s->features.size() != out.front().features.size()))
            throw std::runtime_error("image geometry differs from the first image: " + s->path);
        out.push_back(std::move(*s));
    }
    return out;
}

void write_feature_file(const fs::path& path, const std::vector<LabeledFeature>& records) {
    if (records.empty()) throw std::invalid_argument("no feature records to write");
    const Geometry& g = records.front().features.geometry;
    const std::size_t dim = records.front().features.size();

    std::ostringstream out;
    out << "DMLANN-FEATURES v1," << g.width << ',' << g.height << ',' << g.bins << ',' << dim << ','
        << records.size() << '\n';
    for (const auto& rec : records) {
        if (rec.features.geometry != g || rec.features.size() != dim)
            throw std::invalid_argument("feature records do not share one geometry");
        detail::require_csv_safe(rec.label, "label");
        detail::require_csv_safe(rec.path, "path");
        if (rec.label.empty()) throw std::invalid_argument("empty class label");
        out << rec.label << ',' << rec.path;
        for (double v : rec.features.values) out << ',' << detail::format_double(v);
        out << '\n';
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write feature file: " + path.string());
    file << out.str();
    if (!file) throw std::runtime_error("failed writing feature file: " + path.string());
}

std::vector<LabeledFeature> read_feature_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open feature file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty feature file: " + path.string());

    const auto header = detail::split(detail::trim_cr(line));
    if (header.size() != 6 || header[0] != "DMLANN-FEATURES v1")
        throw std::runtime_error("not a DMLANN-FEATURES v1 file: " + path.string());
    Geometry g{detail::parse_int<int>(header[1]), detail::parse_int<int>(header[2]),
               detail::parse_int<int>(header[3])};
    const auto dim = detail::parse_int<std::size_t>(header[4]);
    const auto count = detail::parse_int<std::size_t>(header[5]);

    std::vector<LabeledFeature> records;
    records.reserve(count);
    while (std::getline(in, line)) {
        const std::string_view row = detail::trim_cr(line);
        if (row.empty()) continue;
        const auto fields = detail::split(row);
        if (fields.size() != dim + 2)
            throw std::runtime_error("feature row " + std::to_string(records.size() + 1) +
                                     " has wrong field count");
        LabeledFeature rec;
        rec.label = std::string(fields[0]);
        rec.path = std::string(fields[1]);
        rec.features.geometry = g;
        rec.features.values.reserve(dim);
        for (std::size_t i = 0; i < dim; ++i)
            rec.features.values.push_back(detail::parse_double(fields[i + 2]));
        records.push_back(std::move(rec));
    }
    if (records.size() != count)
        throw std::runtime_error("feature file row count does not match header: " + path.string());
    return records;
}

}  // namespace dmlann
