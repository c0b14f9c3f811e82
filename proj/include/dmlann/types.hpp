#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dmlann {

/// Image geometry (U, V) and orientation bin count N of a feature vector.
struct Geometry {
    int width = 0;
    int height = 0;
    int bins = 0;

    friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// L1-normalized histogram feature of one image.
struct FeatureVector {
    std::vector<double> values;
    Geometry geometry;

    std::size_t size() const { return values.size(); }
    std::span<const double> view() const { return values; }
};

struct LabeledFeature {
    std::string label;
    std::string path;
    FeatureVector features;
};

}  // namespace dmlann
