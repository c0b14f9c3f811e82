#include "dmlann/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dmlann/random.hpp"

namespace dmlann {

void validate(const SyntheticSpec& spec) {
    if (spec.class_count == 0 || spec.refs_per_class == 0 || spec.dimension < 2)
        throw std::invalid_argument("synthetic spec needs classes, images and dimension >= 2");
    if (!(spec.intra_class_spread >= 0.0) || !(spec.inter_class_spread >= 0.0))
        throw std::invalid_argument("synthetic spreads must be >= 0");
}

std::vector<LabeledFeature> generate_synthetic(const SyntheticSpec& spec) {
    validate(spec);
    Rng rng(spec.seed);
    const Geometry geometry{1, 1, static_cast<int>(spec.dimension)};

    std::vector<std::vector<double>> prototypes(spec.class_count, std::vector<double>(spec.dimension));
    for (auto& proto : prototypes)
        for (double& v : proto) v = std::max(0.0, 1.0 + spec.inter_class_spread * (2.0 * rng.uniform() - 1.0));

    std::vector<LabeledFeature> out;
    out.reserve(spec.class_count * spec.refs_per_class);
    for (std::size_t c = 0; c < spec.class_count; ++c) {
        char label[32];
        std::snprintf(label, sizeof label, "c%03zu", c);
        for (std::size_t i = 0; i < spec.refs_per_class; ++i) {
            LabeledFeature rec;
            rec.label = label;
            char path[64];
            std::snprintf(path, sizeof path, "synthetic/%s/%03zu", label, i);
            rec.path = path;
            rec.features.geometry = geometry;
            rec.features.values.resize(spec.dimension);
            double total = 0.0;
            for (std::size_t d = 0; d < spec.dimension; ++d) {
                const double v = prototypes[c][d] * (1.0 + spec.intra_class_spread * rng.normal());
                rec.features.values[d] = std::max(0.0, v);
                total += rec.features.values[d];
            }
            if (total > 0.0) {
                for (double& v : rec.features.values) v /= total;
            } else {
                std::fill(rec.features.values.begin(), rec.features.values.end(),
                          1.0 / static_cast<double>(spec.dimension));
            }
            out.push_back(std::move(rec));
        }
    }
    return out;
}

}  // namespace dmlann
