#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dmlann/types.hpp"

namespace dmlann {

/// Seeded surrogate for a labeled image collection.
///
/// Each class prototype has components 1 + inter_class_spread * u with u
/// uniform in [-1, 1); each image multiplies every prototype component by
/// (1 + intra_class_spread * g) with g standard normal. Components are clipped
/// at zero and the vector is L1-normalized.
struct SyntheticSpec {
    std::size_t class_count = 50;
    std::size_t refs_per_class = 5;
    std::size_t dimension = 128;
    double intra_class_spread = 0.3;
    double inter_class_spread = 0.5;
    std::uint64_t seed = 42;
};

void validate(const SyntheticSpec& spec);

/// Labels are `c000`, `c001`, ...; records are grouped by class.
std::vector<LabeledFeature> generate_synthetic(const SyntheticSpec& spec);

}  // namespace dmlann
