#pragma once

#include <cstddef>

#include "dmlann/image.hpp"
#include "dmlann/types.hpp"

namespace dmlann {

struct HogParams {
    int cell_size = 8;
    int block_size = 2;
    int bins = 9;
    bool signed_gradients = false;

    friend bool operator==(const HogParams&, const HogParams&) = default;
};

void validate(const HogParams& params);

/// Feature length for an image of the given size, after center-cropping to a
/// multiple of the cell size. Returns 0 if the image holds no full block.
std::size_t hog_dimension(int width, int height, const HogParams& params);

/// Histogram of oriented gradients.
///
/// The image is center-cropped to a multiple of `cell_size`. Gradients use the
/// [-1, 0, 1] kernel with edge replication; each pixel votes its magnitude into
/// one orientation bin of its cell. Blocks of `block_size` x `block_size` cells
/// slide with a one-cell stride and are L2-normalized (eps = 1e-6). The
/// concatenated block histograms are finally L1-normalized; an all-zero vector
/// becomes the uniform vector.
///
/// The recorded geometry is (cropped width, cropped height, bins).
FeatureVector extract_hog(const ImageGray& img, const HogParams& params = {});

}  // namespace dmlann
