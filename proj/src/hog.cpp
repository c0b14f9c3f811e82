#include "dmlann/hog.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace dmlann {
namespace {

constexpr double kBlockEpsilon = 1e-6;

struct Grid {
    int cells_x = 0;
    int cells_y = 0;
    int blocks_x = 0;
    int blocks_y = 0;
};

Grid grid_for(int width, int height, const HogParams& p) {
    Grid g;
    g.cells_x = width / p.cell_size;
    g.cells_y = height / p.cell_size;
    g.blocks_x = g.cells_x - p.block_size + 1;
    g.blocks_y = g.cells_y - p.block_size + 1;
    return g;
}

}  // namespace

void validate(const HogParams& params) {
    if (params.cell_size < 2) throw std::invalid_argument("cell_size must be >= 2");
    if (params.block_size < 1) throw std::invalid_argument("block_size must be >= 1");
    if (params.bins < 2) throw std::invalid_argument("bins must be >= 2");
}

std::size_t hog_dimension(int width, int height, const HogParams& params) {
    validate(params);
    const Grid g = grid_for(width, height, params);
    if (g.blocks_x <= 0 || g.blocks_y <= 0) return 0;
    return static_cast<std::size_t>(g.blocks_x) * g.blocks_y * params.block_size *
           params.block_size * params.bins;
}

FeatureVector extract_hog(const ImageGray& img, const HogParams& params) {
    validate(img);
    validate(params);
    const Grid g = grid_for(img.width, img.height, params);
    if (g.blocks_x <= 0 || g.blocks_y <= 0)
        throw std::invalid_argument("image smaller than one HOG block");

    const int cs = params.cell_size;
    const int w = g.cells_x * cs;
    const int h = g.cells_y * cs;
    const int x0 = (img.width - w) / 2;
    const int y0 = (img.height - h) / 2;
    auto pixel = [&](int x, int y) {
        x = std::clamp(x, 0, w - 1);
        y = std::clamp(y, 0, h - 1);
        return img.at(x0 + x, y0 + y);
    };

    const int bins = params.bins;
    const double range = params.signed_gradients ? 2.0 * std::numbers::pi : std::numbers::pi;
    std::vector<double> cells(static_cast<std::size_t>(g.cells_x) * g.cells_y * bins, 0.0);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gx = pixel(x + 1, y) - pixel(x - 1, y);
            const double gy = pixel(x, y + 1) - pixel(x, y - 1);
            const double magnitude = std::hypot(gx, gy);
            if (magnitude == 0.0) continue;
            double angle = std::atan2(gy, gx);
            if (angle < 0.0) angle += 2.0 * std::numbers::pi;
            angle = std::fmod(angle, range);
            int bin = static_cast<int>(angle / range * bins);
            bin = std::clamp(bin, 0, bins - 1);
            const std::size_t cell = static_cast<std::size_t>(y / cs) * g.cells_x + x / cs;
            cells[cell * bins + bin] += magnitude;
        }
    }

    const int bs = params.block_size;
    const std::size_t block_len = static_cast<std::size_t>(bs) * bs * bins;
    FeatureVector out;
    out.geometry = Geometry{w, h, bins};
    out.values.reserve(static_cast<std::size_t>(g.blocks_x) * g.blocks_y * block_len);

    std::vector<double> block(block_len);
    for (int by = 0; by < g.blocks_y; ++by) {
        for (int bx = 0; bx < g.blocks_x; ++bx) {
            std::size_t idx = 0;
            for (int cy = by; cy < by + bs; ++cy) {
                for (int cx = bx; cx < bx + bs; ++cx) {
                    const double* hist = &cells[(static_cast<std::size_t>(cy) * g.cells_x + cx) * bins];
                    for (int b = 0; b < bins; ++b) block[idx++] = hist[b];
                }
            }
            double sq = 0.0;
            for (double v : block) sq += v * v;
            const double norm = std::sqrt(sq + kBlockEpsilon * kBlockEpsilon);
            for (double v : block) out.values.push_back(v / norm);
        }
    }

    const double total = std::accumulate(out.values.begin(), out.values.end(), 0.0);
    if (total > 0.0) {
        for (double& v : out.values) v /= total;
    } else {
        const double uniform = 1.0 / static_cast<double>(out.values.size());
        for (double& v : out.values) v = uniform;
    }
    return out;
}

}  // namespace dmlann
