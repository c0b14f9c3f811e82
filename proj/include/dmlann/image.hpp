#pragma once

#include <filesystem>
#include <vector>

namespace dmlann {

/// Row-major luminance image with values in [0, 1].
struct ImageGray {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// Checks the ImageGray invariants, throwing std::invalid_argument on violation.
void validate(const ImageGray& img);

/// Reads a binary PGM (P5) or PPM (P6) file. Color input is reduced with
/// 0.299 R + 0.587 G + 0.114 B.
ImageGray load_image(const std::filesystem::path& path);

/// Writes an 8-bit binary PGM. Values are clamped to [0, 1] and rounded.
void write_pgm(const std::filesystem::path& path, const ImageGray& img);

/// Rotates by 180 degrees.
ImageGray rotate180(const ImageGray& img);

}  // namespace dmlann
