#include "dmlann/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

namespace dmlann {
namespace {

class PnmReader {
public:
    explicit PnmReader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

    std::string magic() {
        if (bytes_.size() < 2) throw std::runtime_error("truncated image header");
        pos_ = 2;
        return std::string(bytes_.begin(), bytes_.begin() + 2);
    }

    long header_int() {
        skip_space_and_comments();
        long value = 0;
        bool any = false;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000'000) throw std::runtime_error("image header value out of range");
            ++pos_;
            any = true;
        }
        if (!any) throw std::runtime_error("malformed image header");
        return value;
    }

    // Exactly one whitespace byte separates the header from the raster.
    void end_header() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
            throw std::runtime_error("malformed image header");
        ++pos_;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }
    const unsigned char* data() const { return bytes_.data() + pos_; }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::vector<unsigned char> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

void validate(const ImageGray& img) {
    if (img.width <= 0 || img.height <= 0) throw std::invalid_argument("image has zero dimension");
    if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height)
        throw std::invalid_argument("pixel count does not match image dimensions");
    for (double p : img.pixels)
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("pixel value outside [0, 1]");
}

ImageGray load_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image: " + path.string());
    std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), {}};

    PnmReader reader(std::move(bytes));
    const std::string magic = reader.magic();
    int channels;
    if (magic == "P5") {
        channels = 1;
    } else if (magic == "P6") {
        channels = 3;
    } else {
        throw std::runtime_error("unsupported image format (expected binary PGM/PPM): " +
                                 path.string());
    }
    const long width = reader.header_int();
    const long height = reader.header_int();
    const long maxval = reader.header_int();
    reader.end_header();
    if (width <= 0 || height <= 0) throw std::runtime_error("zero-dimension image: " + path.string());
    if (maxval <= 0 || maxval > 65535) throw std::runtime_error("invalid maxval: " + path.string());

    const std::size_t sample_bytes = maxval < 256 ? 1 : 2;
    const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (reader.remaining() < count * channels * sample_bytes)
        throw std::runtime_error("truncated image data: " + path.string());

    const unsigned char* raw = reader.data();
    auto sample = [&](std::size_t i) -> double {
        const unsigned v = sample_bytes == 1 ? raw[i] : (raw[2 * i] << 8) | raw[2 * i + 1];
        return std::min(1.0, static_cast<double>(v) / static_cast<double>(maxval));
    };

    ImageGray img;
    img.width = static_cast<int>(width);
    img.height = static_cast<int>(height);
    img.pixels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (channels == 1) {
            img.pixels[i] = sample(i);
        } else {
            const double luma =
                0.299 * sample(3 * i) + 0.587 * sample(3 * i + 1) + 0.114 * sample(3 * i + 2);
            img.pixels[i] = std::clamp(luma, 0.0, 1.0);
        }
    }
    return img;
}

void write_pgm(const std::filesystem::path& path, const ImageGray& img) {
    validate(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write image: " + path.string());
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    for (double p : img.pixels)
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(p, 0.0, 1.0) * 255.0))));
    if (!out) throw std::runtime_error("failed writing image: " + path.string());
}

ImageGray rotate180(const ImageGray& img) {
    ImageGray out = img;
    std::reverse(out.pixels.begin(), out.pixels.end());
    return out;
}

}  // namespace dmlann
