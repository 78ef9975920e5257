#include "ptwin/image.h"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <png.h>

#include "ptwin/error.h"

namespace ptwin {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
        throw Error(ErrorCode::MalformedImage, "image dimensions must be positive");
    }
    data_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < data_.size(); i += 3) {
        data_[i] = fill.r;
        data_[i + 1] = fill.g;
        data_[i + 2] = fill.b;
    }
}

Rgb Image::at(int x, int y) const {
    std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    return {data_[i], data_[i + 1], data_[i + 2]};
}

void Image::set(int x, int y, Rgb c) {
    std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    data_[i] = c.r;
    data_[i + 1] = c.g;
    data_[i + 2] = c.b;
}

std::string encode_ppm(const Image& image) {
    std::string out = "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) +
                      "\n255\n";
    out.append(reinterpret_cast<const char*>(image.bytes().data()), image.bytes().size());
    return out;
}

Image decode_ppm(std::string_view bytes) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&]() -> long {
        skip_space();
        long v = 0;
        std::size_t start = pos;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            v = v * 10 + (bytes[pos] - '0');
            if (v > 1'000'000) throw Error(ErrorCode::MalformedImage, "PPM dimension too large");
            ++pos;
        }
        if (pos == start) throw Error(ErrorCode::MalformedImage, "malformed PPM header");
        return v;
    };
    if (bytes.size() < 2 || bytes.substr(0, 2) != "P6") {
        throw Error(ErrorCode::MalformedImage, "not a binary PPM (P6)");
    }
    pos = 2;
    long w = read_int();
    long h = read_int();
    long maxval = read_int();
    if (w <= 0 || h <= 0) throw Error(ErrorCode::MalformedImage, "zero-dimension image");
    if (maxval != 255) throw Error(ErrorCode::MalformedImage, "only maxval 255 is supported");
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        throw Error(ErrorCode::MalformedImage, "malformed PPM header");
    }
    ++pos;
    std::size_t need = static_cast<std::size_t>(w) * h * 3;
    if (bytes.size() - pos < need) throw Error(ErrorCode::MalformedImage, "truncated PPM data");
    Image img(static_cast<int>(w), static_cast<int>(h));
    std::copy_n(bytes.data() + pos, need, reinterpret_cast<char*>(img.bytes().data()));
    return img;
}

std::string encode_png(const Image& image) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width());
    png.height = static_cast<png_uint_32>(image.height());
    png.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.bytes().data(), 0, nullptr)) {
        throw Error(ErrorCode::MalformedImage, std::string("png encode failed: ") + png.message);
    }
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.bytes().data(), 0, nullptr)) {
        throw Error(ErrorCode::MalformedImage, std::string("png encode failed: ") + png.message);
    }
    out.resize(size);
    return out;
}

Image decode_png(std::string_view bytes) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
        throw Error(ErrorCode::MalformedImage, std::string("png decode failed: ") + png.message);
    }
    png.format = PNG_FORMAT_RGB;
    if (png.width == 0 || png.height == 0 || png.width > 100000 || png.height > 100000) {
        png_image_free(&png);
        throw Error(ErrorCode::MalformedImage, "unsupported PNG dimensions");
    }
    Image img(static_cast<int>(png.width), static_cast<int>(png.height));
    if (!png_image_finish_read(&png, nullptr, img.bytes().data(), 0, nullptr)) {
        png_image_free(&png);
        throw Error(ErrorCode::MalformedImage, std::string("png decode failed: ") + png.message);
    }
    return img;
}

Image decode_image(std::string_view bytes) {
    if (bytes.size() >= 2 && bytes.substr(0, 2) == "P6") return decode_ppm(bytes);
    if (bytes.size() >= 8 && bytes.substr(1, 3) == "PNG") return decode_png(bytes);
    throw Error(ErrorCode::MalformedImage, "unrecognised image encoding (expected PPM or PNG)");
}

Image read_image_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MalformedImage, "cannot open image '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return decode_image(ss.str());
}

void write_ppm_file(const std::string& path, const Image& image) {
    std::ofstream out(path, std::ios::binary);
    out << encode_ppm(image);
    if (!out) throw Error(ErrorCode::MalformedImage, "cannot write '" + path + "'");
}

double mean_abs_error(const Image& a, const Image& b) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw Error(ErrorCode::InvariantViolation, "image sizes differ");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.bytes().size(); ++i) {
        sum += std::abs(static_cast<int>(a.bytes()[i]) - static_cast<int>(b.bytes()[i]));
    }
    return sum / static_cast<double>(a.bytes().size());
}

}  // namespace ptwin
