#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ptwin {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Row-major 8-bit RGB raster.
class Image {
public:
    Image() = default;
    Image(int width, int height, Rgb fill = {});

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return width_ <= 0 || height_ <= 0; }

    Rgb at(int x, int y) const;
    void set(int x, int y, Rgb c);

    const std::vector<std::uint8_t>& bytes() const { return data_; }
    std::vector<std::uint8_t>& bytes() { return data_; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

// Binary PPM (P6, maxval 255).
std::string encode_ppm(const Image& image);
Image decode_ppm(std::string_view bytes);

std::string encode_png(const Image& image);
Image decode_png(std::string_view bytes);

// Sniffs PPM or PNG from the leading bytes; throws MalformedImage otherwise.
Image decode_image(std::string_view bytes);

Image read_image_file(const std::string& path);
void write_ppm_file(const std::string& path, const Image& image);

// Mean absolute per-channel difference in [0, 255]; images must match in size.
double mean_abs_error(const Image& a, const Image& b);

}  // namespace ptwin
