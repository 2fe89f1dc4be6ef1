#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace copyscope {

// Row-major interleaved 8-bit raster with 1 (gray) or 3 (RGB) channels.
class Image {
public:
    Image(int width, int height, int channels, std::vector<std::uint8_t> data);
    Image(int width, int height, int channels, std::uint8_t fill);

    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] int channels() const noexcept { return channels_; }
    [[nodiscard]] std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    }
    [[nodiscard]] std::span<const std::uint8_t> data() const noexcept { return data_; }

    [[nodiscard]] std::uint8_t at(int x, int y, int c = 0) const noexcept {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    std::uint8_t& at(int x, int y, int c = 0) noexcept {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    int width_;
    int height_;
    int channels_;
    std::vector<std::uint8_t> data_;
};

struct ImageSet {
    std::vector<Image> images;
    std::vector<std::string> labels; // filename stems, parallel to images

    [[nodiscard]] std::size_t size() const noexcept { return images.size(); }
};

// Decodes a PNG or JPEG into 8-bit RGB. Gray sources are expanded to three
// channels; alpha is composited over white.
Image load_image(const std::filesystem::path& path);

// Decodes every PNG/JPEG in dir, ordered by filename stem. Files with other
// extensions are ignored.
ImageSet load_image_set(const std::filesystem::path& dir, unsigned threads = 1);

void save_png(const Image& img, const std::filesystem::path& path);
void save_jpeg(const Image& img, const std::filesystem::path& path, int quality = 95);

// BT.601 luma, computed in integer arithmetic: (299R + 587G + 114B + 500) / 1000.
Image to_grayscale(const Image& img);

// Expands a gray image to three identical channels; RGB passes through.
Image to_rgb(const Image& img);

// Bilinear resampling with half-pixel centers and edge clamping.
Image resize(const Image& img, int width, int height);

// Single channel c of img as a gray image.
Image extract_channel(const Image& img, int c);

} // namespace copyscope
