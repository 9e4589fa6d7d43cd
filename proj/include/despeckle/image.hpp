#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace despeckle {

/// Single-channel image, row-major, intensities nominally in [0,1].
/// Stored in double so metric arithmetic is not limited by storage precision.
class Image {
public:
    Image() = default;
    Image(int64_t height, int64_t width, double fill = 0.0);
    Image(int64_t height, int64_t width, std::vector<double> pixels);

    int64_t height() const noexcept { return height_; }
    int64_t width() const noexcept { return width_; }
    int64_t size() const noexcept { return height_ * width_; }
    bool empty() const noexcept { return size() == 0; }

    double& operator()(int64_t row, int64_t col) { return pixels_[row * width_ + col]; }
    double operator()(int64_t row, int64_t col) const { return pixels_[row * width_ + col]; }

    std::span<double> pixels() noexcept { return pixels_; }
    std::span<const double> pixels() const noexcept { return pixels_; }

    /// Sub-image [top, top+height) x [left, left+width); bounds are checked.
    Image crop(int64_t top, int64_t left, int64_t height, int64_t width) const;

    /// Rows [begin, end) as a new image.
    Image rows(int64_t begin, int64_t end) const { return crop(begin, 0, end - begin, width_); }

    bool operator==(const Image&) const = default;

private:
    int64_t height_ = 0;
    int64_t width_ = 0;
    std::vector<double> pixels_;
};

/// Vertical concatenation; widths must match.
Image vconcat(const Image& top, const Image& bottom);

/// Horizontal concatenation; heights must match.
Image hconcat(const std::vector<Image>& parts);

/// Loads an 8-bit or 16-bit single-channel PNG/TIFF. 8-bit values are divided
/// by 255, 16-bit values by 65535. Multi-channel files are rejected.
Image load_image(const std::filesystem::path& path);

/// Writes an 8-bit PNG; values are clamped to [0,1] and rounded.
void save_png(const Image& image, const std::filesystem::path& path);

/// Writes a 16-bit PNG; values are clamped to [0,1].
void save_png16(const Image& image, const std::filesystem::path& path);

/// Writes a signed image in [-1,1] with the symmetric gray mapping
/// v -> (v + 1) / 2, so zero lands on mid-gray.
void save_signed_png(const Image& image, const std::filesystem::path& path);

}  // namespace despeckle
