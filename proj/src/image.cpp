#include "despeckle/image.hpp"

#include "despeckle/errors.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace despeckle {

Image::Image(int64_t height, int64_t width, double fill)
    : height_(height), width_(width) {
    if (height < 0 || width < 0) {
        throw DimensionError("negative image dimensions");
    }
    pixels_.assign(static_cast<size_t>(height * width), fill);
}

Image::Image(int64_t height, int64_t width, std::vector<double> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
    if (height < 0 || width < 0 || static_cast<int64_t>(pixels_.size()) != height * width) {
        throw DimensionError("pixel buffer of " + std::to_string(pixels_.size()) +
                             " values does not match " + std::to_string(height) + "x" +
                             std::to_string(width));
    }
}

Image Image::crop(int64_t top, int64_t left, int64_t height, int64_t width) const {
    if (top < 0 || left < 0 || height < 0 || width < 0 || top + height > height_ ||
        left + width > width_) {
        throw DimensionError("crop window (" + std::to_string(top) + "," + std::to_string(left) +
                             ") " + std::to_string(height) + "x" + std::to_string(width) +
                             " exceeds " + std::to_string(height_) + "x" +
                             std::to_string(width_));
    }
    Image out(height, width);
    for (int64_t r = 0; r < height; ++r) {
        const auto* src = pixels_.data() + (top + r) * width_ + left;
        std::copy(src, src + width, out.pixels_.data() + r * width);
    }
    return out;
}

Image vconcat(const Image& top, const Image& bottom) {
    if (top.empty()) return bottom;
    if (bottom.empty()) return top;
    if (top.width() != bottom.width()) {
        throw DimensionError("vconcat width mismatch");
    }
    std::vector<double> px(top.pixels().begin(), top.pixels().end());
    px.insert(px.end(), bottom.pixels().begin(), bottom.pixels().end());
    return Image(top.height() + bottom.height(), top.width(), std::move(px));
}

Image hconcat(const std::vector<Image>& parts) {
    if (parts.empty()) return {};
    const int64_t h = parts.front().height();
    int64_t w = 0;
    for (const auto& p : parts) {
        if (p.height() != h) throw DimensionError("hconcat height mismatch");
        w += p.width();
    }
    Image out(h, w);
    int64_t col = 0;
    for (const auto& p : parts) {
        for (int64_t r = 0; r < h; ++r)
            for (int64_t c = 0; c < p.width(); ++c) out(r, col + c) = p(r, c);
        col += p.width();
    }
    return out;
}

Image load_image(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw IoError("image not found: " + path.string());
    }
    cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (mat.empty()) {
        throw IoError("cannot decode image: " + path.string());
    }
    if (mat.channels() != 1) {
        throw DimensionError(path.string() + " has " + std::to_string(mat.channels()) +
                             " channels; single-channel input required");
    }
    double scale = 0.0;
    switch (mat.depth()) {
        case CV_8U: scale = 1.0 / 255.0; break;
        case CV_16U: scale = 1.0 / 65535.0; break;
        default:
            throw IoError(path.string() + ": only 8-bit and 16-bit images are supported");
    }
    cv::Mat as_double;
    mat.convertTo(as_double, CV_64F, scale);
    Image out(as_double.rows, as_double.cols);
    for (int r = 0; r < as_double.rows; ++r) {
        const auto* row = as_double.ptr<double>(r);
        std::copy(row, row + as_double.cols, out.pixels().data() + r * out.width());
    }
    return out;
}

namespace {

void write_u8(const Image& image, const std::filesystem::path& path, double offset,
              double gain) {
    cv::Mat mat(static_cast<int>(image.height()), static_cast<int>(image.width()), CV_8UC1);
    for (int64_t r = 0; r < image.height(); ++r) {
        auto* row = mat.ptr<uint8_t>(static_cast<int>(r));
        for (int64_t c = 0; c < image.width(); ++c) {
            const double v = std::clamp((image(r, c) + offset) * gain, 0.0, 1.0);
            row[c] = static_cast<uint8_t>(std::lround(v * 255.0));
        }
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), mat)) {
        throw IoError("cannot write image: " + path.string());
    }
}

}  // namespace

void save_png(const Image& image, const std::filesystem::path& path) {
    write_u8(image, path, 0.0, 1.0);
}

void save_png16(const Image& image, const std::filesystem::path& path) {
    cv::Mat mat(static_cast<int>(image.height()), static_cast<int>(image.width()), CV_16UC1);
    for (int64_t r = 0; r < image.height(); ++r) {
        auto* row = mat.ptr<uint16_t>(static_cast<int>(r));
        for (int64_t c = 0; c < image.width(); ++c) {
            row[c] = static_cast<uint16_t>(std::lround(std::clamp(image(r, c), 0.0, 1.0) * 65535.0));
        }
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), mat)) {
        throw IoError("cannot write image: " + path.string());
    }
}

void save_signed_png(const Image& image, const std::filesystem::path& path) {
    write_u8(image, path, 1.0, 0.5);
}

}  // namespace despeckle
