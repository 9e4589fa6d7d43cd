#include "despeckle/baselines.hpp"

#include "despeckle/errors.hpp"

#include <algorithm>
#include <cmath>

namespace despeckle {

int64_t reflect_index(int64_t i, int64_t n) {
    if (n == 1) return 0;
    const int64_t period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

Image median_filter(const Image& image, int window) {
    if (window < 3 || window % 2 == 0) {
        throw ConfigError("median window must be odd and >= 3, got " + std::to_string(window));
    }
    const int64_t r = window / 2;
    const int64_t h = image.height();
    const int64_t w = image.width();
    Image out(h, w);
    std::vector<double> buf(static_cast<size_t>(window * window));
    const auto mid = buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2);
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            size_t k = 0;
            for (int64_t dy = -r; dy <= r; ++dy)
                for (int64_t dx = -r; dx <= r; ++dx)
                    buf[k++] = image(reflect_index(y + dy, h), reflect_index(x + dx, w));
            std::nth_element(buf.begin(), mid, buf.end());
            out(y, x) = *mid;
        }
    }
    return out;
}

Image bilateral_filter(const Image& image, double sigma_spatial, double sigma_range) {
    if (!(sigma_spatial > 0.0) || !(sigma_range > 0.0)) {
        throw ConfigError("bilateral sigmas must be positive");
    }
    const auto r = static_cast<int64_t>(std::ceil(3.0 * sigma_spatial));
    const int64_t side = 2 * r + 1;
    std::vector<double> spatial(static_cast<size_t>(side * side));
    for (int64_t dy = -r; dy <= r; ++dy)
        for (int64_t dx = -r; dx <= r; ++dx)
            spatial[static_cast<size_t>((dy + r) * side + dx + r)] =
                std::exp(-static_cast<double>(dy * dy + dx * dx) /
                         (2.0 * sigma_spatial * sigma_spatial));
    const double range_scale = 1.0 / (2.0 * sigma_range * sigma_range);

    const int64_t h = image.height();
    const int64_t w = image.width();
    Image out(h, w);
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            const double center = image(y, x);
            double num = 0.0;
            double den = 0.0;
            for (int64_t dy = -r; dy <= r; ++dy) {
                const int64_t yy = reflect_index(y + dy, h);
                for (int64_t dx = -r; dx <= r; ++dx) {
                    const double v = image(yy, reflect_index(x + dx, w));
                    const double d = v - center;
                    const double wgt = spatial[static_cast<size_t>((dy + r) * side + dx + r)] *
                                       std::exp(-d * d * range_scale);
                    num += wgt * v;
                    den += wgt;
                }
            }
            out(y, x) = num / den;
        }
    }
    return out;
}

void ResultRegistry::add(ResultSet set) {
    if (contains(set.method)) {
        throw ConfigError("method '" + set.method + "' is already registered");
    }
    sets_.push_back(std::move(set));
}

bool ResultRegistry::contains(const std::string& method) const {
    return std::any_of(sets_.begin(), sets_.end(),
                       [&](const ResultSet& s) { return s.method == method; });
}

void ingest_external_result(ResultRegistry& registry, const std::string& method_name,
                            const std::filesystem::path& dir,
                            const std::vector<std::string>& image_ids) {
    if (registry.contains(method_name)) {
        throw ConfigError("method '" + method_name + "' is already registered");
    }
    std::vector<std::string> missing;
    for (const auto& id : image_ids) {
        if (!std::filesystem::exists(dir / (id + ".png"))) missing.push_back(id + ".png");
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw MissingInputError("method '" + method_name + "' is missing results in " +
                                dir.string() + ": " + list);
    }
    ResultSet set;
    set.method = method_name;
    for (const auto& id : image_ids) set.images.emplace(id, load_image(dir / (id + ".png")));
    registry.add(std::move(set));
}

}  // namespace despeckle
