#pragma once

#include "despeckle/image.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace despeckle {

/// Reflect-101 border index (mirror without repeating the edge pixel), valid
/// for any offset.
int64_t reflect_index(int64_t i, int64_t n);

/// Per-pixel median over a window x window neighborhood with reflective
/// borders. `window` must be odd and >= 3.
Image median_filter(const Image& image, int window);

/// Gaussian space/range bilateral filter with reflective borders. The spatial
/// kernel is truncated at radius ceil(3 * sigma_spatial).
Image bilateral_filter(const Image& image, double sigma_spatial, double sigma_range);

/// Denoised outputs of one method, keyed by test image id.
struct ResultSet {
    std::string method;
    std::map<std::string, Image> images;
};

class ResultRegistry {
public:
    /// Throws ConfigError when `method` is already registered.
    void add(ResultSet set);
    const std::vector<ResultSet>& sets() const { return sets_; }
    bool contains(const std::string& method) const;

private:
    std::vector<ResultSet> sets_;
};

/// Reads `<dir>/<image_id>.png` for each id. Missing files raise
/// MissingInputError listing every missing id; a duplicate method name raises
/// ConfigError.
void ingest_external_result(ResultRegistry& registry, const std::string& method_name,
                            const std::filesystem::path& dir,
                            const std::vector<std::string>& image_ids);

}  // namespace despeckle
