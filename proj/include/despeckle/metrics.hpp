#pragma once

#include "despeckle/image.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace despeckle {

/// Inclusive-exclusive rectangle: top <= r < top+height, left <= c < left+width.
struct RoiRect {
    int64_t top = 0;
    int64_t left = 0;
    int64_t height = 0;
    int64_t width = 0;

    bool within(int64_t image_h, int64_t image_w) const;
    bool overlaps(const RoiRect& other) const;
    bool operator==(const RoiRect&) const = default;
};

struct RoiSpec {
    std::vector<RoiRect> signal_rois;
    RoiRect background_roi;
    int64_t info_boundary_row = 0;

    /// Throws DimensionError/ConfigError if ROIs leave the image, m == 0, the
    /// background overlaps a signal ROI, or the boundary is out of range.
    void validate(int64_t image_h, int64_t image_w) const;
    bool operator==(const RoiSpec&) const = default;
};

/// Mean and population (1/N) standard deviation.
struct RegionStats {
    double mean = 0.0;
    double stddev = 0.0;
};

RegionStats region_stats(const Image& image, const RoiRect& roi);

struct RoiStats {
    std::vector<RegionStats> signal;
    RegionStats background;
    int64_t m() const { return static_cast<int64_t>(signal.size()); }
};

RoiStats roi_stats(const Image& image, const RoiSpec& spec);

/// A metric result that is either a finite value or an explicit undefined
/// flag with the reason. Never NaN.
struct MetricValue {
    std::optional<double> value;
    std::string undefined_reason;

    static MetricValue defined(double v) { return {v, {}}; }
    static MetricValue undefined(std::string why) { return {std::nullopt, std::move(why)}; }
    bool is_defined() const { return value.has_value(); }
};

MetricValue cnr(const Image& image, const RoiSpec& spec);
MetricValue msr(const Image& image, const RoiSpec& spec);
MetricValue enl(const Image& image, const RoiSpec& spec);

/// Edge preservation over the information part, rows [0, info_boundary_row):
/// summed vertical absolute differences of `denoised` over those of `noisy`.
MetricValue epi(const Image& denoised, const Image& noisy, const RoiSpec& spec);

struct MetricReport {
    std::string image_id;
    MetricValue cnr, msr, epi, enl;
    RoiSpec roi;
};

MetricReport evaluate_image(const std::string& image_id, const Image& denoised,
                            const Image& noisy, const RoiSpec& spec);

struct MetricMean {
    std::optional<double> value;
    int64_t defined_count = 0;
    int64_t undefined_count = 0;
};

struct MetricTable {
    std::vector<MetricReport> rows;
    MetricMean cnr, msr, epi, enl;
};

struct EvaluationInput {
    std::string image_id;
    Image denoised;
    Image noisy;
};

/// Per-image reports and per-metric means; undefined entries are excluded from
/// the means and counted. Throws MissingInputError when an image has no ROI.
MetricTable evaluate_set(const std::vector<EvaluationInput>& images,
                         const std::map<std::string, RoiSpec>& roi_config);

/// ROI config text: one record per line,
///   <image_id> <info_boundary_row> <bg top,left,h,w> <sig top,left,h,w> [<sig> ...]
/// '#' starts a comment line.
std::map<std::string, RoiSpec> parse_roi_config(const std::string& text);
std::map<std::string, RoiSpec> read_roi_config(const std::filesystem::path& path);
std::string format_roi_config(const std::map<std::string, RoiSpec>& config);

/// Per-image TSV in the column order CNR, MSR, EPI, ENL, closed by a mean row.
std::string format_metric_table(const MetricTable& table);

std::string format_metric(const MetricValue& v);

}  // namespace despeckle
