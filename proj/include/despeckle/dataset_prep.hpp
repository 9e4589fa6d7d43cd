#pragma once

#include "despeckle/image.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace despeckle {

enum class Domain { Noisy, Clean };

enum class Population { Noisy, Clean, Noise };

std::string_view population_name(Population p);

/// One B-scan. `boundary_row` splits the information part (rows above) from
/// the structure-free background (rows at and below). Clean samples usually
/// carry no boundary since nothing is harvested from them.
struct ImageSample {
    std::string id;       // file name, unique within a population
    std::string subject;  // used for the unpaired-disjointness check
    Image pixels;
    std::optional<int64_t> boundary_row;
    Domain domain = Domain::Noisy;

    /// Throws ConfigError if pixel range or boundary invariants are violated.
    /// Accepted boundary range is 1 <= boundary_row <= height.
    void validate() const;
};

/// Keeps the centered target_h x target_w window. For odd remainders the top
/// and left offsets round down, so the extra pixel is dropped bottom/right.
/// The boundary row moves with the top offset and is clamped to [1, target_h].
ImageSample center_crop(const ImageSample& sample, int64_t target_h, int64_t target_w);

/// info = rows [0, boundary_row), background = rows [boundary_row, height).
std::pair<Image, Image> split_information_background(const ImageSample& sample);

struct PatchOffset {
    int64_t row = 0;
    int64_t col = 0;
    bool operator==(const PatchOffset&) const = default;
};

struct ExtractedPatch {
    Image pixels;
    PatchOffset offset;
};

struct PatchExtraction {
    std::vector<ExtractedPatch> patches;
    std::vector<std::string> warnings;
};

/// Number of window positions along one axis: floor((dim - P) / S) + 1, or 0
/// when dim < P.
int64_t window_positions(int64_t dim, int64_t patch_size, int64_t stride);

/// Raster-order sliding window. A region smaller than the patch in either
/// dimension yields no patches and one warning.
PatchExtraction extract_patches(const Image& region, int64_t patch_size, int64_t stride);

/// Background-only crops of a noisy sample. Offsets are in source-image
/// coordinates, so every returned row offset is >= boundary_row.
PatchExtraction harvest_noise_patches(const ImageSample& sample, int64_t patch_size,
                                      int64_t stride);

struct PatchRecord {
    int64_t patch_id = 0;
    std::string source;
    int64_t row = 0;
    int64_t col = 0;
    Population population = Population::Noisy;
    bool operator==(const PatchRecord&) const = default;
};

/// One population stored contiguously as float32, patch-major, row-major.
struct PatchPopulation {
    std::vector<float> data;
    std::vector<PatchRecord> records;

    int64_t count() const noexcept { return static_cast<int64_t>(records.size()); }
};

struct PrepareConfig {
    int64_t crop_height = 450;
    int64_t crop_width = 900;
    int64_t patch_size = 256;
    int64_t stride = 8;
    int64_t noise_stride = 64;
    bool crop = true;

    void validate() const;
};

struct PatchSet {
    int64_t patch_size = 0;
    int64_t stride = 0;
    int64_t noise_stride = 0;
    PatchPopulation noisy;
    PatchPopulation clean;
    PatchPopulation noise;
    std::vector<std::string> warnings;

    const PatchPopulation& population(Population p) const;
    /// Patch `index` of a population as an image (float32 values widened).
    Image patch(Population p, int64_t index) const;
};

inline constexpr const char* kPatchSetFormat = "despeckle-patchset";
inline constexpr int kPatchSetVersion = 1;

/// Crops (when configured), harvests the three populations and assembles the
/// manifest in (population, sorted image id, raster offset) order. Noisy and
/// clean patches come from whole images; noise patches from the background of
/// noisy images only. Throws ConfigError for empty inputs or shared subjects.
PatchSet build_patchset(std::vector<ImageSample> noisy, std::vector<ImageSample> clean,
                        const PrepareConfig& config);

/// Writes manifest.tsv plus noisy.f32 / clean.f32 / noise.f32 archives.
void save_patchset(const PatchSet& set, const std::filesystem::path& dir);
PatchSet load_patchset(const std::filesystem::path& dir);

/// Manifest text exactly as written to manifest.tsv.
std::string manifest_text(const PatchSet& set);

/// Parses `<image_filename>,<boundary_row>` lines. Blank lines and lines
/// starting with '#' are ignored.
std::map<std::string, int64_t> read_boundary_manifest(const std::filesystem::path& path);
void write_boundary_manifest(const std::map<std::string, int64_t>& rows,
                             const std::filesystem::path& path);

/// Loads every .png/.tif/.tiff in `dir` (sorted by filename). Noisy samples
/// take their boundary from `boundaries`; a missing entry is a ConfigError.
std::vector<ImageSample> load_samples(const std::filesystem::path& dir, Domain domain,
                                      const std::map<std::string, int64_t>& boundaries = {});

/// Image files in `dir`, sorted by filename.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace despeckle
