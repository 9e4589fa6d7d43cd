#include "despeckle/dataset_prep.hpp"

#include "despeckle/errors.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace despeckle {

namespace fs = std::filesystem;

std::string_view population_name(Population p) {
    switch (p) {
        case Population::Noisy: return "noisy";
        case Population::Clean: return "clean";
        case Population::Noise: return "noise";
    }
    return "unknown";
}

namespace {

Population parse_population(const std::string& s) {
    if (s == "noisy") return Population::Noisy;
    if (s == "clean") return Population::Clean;
    if (s == "noise") return Population::Noise;
    throw IoError("unknown population '" + s + "' in manifest");
}

std::string dims(int64_t h, int64_t w) {
    return std::to_string(h) + "x" + std::to_string(w);
}

}  // namespace

void ImageSample::validate() const {
    for (double v : pixels.pixels()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ConfigError("sample " + id + " has pixel value outside [0,1]");
        }
    }
    if (boundary_row && (*boundary_row < 1 || *boundary_row > pixels.height())) {
        throw ConfigError("sample " + id + " boundary_row " + std::to_string(*boundary_row) +
                          " outside [1, " + std::to_string(pixels.height()) + "]");
    }
    if (domain == Domain::Noisy && !boundary_row) {
        throw ConfigError("noisy sample " + id + " has no boundary_row");
    }
}

ImageSample center_crop(const ImageSample& sample, int64_t target_h, int64_t target_w) {
    const int64_t h = sample.pixels.height();
    const int64_t w = sample.pixels.width();
    if (target_h <= 0 || target_w <= 0 || target_h > h || target_w > w) {
        throw DimensionError("cannot center-crop " + sample.id + " of size " + dims(h, w) +
                             " to " + dims(target_h, target_w));
    }
    const int64_t top = (h - target_h) / 2;
    const int64_t left = (w - target_w) / 2;
    ImageSample out = sample;
    out.pixels = sample.pixels.crop(top, left, target_h, target_w);
    if (sample.boundary_row) {
        out.boundary_row = std::clamp<int64_t>(*sample.boundary_row - top, 1, target_h);
    }
    return out;
}

std::pair<Image, Image> split_information_background(const ImageSample& sample) {
    if (!sample.boundary_row) {
        throw ConfigError("sample " + sample.id + " has no boundary_row");
    }
    const int64_t b = *sample.boundary_row;
    const int64_t h = sample.pixels.height();
    if (b < 0 || b > h) {
        throw ConfigError("sample " + sample.id + " boundary_row out of range");
    }
    return {sample.pixels.rows(0, b), sample.pixels.rows(b, h)};
}

int64_t window_positions(int64_t dim, int64_t patch_size, int64_t stride) {
    if (dim < patch_size) return 0;
    return (dim - patch_size) / stride + 1;
}

PatchExtraction extract_patches(const Image& region, int64_t patch_size, int64_t stride) {
    if (patch_size <= 0 || stride <= 0) {
        throw ConfigError("patch_size and stride must be positive");
    }
    PatchExtraction out;
    const int64_t rows = window_positions(region.height(), patch_size, stride);
    const int64_t cols = window_positions(region.width(), patch_size, stride);
    if (rows == 0 || cols == 0) {
        out.warnings.push_back("region " + dims(region.height(), region.width()) +
                               " is smaller than patch size " + std::to_string(patch_size));
        return out;
    }
    out.patches.reserve(static_cast<size_t>(rows * cols));
    for (int64_t i = 0; i < rows; ++i) {
        for (int64_t j = 0; j < cols; ++j) {
            const PatchOffset off{i * stride, j * stride};
            out.patches.push_back({region.crop(off.row, off.col, patch_size, patch_size), off});
        }
    }
    return out;
}

PatchExtraction harvest_noise_patches(const ImageSample& sample, int64_t patch_size,
                                      int64_t stride) {
    if (sample.domain != Domain::Noisy) {
        throw ConfigError("noise patches can only be harvested from noisy samples (" +
                          sample.id + ")");
    }
    auto [info, background] = split_information_background(sample);
    PatchExtraction out = extract_patches(background, patch_size, stride);
    for (auto& w : out.warnings) w = sample.id + ": background " + w;
    for (auto& p : out.patches) p.offset.row += *sample.boundary_row;
    return out;
}

void PrepareConfig::validate() const {
    if (patch_size <= 0 || stride <= 0 || noise_stride <= 0) {
        throw ConfigError("patch_size, stride and noise_stride must be positive");
    }
    if (crop && (crop_height <= 0 || crop_width <= 0)) {
        throw ConfigError("crop dimensions must be positive");
    }
}

const PatchPopulation& PatchSet::population(Population p) const {
    switch (p) {
        case Population::Noisy: return noisy;
        case Population::Clean: return clean;
        case Population::Noise: return noise;
    }
    return noisy;
}

Image PatchSet::patch(Population p, int64_t index) const {
    const auto& pop = population(p);
    if (index < 0 || index >= pop.count()) {
        throw DimensionError("patch index out of range");
    }
    const int64_t n = patch_size * patch_size;
    std::vector<double> px(pop.data.begin() + index * n, pop.data.begin() + (index + 1) * n);
    return Image(patch_size, patch_size, std::move(px));
}

namespace {

void append(PatchPopulation& pop, const std::string& source, const PatchExtraction& ex,
            Population population, int64_t& next_id) {
    for (const auto& p : ex.patches) {
        for (double v : p.pixels.pixels()) pop.data.push_back(static_cast<float>(v));
        pop.records.push_back({next_id++, source, p.offset.row, p.offset.col, population});
    }
}

void sort_by_id(std::vector<ImageSample>& samples) {
    std::sort(samples.begin(), samples.end(),
              [](const ImageSample& a, const ImageSample& b) { return a.id < b.id; });
}

}  // namespace

PatchSet build_patchset(std::vector<ImageSample> noisy, std::vector<ImageSample> clean,
                        const PrepareConfig& config) {
    config.validate();
    if (noisy.empty() || clean.empty()) {
        throw ConfigError("both noisy and clean sample sets must be nonempty");
    }
    std::set<std::string> noisy_subjects;
    for (const auto& s : noisy) noisy_subjects.insert(s.subject);
    for (const auto& s : clean) {
        if (noisy_subjects.count(s.subject)) {
            throw ConfigError("subject '" + s.subject +
                              "' appears in both noisy and clean populations (paired leakage)");
        }
    }
    sort_by_id(noisy);
    sort_by_id(clean);

    PatchSet set;
    set.patch_size = config.patch_size;
    set.stride = config.stride;
    set.noise_stride = config.noise_stride;

    auto prepared = [&](const ImageSample& s) {
        s.validate();
        return config.crop ? center_crop(s, config.crop_height, config.crop_width) : s;
    };

    int64_t next_id = 0;
    std::vector<ImageSample> noisy_ready;
    for (const auto& s : noisy) noisy_ready.push_back(prepared(s));
    for (const auto& s : noisy_ready) {
        auto ex = extract_patches(s.pixels, config.patch_size, config.stride);
        for (auto& w : ex.warnings) set.warnings.push_back(s.id + ": " + w);
        append(set.noisy, s.id, ex, Population::Noisy, next_id);
    }
    for (const auto& s : clean) {
        auto ready = prepared(s);
        auto ex = extract_patches(ready.pixels, config.patch_size, config.stride);
        for (auto& w : ex.warnings) set.warnings.push_back(s.id + ": " + w);
        append(set.clean, s.id, ex, Population::Clean, next_id);
    }
    for (const auto& s : noisy_ready) {
        auto ex = harvest_noise_patches(s, config.patch_size, config.noise_stride);
        set.warnings.insert(set.warnings.end(), ex.warnings.begin(), ex.warnings.end());
        append(set.noise, s.id, ex, Population::Noise, next_id);
    }
    return set;
}

std::string manifest_text(const PatchSet& set) {
    std::ostringstream os;
    os << "# " << kPatchSetFormat << ' ' << kPatchSetVersion << " patch_size=" << set.patch_size
       << " stride=" << set.stride << " noise_stride=" << set.noise_stride << '\n';
    os << "patch_id\tsource\trow\tcol\tpopulation\n";
    for (auto pop : {Population::Noisy, Population::Clean, Population::Noise}) {
        for (const auto& r : set.population(pop).records) {
            os << r.patch_id << '\t' << r.source << '\t' << r.row << '\t' << r.col << '\t'
               << population_name(r.population) << '\n';
        }
    }
    return os.str();
}

void save_patchset(const PatchSet& set, const fs::path& dir) {
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "manifest.tsv", std::ios::binary);
        if (!out) throw IoError("cannot write " + (dir / "manifest.tsv").string());
        out << manifest_text(set);
    }
    for (auto pop : {Population::Noisy, Population::Clean, Population::Noise}) {
        const auto path = dir / (std::string(population_name(pop)) + ".f32");
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write " + path.string());
        const auto& data = set.population(pop).data;
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(float)));
    }
}

PatchSet load_patchset(const fs::path& dir) {
    std::ifstream in(dir / "manifest.tsv");
    if (!in) throw IoError("no patch set manifest in " + dir.string());
    PatchSet set;
    std::string line;
    std::getline(in, line);
    {
        std::istringstream hs(line);
        std::string hash, format;
        int version = 0;
        hs >> hash >> format >> version;
        if (hash != "#" || format != kPatchSetFormat || version != kPatchSetVersion) {
            throw IoError("unsupported patch set header: " + line);
        }
        std::string kv;
        while (hs >> kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) continue;
            const auto key = kv.substr(0, eq);
            const int64_t value = std::stoll(kv.substr(eq + 1));
            if (key == "patch_size") set.patch_size = value;
            else if (key == "stride") set.stride = value;
            else if (key == "noise_stride") set.noise_stride = value;
        }
    }
    if (set.patch_size <= 0) throw IoError("patch set header lacks patch_size");
    std::getline(in, line);  // column header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        PatchRecord r;
        std::string pop;
        std::string id;
        std::getline(ls, id, '\t');
        std::getline(ls, r.source, '\t');
        std::string row, col;
        std::getline(ls, row, '\t');
        std::getline(ls, col, '\t');
        std::getline(ls, pop, '\t');
        r.patch_id = std::stoll(id);
        r.row = std::stoll(row);
        r.col = std::stoll(col);
        r.population = parse_population(pop);
        switch (r.population) {
            case Population::Noisy: set.noisy.records.push_back(r); break;
            case Population::Clean: set.clean.records.push_back(r); break;
            case Population::Noise: set.noise.records.push_back(r); break;
        }
    }
    const int64_t n = set.patch_size * set.patch_size;
    auto read_archive = [&](Population p, PatchPopulation& pop) {
        const auto path = dir / (std::string(population_name(p)) + ".f32");
        std::ifstream ar(path, std::ios::binary);
        if (!ar) throw IoError("missing archive " + path.string());
        pop.data.resize(static_cast<size_t>(pop.count() * n));
        ar.read(reinterpret_cast<char*>(pop.data.data()),
                static_cast<std::streamsize>(pop.data.size() * sizeof(float)));
        if (ar.gcount() != static_cast<std::streamsize>(pop.data.size() * sizeof(float)) ||
            ar.peek() != std::char_traits<char>::eof()) {
            throw IoError("archive " + path.string() + " does not match manifest size");
        }
    };
    read_archive(Population::Noisy, set.noisy);
    read_archive(Population::Clean, set.clean);
    read_archive(Population::Noise, set.noise);
    return set;
}

std::map<std::string, int64_t> read_boundary_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read boundary manifest " + path.string());
    std::map<std::string, int64_t> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": expected <image_filename>,<boundary_row>");
        }
        try {
            size_t used = 0;
            const auto value = line.substr(comma + 1);
            rows[line.substr(0, comma)] = std::stoll(value, &used);
            if (used != value.size()) throw std::invalid_argument("trailing");
        } catch (const std::logic_error&) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": boundary row is not an integer");
        }
    }
    return rows;
}

void write_boundary_manifest(const std::map<std::string, int64_t>& rows, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& [name, row] : rows) out << name << ',' << row << '\n';
}

std::vector<fs::path> list_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
        if (ext == ".png" || ext == ".tif" || ext == ".tiff") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<ImageSample> load_samples(const fs::path& dir, Domain domain,
                                      const std::map<std::string, int64_t>& boundaries) {
    std::vector<ImageSample> out;
    for (const auto& path : list_images(dir)) {
        ImageSample s;
        s.id = path.filename().string();
        s.subject = path.stem().string();
        s.pixels = load_image(path);
        s.domain = domain;
        if (auto it = boundaries.find(s.id); it != boundaries.end()) {
            s.boundary_row = it->second;
        } else if (domain == Domain::Noisy) {
            throw ConfigError("no boundary row for noisy image " + s.id);
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace despeckle
