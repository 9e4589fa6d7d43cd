#include "despeckle/metrics.hpp"

#include "despeckle/errors.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace despeckle {

bool RoiRect::within(int64_t image_h, int64_t image_w) const {
    return top >= 0 && left >= 0 && height > 0 && width > 0 && top + height <= image_h &&
           left + width <= image_w;
}

bool RoiRect::overlaps(const RoiRect& o) const {
    return top < o.top + o.height && o.top < top + height && left < o.left + o.width &&
           o.left < left + width;
}

namespace {

std::string rect_text(const RoiRect& r) {
    return std::to_string(r.top) + "," + std::to_string(r.left) + "," +
           std::to_string(r.height) + "," + std::to_string(r.width);
}

}  // namespace

void RoiSpec::validate(int64_t image_h, int64_t image_w) const {
    if (signal_rois.empty()) throw ConfigError("ROI spec needs at least one signal ROI");
    if (!background_roi.within(image_h, image_w)) {
        throw DimensionError("background ROI " + rect_text(background_roi) +
                             " is outside the image");
    }
    for (size_t i = 0; i < signal_rois.size(); ++i) {
        const auto& r = signal_rois[i];
        if (!r.within(image_h, image_w)) {
            throw DimensionError("signal ROI #" + std::to_string(i + 1) + " " + rect_text(r) +
                                 " is outside the image");
        }
        if (r.overlaps(background_roi)) {
            throw ConfigError("signal ROI #" + std::to_string(i + 1) +
                              " overlaps the background ROI");
        }
    }
    if (info_boundary_row < 1 || info_boundary_row > image_h) {
        throw DimensionError("info boundary row " + std::to_string(info_boundary_row) +
                             " outside [1, " + std::to_string(image_h) + "]");
    }
}

RegionStats region_stats(const Image& image, const RoiRect& roi) {
    if (!roi.within(image.height(), image.width())) {
        throw DimensionError("ROI " + rect_text(roi) + " is outside the image");
    }
    const double n = static_cast<double>(roi.height * roi.width);
    double sum = 0.0;
    for (int64_t r = roi.top; r < roi.top + roi.height; ++r)
        for (int64_t c = roi.left; c < roi.left + roi.width; ++c) sum += image(r, c);
    const double mean = sum / n;
    double ss = 0.0;
    for (int64_t r = roi.top; r < roi.top + roi.height; ++r)
        for (int64_t c = roi.left; c < roi.left + roi.width; ++c) {
            const double d = image(r, c) - mean;
            ss += d * d;
        }
    return {mean, std::sqrt(ss / n)};
}

RoiStats roi_stats(const Image& image, const RoiSpec& spec) {
    spec.validate(image.height(), image.width());
    RoiStats s;
    for (const auto& r : spec.signal_rois) s.signal.push_back(region_stats(image, r));
    s.background = region_stats(image, spec.background_roi);
    return s;
}

MetricValue cnr(const Image& image, const RoiSpec& spec) {
    const auto s = roi_stats(image, spec);
    const auto& b = s.background;
    double acc = 0.0;
    for (int64_t i = 0; i < s.m(); ++i) {
        const auto& sig = s.signal[static_cast<size_t>(i)];
        const double contrast = sig.mean - b.mean;
        const double spread = std::sqrt(sig.stddev * sig.stddev + b.stddev * b.stddev);
        if (!(contrast > 0.0)) {
            return MetricValue::undefined("CNR: signal ROI #" + std::to_string(i + 1) +
                                          " mean does not exceed background mean");
        }
        if (!(spread > 0.0)) {
            return MetricValue::undefined("CNR: signal ROI #" + std::to_string(i + 1) +
                                          " and background both have zero spread");
        }
        acc += 10.0 * std::log10(contrast / spread);
    }
    return MetricValue::defined(acc / static_cast<double>(s.m()));
}

MetricValue msr(const Image& image, const RoiSpec& spec) {
    const auto s = roi_stats(image, spec);
    double acc = 0.0;
    for (int64_t i = 0; i < s.m(); ++i) {
        const auto& sig = s.signal[static_cast<size_t>(i)];
        if (!(sig.stddev > 0.0)) {
            return MetricValue::undefined("MSR: signal ROI #" + std::to_string(i + 1) +
                                          " is constant");
        }
        acc += sig.mean / sig.stddev;
    }
    return MetricValue::defined(acc / static_cast<double>(s.m()));
}

MetricValue enl(const Image& image, const RoiSpec& spec) {
    const auto b = region_stats(image, spec.background_roi);
    if (!(b.stddev > 0.0)) {
        return MetricValue::undefined("ENL: background ROI is constant");
    }
    return MetricValue::defined((b.mean * b.mean) / (b.stddev * b.stddev));
}

MetricValue epi(const Image& denoised, const Image& noisy, const RoiSpec& spec) {
    if (denoised.height() != noisy.height() || denoised.width() != noisy.width()) {
        throw DimensionError("EPI needs equally sized images");
    }
    const int64_t rows = spec.info_boundary_row;
    if (rows < 1 || rows > noisy.height()) {
        throw DimensionError("EPI info boundary row out of range");
    }
    auto vertical_variation = [rows](const Image& im) {
        double acc = 0.0;
        for (int64_t r = 0; r + 1 < rows; ++r)
            for (int64_t c = 0; c < im.width(); ++c) acc += std::abs(im(r + 1, c) - im(r, c));
        return acc;
    };
    const double den = vertical_variation(noisy);
    if (!(den > 0.0)) {
        return MetricValue::undefined("EPI: noisy information part has no vertical variation");
    }
    return MetricValue::defined(vertical_variation(denoised) / den);
}

MetricReport evaluate_image(const std::string& image_id, const Image& denoised,
                            const Image& noisy, const RoiSpec& spec) {
    spec.validate(denoised.height(), denoised.width());
    MetricReport rep;
    rep.image_id = image_id;
    rep.roi = spec;
    rep.cnr = cnr(denoised, spec);
    rep.msr = msr(denoised, spec);
    rep.epi = epi(denoised, noisy, spec);
    rep.enl = enl(denoised, spec);
    return rep;
}

namespace {

MetricMean mean_of(const std::vector<MetricReport>& rows, MetricValue MetricReport::*field) {
    MetricMean m;
    double acc = 0.0;
    for (const auto& r : rows) {
        const auto& v = r.*field;
        if (v.is_defined()) {
            acc += *v.value;
            ++m.defined_count;
        } else {
            ++m.undefined_count;
        }
    }
    if (m.defined_count > 0) m.value = acc / static_cast<double>(m.defined_count);
    return m;
}

}  // namespace

MetricTable evaluate_set(const std::vector<EvaluationInput>& images,
                         const std::map<std::string, RoiSpec>& roi_config) {
    MetricTable table;
    for (const auto& im : images) {
        auto it = roi_config.find(im.image_id);
        if (it == roi_config.end()) {
            throw MissingInputError("no ROI specification for image " + im.image_id);
        }
        table.rows.push_back(evaluate_image(im.image_id, im.denoised, im.noisy, it->second));
    }
    table.cnr = mean_of(table.rows, &MetricReport::cnr);
    table.msr = mean_of(table.rows, &MetricReport::msr);
    table.epi = mean_of(table.rows, &MetricReport::epi);
    table.enl = mean_of(table.rows, &MetricReport::enl);
    return table;
}

namespace {

RoiRect parse_rect(const std::string& token, int lineno) {
    RoiRect r;
    char c1 = 0, c2 = 0, c3 = 0;
    std::istringstream is(token);
    if (!(is >> r.top >> c1 >> r.left >> c2 >> r.height >> c3 >> r.width) || c1 != ',' ||
        c2 != ',' || c3 != ',' || is.peek() != std::char_traits<char>::eof()) {
        throw ConfigError("ROI config line " + std::to_string(lineno) + ": bad rectangle '" +
                          token + "' (expected top,left,height,width)");
    }
    return r;
}

}  // namespace

std::map<std::string, RoiSpec> parse_roi_config(const std::string& text) {
    std::map<std::string, RoiSpec> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string id;
        if (!(ls >> id) || id.front() == '#') continue;
        RoiSpec spec;
        std::string bg;
        if (!(ls >> spec.info_boundary_row >> bg)) {
            throw ConfigError("ROI config line " + std::to_string(lineno) +
                              ": expected <id> <boundary> <background> <signal>...");
        }
        spec.background_roi = parse_rect(bg, lineno);
        std::string tok;
        while (ls >> tok) spec.signal_rois.push_back(parse_rect(tok, lineno));
        if (spec.signal_rois.empty()) {
            throw ConfigError("ROI config line " + std::to_string(lineno) +
                              ": no signal ROIs for " + id);
        }
        if (!out.emplace(id, std::move(spec)).second) {
            throw ConfigError("ROI config: duplicate image id " + id);
        }
    }
    return out;
}

std::map<std::string, RoiSpec> read_roi_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read ROI config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_roi_config(ss.str());
}

std::string format_roi_config(const std::map<std::string, RoiSpec>& config) {
    std::ostringstream os;
    os << "# image_id info_boundary_row background(top,left,h,w) signal(top,left,h,w)...\n";
    for (const auto& [id, spec] : config) {
        os << id << ' ' << spec.info_boundary_row << ' ' << rect_text(spec.background_roi);
        for (const auto& r : spec.signal_rois) os << ' ' << rect_text(r);
        os << '\n';
    }
    return os.str();
}

std::string format_metric(const MetricValue& v) {
    if (!v.is_defined()) return "undefined";
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << *v.value;
    return os.str();
}

std::string format_metric_table(const MetricTable& table) {
    std::ostringstream os;
    os << "image_id\tCNR\tMSR\tEPI\tENL\n";
    for (const auto& r : table.rows) {
        os << r.image_id << '\t' << format_metric(r.cnr) << '\t' << format_metric(r.msr) << '\t'
           << format_metric(r.epi) << '\t' << format_metric(r.enl) << '\n';
    }
    auto mean_text = [](const MetricMean& m) {
        return m.value ? format_metric(MetricValue::defined(*m.value)) : std::string("undefined");
    };
    os << "mean\t" << mean_text(table.cnr) << '\t' << mean_text(table.msr) << '\t'
       << mean_text(table.epi) << '\t' << mean_text(table.enl) << '\n';
    os << "undefined_count\t" << table.cnr.undefined_count << '\t' << table.msr.undefined_count
       << '\t' << table.epi.undefined_count << '\t' << table.enl.undefined_count << '\n';
    return os.str();
}

}  // namespace despeckle
