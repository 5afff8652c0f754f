#include "features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "csv.hpp"
#include "error.hpp"
#include "image_ops.hpp"
#include "util.hpp"

namespace vcm::features {

std::vector<double> skip_feature(const std::vector<uint32_t>& r) {
    if (r.empty()) raise(ErrorKind::InvalidArg, "alignment vector is empty");
    std::vector<double> s(r.size(), 0.0);
    for (size_t i = 1; i < r.size(); ++i) s[i] = double(r[i]) - double(r[i - 1]);
    return s;
}

std::vector<double> freeze_feature(const std::vector<uint32_t>& r) {
    if (r.empty()) raise(ErrorKind::InvalidArg, "alignment vector is empty");
    std::vector<double> f(r.size(), 0.0);
    for (size_t i = 1; i < r.size(); ++i) f[i] = (r[i] == r[i - 1]) ? f[i - 1] + 1 : 0;
    return f;
}

FrameSequence wrap(const std::vector<media::LumaPlane>& planes) {
    return FrameSequence{planes.size(), [&planes](size_t i) { return planes[i]; }};
}

namespace {

void check_same_dims(const media::LumaPlane& ref, const media::LumaPlane& deg,
                     const char* metric) {
    if (ref.width != deg.width || ref.height != deg.height)
        raise(ErrorKind::Format, std::string(metric) + ": dims mismatch (" +
                                     std::to_string(ref.width) + "x" + std::to_string(ref.height) +
                                     " vs " + std::to_string(deg.width) + "x" +
                                     std::to_string(deg.height) + ")");
}

double mean_abs_diff(const img::FloatImage& a, const img::FloatImage& b) {
    double acc = 0;
    for (size_t i = 0; i < a.data.size(); ++i) acc += std::fabs(double(a.data[i]) - b.data[i]);
    return acc / double(a.data.size());
}

} // namespace

MotionResult motion_features(const FrameSequence& frames) {
    if (frames.count == 0) raise(ErrorKind::InvalidArg, "motion needs at least one frame");
    static const std::vector<float> kBlur = img::gaussian_kernel(5, 1.0);

    MotionResult out;
    out.motion.assign(frames.count, 0.0);
    img::FloatImage prev;
    for (size_t i = 0; i < frames.count; ++i) {
        const media::LumaPlane plane = frames.at(i);
        img::FloatImage blurred = img::filter_replicate(img::from_luma(plane), kBlur);
        if (i > 0) {
            if (blurred.width != prev.width || blurred.height != prev.height)
                raise(ErrorKind::Format, "motion: dims change between consecutive frames");
            out.motion[i] = mean_abs_diff(blurred, prev);
        }
        prev = std::move(blurred);
    }
    out.motion2.assign(frames.count, 0.0);
    for (size_t i = 0; i < frames.count; ++i) {
        const double next = (i + 1 < frames.count) ? out.motion[i + 1] : out.motion.back();
        out.motion2[i] = std::min(out.motion[i], next);
    }
    return out;
}

double psnr(const media::LumaPlane& ref, const media::LumaPlane& deg) {
    check_same_dims(ref, deg, "psnr");
    double acc = 0;
    for (size_t i = 0; i < ref.samples.size(); ++i) {
        const double d = double(ref.samples[i]) - double(deg.samples[i]);
        acc += d * d;
    }
    const double mse = acc / double(ref.samples.size());
    if (mse == 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(255.0 * 255.0 / mse));
}

namespace {

constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);

struct SsimTerms {
    double luminance;       // mean of (2 mu1 mu2 + C1) / (mu1^2 + mu2^2 + C1)
    double contrast_struct; // mean of (2 sigma12 + C2) / (sigma1^2 + sigma2^2 + C2)
    double full;            // mean of the product map
};

SsimTerms ssim_terms(const img::FloatImage& x, const img::FloatImage& y,
                     const std::vector<float>& win) {
    img::FloatImage xx(x.width, x.height), yy(x.width, x.height), xy(x.width, x.height);
    for (size_t i = 0; i < x.data.size(); ++i) {
        xx.data[i] = x.data[i] * x.data[i];
        yy.data[i] = y.data[i] * y.data[i];
        xy.data[i] = x.data[i] * y.data[i];
    }
    const img::FloatImage mu1 = img::filter_valid(x, win);
    const img::FloatImage mu2 = img::filter_valid(y, win);
    const img::FloatImage sxx = img::filter_valid(xx, win);
    const img::FloatImage syy = img::filter_valid(yy, win);
    const img::FloatImage sxy = img::filter_valid(xy, win);

    double lum = 0, cs = 0, full = 0;
    for (size_t i = 0; i < mu1.data.size(); ++i) {
        const double m1 = mu1.data[i], m2 = mu2.data[i];
        const double s1 = sxx.data[i] - m1 * m1;
        const double s2 = syy.data[i] - m2 * m2;
        const double s12 = sxy.data[i] - m1 * m2;
        const double l = (2 * m1 * m2 + kC1) / (m1 * m1 + m2 * m2 + kC1);
        const double c = (2 * s12 + kC2) / (s1 + s2 + kC2);
        lum += l;
        cs += c;
        full += l * c;
    }
    const double n = double(mu1.data.size());
    return SsimTerms{lum / n, cs / n, full / n};
}

} // namespace

double ssim(const media::LumaPlane& ref, const media::LumaPlane& deg) {
    check_same_dims(ref, deg, "ssim");
    if (ref.width < 11 || ref.height < 11)
        raise(ErrorKind::Format, "ssim requires dims >= 11");
    static const std::vector<float> kWin = img::gaussian_kernel(11, 1.5);
    return ssim_terms(img::from_luma(ref), img::from_luma(deg), kWin).full;
}

double ms_ssim(const media::LumaPlane& ref, const media::LumaPlane& deg) {
    check_same_dims(ref, deg, "ms_ssim");
    // 5 dyadic scales of an 11-tap window need ceil(d/16) >= 11
    if (ref.width < 161 || ref.height < 161)
        raise(ErrorKind::Format, "ms_ssim requires dims >= 161 (5 dyadic scales)");
    static const std::vector<float> kWin = img::gaussian_kernel(11, 1.5);
    static constexpr std::array<double, 5> kWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

    img::FloatImage x = img::from_luma(ref);
    img::FloatImage y = img::from_luma(deg);
    double result = 1.0;
    for (size_t scale = 0; scale < kWeights.size(); ++scale) {
        if (scale > 0) {
            x = img::box_downsample2(x);
            y = img::box_downsample2(y);
        }
        const SsimTerms terms = ssim_terms(x, y, kWin);
        result *= std::pow(std::max(terms.contrast_struct, 0.0), kWeights[scale]);
        if (scale + 1 == kWeights.size())
            result *= std::pow(std::max(terms.luminance, 0.0), kWeights[scale]);
    }
    return result;
}

namespace {

// VIF runs in double precision so that flat regions are detected reliably.
struct DImage {
    uint32_t width = 0, height = 0;
    std::vector<double> data;
    DImage() = default;
    DImage(uint32_t w, uint32_t h) : width(w), height(h), data(size_t(w) * h, 0.0) {}
};

DImage dimage_from(const media::LumaPlane& p) {
    DImage out(p.width, p.height);
    for (size_t i = 0; i < p.samples.size(); ++i) out.data[i] = double(p.samples[i]);
    return out;
}

std::vector<double> dgauss(int taps, double sigma) {
    std::vector<double> w(size_t(taps), 0.0);
    const int radius = taps / 2;
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        w[size_t(i + radius)] = std::exp(-double(i) * i / (2 * sigma * sigma));
        sum += w[size_t(i + radius)];
    }
    for (double& v : w) v /= sum;
    return w;
}

DImage dfilter_valid(const DImage& in, const std::vector<double>& k) {
    const uint32_t taps = uint32_t(k.size());
    if (in.width < taps || in.height < taps)
        raise(ErrorKind::Format, "vif: image smaller than filter window");
    const uint32_t ow = in.width - taps + 1;
    DImage tmp(ow, in.height);
    for (uint32_t y = 0; y < in.height; ++y)
        for (uint32_t x = 0; x < ow; ++x) {
            double acc = 0;
            for (uint32_t t = 0; t < taps; ++t) acc += k[t] * in.data[size_t(y) * in.width + x + t];
            tmp.data[size_t(y) * ow + x] = acc;
        }
    const uint32_t oh = in.height - taps + 1;
    DImage out(ow, oh);
    for (uint32_t y = 0; y < oh; ++y)
        for (uint32_t x = 0; x < ow; ++x) {
            double acc = 0;
            for (uint32_t t = 0; t < taps; ++t) acc += k[t] * tmp.data[size_t(y + t) * ow + x];
            out.data[size_t(y) * ow + x] = acc;
        }
    return out;
}

DImage dsubsample2(const DImage& in) {
    DImage out((in.width + 1) / 2, (in.height + 1) / 2);
    for (uint32_t y = 0; y < out.height; ++y)
        for (uint32_t x = 0; x < out.width; ++x)
            out.data[size_t(y) * out.width + x] = in.data[size_t(2 * y) * in.width + 2 * x];
    return out;
}

DImage dmul(const DImage& a, const DImage& b) {
    DImage out(a.width, a.height);
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
    return out;
}

} // namespace

std::array<double, 4> vif_scales(const media::LumaPlane& ref, const media::LumaPlane& deg) {
    check_same_dims(ref, deg, "vif");
    if (ref.width < 64 || ref.height < 64)
        raise(ErrorKind::Format, "vif requires dims >= 64");

    constexpr double kEps = 1e-10;
    constexpr double kSigmaNsq = 2.0;

    DImage x = dimage_from(ref);
    DImage y = dimage_from(deg);
    std::array<double, 4> out{};
    for (int scale = 0; scale < 4; ++scale) {
        const int taps = (1 << (4 - scale)) + 1; // 17, 9, 5, 3
        const auto win = dgauss(taps, double(taps) / 5.0);
        if (scale > 0) {
            x = dsubsample2(dfilter_valid(x, win));
            y = dsubsample2(dfilter_valid(y, win));
        }
        const DImage mu1 = dfilter_valid(x, win);
        const DImage mu2 = dfilter_valid(y, win);
        const DImage sxx = dfilter_valid(dmul(x, x), win);
        const DImage syy = dfilter_valid(dmul(y, y), win);
        const DImage sxy = dfilter_valid(dmul(x, y), win);

        double num = 0, den = 0;
        for (size_t i = 0; i < mu1.data.size(); ++i) {
            const double m1 = mu1.data[i], m2 = mu2.data[i];
            double sigma1_sq = std::max(0.0, sxx.data[i] - m1 * m1);
            double sigma2_sq = std::max(0.0, syy.data[i] - m2 * m2);
            const double sigma12 = sxy.data[i] - m1 * m2;

            double g = sigma12 / (sigma1_sq + kEps);
            double sv_sq = sigma2_sq - g * sigma12;
            if (sigma1_sq < kEps) {
                g = 0;
                sv_sq = sigma2_sq;
                sigma1_sq = 0;
            }
            if (sigma2_sq < kEps) {
                g = 0;
                sv_sq = 0;
            }
            if (g < 0) {
                sv_sq = sigma2_sq;
                g = 0;
            }
            if (sv_sq < kEps) sv_sq = kEps;
            num += std::log2(1.0 + g * g * sigma1_sq / (sv_sq + kSigmaNsq));
            den += std::log2(1.0 + sigma1_sq / kSigmaNsq);
        }
        // a flat reference carries no information to lose
        out[size_t(scale)] = den < 1e-9 ? 1.0 : std::max(0.0, num / den);
    }
    return out;
}

// ---- selection ----

namespace {

struct GroupInfo {
    FeatureGroup group;
    const char* name;
    std::vector<std::string> columns;
};

const std::vector<GroupInfo>& group_table() {
    static const std::vector<GroupInfo> kGroups = {
        {FeatureGroup::Vif, "vif", {"vif_scale0", "vif_scale1", "vif_scale2", "vif_scale3"}},
        {FeatureGroup::Adm, "adm", {"adm2", "adm_scale0", "adm_scale1", "adm_scale2", "adm_scale3"}},
        {FeatureGroup::Motion, "motion", {"motion", "motion2"}},
        {FeatureGroup::Skip, "skip", {"skip"}},
        {FeatureGroup::Freeze, "freeze", {"freeze"}},
        {FeatureGroup::Psnr, "psnr", {"psnr"}},
        {FeatureGroup::Ssim, "ssim", {"ssim"}},
    };
    return kGroups;
}

const GroupInfo& info_for(FeatureGroup g) {
    for (const auto& info : group_table())
        if (info.group == g) return info;
    raise(ErrorKind::InvalidArg, "unknown feature group");
}

} // namespace

std::vector<FeatureGroup> parse_selection(const std::string& csv) {
    std::set<size_t> picked;
    for (const std::string& raw : util::split(csv, ',')) {
        const std::string token = util::to_lower(util::trim(raw));
        if (token.empty()) continue;
        bool found = false;
        const auto& table = group_table();
        for (size_t i = 0; i < table.size(); ++i) {
            if (token == table[i].name) {
                picked.insert(i);
                found = true;
                break;
            }
        }
        if (!found) {
            std::string valid;
            for (const auto& info : group_table()) valid += std::string(info.name) + " ";
            raise(ErrorKind::InvalidArg,
                  "unknown feature '" + token + "' (valid: " + util::trim(valid) + ")");
        }
    }
    if (picked.empty()) raise(ErrorKind::InvalidArg, "feature selection is empty");
    std::vector<FeatureGroup> out;
    for (size_t i : picked) out.push_back(group_table()[i].group);
    return out;
}

std::string selection_to_string(std::span<const FeatureGroup> groups) {
    std::string out;
    for (FeatureGroup g : groups) {
        if (!out.empty()) out += ",";
        out += info_for(g).name;
    }
    return out;
}

std::vector<std::string> columns_for(std::span<const FeatureGroup> groups) {
    std::vector<std::string> out;
    for (const auto& info : group_table()) {
        if (std::find(groups.begin(), groups.end(), info.group) != groups.end())
            out.insert(out.end(), info.columns.begin(), info.columns.end());
    }
    return out;
}

void FeatureMatrix::validate() const {
    if (values.size() != rows * cols())
        raise(ErrorKind::Format, "feature matrix storage does not match dims");
    for (double v : values)
        if (!std::isfinite(v))
            raise(ErrorKind::Format, "feature matrix for '" + clip_id + "' contains NaN/Inf");
}

std::map<std::string, std::vector<double>> ingest_external_features(
    const std::string& path, const std::vector<std::string>& wanted, size_t expected_rows) {
    const csvio::Table t = csvio::read_table(path);
    const size_t frame_col = t.column("frame");
    if (frame_col == csvio::Table::npos)
        raise(ErrorKind::Format, "'" + path + "' has no 'frame' column");

    std::map<std::string, size_t> col_index;
    for (const std::string& name : wanted) {
        const size_t c = t.column(name);
        if (c == csvio::Table::npos)
            raise(ErrorKind::Format, "'" + path + "' is missing column '" + name + "'");
        col_index[name] = c;
    }
    if (t.rows.size() != expected_rows)
        raise(ErrorKind::Format, "'" + path + "' has " + std::to_string(t.rows.size()) +
                                     " rows, expected " + std::to_string(expected_rows));

    std::map<std::string, std::vector<double>> out;
    for (const std::string& name : wanted) out[name].reserve(expected_rows);
    for (size_t i = 0; i < t.rows.size(); ++i) {
        const std::string context = path + " row " + std::to_string(i);
        const double frame = csvio::parse_double(t.rows[i][frame_col], context);
        if (frame != double(i))
            raise(ErrorKind::Format, "'" + path + "' frame indices must be contiguous from 0");
        for (const std::string& name : wanted)
            out[name].push_back(csvio::parse_double(t.rows[i][col_index[name]], context));
    }
    return out;
}

FeatureMatrix build_feature_matrix(std::span<const FeatureGroup> selection,
                                   const BuildInputs& inputs, const std::string& clip_id) {
    if (selection.empty()) raise(ErrorKind::InvalidArg, "feature selection is empty");
    auto selected = [&](FeatureGroup g) {
        return std::find(selection.begin(), selection.end(), g) != selection.end();
    };
    const bool need_pair = selected(FeatureGroup::Vif) || selected(FeatureGroup::Psnr) ||
                           selected(FeatureGroup::Ssim);
    const bool need_ref = need_pair || selected(FeatureGroup::Motion);
    const bool need_alignment = selected(FeatureGroup::Skip) || selected(FeatureGroup::Freeze);

    // work out T and check every provided input agrees on it
    size_t rows = 0;
    auto adopt = [&](size_t n, const char* what) {
        if (n == 0) return;
        if (rows == 0) rows = n;
        else if (rows != n)
            raise(ErrorKind::Format, std::string("frame count mismatch: ") + what + " has " +
                                         std::to_string(n) + " frames, expected " +
                                         std::to_string(rows));
    };
    if (inputs.alignment) adopt(inputs.alignment->size(), "alignment vector");
    adopt(inputs.degraded.count, "degraded video");
    adopt(inputs.aligned_reference.count, "aligned reference");
    if (rows == 0) raise(ErrorKind::InvalidArg, "no inputs provided");

    if (need_pair && (inputs.degraded.count == 0 || inputs.aligned_reference.count == 0))
        raise(ErrorKind::InvalidArg, "selection needs degraded and aligned reference frames");
    if (need_ref && inputs.aligned_reference.count == 0)
        raise(ErrorKind::InvalidArg, "selection needs the aligned reference video");
    if (need_alignment && inputs.alignment == nullptr)
        raise(ErrorKind::InvalidArg, "selection needs the alignment vector");
    if (selected(FeatureGroup::Adm) && inputs.external_csv.empty())
        raise(ErrorKind::InvalidArg, "selection includes adm but no external feature file given");

    FeatureMatrix m;
    m.clip_id = clip_id;
    m.column_names = columns_for(selection);
    m.rows = rows;
    m.values.assign(rows * m.column_names.size(), 0.0);
    auto col_of = [&](const std::string& name) {
        return size_t(std::find(m.column_names.begin(), m.column_names.end(), name) -
                      m.column_names.begin());
    };

    if (need_alignment) {
        if (selected(FeatureGroup::Skip)) {
            const auto s = skip_feature(*inputs.alignment);
            const size_t c = col_of("skip");
            for (size_t i = 0; i < rows; ++i) m.at(i, c) = s[i];
        }
        if (selected(FeatureGroup::Freeze)) {
            const auto f = freeze_feature(*inputs.alignment);
            const size_t c = col_of("freeze");
            for (size_t i = 0; i < rows; ++i) m.at(i, c) = f[i];
        }
    }

    if (selected(FeatureGroup::Motion)) {
        const MotionResult motion = motion_features(inputs.aligned_reference);
        const size_t c1 = col_of("motion"), c2 = col_of("motion2");
        for (size_t i = 0; i < rows; ++i) {
            m.at(i, c1) = motion.motion[i];
            m.at(i, c2) = motion.motion2[i];
        }
    }

    if (need_pair) {
        util::parallel_for(rows, inputs.threads, [&](size_t i) {
            const media::LumaPlane ref = inputs.aligned_reference.at(i);
            media::LumaPlane deg = inputs.degraded.at(i);
            if (deg.width != ref.width || deg.height != ref.height)
                deg = img::resize_bilinear(deg, ref.width, ref.height);
            if (selected(FeatureGroup::Vif)) {
                const auto v = vif_scales(ref, deg);
                for (size_t s = 0; s < 4; ++s)
                    m.at(i, col_of("vif_scale" + std::to_string(s))) = v[s];
            }
            if (selected(FeatureGroup::Psnr)) m.at(i, col_of("psnr")) = psnr(ref, deg);
            if (selected(FeatureGroup::Ssim)) m.at(i, col_of("ssim")) = ssim(ref, deg);
        });
    }

    if (selected(FeatureGroup::Adm)) {
        const auto cols = info_for(FeatureGroup::Adm).columns;
        const auto ingested = ingest_external_features(inputs.external_csv, cols, rows);
        for (const auto& [name, values] : ingested) {
            const size_t c = col_of(name);
            for (size_t i = 0; i < rows; ++i) m.at(i, c) = values[i];
        }
    }

    m.validate();
    return m;
}

NormalizationStats fit_normalization(std::span<const FeatureMatrix> training) {
    if (training.empty()) raise(ErrorKind::InvalidArg, "empty training pool");
    const auto& columns = training[0].column_names;
    size_t total_rows = 0;
    for (const FeatureMatrix& m : training) {
        if (m.column_names != columns)
            raise(ErrorKind::Format, "training matrices have differing columns");
        total_rows += m.rows;
    }
    if (total_rows < 2) raise(ErrorKind::InvalidArg, "normalization needs at least 2 frames");

    NormalizationStats stats;
    stats.column_names = columns;
    stats.mean.assign(columns.size(), 0.0);
    stats.stddev.assign(columns.size(), 0.0);
    for (const FeatureMatrix& m : training)
        for (size_t i = 0; i < m.rows; ++i)
            for (size_t c = 0; c < columns.size(); ++c) stats.mean[c] += m.at(i, c);
    for (double& v : stats.mean) v /= double(total_rows);
    for (const FeatureMatrix& m : training)
        for (size_t i = 0; i < m.rows; ++i)
            for (size_t c = 0; c < columns.size(); ++c) {
                const double d = m.at(i, c) - stats.mean[c];
                stats.stddev[c] += d * d;
            }
    for (double& v : stats.stddev) {
        v = std::sqrt(v / double(total_rows));
        if (v == 0.0) v = 1.0;
    }
    return stats;
}

void apply_normalization(FeatureMatrix& m, const NormalizationStats& stats) {
    if (m.column_names != stats.column_names)
        raise(ErrorKind::Format, "matrix columns do not match normalization stats");
    for (size_t i = 0; i < m.rows; ++i)
        for (size_t c = 0; c < m.cols(); ++c)
            m.at(i, c) = (m.at(i, c) - stats.mean[c]) / stats.stddev[c];
}

void write_feature_csv(const FeatureMatrix& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::Io, "cannot open '" + path + "' for writing");
    out << "frame";
    for (const std::string& c : m.column_names) out << "," << c;
    out << "\n";
    for (size_t i = 0; i < m.rows; ++i) {
        out << i;
        for (size_t c = 0; c < m.cols(); ++c) out << "," << util::format_g9(m.at(i, c));
        out << "\n";
    }
    out.flush();
    if (!out) raise(ErrorKind::Io, "write failure on '" + path + "'");
}

FeatureMatrix read_feature_csv(const std::string& path, const std::string& clip_id) {
    const csvio::Table t = csvio::read_table(path);
    if (t.header.empty() || t.header[0] != "frame")
        raise(ErrorKind::Format, "'" + path + "' is not a feature CSV (first column must be 'frame')");
    FeatureMatrix m;
    m.clip_id = clip_id;
    m.column_names.assign(t.header.begin() + 1, t.header.end());
    m.rows = t.rows.size();
    m.values.reserve(m.rows * m.cols());
    for (size_t i = 0; i < t.rows.size(); ++i) {
        const std::string context = path + " row " + std::to_string(i);
        if (csvio::parse_double(t.rows[i][0], context) != double(i))
            raise(ErrorKind::Format, "'" + path + "' frame indices must be contiguous from 0");
        for (size_t c = 1; c < t.header.size(); ++c)
            m.values.push_back(csvio::parse_double(t.rows[i][c], context));
    }
    m.validate();
    return m;
}

FeatureMatrix select_columns(const FeatureMatrix& m, const std::vector<std::string>& columns) {
    std::vector<size_t> src;
    for (const std::string& name : columns) {
        const auto it = std::find(m.column_names.begin(), m.column_names.end(), name);
        if (it == m.column_names.end())
            raise(ErrorKind::Format,
                  "feature matrix for '" + m.clip_id + "' is missing column '" + name + "'");
        src.push_back(size_t(it - m.column_names.begin()));
    }
    FeatureMatrix out;
    out.clip_id = m.clip_id;
    out.column_names = columns;
    out.rows = m.rows;
    out.values.reserve(m.rows * columns.size());
    for (size_t i = 0; i < m.rows; ++i)
        for (size_t c : src) out.values.push_back(m.at(i, c));
    return out;
}

} // namespace vcm::features
