#ifndef VCM_FEATURES_HPP
#define VCM_FEATURES_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "media_io.hpp"

namespace vcm::features {

// ---- temporal features over the alignment vector r(i) ----

// s_0 = 0, s_i = r_i - r_{i-1}. Negative on backward jumps.
std::vector<double> skip_feature(const std::vector<uint32_t>& r);

// Consecutive-frozen-frame counter: f_0 = 0, f_i = f_{i-1}+1 when
// r_i == r_{i-1}, else 0.
std::vector<double> freeze_feature(const std::vector<uint32_t>& r);

// ---- frame sequences ----

// Random access to luma planes; lets file-backed clips stream instead of
// living in memory.
struct FrameSequence {
    size_t count = 0;
    std::function<media::LumaPlane(size_t)> at;
};

FrameSequence wrap(const std::vector<media::LumaPlane>& planes);

// ---- motion ----

struct MotionResult {
    std::vector<double> motion;  // d(i), with d(0) = 0
    std::vector<double> motion2; // min(d(i), d(i+1)), d(T) := d(T-1)
};

// d(i) = mean |G(Y_i) - G(Y_{i-1})| over pixels, where G is a 5x5 Gaussian
// blur, sigma 1.0, replicate edges. The kernel is the sampled Gaussian
// exp(-x^2/2) at offsets -2..2, normalized (see image_ops::gaussian_kernel).
MotionResult motion_features(const FrameSequence& frames);

// ---- full-reference frame metrics (luma) ----

// 10*log10(255^2 / MSE), capped at 100 dB (exactly 100 when MSE == 0).
double psnr(const media::LumaPlane& ref, const media::LumaPlane& deg);

// Standard single-scale SSIM: 11x11 Gaussian window sigma 1.5, K1 = 0.01,
// K2 = 0.03, L = 255, mean-pooled over the valid region.
double ssim(const media::LumaPlane& ref, const media::LumaPlane& deg);

// 5-scale MS-SSIM with the canonical weights
// (0.0448, 0.2856, 0.3001, 0.2363, 0.1333); requires dims >= 161.
double ms_ssim(const media::LumaPlane& ref, const media::LumaPlane& deg);

// Pixel-domain VIF per scale 0..3 (windows 17/9/5/3, sigma = taps/5,
// sigma_n^2 = 2.0). A flat reference scores 1.0 by convention; values are
// clamped below at 0. Requires dims >= 64.
std::array<double, 4> vif_scales(const media::LumaPlane& ref, const media::LumaPlane& deg);

// ---- selection & matrix assembly ----

enum class FeatureGroup { Vif, Adm, Motion, Skip, Freeze, Psnr, Ssim };

// Parses a comma-separated group list ("vif,motion,skip"); case-insensitive,
// duplicates collapse, result in canonical order.
std::vector<FeatureGroup> parse_selection(const std::string& csv);
std::string selection_to_string(std::span<const FeatureGroup> groups);

// Column labels in canonical order: vif_scale0..3, adm2, adm_scale0..3,
// motion, motion2, skip, freeze, psnr, ssim.
std::vector<std::string> columns_for(std::span<const FeatureGroup> groups);

struct FeatureMatrix {
    std::string clip_id;
    std::vector<std::string> column_names;
    size_t rows = 0;
    std::vector<double> values; // row-major rows x cols

    size_t cols() const { return column_names.size(); }
    double at(size_t r, size_t c) const { return values[r * cols() + c]; }
    double& at(size_t r, size_t c) { return values[r * cols() + c]; }

    // Throws Format on NaN/Inf or a size mismatch.
    void validate() const;
};

// Reads `wanted` columns from an external per-frame feature file (CSV with a
// `frame` column, indices 0..expected_rows-1 contiguous). Unknown extra
// columns are ignored.
std::map<std::string, std::vector<double>> ingest_external_features(
    const std::string& path, const std::vector<std::string>& wanted, size_t expected_rows);

struct BuildInputs {
    FrameSequence degraded;          // image metrics
    FrameSequence aligned_reference; // image metrics + motion
    const std::vector<uint32_t>* alignment = nullptr; // skip/freeze
    std::string external_csv;        // adm source, empty when unused
    unsigned threads = 1;
};

// Assembles the T x F matrix for the selection, columns in canonical order.
// Image-quality columns compare degraded frame i against aligned-reference
// frame i (degraded frames are rescaled to reference dims when they differ);
// motion runs on the aligned reference.
FeatureMatrix build_feature_matrix(std::span<const FeatureGroup> selection,
                                   const BuildInputs& inputs, const std::string& clip_id);

// ---- normalization ----

struct NormalizationStats {
    std::vector<std::string> column_names;
    std::vector<double> mean;
    std::vector<double> stddev; // zero-variance columns are stored as 1
};

// Per-column z-score stats over the pooled rows of all matrices.
NormalizationStats fit_normalization(std::span<const FeatureMatrix> training);
// (x - mean) / stddev, in place. Column names must match the stats exactly.
void apply_normalization(FeatureMatrix& m, const NormalizationStats& stats);

// ---- CSV ----

// Header `frame,<col>...`, floats with 9 significant digits.
void write_feature_csv(const FeatureMatrix& m, const std::string& path);
FeatureMatrix read_feature_csv(const std::string& path, const std::string& clip_id);

// Reorders/subsets columns; throws Format naming the first missing column.
FeatureMatrix select_columns(const FeatureMatrix& m, const std::vector<std::string>& columns);

} // namespace vcm::features

#endif
