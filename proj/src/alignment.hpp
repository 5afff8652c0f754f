#ifndef VCM_ALIGNMENT_HPP
#define VCM_ALIGNMENT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "marker.hpp"
#include "media_io.hpp"

namespace vcm::align {

enum class Confidence { Both, Single, Filled };

std::string to_string(Confidence c);

struct Entry {
    std::optional<uint32_t> ref_index; // nullopt while the frame is undecoded
    Confidence confidence = Confidence::Both;
};

// Per-degraded-frame reference indices r(i).
struct AlignmentVector {
    std::vector<Entry> entries;

    size_t size() const { return entries.size(); }
    bool complete() const;
    size_t missing_count() const;
    // Plain r(i); throws Format if any entry is still missing.
    std::vector<uint32_t> indices() const;
};

// Builds an alignment vector from a filled index sequence (generator ground
// truth, CSV ingestion, tests).
AlignmentVector from_indices(const std::vector<uint32_t>& indices,
                             Confidence confidence = Confidence::Both);

// Decodes the marker index of every degraded frame. Frames whose dims differ
// from the marker-stamping dims are bilinearly rescaled to (stamp_width,
// stamp_height) before decoding.
AlignmentVector scan_alignment(media::VideoReader& degraded, const marker::MarkerConfig& config,
                               uint32_t stamp_width, uint32_t stamp_height);
AlignmentVector scan_alignment(const std::vector<media::LumaPlane>& degraded,
                               const marker::MarkerConfig& config, uint32_t stamp_width,
                               uint32_t stamp_height);

// Carry-forward fill: a missing entry takes the nearest previous decoded
// index; leading gaps take the first decoded index. Filled entries are
// flagged. Throws Format when every entry is missing (or the vector is empty).
AlignmentVector fill_gaps(const AlignmentVector& raw);

// Output frame i is source frame r(i), bit-exact. Source access is random, so
// large files stay on disk.
std::vector<media::Frame420> assemble_reference(const std::vector<media::Frame420>& source,
                                                const AlignmentVector& filled);
void assemble_reference(media::Y4mIndexedReader& source, const AlignmentVector& filled,
                        media::Y4mWriter& sink);

struct ValidationReport {
    size_t frames = 0;
    size_t freezes = 0;         // entries with r_i == r_{i-1}
    size_t skipped_indices = 0; // sum of max(0, r_i - r_{i-1} - 1)
    size_t backward_jumps = 0;  // entries with r_i < r_{i-1}
    size_t filled = 0;
    double fill_ratio = 0.0;
};

ValidationReport validate_alignment(const AlignmentVector& filled);

// CSV with header frame,ref_index,confidence; one row per degraded frame.
void write_alignment_csv(const AlignmentVector& filled, const std::string& path);
AlignmentVector read_alignment_csv(const std::string& path);

} // namespace vcm::align

#endif
