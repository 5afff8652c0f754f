#ifndef VCM_MARKER_HPP
#define VCM_MARKER_HPP

#include <cstdint>
#include <optional>
#include <span>

#include "media_io.hpp"

namespace vcm::marker {

// Marker bit layout "VCMK1": an 8x8 data grid carrying
//   payload32 = frame_index (24 bit, big-endian) || crc8(index bytes)
// repeated twice (cells 0..31 and 32..63, row-major, MSB first), where a set
// bit renders as a black cell. The data grid is wrapped by a 1-cell black
// sync border and a 1-cell white quiet zone, so the footprint is 12x12 cells.
// Identical markers are stamped at the top-left and bottom-right corners.
inline constexpr char kBitLayoutVersion[] = "VCMK1";

inline constexpr uint32_t kDataCells = 8;
inline constexpr uint32_t kFootprintCells = kDataCells + 4; // + sync + quiet rings
inline constexpr uint32_t kMaxFrameIndex = (1u << 24) - 1;
inline constexpr uint8_t kBlackLevel = 16;
inline constexpr uint8_t kWhiteLevel = 235;

struct MarkerConfig {
    uint32_t cell_size = 8; // pixels per cell
    uint32_t margin = 16;   // pixels between frame corner and the quiet zone

    uint32_t footprint_px() const { return kFootprintCells * cell_size; }
    void validate() const; // cell_size >= 2
};

enum class Confidence { None, Single, Both };

struct DecodeResult {
    uint32_t frame_index = 0;
    Confidence confidence = Confidence::None;
};

// CRC-8, polynomial 0x07, init 0x00, no reflection, no final xor.
uint8_t crc8(std::span<const uint8_t> bytes);

// 64-bit cell pattern for the data grid; bit 63 is cell (0,0).
uint64_t encode_payload(uint32_t frame_index);

// Stamps both markers in place. Throws Format if the footprints do not fit
// inside the frame or would overlap each other.
void render_markers(media::LumaPlane& luma, uint32_t frame_index, const MarkerConfig& config);

// Reads the index back from a (possibly degraded) frame. Each data cell is
// sampled with a 3x3 mean at its center and thresholded at the midpoint of
// the levels observed on the sync border (black) and quiet zone (white).
// A marker is accepted only if its CRC checks out; markers that decode to
// different indices cancel each other out.
std::optional<DecodeResult> decode_frame_index(const media::LumaPlane& luma,
                                               const MarkerConfig& config);

} // namespace vcm::marker

#endif
