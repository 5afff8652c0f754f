#include "marker.hpp"

#include <array>
#include <string>

#include "error.hpp"

namespace vcm::marker {

namespace {

// Minimum white/black separation (luma levels) for a marker to count as
// present at all; pure-noise corners fail this long before the CRC runs.
constexpr double kMinContrast = 8.0;

constexpr std::array<uint8_t, 256> make_crc_table() {
    std::array<uint8_t, 256> table{};
    for (int n = 0; n < 256; ++n) {
        uint8_t rem = uint8_t(n);
        for (int bit = 0; bit < 8; ++bit)
            rem = (rem & 0x80) ? uint8_t((rem << 1) ^ 0x07) : uint8_t(rem << 1);
        table[size_t(n)] = rem;
    }
    return table;
}

constexpr auto kCrcTable = make_crc_table();

struct Anchor {
    uint32_t x0, y0; // top-left pixel of the 12x12-cell footprint
};

// Both anchors, or nothing if the footprints do not fit / would overlap.
std::optional<std::array<Anchor, 2>> anchors(uint32_t w, uint32_t h, const MarkerConfig& cfg,
                                             std::string* why) {
    const uint32_t fp = cfg.footprint_px();
    if (cfg.margin + fp > w || cfg.margin + fp > h) {
        if (why)
            *why = "marker footprint " + std::to_string(fp) + "px + margin " +
                   std::to_string(cfg.margin) + "px exceeds frame " + std::to_string(w) + "x" +
                   std::to_string(h);
        return std::nullopt;
    }
    // footprints overlap only if they intersect on both axes
    const bool x_clear = w >= 2 * (cfg.margin + fp);
    const bool y_clear = h >= 2 * (cfg.margin + fp);
    if (!x_clear && !y_clear) {
        if (why) *why = "corner markers would overlap each other";
        return std::nullopt;
    }
    return std::array<Anchor, 2>{Anchor{cfg.margin, cfg.margin},
                                 Anchor{w - cfg.margin - fp, h - cfg.margin - fp}};
}

// 3x3 mean around the center pixel of cell (col,row) in footprint coordinates.
double sample_cell(const media::LumaPlane& luma, const Anchor& a, uint32_t col, uint32_t row,
                   uint32_t cell_size) {
    const int cx = int(a.x0 + col * cell_size + cell_size / 2);
    const int cy = int(a.y0 + row * cell_size + cell_size / 2);
    double acc = 0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
            int x = std::clamp(cx + dx, 0, int(luma.width) - 1);
            int y = std::clamp(cy + dy, 0, int(luma.height) - 1);
            acc += luma.at(uint32_t(x), uint32_t(y));
        }
    return acc / 9.0;
}

std::array<uint8_t, 3> index_bytes(uint32_t frame_index) {
    return {uint8_t(frame_index >> 16), uint8_t(frame_index >> 8), uint8_t(frame_index)};
}

std::optional<uint32_t> checked_index(uint32_t word) {
    const uint32_t idx = word >> 8;
    const auto bytes = index_bytes(idx);
    if (crc8(bytes) != uint8_t(word & 0xFF)) return std::nullopt;
    return idx;
}

std::optional<uint32_t> decode_one(const media::LumaPlane& luma, const Anchor& a,
                                   const MarkerConfig& cfg) {
    const uint32_t cs = cfg.cell_size;

    // black level from the sync border ring, white level from the quiet zone
    double black = 0, white = 0;
    uint32_t black_n = 0, white_n = 0;
    for (uint32_t row = 0; row < kFootprintCells; ++row)
        for (uint32_t col = 0; col < kFootprintCells; ++col) {
            const bool outer = row == 0 || col == 0 || row == kFootprintCells - 1 ||
                               col == kFootprintCells - 1;
            const bool sync = !outer && (row == 1 || col == 1 || row == kFootprintCells - 2 ||
                                         col == kFootprintCells - 2);
            if (outer) {
                white += sample_cell(luma, a, col, row, cs);
                ++white_n;
            } else if (sync) {
                black += sample_cell(luma, a, col, row, cs);
                ++black_n;
            }
        }
    black /= black_n;
    white /= white_n;
    if (white - black < kMinContrast) return std::nullopt;
    const double threshold = (black + white) / 2.0;

    // blackness score per data cell; positive means bit 1
    std::array<double, 64> score{};
    for (uint32_t row = 0; row < kDataCells; ++row)
        for (uint32_t col = 0; col < kDataCells; ++col)
            score[row * kDataCells + col] =
                threshold - sample_cell(luma, a, col + 2, row + 2, cs);

    auto word_from = [&](auto bit_at) {
        uint32_t word = 0;
        for (uint32_t k = 0; k < 32; ++k)
            word = (word << 1) | (bit_at(k) ? 1u : 0u);
        return word;
    };
    // soft majority of the two repetitions, then each repetition on its own
    const uint32_t combined = word_from([&](uint32_t k) { return score[k] + score[k + 32] > 0; });
    const uint32_t rep_a = word_from([&](uint32_t k) { return score[k] > 0; });
    const uint32_t rep_b = word_from([&](uint32_t k) { return score[k + 32] > 0; });
    for (uint32_t candidate : {combined, rep_a, rep_b})
        if (auto idx = checked_index(candidate)) return idx;
    return std::nullopt;
}

} // namespace

void MarkerConfig::validate() const {
    if (cell_size < 2) raise(ErrorKind::InvalidArg, "marker cell_size must be >= 2");
}

uint8_t crc8(std::span<const uint8_t> bytes) {
    if (bytes.empty()) raise(ErrorKind::InvalidArg, "crc8 input must be non-empty");
    uint8_t rem = 0x00;
    for (uint8_t b : bytes) rem = kCrcTable[uint8_t(rem ^ b)];
    return rem;
}

uint64_t encode_payload(uint32_t frame_index) {
    if (frame_index > kMaxFrameIndex)
        raise(ErrorKind::InvalidArg,
              "frame index " + std::to_string(frame_index) + " exceeds 24 bits");
    const auto bytes = index_bytes(frame_index);
    const uint32_t word = (frame_index << 8) | crc8(bytes);
    return (uint64_t(word) << 32) | word;
}

void render_markers(media::LumaPlane& luma, uint32_t frame_index, const MarkerConfig& config) {
    config.validate();
    std::string why;
    auto pos = anchors(luma.width, luma.height, config, &why);
    if (!pos) raise(ErrorKind::Format, why);

    const uint64_t bits = encode_payload(frame_index);
    const uint32_t cs = config.cell_size;
    for (const Anchor& a : *pos) {
        for (uint32_t row = 0; row < kFootprintCells; ++row)
            for (uint32_t col = 0; col < kFootprintCells; ++col) {
                const bool outer = row == 0 || col == 0 || row == kFootprintCells - 1 ||
                                   col == kFootprintCells - 1;
                const bool sync = !outer && (row == 1 || col == 1 || row == kFootprintCells - 2 ||
                                             col == kFootprintCells - 2);
                uint8_t value;
                if (outer) {
                    value = kWhiteLevel;
                } else if (sync) {
                    value = kBlackLevel;
                } else {
                    const uint32_t k = (row - 2) * kDataCells + (col - 2);
                    value = ((bits >> (63 - k)) & 1) ? kBlackLevel : kWhiteLevel;
                }
                for (uint32_t y = a.y0 + row * cs; y < a.y0 + (row + 1) * cs; ++y)
                    for (uint32_t x = a.x0 + col * cs; x < a.x0 + (col + 1) * cs; ++x)
                        luma.at(x, y) = value;
            }
    }
}

std::optional<DecodeResult> decode_frame_index(const media::LumaPlane& luma,
                                               const MarkerConfig& config) {
    config.validate();
    auto pos = anchors(luma.width, luma.height, config, nullptr);
    if (!pos) return std::nullopt;

    const auto top_left = decode_one(luma, (*pos)[0], config);
    const auto bottom_right = decode_one(luma, (*pos)[1], config);
    if (top_left && bottom_right) {
        if (*top_left != *bottom_right) return std::nullopt; // conflicting markers
        return DecodeResult{*top_left, Confidence::Both};
    }
    if (top_left) return DecodeResult{*top_left, Confidence::Single};
    if (bottom_right) return DecodeResult{*bottom_right, Confidence::Single};
    return std::nullopt;
}

} // namespace vcm::marker
