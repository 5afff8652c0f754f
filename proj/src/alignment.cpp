#include "alignment.hpp"

#include <charconv>
#include <fstream>

#include "error.hpp"
#include "image_ops.hpp"

namespace vcm::align {

std::string to_string(Confidence c) {
    switch (c) {
    case Confidence::Both: return "both";
    case Confidence::Single: return "single";
    case Confidence::Filled: return "filled";
    }
    return "?";
}

bool AlignmentVector::complete() const {
    for (const Entry& e : entries)
        if (!e.ref_index) return false;
    return !entries.empty();
}

size_t AlignmentVector::missing_count() const {
    size_t n = 0;
    for (const Entry& e : entries)
        if (!e.ref_index) ++n;
    return n;
}

std::vector<uint32_t> AlignmentVector::indices() const {
    std::vector<uint32_t> out;
    out.reserve(entries.size());
    for (const Entry& e : entries) {
        if (!e.ref_index) raise(ErrorKind::Format, "alignment vector has missing entries");
        out.push_back(*e.ref_index);
    }
    return out;
}

AlignmentVector from_indices(const std::vector<uint32_t>& indices, Confidence confidence) {
    AlignmentVector v;
    v.entries.reserve(indices.size());
    for (uint32_t r : indices) v.entries.push_back(Entry{r, confidence});
    return v;
}

namespace {

Entry decode_entry(const media::LumaPlane& luma, const marker::MarkerConfig& config,
                   uint32_t stamp_w, uint32_t stamp_h) {
    const media::LumaPlane* plane = &luma;
    media::LumaPlane rescaled;
    if (luma.width != stamp_w || luma.height != stamp_h) {
        rescaled = img::resize_bilinear(luma, stamp_w, stamp_h);
        plane = &rescaled;
    }
    if (auto decoded = marker::decode_frame_index(*plane, config)) {
        return Entry{decoded->frame_index, decoded->confidence == marker::Confidence::Both
                                               ? Confidence::Both
                                               : Confidence::Single};
    }
    return Entry{std::nullopt, Confidence::Both};
}

} // namespace

AlignmentVector scan_alignment(media::VideoReader& degraded, const marker::MarkerConfig& config,
                               uint32_t stamp_width, uint32_t stamp_height) {
    AlignmentVector v;
    media::Frame420 frame;
    while (degraded.next_frame(frame))
        v.entries.push_back(decode_entry(frame.y, config, stamp_width, stamp_height));
    if (v.entries.empty()) raise(ErrorKind::Format, "degraded video has no frames");
    return v;
}

AlignmentVector scan_alignment(const std::vector<media::LumaPlane>& degraded,
                               const marker::MarkerConfig& config, uint32_t stamp_width,
                               uint32_t stamp_height) {
    if (degraded.empty()) raise(ErrorKind::Format, "degraded video has no frames");
    AlignmentVector v;
    v.entries.reserve(degraded.size());
    for (const media::LumaPlane& luma : degraded)
        v.entries.push_back(decode_entry(luma, config, stamp_width, stamp_height));
    return v;
}

AlignmentVector fill_gaps(const AlignmentVector& raw) {
    if (raw.entries.empty()) raise(ErrorKind::Format, "alignment vector is empty");

    std::optional<uint32_t> first_decoded;
    for (const Entry& e : raw.entries) {
        if (e.ref_index) {
            first_decoded = e.ref_index;
            break;
        }
    }
    if (!first_decoded) raise(ErrorKind::Format, "no frame index could be decoded");

    AlignmentVector out = raw;
    uint32_t carry = *first_decoded; // leading gaps take the first decoded index
    for (Entry& e : out.entries) {
        if (e.ref_index) {
            carry = *e.ref_index;
        } else {
            e.ref_index = carry;
            e.confidence = Confidence::Filled;
        }
    }
    return out;
}

std::vector<media::Frame420> assemble_reference(const std::vector<media::Frame420>& source,
                                                const AlignmentVector& filled) {
    const auto r = filled.indices();
    std::vector<media::Frame420> out;
    out.reserve(r.size());
    for (uint32_t idx : r) {
        if (idx >= source.size())
            raise(ErrorKind::Format, "reference index " + std::to_string(idx) +
                                         " out of source range (" +
                                         std::to_string(source.size()) + " frames)");
        out.push_back(source[idx]);
    }
    return out;
}

void assemble_reference(media::Y4mIndexedReader& source, const AlignmentVector& filled,
                        media::Y4mWriter& sink) {
    const auto r = filled.indices();
    media::Frame420 frame;
    for (uint32_t idx : r) {
        if (idx >= source.frame_count())
            raise(ErrorKind::Format, "reference index " + std::to_string(idx) +
                                         " out of source range (" +
                                         std::to_string(source.frame_count()) + " frames)");
        source.read_frame(idx, frame);
        sink.write_frame(frame);
    }
}

ValidationReport validate_alignment(const AlignmentVector& filled) {
    const auto r = filled.indices();
    ValidationReport rep;
    rep.frames = r.size();
    for (size_t i = 1; i < r.size(); ++i) {
        if (r[i] == r[i - 1]) ++rep.freezes;
        if (r[i] < r[i - 1]) ++rep.backward_jumps;
        if (r[i] > r[i - 1] + 1) rep.skipped_indices += r[i] - r[i - 1] - 1;
    }
    for (const Entry& e : filled.entries)
        if (e.confidence == Confidence::Filled) ++rep.filled;
    rep.fill_ratio = double(rep.filled) / double(rep.frames);
    return rep;
}

void write_alignment_csv(const AlignmentVector& filled, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::Io, "cannot open '" + path + "' for writing");
    out << "frame,ref_index,confidence\n";
    for (size_t i = 0; i < filled.entries.size(); ++i) {
        const Entry& e = filled.entries[i];
        if (!e.ref_index) raise(ErrorKind::Format, "alignment vector has missing entries");
        out << i << "," << *e.ref_index << "," << to_string(e.confidence) << "\n";
    }
    out.flush();
    if (!out) raise(ErrorKind::Io, "write failure on '" + path + "'");
}

namespace {

uint64_t parse_u64_field(const std::string& s, const char* what, size_t line_no) {
    uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        raise(ErrorKind::Format, std::string("bad ") + what + " '" + s + "' at line " +
                                     std::to_string(line_no));
    return v;
}

} // namespace

AlignmentVector read_alignment_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::Io, "cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in, line) || (line != "frame,ref_index,confidence" &&
                                    line != "frame,ref_index,confidence\r"))
        raise(ErrorKind::Format, "'" + path + "' is not an alignment CSV");

    AlignmentVector v;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const size_t c1 = line.find(',');
        const size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos)
            raise(ErrorKind::Format, "malformed row at line " + std::to_string(line_no));
        const uint64_t frame = parse_u64_field(line.substr(0, c1), "frame", line_no);
        const uint64_t ref = parse_u64_field(line.substr(c1 + 1, c2 - c1 - 1), "ref_index", line_no);
        const std::string conf = line.substr(c2 + 1);
        if (frame != v.entries.size())
            raise(ErrorKind::Format, "frame column must be contiguous from 0, got " +
                                         std::to_string(frame) + " at line " +
                                         std::to_string(line_no));
        Confidence c;
        if (conf == "both") c = Confidence::Both;
        else if (conf == "single") c = Confidence::Single;
        else if (conf == "filled") c = Confidence::Filled;
        else raise(ErrorKind::Format, "unknown confidence '" + conf + "' at line " +
                                          std::to_string(line_no));
        v.entries.push_back(Entry{uint32_t(ref), c});
    }
    if (v.entries.empty()) raise(ErrorKind::Format, "'" + path + "' has no rows");
    return v;
}

} // namespace vcm::align
