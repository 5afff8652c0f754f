#include "media_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>

#include "error.hpp"

namespace fs = std::filesystem;

namespace vcm::media {

namespace {

constexpr size_t kMaxHeaderLine = 4096;

uint32_t parse_u32(const std::string& text, const char* what) {
    uint32_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        raise(ErrorKind::Format, std::string("invalid ") + what + " value '" + text + "'");
    return value;
}

// Reads bytes up to '\n' (consumed, not returned). Returns false if the
// stream ends before any byte is read.
bool read_line(std::istream& in, std::string& line) {
    line.clear();
    int ch = in.get();
    if (ch == EOF) return false;
    while (ch != EOF && ch != '\n') {
        line.push_back(static_cast<char>(ch));
        if (line.size() > kMaxHeaderLine)
            raise(ErrorKind::Format, "header line exceeds " + std::to_string(kMaxHeaderLine) + " bytes");
        ch = in.get();
    }
    return true;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    size_t pos = 0;
    while (pos < line.size()) {
        size_t next = line.find(' ', pos);
        if (next == std::string::npos) next = line.size();
        if (next > pos) fields.push_back(line.substr(pos, next - pos));
        pos = next + 1;
    }
    return fields;
}

} // namespace

void VideoHeader::validate() const {
    if (width == 0 || height == 0)
        raise(ErrorKind::Format, "non-positive frame dimensions");
    if (width % 2 != 0 || height % 2 != 0)
        raise(ErrorKind::Format, "odd dimensions " + std::to_string(width) + "x" +
                                     std::to_string(height) + " are invalid for 4:2:0");
    if (fps_num == 0 || fps_den == 0)
        raise(ErrorKind::Format, "invalid frame rate " + std::to_string(fps_num) + ":" +
                                     std::to_string(fps_den));
}

VideoHeader parse_y4m_header(std::istream& in) {
    std::string line;
    if (!read_line(in, line))
        raise(ErrorKind::Format, "empty stream, expected YUV4MPEG2 signature");
    auto fields = split_fields(line);
    if (fields.empty() || fields[0] != "YUV4MPEG2")
        raise(ErrorKind::Format, "missing YUV4MPEG2 signature");

    VideoHeader h;
    bool have_w = false, have_h = false, have_f = false;
    for (size_t i = 1; i < fields.size(); ++i) {
        const std::string& f = fields[i];
        const std::string arg = f.substr(1);
        switch (f[0]) {
        case 'W':
            h.width = parse_u32(arg, "width");
            have_w = true;
            break;
        case 'H':
            h.height = parse_u32(arg, "height");
            have_h = true;
            break;
        case 'F': {
            size_t colon = arg.find(':');
            if (colon == std::string::npos)
                raise(ErrorKind::Format, "frame rate tag '" + f + "' is not F<num>:<den>");
            h.fps_num = parse_u32(arg.substr(0, colon), "frame rate numerator");
            h.fps_den = parse_u32(arg.substr(colon + 1), "frame rate denominator");
            have_f = true;
            break;
        }
        case 'C':
            if (arg != "420" && arg != "420jpeg" && arg != "420mpeg2" && arg != "420paldv")
                raise(ErrorKind::Format, "unsupported colorspace C" + arg + " (8-bit 4:2:0 only)");
            break;
        case 'I':
        case 'A':
        case 'X':
            break; // interlace/aspect/extension tags are ignored
        default:
            raise(ErrorKind::Format, "unknown header tag '" + f + "'");
        }
    }
    if (!have_w || !have_h || !have_f)
        raise(ErrorKind::Format, "signature is missing one of the required W/H/F tags");
    h.validate();
    return h;
}

Y4mReader::Y4mReader(const std::string& path) : file_(path, std::ios::binary) {
    if (!file_) raise(ErrorKind::Io, "cannot open '" + path + "' for reading");
    in_ = &file_;
    header_ = parse_y4m_header(*in_);
}

Y4mReader::Y4mReader(std::istream& in) : in_(&in) { header_ = parse_y4m_header(*in_); }

bool Y4mReader::next_frame(Frame420& out) {
    std::string line;
    if (!read_line(*in_, line)) return false; // clean end of stream
    if (line.rfind("FRAME", 0) != 0)
        raise(ErrorKind::Format, "expected FRAME marker, got '" + line.substr(0, 16) + "'");

    const uint32_t w = header_.width, hgt = header_.height;
    if (out.width() != w || out.height() != hgt) out = Frame420(w, hgt);

    auto read_plane = [&](uint8_t* dst, size_t n) {
        in_->read(reinterpret_cast<char*>(dst), std::streamsize(n));
        if (size_t(in_->gcount()) != n)
            raise(ErrorKind::Format, "truncated frame payload");
    };
    read_plane(out.y.samples.data(), header_.luma_size());
    read_plane(out.u.data(), header_.chroma_size());
    read_plane(out.v.data(), header_.chroma_size());
    return true;
}

Y4mWriter::Y4mWriter(const std::string& path, const VideoHeader& header) : header_(header) {
    header_.validate();
    file_.open(path, std::ios::binary);
    if (!file_) raise(ErrorKind::Io, "cannot open '" + path + "' for writing");
    out_ = &file_;
    *out_ << "YUV4MPEG2 W" << header_.width << " H" << header_.height << " F" << header_.fps_num
          << ":" << header_.fps_den << " C420\n";
}

Y4mWriter::Y4mWriter(std::ostream& out, const VideoHeader& header) : out_(&out), header_(header) {
    header_.validate();
    *out_ << "YUV4MPEG2 W" << header_.width << " H" << header_.height << " F" << header_.fps_num
          << ":" << header_.fps_den << " C420\n";
}

void Y4mWriter::write_frame(const Frame420& frame) {
    if (frame.width() != header_.width || frame.height() != header_.height)
        raise(ErrorKind::Format, "frame dims " + std::to_string(frame.width()) + "x" +
                                     std::to_string(frame.height()) + " do not match header " +
                                     std::to_string(header_.width) + "x" +
                                     std::to_string(header_.height));
    if (frame.u.size() != header_.chroma_size() || frame.v.size() != header_.chroma_size())
        raise(ErrorKind::Format, "chroma plane size does not match header");
    *out_ << "FRAME\n";
    out_->write(reinterpret_cast<const char*>(frame.y.samples.data()),
                std::streamsize(header_.luma_size()));
    out_->write(reinterpret_cast<const char*>(frame.u.data()),
                std::streamsize(header_.chroma_size()));
    out_->write(reinterpret_cast<const char*>(frame.v.data()),
                std::streamsize(header_.chroma_size()));
}

void Y4mWriter::close() {
    if (closed_ || out_ == nullptr) return;
    closed_ = true;
    out_->flush();
    if (!*out_) raise(ErrorKind::Io, "write failure while flushing video stream");
    if (file_.is_open()) file_.close();
}

Y4mWriter::~Y4mWriter() {
    try {
        close();
    } catch (...) {
        // destructor must not throw; close() explicitly to observe failures
    }
}

Y4mIndexedReader::Y4mIndexedReader(const std::string& path) : file_(path, std::ios::binary) {
    if (!file_) raise(ErrorKind::Io, "cannot open '" + path + "' for reading");
    header_ = parse_y4m_header(file_);
    const std::streamoff frame_bytes =
        std::streamoff(header_.luma_size() + 2 * header_.chroma_size());
    std::string line;
    while (read_line(file_, line)) {
        if (line.rfind("FRAME", 0) != 0)
            raise(ErrorKind::Format, "expected FRAME marker, got '" + line.substr(0, 16) + "'");
        offsets_.push_back(file_.tellg());
        file_.seekg(frame_bytes, std::ios::cur);
    }
    file_.clear();
    // verify the last payload is complete
    if (!offsets_.empty()) {
        file_.seekg(0, std::ios::end);
        if (file_.tellg() < offsets_.back() + frame_bytes)
            raise(ErrorKind::Format, "truncated frame payload");
    }
}

void Y4mIndexedReader::read_frame(size_t index, Frame420& out) {
    if (index >= offsets_.size())
        raise(ErrorKind::InvalidArg, "frame index " + std::to_string(index) + " out of range (" +
                                         std::to_string(offsets_.size()) + " frames)");
    file_.clear();
    file_.seekg(offsets_[index]);
    if (out.width() != header_.width || out.height() != header_.height)
        out = Frame420(header_.width, header_.height);
    auto read_plane = [&](uint8_t* dst, size_t n) {
        file_.read(reinterpret_cast<char*>(dst), std::streamsize(n));
        if (size_t(file_.gcount()) != n) raise(ErrorKind::Format, "truncated frame payload");
    };
    read_plane(out.y.samples.data(), header_.luma_size());
    read_plane(out.u.data(), header_.chroma_size());
    read_plane(out.v.data(), header_.chroma_size());
}

PgmSequenceReader::PgmSequenceReader(const std::string& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec))
        raise(ErrorKind::Io, "'" + dir + "' is not a directory");
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pgm")
            paths_.push_back(entry.path().string());
    }
    if (paths_.empty()) raise(ErrorKind::Format, "no .pgm frames in '" + dir + "'");
    std::sort(paths_.begin(), paths_.end());
    LumaPlane first = read_pgm(paths_[0]);
    header_.width = first.width;
    header_.height = first.height;
    header_.fps_num = 30;
    header_.fps_den = 1;
    header_.validate();
}

bool PgmSequenceReader::next_frame(Frame420& out) {
    if (next_ >= paths_.size()) return false;
    LumaPlane plane = read_pgm(paths_[next_]);
    if (plane.width != header_.width || plane.height != header_.height)
        raise(ErrorKind::Format, "frame '" + paths_[next_] + "' dims differ from first frame");
    ++next_;
    out = Frame420(header_.width, header_.height);
    out.y = std::move(plane);
    return true;
}

std::unique_ptr<VideoReader> open_video(const std::string& path) {
    std::error_code ec;
    if (fs::is_directory(path, ec)) return std::make_unique<PgmSequenceReader>(path);
    return std::make_unique<Y4mReader>(path);
}

std::vector<Frame420> read_all_frames(VideoReader& reader) {
    std::vector<Frame420> frames;
    Frame420 frame;
    while (reader.next_frame(frame)) frames.push_back(frame);
    return frames;
}

void write_pgm(const LumaPlane& plane, const std::string& path) {
    if (plane.width == 0 || plane.height == 0)
        raise(ErrorKind::Format, "cannot write empty plane");
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::Io, "cannot open '" + path + "' for writing");
    out << "P5\n" << plane.width << " " << plane.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(plane.samples.data()),
              std::streamsize(plane.samples.size()));
    out.flush();
    if (!out) raise(ErrorKind::Io, "write failure on '" + path + "'");
}

namespace {

// Next whitespace-delimited token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
    std::string token;
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (std::isspace(ch)) {
            if (!token.empty()) return token;
        } else {
            token.push_back(static_cast<char>(ch));
        }
        ch = in.get();
    }
    return token;
}

} // namespace

LumaPlane read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::Io, "cannot open '" + path + "' for reading");
    if (pgm_token(in) != "P5") raise(ErrorKind::Format, "'" + path + "' is not a P5 PGM");
    uint32_t w = parse_u32(pgm_token(in), "PGM width");
    uint32_t h = parse_u32(pgm_token(in), "PGM height");
    uint32_t maxval = parse_u32(pgm_token(in), "PGM maxval");
    if (maxval != 255) raise(ErrorKind::Format, "only 8-bit PGM is supported");
    if (w == 0 || h == 0) raise(ErrorKind::Format, "non-positive PGM dimensions");
    LumaPlane plane(w, h);
    in.read(reinterpret_cast<char*>(plane.samples.data()), std::streamsize(plane.samples.size()));
    if (size_t(in.gcount()) != plane.samples.size())
        raise(ErrorKind::Format, "truncated PGM payload in '" + path + "'");
    return plane;
}

} // namespace vcm::media
