#ifndef VCM_MEDIA_IO_HPP
#define VCM_MEDIA_IO_HPP

#include <cstdint>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace vcm::media {

enum class Colorspace { Yuv420_8bit };

struct VideoHeader {
    uint32_t width = 0;
    uint32_t height = 0;
    uint32_t fps_num = 30;
    uint32_t fps_den = 1;
    Colorspace colorspace = Colorspace::Yuv420_8bit;

    // Throws Format if dims are non-positive or odd, or the rate is invalid.
    void validate() const;

    size_t luma_size() const { return size_t(width) * height; }
    size_t chroma_size() const { return size_t(width / 2) * (height / 2); }

    bool operator==(const VideoHeader&) const = default;
};

// 8-bit luminance plane, row-major.
struct LumaPlane {
    uint32_t width = 0;
    uint32_t height = 0;
    std::vector<uint8_t> samples;

    LumaPlane() = default;
    LumaPlane(uint32_t w, uint32_t h, uint8_t fill = 0)
        : width(w), height(h), samples(size_t(w) * h, fill) {}

    uint8_t at(uint32_t x, uint32_t y) const { return samples[size_t(y) * width + x]; }
    uint8_t& at(uint32_t x, uint32_t y) { return samples[size_t(y) * width + x]; }

    bool operator==(const LumaPlane&) const = default;
};

// One 4:2:0 frame. Chroma is carried for bit-exact passthrough; all analysis
// happens on the luma plane.
struct Frame420 {
    LumaPlane y;
    std::vector<uint8_t> u;
    std::vector<uint8_t> v;

    Frame420() = default;
    Frame420(uint32_t w, uint32_t h, uint8_t luma_fill = 0, uint8_t chroma_fill = 128)
        : y(w, h, luma_fill),
          u(size_t(w / 2) * (h / 2), chroma_fill),
          v(size_t(w / 2) * (h / 2), chroma_fill) {}

    uint32_t width() const { return y.width; }
    uint32_t height() const { return y.height; }

    bool operator==(const Frame420&) const = default;
};

class VideoReader {
public:
    virtual ~VideoReader() = default;
    virtual const VideoHeader& header() const = 0;
    // Returns false on a clean end of stream; throws Format on truncation.
    virtual bool next_frame(Frame420& out) = 0;
};

// Parses a YUV4MPEG2 signature line and leaves the stream at the first
// FRAME marker.
VideoHeader parse_y4m_header(std::istream& in);

class Y4mReader final : public VideoReader {
public:
    explicit Y4mReader(const std::string& path);
    explicit Y4mReader(std::istream& in);

    const VideoHeader& header() const override { return header_; }
    bool next_frame(Frame420& out) override;

private:
    std::ifstream file_;
    std::istream* in_ = nullptr;
    VideoHeader header_;
};

class Y4mWriter {
public:
    Y4mWriter(const std::string& path, const VideoHeader& header);
    Y4mWriter(std::ostream& out, const VideoHeader& header);

    // Throws Format if the frame dims do not match the header.
    void write_frame(const Frame420& frame);
    // Flushes and reports write failures; also run by the destructor.
    void close();
    ~Y4mWriter();

    const VideoHeader& header() const { return header_; }

private:
    std::ofstream file_;
    std::ostream* out_ = nullptr;
    VideoHeader header_;
    bool closed_ = false;
};

// Random access over a Y4M file; indexes frame offsets up front so large
// sources never have to be held in memory.
class Y4mIndexedReader {
public:
    explicit Y4mIndexedReader(const std::string& path);

    const VideoHeader& header() const { return header_; }
    size_t frame_count() const { return offsets_.size(); }
    void read_frame(size_t index, Frame420& out);

private:
    std::ifstream file_;
    VideoHeader header_;
    std::vector<std::streamoff> offsets_; // payload start per frame
};

// Directory of P5 .pgm files (lexicographic order), usable wherever a video
// stream is expected. Chroma reads back neutral, the rate defaults to 30:1.
class PgmSequenceReader final : public VideoReader {
public:
    explicit PgmSequenceReader(const std::string& dir);

    const VideoHeader& header() const override { return header_; }
    bool next_frame(Frame420& out) override;

private:
    std::vector<std::string> paths_;
    size_t next_ = 0;
    VideoHeader header_;
};

// Opens either a .y4m file or a directory of .pgm frames.
std::unique_ptr<VideoReader> open_video(const std::string& path);

// Reads a whole stream into memory. Intended for clip-sized inputs.
std::vector<Frame420> read_all_frames(VideoReader& reader);

// Single-frame P5 dumps.
void write_pgm(const LumaPlane& plane, const std::string& path);
LumaPlane read_pgm(const std::string& path);

} // namespace vcm::media

#endif
