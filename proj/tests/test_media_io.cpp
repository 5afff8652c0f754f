#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "error.hpp"
#include "media_io.hpp"
#include "testutil.hpp"

using namespace vcm;
using media::Frame420;
using media::VideoHeader;

TEST_CASE("parse_header reads dims, rate and colorspace") {
    std::istringstream in("YUV4MPEG2 W176 H144 F30:1 C420\n");
    const VideoHeader h = media::parse_y4m_header(in);
    CHECK(h.width == 176);
    CHECK(h.height == 144);
    CHECK(h.fps_num == 30);
    CHECK(h.fps_den == 1);
    CHECK(h.colorspace == media::Colorspace::Yuv420_8bit);
}

TEST_CASE("parse_header defaults to 4:2:0 when the C tag is absent") {
    std::istringstream in("YUV4MPEG2 W1920 H1080 F30:1\n");
    const VideoHeader h = media::parse_y4m_header(in);
    CHECK(h.width == 1920);
    CHECK(h.height == 1080);
    CHECK(h.fps_num == 30);
}

TEST_CASE("parse_header rejects bad input") {
    auto parse = [](const std::string& text) {
        std::istringstream in(text);
        return media::parse_y4m_header(in);
    };
    CHECK_THROWS_AS(parse("YUV4MPEG2 W177 H144 F30:1\n"), Error); // odd width for 4:2:0
    CHECK_THROWS_AS(parse("JUNK W176 H144 F30:1\n"), Error);
    CHECK_THROWS_AS(parse("YUV4MPEG2 W176 H144 F30:1 C444\n"), Error);
    CHECK_THROWS_AS(parse("YUV4MPEG2 W176 H144\n"), Error);    // no rate
    CHECK_THROWS_AS(parse("YUV4MPEG2 W0 H144 F30:1\n"), Error); // zero dim
    CHECK_THROWS_AS(parse("YUV4MPEG2 W176 H144 F30:0\n"), Error);
}

TEST_CASE("write then parse reproduces every sample bit-exactly") {
    std::mt19937_64 rng(7);
    const VideoHeader header{64, 48, 30, 1};
    std::vector<Frame420> frames;
    for (int i = 0; i < 3; ++i) frames.push_back(testutil::random_frame(rng, 64, 48));

    std::stringstream buf;
    {
        media::Y4mWriter writer(buf, header);
        for (const auto& f : frames) writer.write_frame(f);
        writer.close();
    }
    media::Y4mReader reader(buf);
    CHECK(reader.header() == header);
    Frame420 frame;
    for (const auto& expected : frames) {
        REQUIRE(reader.next_frame(frame));
        CHECK(frame == expected);
    }
    CHECK_FALSE(reader.next_frame(frame)); // N+1 reads end-of-stream, not an error
    CHECK_FALSE(reader.next_frame(frame));
}

TEST_CASE("an all-zero frame reads back as zeros") {
    std::stringstream buf;
    const VideoHeader header{16, 16, 25, 1};
    {
        media::Y4mWriter writer(buf, header);
        Frame420 z(16, 16, 0, 0);
        writer.write_frame(z);
    }
    media::Y4mReader reader(buf);
    Frame420 frame;
    REQUIRE(reader.next_frame(frame));
    for (uint8_t v : frame.y.samples) CHECK(v == 0);
}

TEST_CASE("empty sequence roundtrips as a header-only stream") {
    std::stringstream buf;
    { media::Y4mWriter writer(buf, VideoHeader{32, 32, 30, 1}); }
    media::Y4mReader reader(buf);
    Frame420 frame;
    CHECK_FALSE(reader.next_frame(frame));
}

TEST_CASE("truncated payload raises a format error") {
    std::stringstream buf;
    const VideoHeader header{16, 16, 30, 1};
    {
        media::Y4mWriter writer(buf, header);
        writer.write_frame(Frame420(16, 16));
    }
    std::string bytes = buf.str();
    bytes.resize(bytes.size() - 10);
    std::istringstream cut(bytes);
    media::Y4mReader reader(cut);
    Frame420 frame;
    CHECK_THROWS_AS(reader.next_frame(frame), Error);
}

TEST_CASE("writer rejects mismatched frame dims") {
    std::stringstream buf;
    media::Y4mWriter writer(buf, VideoHeader{32, 32, 30, 1});
    CHECK_THROWS_AS(writer.write_frame(Frame420(16, 16)), Error);
}

TEST_CASE("indexed reader gives random access to the same samples") {
    testutil::TempDir tmp("y4m_idx");
    std::mt19937_64 rng(11);
    const VideoHeader header{48, 32, 30, 1};
    std::vector<Frame420> frames;
    {
        media::Y4mWriter writer(tmp.file("clip.y4m"), header);
        for (int i = 0; i < 5; ++i) {
            frames.push_back(testutil::random_frame(rng, 48, 32));
            writer.write_frame(frames.back());
        }
    }
    media::Y4mIndexedReader indexed(tmp.file("clip.y4m"));
    CHECK(indexed.frame_count() == 5);
    Frame420 frame;
    indexed.read_frame(3, frame);
    CHECK(frame == frames[3]);
    indexed.read_frame(0, frame);
    CHECK(frame == frames[0]);
    CHECK_THROWS_AS(indexed.read_frame(5, frame), Error);
}

TEST_CASE("pgm roundtrip and sequence directory fallback") {
    testutil::TempDir tmp("pgm");
    std::mt19937_64 rng(3);
    const auto plane = testutil::random_plane(rng, 20, 14);
    media::write_pgm(plane, tmp.file("frame_000001.pgm"));
    CHECK(media::read_pgm(tmp.file("frame_000001.pgm")) == plane);

    const auto plane0 = testutil::random_plane(rng, 20, 14);
    media::write_pgm(plane0, tmp.file("frame_000000.pgm"));
    auto reader = media::open_video(tmp.dir());
    CHECK(reader->header().width == 20);
    CHECK(reader->header().fps_num == 30);
    Frame420 frame;
    REQUIRE(reader->next_frame(frame)); // lexicographic: frame_000000 first
    CHECK(frame.y == plane0);
    REQUIRE(reader->next_frame(frame));
    CHECK(frame.y == plane);
    CHECK_FALSE(reader->next_frame(frame));
}

TEST_CASE("missing file raises an io error") {
    CHECK_THROWS_AS(media::Y4mReader("/nonexistent/clip.y4m"), Error);
    try {
        media::Y4mReader reader("/nonexistent/clip.y4m");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Io);
    }
}
