#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "alignment.hpp"
#include "error.hpp"
#include "image_ops.hpp"
#include "testutil.hpp"

using namespace vcm;
using media::Frame420;
using media::LumaPlane;

namespace {

std::vector<LumaPlane> stamped_sequence(const std::vector<uint32_t>& indices, uint32_t w = 240,
                                        uint32_t h = 240) {
    std::vector<LumaPlane> frames;
    for (size_t i = 0; i < indices.size(); ++i) {
        LumaPlane f = testutil::textured_plane(w, h, 0.2 * double(indices[i]));
        marker::render_markers(f, indices[i], {});
        frames.push_back(std::move(f));
    }
    return frames;
}

align::AlignmentVector raw_from(const std::vector<int64_t>& v) {
    align::AlignmentVector out;
    for (int64_t x : v) {
        if (x < 0) out.entries.push_back({std::nullopt, align::Confidence::Both});
        else out.entries.push_back({uint32_t(x), align::Confidence::Both});
    }
    return out;
}

std::vector<uint32_t> indices_of(const align::AlignmentVector& v) { return v.indices(); }

} // namespace

TEST_CASE("scan recovers the identity on a clean stamped sequence") {
    std::vector<uint32_t> truth(12);
    for (uint32_t i = 0; i < truth.size(); ++i) truth[i] = i;
    const auto frames = stamped_sequence(truth);
    const auto scanned = align::scan_alignment(frames, {}, 240, 240);
    REQUIRE(scanned.complete());
    CHECK(indices_of(scanned) == truth);
    for (const auto& e : scanned.entries) CHECK(e.confidence == align::Confidence::Both);
}

TEST_CASE("duplicated frames scan as consecutive repetitions") {
    const std::vector<uint32_t> truth{5, 6, 7, 7, 7, 8};
    const auto frames = stamped_sequence(truth);
    const auto scanned = align::scan_alignment(frames, {}, 240, 240);
    CHECK(indices_of(scanned) == truth);
}

TEST_CASE("rescaled frames decode after bilinear resize to stamp dims") {
    const std::vector<uint32_t> truth{0, 1, 2, 3};
    auto frames = stamped_sequence(truth);
    for (auto& f : frames) f = img::resize_bilinear(f, 120, 120); // simulated 0.5x recording
    const auto scanned = align::scan_alignment(frames, {}, 240, 240);
    CHECK(indices_of(scanned) == truth);
}

TEST_CASE("a blanked frame scans as missing, others intact") {
    const std::vector<uint32_t> truth{0, 1, 2, 3};
    auto frames = stamped_sequence(truth);
    frames[2] = LumaPlane(240, 240, 128); // flat gray
    const auto scanned = align::scan_alignment(frames, {}, 240, 240);
    CHECK_FALSE(scanned.entries[2].ref_index.has_value());
    CHECK(scanned.entries[0].ref_index == 0);
    CHECK(scanned.entries[1].ref_index == 1);
    CHECK(scanned.entries[3].ref_index == 3);
    CHECK(scanned.missing_count() == 1);
}

TEST_CASE("fill_gaps carries the previous index forward") {
    const auto filled = align::fill_gaps(raw_from({5, -1, -1, 8}));
    CHECK(indices_of(filled) == std::vector<uint32_t>{5, 5, 5, 8});
    CHECK(filled.entries[1].confidence == align::Confidence::Filled);
    CHECK(filled.entries[2].confidence == align::Confidence::Filled);
    CHECK(filled.entries[0].confidence == align::Confidence::Both);
}

TEST_CASE("leading gaps take the first decoded index") {
    const auto filled = align::fill_gaps(raw_from({-1, 3}));
    CHECK(indices_of(filled) == std::vector<uint32_t>{3, 3});
    CHECK(filled.entries[0].confidence == align::Confidence::Filled);
}

TEST_CASE("fill_gaps on all-missing input is an error") {
    CHECK_THROWS_AS(align::fill_gaps(raw_from({-1, -1, -1})), Error);
    CHECK_THROWS_AS(align::fill_gaps(align::AlignmentVector{}), Error);
}

TEST_CASE("fill_gaps is idempotent") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int64_t> v(1 + rng() % 40);
        bool any = false;
        for (auto& x : v) {
            if (rng() % 3 == 0) x = -1;
            else {
                x = int64_t(rng() % 1000);
                any = true;
            }
        }
        if (!any) v[0] = 7;
        const auto once = align::fill_gaps(raw_from(v));
        const auto twice = align::fill_gaps(once);
        CHECK(indices_of(once) == indices_of(twice));
        for (size_t i = 0; i < once.entries.size(); ++i)
            CHECK(once.entries[i].confidence == twice.entries[i].confidence);
    }
}

TEST_CASE("assemble_reference copies source frames in r order, bit-exact") {
    std::mt19937_64 rng(9);
    std::vector<Frame420> source;
    for (int i = 0; i < 2; ++i) source.push_back(testutil::random_frame(rng, 32, 24));

    const auto out = align::assemble_reference(source, align::from_indices({0, 0, 1}));
    REQUIRE(out.size() == 3);
    CHECK(out[0] == source[0]);
    CHECK(out[1] == source[0]);
    CHECK(out[2] == source[1]);

    // identity r reproduces the source prefix
    const auto identity = align::assemble_reference(source, align::from_indices({0, 1}));
    CHECK(identity == source);
}

TEST_CASE("assemble_reference rejects out-of-range indices") {
    std::mt19937_64 rng(10);
    std::vector<Frame420> source;
    for (int i = 0; i < 3; ++i) source.push_back(testutil::random_frame(rng, 16, 16));
    CHECK_THROWS_AS(align::assemble_reference(source, align::from_indices({0, 5})), Error);
}

TEST_CASE("file-backed assemble matches the in-memory one") {
    testutil::TempDir tmp("assemble");
    std::mt19937_64 rng(21);
    const media::VideoHeader header{48, 32, 30, 1};
    std::vector<Frame420> source;
    {
        media::Y4mWriter writer(tmp.file("src.y4m"), header);
        for (int i = 0; i < 4; ++i) {
            source.push_back(testutil::random_frame(rng, 48, 32));
            writer.write_frame(source.back());
        }
    }
    const auto r = align::from_indices({3, 0, 0, 2, 1});
    {
        media::Y4mIndexedReader indexed(tmp.file("src.y4m"));
        media::Y4mWriter writer(tmp.file("aligned.y4m"), header);
        align::assemble_reference(indexed, r, writer);
    }
    media::Y4mReader reader(tmp.file("aligned.y4m"));
    const auto frames = media::read_all_frames(reader);
    CHECK(frames == align::assemble_reference(source, r));
}

TEST_CASE("validate_alignment counts freezes, skips and backward jumps") {
    const auto rep = align::validate_alignment(align::from_indices({0, 1, 1, 3}));
    CHECK(rep.freezes == 1);
    CHECK(rep.skipped_indices == 1);
    CHECK(rep.backward_jumps == 0);

    const auto identity = align::validate_alignment(align::from_indices({0, 1, 2, 3}));
    CHECK(identity.freezes == 0);
    CHECK(identity.skipped_indices == 0);
    CHECK(identity.backward_jumps == 0);

    const auto backward = align::validate_alignment(align::from_indices({4, 2}));
    CHECK(backward.backward_jumps == 1);
}

TEST_CASE("alignment csv roundtrip") {
    testutil::TempDir tmp("aligncsv");
    align::AlignmentVector v = align::from_indices({0, 1, 1, 4});
    v.entries[1].confidence = align::Confidence::Single;
    v.entries[2].confidence = align::Confidence::Filled;
    align::write_alignment_csv(v, tmp.file("a.csv"));
    const auto back = align::read_alignment_csv(tmp.file("a.csv"));
    REQUIRE(back.size() == 4);
    CHECK(indices_of(back) == indices_of(v));
    for (size_t i = 0; i < v.entries.size(); ++i)
        CHECK(back.entries[i].confidence == v.entries[i].confidence);
    CHECK_THROWS_AS(align::read_alignment_csv(tmp.file("missing.csv")), Error);
}
