#ifndef VCM_DATASET_HPP
#define VCM_DATASET_HPP

#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "media_io.hpp"

namespace vcm::dataset {

struct ClipRecord {
    std::string clip_id;
    std::string degraded_path;
    std::string reference_path;
    std::string source_id;
    double mos = 0; // in [1,5]
    uint32_t votes = 0;
    std::string profile_id;
    std::string script_json;           // inline script for synthetic clips, "" otherwise
    std::optional<uint64_t> seed;      // generator seed for synthetic clips

    void validate() const;
};

// JSON-lines manifest, one record per line. Duplicate clip ids are rejected.
std::vector<ClipRecord> load_manifest(const std::string& path);
void append_manifest(const std::string& path, const ClipRecord& record);

struct Split {
    std::vector<ClipRecord> train;
    std::vector<ClipRecord> validation;
};

// Partition with no source overlap; errors when either side ends up empty or
// a requested source id is absent.
Split split_by_source(std::span<const ClipRecord> records,
                      const std::set<std::string>& validation_sources);

// Exactly round(duration_s * fps) frames starting at start_frame, bit-exact.
std::vector<media::Frame420> extract_clip(const std::vector<media::Frame420>& video,
                                          size_t start_frame, double duration_s, double fps);

struct DegradationEvent {
    enum class Type { Freeze, Skip, RateChange };
    Type type = Type::Freeze;
    uint32_t frame = 0;  // trigger reference index
    uint32_t count = 0;  // freeze: extra repeats; skip: omitted indices
    double ratio = 1.0;  // rate_change: reference advance per output frame

    // reference indices this event occupies (for overlap checks)
    uint32_t last_touched() const;
};

struct DegradationScript {
    std::vector<DegradationEvent> events; // ordered by trigger frame
    double noise_sigma = 0.0;             // additive Gaussian luma noise

    void validate(size_t source_frames) const;
};

// Script JSON:
//   {"events":[{"type":"freeze","frame":10,"duration":5},
//              {"type":"skip","frame":20,"gap":3},
//              {"type":"rate_change","frame":30,"ratio":0.5}],
//    "noise_sigma":2.0}
DegradationScript parse_script_json(const std::string& text);
std::string script_to_json(const DegradationScript& script);
DegradationScript load_script(const std::string& path);

// Ground-truth r*: replays the whole source through the event list. A freeze
// repeats the trigger index `count` extra times, a skip omits the next
// `count` indices, a rate change advances the read cursor by `ratio` per
// output frame from its trigger on.
std::vector<uint32_t> replay_script(const DegradationScript& script, size_t source_frames);

struct DegradedClip {
    std::vector<media::Frame420> frames;
    std::vector<uint32_t> ref_indices; // r*
};

// Source frames ordered by r*, plus seeded Gaussian luma noise when
// noise_sigma > 0. Chroma passes through untouched.
DegradedClip apply_degradation(const std::vector<media::Frame420>& source,
                               const DegradationScript& script, uint64_t seed);

// Reproducible oracle label:
//   clamp(5 - 6*freeze_fraction - 2*skip_density - 0.08*sigma, 1, 5)
// with freeze_fraction = |{i : f_i > 0}| / N and
// skip_density = |{i : s_i > 1}| / N.
double synthetic_mos(const std::vector<uint32_t>& ref_indices, double noise_sigma);

// Default generator noise; markers stay comfortably decodable at this level.
inline constexpr double kDefaultNoiseSigma = 2.0;

// Deterministic desk-scale content: drifting gratings, a moving blob and a
// per-source static texture, all derived from the source id.
std::vector<media::Frame420> make_synthetic_source(const std::string& source_id, size_t frames,
                                                   uint32_t width, uint32_t height);

// Random mixed-event script for corpus generation; always valid for a source
// of the given length.
DegradationScript random_script(std::mt19937_64& rng, size_t source_frames, double noise_sigma);

} // namespace vcm::dataset

#endif
