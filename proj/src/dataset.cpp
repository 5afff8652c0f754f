#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "error.hpp"
#include "features.hpp"
#include "util.hpp"

namespace vcm::dataset {

using nlohmann::json;

void ClipRecord::validate() const {
    if (clip_id.empty()) raise(ErrorKind::Format, "clip_id must be non-empty");
    if (clip_id.find(',') != std::string::npos || clip_id.find('\n') != std::string::npos)
        raise(ErrorKind::Format, "clip_id '" + clip_id + "' contains separator characters");
    if (!(mos >= 1.0 && mos <= 5.0))
        raise(ErrorKind::Format,
              "clip '" + clip_id + "': mos " + std::to_string(mos) + " outside [1,5]");
    if (source_id.empty()) raise(ErrorKind::Format, "clip '" + clip_id + "': empty source_id");
    if (degraded_path.empty())
        raise(ErrorKind::Format, "clip '" + clip_id + "': empty degraded_path");
}

namespace {

ClipRecord record_from_json(const json& j, const std::string& context) {
    if (!j.is_object()) raise(ErrorKind::Format, context + ": record is not a JSON object");
    ClipRecord r;
    try {
        r.clip_id = j.at("clip_id").get<std::string>();
        r.degraded_path = j.at("degraded_path").get<std::string>();
        r.reference_path = j.value("reference_path", std::string{});
        r.source_id = j.at("source_id").get<std::string>();
        r.mos = j.at("mos").get<double>();
        if (j.contains("votes")) {
            if (!j["votes"].is_number_unsigned())
                raise(ErrorKind::Format, context + ": votes must be a non-negative integer");
            r.votes = j["votes"].get<uint32_t>();
        }
        r.profile_id = j.value("profile_id", std::string{});
        if (j.contains("script")) r.script_json = j["script"].dump();
        if (j.contains("seed")) r.seed = j["seed"].get<uint64_t>();
    } catch (const json::exception& e) {
        raise(ErrorKind::Format, context + ": " + e.what());
    }
    r.validate();
    return r;
}

json record_to_json(const ClipRecord& r) {
    json j{{"clip_id", r.clip_id},
           {"degraded_path", r.degraded_path},
           {"reference_path", r.reference_path},
           {"source_id", r.source_id},
           {"mos", r.mos},
           {"votes", r.votes},
           {"profile_id", r.profile_id}};
    if (!r.script_json.empty()) j["script"] = json::parse(r.script_json);
    if (r.seed) j["seed"] = *r.seed;
    return j;
}

} // namespace

std::vector<ClipRecord> load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::Io, "cannot open '" + path + "' for reading");
    std::vector<ClipRecord> records;
    std::unordered_set<std::string> seen;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string trimmed = util::trim(line);
        if (trimmed.empty()) continue;
        const std::string context = path + ":" + std::to_string(line_no);
        json j = json::parse(trimmed, nullptr, false);
        if (j.is_discarded()) raise(ErrorKind::Format, context + ": invalid JSON");
        ClipRecord r = record_from_json(j, context);
        if (!seen.insert(r.clip_id).second)
            raise(ErrorKind::Format, context + ": duplicate clip_id '" + r.clip_id + "'");
        records.push_back(std::move(r));
    }
    if (records.empty()) raise(ErrorKind::Format, "'" + path + "' contains no records");
    return records;
}

void append_manifest(const std::string& path, const ClipRecord& record) {
    record.validate();
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) raise(ErrorKind::Io, "cannot open '" + path + "' for appending");
    out << record_to_json(record).dump() << "\n";
    out.flush();
    if (!out) raise(ErrorKind::Io, "write failure on '" + path + "'");
}

Split split_by_source(std::span<const ClipRecord> records,
                      const std::set<std::string>& validation_sources) {
    if (validation_sources.empty())
        raise(ErrorKind::InvalidArg, "no validation sources given (validation would be empty)");
    std::set<std::string> present;
    for (const ClipRecord& r : records) present.insert(r.source_id);
    for (const std::string& s : validation_sources)
        if (!present.count(s))
            raise(ErrorKind::InvalidArg, "validation source '" + s + "' not present in manifest");

    Split split;
    for (const ClipRecord& r : records) {
        if (validation_sources.count(r.source_id)) split.validation.push_back(r);
        else split.train.push_back(r);
    }
    if (split.train.empty())
        raise(ErrorKind::InvalidArg, "split leaves the training set empty");
    if (split.validation.empty())
        raise(ErrorKind::InvalidArg, "split leaves the validation set empty");
    return split;
}

std::vector<media::Frame420> extract_clip(const std::vector<media::Frame420>& video,
                                          size_t start_frame, double duration_s, double fps) {
    if (!(duration_s > 0) || !(fps > 0))
        raise(ErrorKind::InvalidArg, "duration and fps must be positive");
    const size_t n = size_t(std::llround(duration_s * fps));
    if (n == 0) raise(ErrorKind::InvalidArg, "clip would be empty");
    if (start_frame + n > video.size())
        raise(ErrorKind::InvalidArg, "clip [" + std::to_string(start_frame) + ", " +
                                         std::to_string(start_frame + n) + ") exceeds video of " +
                                         std::to_string(video.size()) + " frames");
    return {video.begin() + std::ptrdiff_t(start_frame),
            video.begin() + std::ptrdiff_t(start_frame + n)};
}

uint32_t DegradationEvent::last_touched() const {
    return type == Type::Skip ? frame + count : frame;
}

void DegradationScript::validate(size_t source_frames) const {
    if (source_frames == 0) raise(ErrorKind::InvalidArg, "source has no frames");
    if (!(noise_sigma >= 0)) raise(ErrorKind::Format, "noise_sigma must be >= 0");
    uint32_t prev_end = 0;
    bool first = true;
    for (const DegradationEvent& e : events) {
        if (e.frame >= source_frames)
            raise(ErrorKind::Format, "event trigger frame " + std::to_string(e.frame) +
                                         " outside source of " + std::to_string(source_frames) +
                                         " frames");
        switch (e.type) {
        case DegradationEvent::Type::Freeze:
            if (e.count < 1) raise(ErrorKind::Format, "freeze duration must be >= 1");
            break;
        case DegradationEvent::Type::Skip:
            if (e.count < 1) raise(ErrorKind::Format, "skip gap must be >= 1");
            if (e.frame + e.count >= source_frames)
                raise(ErrorKind::Format, "skip at frame " + std::to_string(e.frame) +
                                             " omits indices beyond the source");
            break;
        case DegradationEvent::Type::RateChange:
            if (!(e.ratio > 0) || e.ratio > 8.0)
                raise(ErrorKind::Format, "rate_change ratio must be in (0, 8]");
            break;
        }
        if (!first && e.frame <= prev_end)
            raise(ErrorKind::Format, "events overlap near frame " + std::to_string(e.frame));
        prev_end = e.last_touched();
        first = false;
    }
}

DegradationScript parse_script_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) raise(ErrorKind::Format, "degradation script is not valid JSON");
    if (!j.is_object()) raise(ErrorKind::Format, "degradation script must be a JSON object");
    DegradationScript s;
    s.noise_sigma = j.value("noise_sigma", 0.0);
    try {
        for (const json& ev : j.value("events", json::array())) {
            DegradationEvent e;
            const std::string type = ev.at("type").get<std::string>();
            e.frame = ev.at("frame").get<uint32_t>();
            if (type == "freeze") {
                e.type = DegradationEvent::Type::Freeze;
                e.count = ev.at("duration").get<uint32_t>();
            } else if (type == "skip") {
                e.type = DegradationEvent::Type::Skip;
                e.count = ev.at("gap").get<uint32_t>();
            } else if (type == "rate_change") {
                e.type = DegradationEvent::Type::RateChange;
                e.ratio = ev.at("ratio").get<double>();
            } else {
                raise(ErrorKind::Format, "unknown event type '" + type + "'");
            }
            s.events.push_back(e);
        }
    } catch (const json::exception& e) {
        raise(ErrorKind::Format, std::string("degradation script: ") + e.what());
    }
    std::sort(s.events.begin(), s.events.end(),
              [](const DegradationEvent& a, const DegradationEvent& b) { return a.frame < b.frame; });
    return s;
}

std::string script_to_json(const DegradationScript& script) {
    json events = json::array();
    for (const DegradationEvent& e : script.events) {
        switch (e.type) {
        case DegradationEvent::Type::Freeze:
            events.push_back({{"type", "freeze"}, {"frame", e.frame}, {"duration", e.count}});
            break;
        case DegradationEvent::Type::Skip:
            events.push_back({{"type", "skip"}, {"frame", e.frame}, {"gap", e.count}});
            break;
        case DegradationEvent::Type::RateChange:
            events.push_back({{"type", "rate_change"}, {"frame", e.frame}, {"ratio", e.ratio}});
            break;
        }
    }
    return json{{"events", events}, {"noise_sigma", script.noise_sigma}}.dump();
}

DegradationScript load_script(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::Io, "cannot open '" + path + "' for reading");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_script_json(text);
}

std::vector<uint32_t> replay_script(const DegradationScript& script, size_t source_frames) {
    script.validate(source_frames);
    std::vector<uint32_t> r;
    std::vector<bool> applied(script.events.size(), false);
    double pos = 0.0;
    double ratio = 1.0;
    // tiny ratios repeat frames; bound the output length defensively
    const size_t max_out = source_frames * 16 + 4096;
    while (r.size() < max_out) {
        const size_t idx = size_t(pos);
        if (idx >= source_frames) break;
        for (size_t i = 0; i < script.events.size(); ++i) {
            const DegradationEvent& e = script.events[i];
            if (!applied[i] && e.type == DegradationEvent::Type::RateChange && idx >= e.frame) {
                ratio = e.ratio;
                applied[i] = true;
            }
        }
        r.push_back(uint32_t(idx));
        bool jumped = false;
        for (size_t i = 0; i < script.events.size(); ++i) {
            const DegradationEvent& e = script.events[i];
            if (applied[i] || idx < e.frame) continue;
            if (e.type == DegradationEvent::Type::Freeze) {
                for (uint32_t k = 0; k < e.count && r.size() < max_out; ++k)
                    r.push_back(uint32_t(idx));
                applied[i] = true;
            } else if (e.type == DegradationEvent::Type::Skip) {
                pos = double(idx + 1 + e.count);
                applied[i] = true;
                jumped = true;
                break;
            }
        }
        if (!jumped) pos += ratio;
    }
    return r;
}

namespace {

// Box-Muller on explicit 53-bit uniforms; platform-stable unlike
// std::normal_distribution.
class GaussianSampler {
public:
    explicit GaussianSampler(uint64_t seed) : rng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = unit();
        if (u1 <= 0) u1 = 0x1.0p-53;
        const double u2 = unit();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    double unit() { return double(rng_() >> 11) * 0x1.0p-53; }
    std::mt19937_64 rng_;
    double spare_ = 0;
    bool have_spare_ = false;
};

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace

DegradedClip apply_degradation(const std::vector<media::Frame420>& source,
                               const DegradationScript& script, uint64_t seed) {
    DegradedClip out;
    out.ref_indices = replay_script(script, source.size());
    out.frames.reserve(out.ref_indices.size());
    GaussianSampler noise(seed);
    for (uint32_t idx : out.ref_indices) {
        media::Frame420 frame = source[idx];
        if (script.noise_sigma > 0) {
            for (uint8_t& v : frame.y.samples) {
                const double n = std::lround(script.noise_sigma * noise.next());
                v = uint8_t(std::clamp(double(v) + n, 0.0, 255.0));
            }
        }
        out.frames.push_back(std::move(frame));
    }
    return out;
}

double synthetic_mos(const std::vector<uint32_t>& ref_indices, double noise_sigma) {
    if (ref_indices.empty()) raise(ErrorKind::InvalidArg, "empty alignment vector");
    const auto f = features::freeze_feature(ref_indices);
    const auto s = features::skip_feature(ref_indices);
    const double n = double(ref_indices.size());
    size_t frozen = 0, skipped = 0;
    for (double v : f)
        if (v > 0) ++frozen;
    for (double v : s)
        if (v > 1) ++skipped;
    const double mos =
        5.0 - 6.0 * (double(frozen) / n) - 2.0 * (double(skipped) / n) - 0.08 * noise_sigma;
    return std::clamp(mos, 1.0, 5.0);
}

std::vector<media::Frame420> make_synthetic_source(const std::string& source_id, size_t frames,
                                                   uint32_t width, uint32_t height) {
    if (frames == 0) raise(ErrorKind::InvalidArg, "source needs at least one frame");
    media::VideoHeader header{width, height, 30, 1};
    header.validate();

    const uint64_t seed = fnv1a(source_id);
    std::mt19937_64 rng(seed);
    auto unit = [&rng] { return double(rng() >> 11) * 0x1.0p-53; };

    // per-source character
    const double freq_x = (0.5 + 2.0 * unit()) / double(width);
    const double freq_y = (0.5 + 2.0 * unit()) / double(height);
    const double drift = 0.02 + 0.12 * unit();   // grating phase speed, rad/frame
    const double orbit = 0.03 + 0.07 * unit();   // blob angular speed, rad/frame
    const double blob_sigma = 0.08 * double(std::min(width, height)) + 2.0;
    const double phase0 = 2.0 * 3.14159265358979323846 * unit();

    // static texture layer
    std::vector<double> texture(size_t(width) * height);
    for (double& t : texture) t = 12.0 * (unit() - 0.5);

    constexpr double kTau = 2.0 * 3.14159265358979323846;
    std::vector<media::Frame420> out;
    out.reserve(frames);
    for (size_t t = 0; t < frames; ++t) {
        media::Frame420 frame(width, height);
        const double cx = width / 2.0 + (width / 3.0) * std::cos(phase0 + orbit * double(t));
        const double cy = height / 2.0 + (height / 3.0) * std::sin(phase0 + orbit * double(t));
        for (uint32_t y = 0; y < height; ++y) {
            for (uint32_t x = 0; x < width; ++x) {
                const double grating =
                    55.0 * std::sin(kTau * (freq_x * x + freq_y * y) + drift * double(t));
                const double dx = x - cx, dy = y - cy;
                const double blob =
                    60.0 * std::exp(-(dx * dx + dy * dy) / (2.0 * blob_sigma * blob_sigma));
                const double v = 120.0 + grating + blob + texture[size_t(y) * width + x];
                frame.y.at(x, y) = uint8_t(std::clamp(v, 20.0, 235.0));
            }
        }
        out.push_back(std::move(frame));
    }
    return out;
}

DegradationScript random_script(std::mt19937_64& rng, size_t source_frames, double noise_sigma) {
    if (source_frames < 40)
        raise(ErrorKind::InvalidArg, "random_script needs at least 40 source frames");
    auto pick = [&rng](uint32_t lo, uint32_t hi) { // inclusive
        return lo + uint32_t(rng() % uint64_t(hi - lo + 1));
    };

    DegradationScript s;
    s.noise_sigma = noise_sigma;
    const uint32_t n_events = pick(0, 4);
    uint32_t cursor = pick(1, 8);
    for (uint32_t i = 0; i < n_events; ++i) {
        // leave room for the event body plus spacing to the next trigger
        if (cursor + 16 >= source_frames - 1) break;
        DegradationEvent e;
        e.frame = cursor;
        switch (rng() % 3) {
        case 0:
            e.type = DegradationEvent::Type::Freeze;
            e.count = pick(2, 24);
            break;
        case 1:
            e.type = DegradationEvent::Type::Skip;
            e.count = std::min(pick(1, 10), uint32_t(source_frames - 2 - e.frame));
            break;
        default:
            e.type = DegradationEvent::Type::RateChange;
            {
                constexpr double ratios[] = {0.5, 0.7, 1.5, 2.0, 1.0};
                e.ratio = ratios[rng() % 5];
            }
            break;
        }
        s.events.push_back(e);
        cursor = e.last_touched() + 1 + pick(4, uint32_t(std::max<size_t>(8, source_frames / 4)));
    }
    return s;
}

} // namespace vcm::dataset
