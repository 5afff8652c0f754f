#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "alignment.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "features.hpp"
#include "model.hpp"
#include "pipeline.hpp"
#include "testutil.hpp"

using namespace vcm;

namespace {

// Stamped synthetic source written to disk; returns the path.
std::string write_stamped_source(const testutil::TempDir& tmp, const std::string& source_id,
                                 size_t frames, uint32_t w = 240, uint32_t h = 144) {
    auto source = dataset::make_synthetic_source(source_id, frames, w, h);
    for (size_t i = 0; i < source.size(); ++i)
        marker::render_markers(source[i].y, uint32_t(i), {});
    const std::string path = tmp.file(source_id + ".y4m");
    media::Y4mWriter writer(path, media::VideoHeader{w, h, 30, 1});
    for (const auto& f : source) writer.write_frame(f);
    writer.close();
    return path;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

} // namespace

TEST_CASE("embed stamps every frame and preserves the rest of the stream") {
    testutil::TempDir tmp("embed");
    const auto source = dataset::make_synthetic_source("s", 7, 240, 144);
    {
        media::Y4mWriter writer(tmp.file("src.y4m"), media::VideoHeader{240, 144, 30, 1});
        for (const auto& f : source) writer.write_frame(f);
    }
    CHECK(pipeline::run_embed(tmp.file("src.y4m"), tmp.file("stamped.y4m"), {}) == 7);

    media::Y4mReader reader(tmp.file("stamped.y4m"));
    const auto frames = media::read_all_frames(reader);
    REQUIRE(frames.size() == 7);
    for (size_t i = 0; i < frames.size(); ++i) {
        const auto decoded = marker::decode_frame_index(frames[i].y, {});
        REQUIRE(decoded.has_value());
        CHECK(decoded->frame_index == i);
        CHECK(frames[i].u == source[i].u); // chroma untouched
    }
}

TEST_CASE("embed on a too-small frame reports the footprint") {
    testutil::TempDir tmp("embed_sm");
    {
        media::Y4mWriter writer(tmp.file("small.y4m"), media::VideoHeader{64, 64, 30, 1});
        writer.write_frame(media::Frame420(64, 64, 128));
    }
    try {
        pipeline::run_embed(tmp.file("small.y4m"), tmp.file("out.y4m"), {});
        FAIL("expected footprint error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Format);
        CHECK(std::string(e.what()).find("footprint") != std::string::npos);
    }
}

TEST_CASE("synth + align: scan recovers the generator ground truth through files") {
    testutil::TempDir tmp("synth_align");
    const std::string src = write_stamped_source(tmp, "srcA", 48);
    write_text(tmp.file("script.json"),
               R"({"events":[{"type":"freeze","frame":7,"duration":5},
                             {"type":"skip","frame":20,"gap":4}],
                   "noise_sigma":2.0})");

    const auto synth =
        pipeline::run_synth(tmp.file("script.json"), src, tmp.dir() + "/out", 3, "clipA", "srcA");
    CHECK(synth.mos < 5.0);
    CHECK(synth.frames == 49); // 48 + 5 freeze repeats - 4 skipped

    const auto summary = pipeline::run_align(synth.degraded_path, src, tmp.file("alignment.csv"),
                                             tmp.file("aligned.y4m"), {});
    CHECK(summary.frames == 49);
    CHECK(summary.freezes == 5);
    CHECK(summary.skipped_indices == 4);
    CHECK(summary.backward_jumps == 0);

    // CSV matches the generator's ground truth written by run_synth
    const auto scanned = align::read_alignment_csv(tmp.file("alignment.csv"));
    const auto truth = align::read_alignment_csv(tmp.dir() + "/out/clipA.alignment.csv");
    CHECK(scanned.indices() == truth.indices());

    // aligned video: frame i equals source frame r(i)
    media::Y4mIndexedReader source_reader(src);
    media::Y4mReader aligned_reader(tmp.file("aligned.y4m"));
    const auto aligned = media::read_all_frames(aligned_reader);
    REQUIRE(aligned.size() == 49);
    const auto r = scanned.indices();
    media::Frame420 src_frame;
    for (size_t i = 0; i < aligned.size(); ++i) {
        source_reader.read_frame(r[i], src_frame);
        CHECK(aligned[i] == src_frame);
    }
}

TEST_CASE("synth with an empty script copies the source and scores MOS 5") {
    testutil::TempDir tmp("synth_empty");
    const std::string src = write_stamped_source(tmp, "srcB", 10);
    write_text(tmp.file("empty.json"), R"({"events":[]})");
    const auto synth =
        pipeline::run_synth(tmp.file("empty.json"), src, tmp.dir() + "/out", 0, "", "");
    CHECK(synth.mos == 5.0);
    CHECK(synth.frames == 10);

    media::Y4mReader a(src), b(synth.degraded_path);
    CHECK(media::read_all_frames(a) == media::read_all_frames(b));

    const auto records = dataset::load_manifest(tmp.dir() + "/out/manifest.jsonl");
    REQUIRE(records.size() == 1);
    CHECK(records[0].mos == 5.0);
    CHECK(records[0].source_id == "srcB");
}

TEST_CASE("synth rejects scripts that exceed the source bounds") {
    testutil::TempDir tmp("synth_bad");
    const std::string src = write_stamped_source(tmp, "srcC", 10);
    write_text(tmp.file("bad.json"),
               R"({"events":[{"type":"freeze","frame":50,"duration":3}]})");
    CHECK_THROWS_AS(pipeline::run_synth(tmp.file("bad.json"), src, tmp.dir() + "/o", 0, "", ""),
                    Error);
}

TEST_CASE("features stage computes the selected columns from files") {
    testutil::TempDir tmp("features");
    const std::string src = write_stamped_source(tmp, "srcD", 30);
    write_text(tmp.file("script.json"),
               R"({"events":[{"type":"freeze","frame":4,"duration":3}],"noise_sigma":2.0})");
    const auto synth =
        pipeline::run_synth(tmp.file("script.json"), src, tmp.dir() + "/out", 1, "clipD", "srcD");
    pipeline::run_align(synth.degraded_path, src, tmp.file("alignment.csv"),
                        tmp.file("aligned.y4m"), {});

    pipeline::run_features(tmp.file("alignment.csv"), synth.degraded_path, tmp.file("aligned.y4m"),
                           "vif,motion,skip,freeze", "", tmp.file("clipD.csv"), 2);
    const auto m = features::read_feature_csv(tmp.file("clipD.csv"), "clipD");
    CHECK(m.rows == 33);
    CHECK(m.column_names == std::vector<std::string>{"vif_scale0", "vif_scale1", "vif_scale2",
                                                     "vif_scale3", "motion", "motion2", "skip",
                                                     "freeze"});
    // frozen run shows up in the freeze column and zeroes motion on the aligned ref
    const size_t c_freeze = 7, c_motion = 4;
    CHECK(m.at(5, c_freeze) > 0);
    CHECK(m.at(5, c_motion) == 0.0);

    // temporal-only selection needs no videos at all
    pipeline::run_features(tmp.file("alignment.csv"), "", "", "skip,freeze", "",
                           tmp.file("temporal.csv"), 1);
    const auto t = features::read_feature_csv(tmp.file("temporal.csv"), "t");
    CHECK(t.column_names == std::vector<std::string>{"skip", "freeze"});

    // adm without a file is a usage error
    CHECK_THROWS_AS(pipeline::run_features(tmp.file("alignment.csv"), synth.degraded_path,
                                           tmp.file("aligned.y4m"), "vif,adm", "",
                                           tmp.file("x.csv"), 1),
                    Error);
}

TEST_CASE("train/predict/eval across files") {
    testutil::TempDir tmp("trainflow");
    const std::string features_dir = tmp.dir() + "/features";
    std::filesystem::create_directories(features_dir);

    // tiny corpus: 3 sources x 4 clips, labels from the oracle formula
    std::mt19937_64 rng(5);
    const std::string manifest = tmp.file("manifest.jsonl");
    for (int s = 0; s < 3; ++s) {
        const std::string source_id = "src" + std::to_string(s);
        const auto source = dataset::make_synthetic_source(source_id, 40, 240, 144);
        for (int c = 0; c < 4; ++c) {
            const auto script = dataset::random_script(rng, source.size(), 2.0);
            const auto degraded = dataset::apply_degradation(source, script, rng());
            const std::string clip_id = source_id + "_c" + std::to_string(c);

            features::BuildInputs inputs;
            std::vector<media::LumaPlane> deg_luma, ref_luma;
            for (const auto& f : degraded.frames) deg_luma.push_back(f.y);
            for (uint32_t idx : degraded.ref_indices) ref_luma.push_back(source[idx].y);
            inputs.degraded = features::wrap(deg_luma);
            inputs.aligned_reference = features::wrap(ref_luma);
            inputs.alignment = &degraded.ref_indices;
            const auto m = features::build_feature_matrix(
                features::parse_selection("motion,skip,freeze"), inputs, clip_id);
            features::write_feature_csv(m, features_dir + "/" + clip_id + ".csv");

            dataset::ClipRecord rec;
            rec.clip_id = clip_id;
            rec.degraded_path = clip_id + ".y4m";
            rec.reference_path = source_id + ".y4m";
            rec.source_id = source_id;
            rec.mos = dataset::synthetic_mos(degraded.ref_indices, script.noise_sigma);
            dataset::append_manifest(manifest, rec);
        }
    }

    model::ModelConfig cfg;
    cfg.num_layers = 1;
    cfg.hidden_size = 8;
    cfg.max_epochs = 3;
    cfg.batch_size = 4;
    const auto result =
        pipeline::run_train(manifest, features_dir, "motion,skip,freeze", {"src2"}, cfg,
                            tmp.file("model.ckpt"), tmp.file("train.log"));
    CHECK(result.train_clips == 8);
    CHECK(result.val_clips == 4);

    // the log is JSONL with one line per epoch plus the initial evaluation
    std::ifstream log(tmp.file("train.log"));
    size_t lines = 0;
    std::string line;
    while (std::getline(log, line)) {
        CHECK(line.find("\"epoch\"") != std::string::npos);
        ++lines;
    }
    CHECK(lines == 4);

    // deterministic repeat produces a byte-identical checkpoint
    pipeline::run_train(manifest, features_dir, "motion,skip,freeze", {"src2"}, cfg,
                        tmp.file("model2.ckpt"), "");
    std::ifstream c1(tmp.file("model.ckpt"), std::ios::binary);
    std::ifstream c2(tmp.file("model2.ckpt"), std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(c1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(c2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);

    // predict one clip, with timeline
    const auto pred = pipeline::run_predict(tmp.file("model.ckpt"), features_dir + "/src0_c0.csv",
                                            tmp.file("timeline.csv"), "motion");
    CHECK(pred.frames > 0);
    {
        std::ifstream t(tmp.file("timeline.csv"));
        std::string header;
        std::getline(t, header);
        CHECK(header == "frame,q_raw,q_clamped,freeze_div10,skip_div10,motion");
    }

    // zero-weight checkpoint scores exactly the head bias
    {
        auto ck = model::load_checkpoint(tmp.file("model.ckpt"));
        std::fill(ck.weights.flat.begin(), ck.weights.flat.end(), 0.0);
        ck.weights.flat[ck.weights.head_b_offset()] = 2.5;
        model::save_checkpoint(ck, tmp.file("zero.ckpt"));
        const auto zp = pipeline::run_predict(tmp.file("zero.ckpt"),
                                              features_dir + "/src0_c0.csv", "", "");
        CHECK(zp.clip_score == 2.5);
    }

    // eval: perfect predictions reach pcc ~ 1
    const auto records = dataset::load_manifest(manifest);
    {
        std::ofstream p(tmp.file("preds.csv"));
        p << "clip_id,score\n";
        for (const auto& r : records) p << r.clip_id << "," << r.mos << "\n";
    }
    const auto ev = pipeline::run_eval(tmp.file("preds.csv"), "score", manifest, "oracle",
                                       tmp.file("report.json"), tmp.file("scatter.csv"), "");
    CHECK(ev.pcc > 0.999);
    CHECK(ev.rmse < 0.05);
    CHECK(ev.n_clips == records.size());
    {
        std::ifstream rep(tmp.file("report.json"));
        const std::string text((std::istreambuf_iterator<char>(rep)),
                               std::istreambuf_iterator<char>());
        CHECK(text.find("\"pcc\"") != std::string::npos);
        CHECK(text.find("\"model\"") != std::string::npos);
        std::ifstream sc(tmp.file("scatter.csv"));
        std::string header;
        std::getline(sc, header);
        CHECK(header == "clip_id,mos,raw,mapped");
    }

    // calibration split: fit on half the clips, evaluate the rest
    {
        std::ofstream ids(tmp.file("calib.txt"));
        for (size_t i = 0; i < records.size(); i += 2) ids << records[i].clip_id << "\n";
    }
    const auto ev_cal = pipeline::run_eval(tmp.file("preds.csv"), "score", manifest, "",
                                           "", "", tmp.file("calib.txt"));
    CHECK(ev_cal.n_clips == records.size() - (records.size() + 1) / 2);
    CHECK(ev_cal.pcc > 0.99);

    // unknown clip id in the predictions is an error
    {
        std::ofstream p(tmp.file("bad_preds.csv"));
        p << "clip_id,score\nnot_a_clip,3.0\n";
    }
    CHECK_THROWS_AS(pipeline::run_eval(tmp.file("bad_preds.csv"), "score", manifest, "", "", "",
                                       ""),
                    Error);
}

TEST_CASE("a trained model scores frozen-heavy clips below pristine ones") {
    // same source content, labels from the oracle formula; a small model on
    // the temporal features must learn that freezes hurt quality
    std::mt19937_64 rng(71);
    const auto groups = features::parse_selection("motion,skip,freeze");
    const auto source = dataset::make_synthetic_source("behav", 80, 96, 64);

    auto featurize = [&](const std::vector<uint32_t>& r) {
        std::vector<media::LumaPlane> ref_luma;
        for (uint32_t idx : r) ref_luma.push_back(source[idx].y);
        features::BuildInputs inputs;
        inputs.aligned_reference = features::wrap(ref_luma);
        inputs.alignment = &r;
        return features::build_feature_matrix(groups, inputs, "clip");
    };

    std::vector<features::FeatureMatrix> train, val;
    std::vector<double> train_mos, val_mos;
    for (int c = 0; c < 50; ++c) {
        const auto script = dataset::random_script(rng, source.size(), 0.0);
        const auto r = dataset::replay_script(script, source.size());
        auto m = featurize(r);
        const double mos = dataset::synthetic_mos(r, 0.0);
        if (c % 5 == 0) {
            val.push_back(std::move(m));
            val_mos.push_back(mos);
        } else {
            train.push_back(std::move(m));
            train_mos.push_back(mos);
        }
    }
    model::ModelConfig cfg;
    cfg.num_layers = 1;
    cfg.hidden_size = 16;
    cfg.max_epochs = 40;
    cfg.batch_size = 8;
    cfg.learning_rate = 3e-3;
    cfg.seed = 3;
    const auto ck = model::train(train, train_mos, val, val_mos, cfg);

    std::vector<uint32_t> pristine(60), frozen;
    for (uint32_t i = 0; i < 60; ++i) pristine[i] = i;
    for (uint32_t i = 0; i < 60; ++i) frozen.push_back(i < 20 ? i : 20); // long freeze
    const double q_pristine = model::predict(ck, featurize(pristine)).clip_score;
    const double q_frozen = model::predict(ck, featurize(frozen)).clip_score;
    CHECK(q_frozen < q_pristine - 0.5);
}

TEST_CASE("align on an all-unreadable clip fails loudly") {
    testutil::TempDir tmp("align_bad");
    const std::string src = write_stamped_source(tmp, "srcE", 5);
    {
        media::Y4mWriter writer(tmp.file("gray.y4m"), media::VideoHeader{240, 144, 30, 1});
        for (int i = 0; i < 5; ++i) writer.write_frame(media::Frame420(240, 144, 128));
    }
    CHECK_THROWS_AS(
        pipeline::run_align(tmp.file("gray.y4m"), src, tmp.file("a.csv"), "", {}), Error);
}

TEST_CASE("pgm directory input works end to end for alignment") {
    testutil::TempDir tmp("pgm_align");
    const std::string src = write_stamped_source(tmp, "srcF", 6);
    // decompose the stamped source into a PGM directory (luma only)
    const std::string dir = tmp.dir() + "/frames";
    std::filesystem::create_directories(dir);
    {
        media::Y4mReader reader(src);
        media::Frame420 frame;
        size_t i = 0;
        char name[32];
        while (reader.next_frame(frame)) {
            std::snprintf(name, sizeof name, "/f_%06zu.pgm", i++);
            media::write_pgm(frame.y, dir + name);
        }
    }
    const auto summary = pipeline::run_align(dir, src, tmp.file("a.csv"), "", {});
    CHECK(summary.frames == 6);
    const auto v = align::read_alignment_csv(tmp.file("a.csv"));
    CHECK(v.indices() == std::vector<uint32_t>{0, 1, 2, 3, 4, 5});
}
