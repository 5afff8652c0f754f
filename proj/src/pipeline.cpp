#include "pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>

#include <json.hpp>

#include "alignment.hpp"
#include "csv.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "features.hpp"
#include "media_io.hpp"
#include "util.hpp"

namespace fs = std::filesystem;

namespace vcm::pipeline {

size_t run_embed(const std::string& src_path, const std::string& out_path,
                 const marker::MarkerConfig& config) {
    auto reader = media::open_video(src_path);
    media::Y4mWriter writer(out_path, reader->header());
    media::Frame420 frame;
    size_t index = 0;
    while (reader->next_frame(frame)) {
        if (index > marker::kMaxFrameIndex)
            raise(ErrorKind::Format, "video exceeds the 24-bit marker index space");
        marker::render_markers(frame.y, uint32_t(index), config);
        writer.write_frame(frame);
        ++index;
    }
    writer.close();
    if (index == 0) raise(ErrorKind::Format, "'" + src_path + "' has no frames");
    return index;
}

AlignSummary run_align(const std::string& degraded_path, const std::string& reference_path,
                       const std::string& out_csv, const std::string& out_aligned_video,
                       const marker::MarkerConfig& config) {
    media::Y4mIndexedReader reference(reference_path);
    const media::VideoHeader& ref_header = reference.header();

    auto degraded = media::open_video(degraded_path);
    align::AlignmentVector raw =
        align::scan_alignment(*degraded, config, ref_header.width, ref_header.height);
    align::AlignmentVector filled = align::fill_gaps(raw);
    align::write_alignment_csv(filled, out_csv);

    if (!out_aligned_video.empty()) {
        media::Y4mWriter writer(out_aligned_video, ref_header);
        align::assemble_reference(reference, filled, writer);
        writer.close();
    }

    const align::ValidationReport report = align::validate_alignment(filled);
    AlignSummary summary;
    summary.frames = filled.size();
    for (const align::Entry& e : filled.entries) {
        if (e.confidence == align::Confidence::Both) ++summary.decoded_both;
        else if (e.confidence == align::Confidence::Single) ++summary.decoded_single;
    }
    summary.filled = report.filled;
    summary.freezes = report.freezes;
    summary.skipped_indices = report.skipped_indices;
    summary.backward_jumps = report.backward_jumps;
    return summary;
}

namespace {

// Random-access luma source over a video file (Y4M) or PGM directory.
features::FrameSequence open_sequence(const std::string& path) {
    std::error_code ec;
    if (fs::is_directory(path, ec)) {
        auto reader = std::make_shared<media::PgmSequenceReader>(path);
        auto frames = std::make_shared<std::vector<media::LumaPlane>>();
        media::Frame420 frame;
        while (reader->next_frame(frame)) frames->push_back(frame.y);
        return features::FrameSequence{frames->size(),
                                       [frames](size_t i) { return (*frames)[i]; }};
    }
    auto reader = std::make_shared<media::Y4mIndexedReader>(path);
    auto lock = std::make_shared<std::mutex>();
    const size_t count = reader->frame_count();
    return features::FrameSequence{count, [reader, lock](size_t i) {
                                       std::lock_guard<std::mutex> guard(*lock);
                                       media::Frame420 frame;
                                       reader->read_frame(i, frame);
                                       return std::move(frame.y);
                                   }};
}

} // namespace

void run_features(const std::string& alignment_csv, const std::string& degraded_path,
                  const std::string& aligned_reference_path, const std::string& selection,
                  const std::string& adm_csv, const std::string& out_csv, unsigned threads) {
    const auto groups = features::parse_selection(selection);
    const align::AlignmentVector alignment = align::read_alignment_csv(alignment_csv);
    const std::vector<uint32_t> r = alignment.indices();

    features::BuildInputs inputs;
    inputs.alignment = &r;
    inputs.external_csv = adm_csv;
    inputs.threads = threads == 0 ? 1 : threads;
    if (!degraded_path.empty()) inputs.degraded = open_sequence(degraded_path);
    if (!aligned_reference_path.empty())
        inputs.aligned_reference = open_sequence(aligned_reference_path);

    const std::string clip_id = fs::path(out_csv).stem().string();
    const features::FeatureMatrix m = features::build_feature_matrix(groups, inputs, clip_id);
    features::write_feature_csv(m, out_csv);
}

namespace {

struct LoadedSplit {
    std::vector<features::FeatureMatrix> features;
    std::vector<double> mos;
};

LoadedSplit load_split(const std::vector<dataset::ClipRecord>& records,
                       const std::string& features_dir,
                       const std::vector<std::string>& columns) {
    LoadedSplit out;
    out.features.reserve(records.size());
    out.mos.reserve(records.size());
    for (const dataset::ClipRecord& rec : records) {
        const std::string path = (fs::path(features_dir) / (rec.clip_id + ".csv")).string();
        if (!fs::exists(path))
            raise(ErrorKind::Io, "feature file '" + path + "' for clip '" + rec.clip_id +
                                     "' does not exist");
        features::FeatureMatrix m = features::read_feature_csv(path, rec.clip_id);
        out.features.push_back(features::select_columns(m, columns));
        out.mos.push_back(rec.mos);
    }
    return out;
}

} // namespace

TrainResult run_train(const std::string& manifest_path, const std::string& features_dir,
                      const std::string& selection,
                      const std::vector<std::string>& validation_sources,
                      const model::ModelConfig& config, const std::string& out_checkpoint,
                      const std::string& out_log) {
    const auto groups = features::parse_selection(selection);
    const auto columns = features::columns_for(groups);

    const auto records = dataset::load_manifest(manifest_path);
    std::set<std::string> val_set(validation_sources.begin(), validation_sources.end());
    const dataset::Split split = dataset::split_by_source(records, val_set);

    const LoadedSplit train_data = load_split(split.train, features_dir, columns);
    const LoadedSplit val_data = load_split(split.validation, features_dir, columns);

    std::ofstream log_stream;
    model::LogSink sink;
    if (!out_log.empty()) {
        log_stream.open(out_log, std::ios::binary);
        if (!log_stream) raise(ErrorKind::Io, "cannot open '" + out_log + "' for writing");
        sink = [&log_stream](const model::EpochLog& l) {
            nlohmann::json j{{"epoch", l.epoch},
                             {"train_loss", l.train_loss},
                             {"val_pcc", l.val_pcc},
                             {"val_rmse", l.val_rmse}};
            log_stream << j.dump() << "\n";
            log_stream.flush();
        };
    }

    const model::Checkpoint ck = model::train(train_data.features, train_data.mos,
                                              val_data.features, val_data.mos, config, sink);
    model::save_checkpoint(ck, out_checkpoint);

    TrainResult result;
    result.best_epoch = ck.best_epoch;
    result.val_pcc = ck.val_pcc;
    result.val_rmse = ck.val_rmse;
    result.train_clips = split.train.size();
    result.val_clips = split.validation.size();
    return result;
}

PredictResult run_predict(const std::string& checkpoint_path, const std::string& features_csv,
                          const std::string& out_timeline, const std::string& timeline_metric) {
    const model::Checkpoint ck = model::load_checkpoint(checkpoint_path);
    return run_predict(ck, features_csv, out_timeline, timeline_metric);
}

PredictResult run_predict(const model::Checkpoint& ck, const std::string& features_csv,
                          const std::string& out_timeline, const std::string& timeline_metric) {
    const std::string clip_id = fs::path(features_csv).stem().string();
    const features::FeatureMatrix raw = features::read_feature_csv(features_csv, clip_id);
    const model::QualityTimeline timeline = model::predict(ck, raw);

    if (!out_timeline.empty()) {
        auto column_or_empty = [&](const std::string& name) -> std::vector<double> {
            const auto it = std::find(raw.column_names.begin(), raw.column_names.end(), name);
            if (it == raw.column_names.end()) return {};
            const size_t c = size_t(it - raw.column_names.begin());
            std::vector<double> v(raw.rows);
            for (size_t i = 0; i < raw.rows; ++i) v[i] = raw.at(i, c);
            return v;
        };
        const std::vector<double> freeze = column_or_empty("freeze");
        const std::vector<double> skip = column_or_empty("skip");
        std::vector<double> metric;
        if (!timeline_metric.empty()) {
            metric = column_or_empty(timeline_metric);
            if (metric.empty())
                raise(ErrorKind::Format, "feature file has no column '" + timeline_metric + "'");
        }
        eval::TimelineColumns cols;
        cols.quality = timeline.per_frame;
        cols.freeze = freeze;
        cols.skip = skip;
        cols.metric_name = timeline_metric;
        cols.metric = metric;
        eval::export_timeline(cols, out_timeline);
    }
    return PredictResult{timeline.clip_score, timeline.per_frame.size()};
}

EvalResult run_eval(const std::string& predictions_csv, const std::string& score_column,
                    const std::string& manifest_path, const std::string& model_name,
                    const std::string& out_report_json, const std::string& out_scatter_csv,
                    const std::string& calibration_ids_path) {
    const csvio::Table preds = csvio::read_table(predictions_csv);
    const size_t id_col = preds.column("clip_id");
    const size_t sc_col = preds.column(score_column.empty() ? "score" : score_column);
    if (id_col == csvio::Table::npos)
        raise(ErrorKind::Format, "'" + predictions_csv + "' has no clip_id column");
    if (sc_col == csvio::Table::npos)
        raise(ErrorKind::Format, "'" + predictions_csv + "' has no '" +
                                     (score_column.empty() ? "score" : score_column) +
                                     "' column");

    const auto records = dataset::load_manifest(manifest_path);
    std::map<std::string, double> mos_by_id;
    for (const auto& r : records) mos_by_id[r.clip_id] = r.mos;

    struct Row {
        std::string clip_id;
        double raw, mos;
    };
    std::vector<Row> rows;
    for (size_t i = 0; i < preds.rows.size(); ++i) {
        const std::string& id = preds.rows[i][id_col];
        const auto it = mos_by_id.find(id);
        if (it == mos_by_id.end())
            raise(ErrorKind::Format, "clip '" + id + "' from predictions is not in the manifest");
        rows.push_back(Row{id, csvio::parse_double(preds.rows[i][sc_col],
                                                   predictions_csv + " row " + std::to_string(i)),
                           it->second});
    }
    if (rows.empty()) raise(ErrorKind::Format, "'" + predictions_csv + "' has no rows");

    std::set<std::string> calibration;
    if (!calibration_ids_path.empty()) {
        std::ifstream in(calibration_ids_path, std::ios::binary);
        if (!in) raise(ErrorKind::Io, "cannot open '" + calibration_ids_path + "'");
        std::string line;
        while (std::getline(in, line)) {
            const std::string id = util::trim(line);
            if (!id.empty()) calibration.insert(id);
        }
        if (calibration.empty())
            raise(ErrorKind::Format, "'" + calibration_ids_path + "' lists no clip ids");
    }

    eval::SigmoidMapping mapping;
    std::vector<Row> eval_rows;
    if (calibration.empty()) {
        std::vector<double> raw, mos;
        for (const Row& r : rows) {
            raw.push_back(r.raw);
            mos.push_back(r.mos);
        }
        mapping = eval::fit_mapping(raw, mos);
        eval_rows = rows;
    } else {
        std::vector<double> raw, mos;
        for (const Row& r : rows) {
            if (calibration.count(r.clip_id)) {
                raw.push_back(r.raw);
                mos.push_back(r.mos);
            } else {
                eval_rows.push_back(r);
            }
        }
        if (raw.size() < 4)
            raise(ErrorKind::Numeric, "calibration split has fewer than 4 clips");
        if (eval_rows.size() < 2)
            raise(ErrorKind::Numeric, "fewer than 2 clips left to evaluate after calibration");
        mapping = eval::fit_mapping(raw, mos);
    }

    std::vector<double> mapped, mos;
    mapped.reserve(eval_rows.size());
    for (const Row& r : eval_rows) {
        mapped.push_back(mapping(r.raw));
        mos.push_back(r.mos);
    }
    EvalResult result;
    result.pcc = eval::pearson(mapped, mos);
    result.rmse = eval::rmse(mapped, mos);
    result.n_clips = eval_rows.size();

    if (!out_report_json.empty()) {
        nlohmann::json j{{"model", model_name.empty() ? (score_column.empty() ? "score" : score_column)
                                                      : model_name},
                         {"features", score_column.empty() ? "score" : score_column},
                         {"pcc", result.pcc},
                         {"rmse", result.rmse},
                         {"n_clips", result.n_clips}};
        std::ofstream out(out_report_json, std::ios::binary);
        if (!out) raise(ErrorKind::Io, "cannot open '" + out_report_json + "' for writing");
        out << j.dump(2) << "\n";
        out.flush();
        if (!out) raise(ErrorKind::Io, "write failure on '" + out_report_json + "'");
    }
    if (!out_scatter_csv.empty()) {
        std::ofstream out(out_scatter_csv, std::ios::binary);
        if (!out) raise(ErrorKind::Io, "cannot open '" + out_scatter_csv + "' for writing");
        out << "clip_id,mos,raw,mapped\n";
        for (const Row& r : eval_rows)
            out << r.clip_id << "," << util::format_g9(r.mos) << "," << util::format_g9(r.raw)
                << "," << util::format_g9(mapping(r.raw)) << "\n";
        out.flush();
        if (!out) raise(ErrorKind::Io, "write failure on '" + out_scatter_csv + "'");
    }
    return result;
}

SynthResult run_synth(const std::string& script_path, const std::string& src_path,
                      const std::string& out_dir, uint64_t seed, const std::string& clip_id,
                      const std::string& source_id) {
    const dataset::DegradationScript script = dataset::load_script(script_path);
    auto reader = media::open_video(src_path);
    const media::VideoHeader header = reader->header();
    const std::vector<media::Frame420> source = media::read_all_frames(*reader);
    if (source.empty()) raise(ErrorKind::Format, "'" + src_path + "' has no frames");

    const dataset::DegradedClip degraded = dataset::apply_degradation(source, script, seed);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) raise(ErrorKind::Io, "cannot create directory '" + out_dir + "'");

    const std::string src_stem = fs::path(src_path).stem().string();
    SynthResult result;
    result.clip_id = clip_id.empty() ? src_stem + "_s" + std::to_string(seed) : clip_id;
    result.mos = dataset::synthetic_mos(degraded.ref_indices, script.noise_sigma);
    result.frames = degraded.frames.size();
    result.degraded_path = (fs::path(out_dir) / (result.clip_id + ".y4m")).string();

    media::Y4mWriter writer(result.degraded_path, header);
    for (const media::Frame420& f : degraded.frames) writer.write_frame(f);
    writer.close();

    // ground-truth alignment, same schema as the align stage output
    const align::AlignmentVector truth = align::from_indices(degraded.ref_indices);
    align::write_alignment_csv(
        truth, (fs::path(out_dir) / (result.clip_id + ".alignment.csv")).string());

    dataset::ClipRecord record;
    record.clip_id = result.clip_id;
    record.degraded_path = result.degraded_path;
    record.reference_path = src_path;
    record.source_id = source_id.empty() ? src_stem : source_id;
    record.mos = result.mos;
    record.votes = 0;
    record.profile_id = fs::path(script_path).stem().string();
    record.script_json = dataset::script_to_json(script);
    record.seed = seed;
    dataset::append_manifest((fs::path(out_dir) / "manifest.jsonl").string(), record);
    return result;
}

} // namespace vcm::pipeline
