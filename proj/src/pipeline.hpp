#ifndef VCM_PIPELINE_HPP
#define VCM_PIPELINE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "marker.hpp"
#include "model.hpp"

namespace vcm::pipeline {

// Stamps frame-index markers on every frame (frame 0, 1, ...).
// Returns the number of frames written.
size_t run_embed(const std::string& src_path, const std::string& out_path,
                 const marker::MarkerConfig& config);

struct AlignSummary {
    size_t frames = 0;
    size_t decoded_both = 0;
    size_t decoded_single = 0;
    size_t filled = 0;
    size_t freezes = 0;
    size_t skipped_indices = 0;
    size_t backward_jumps = 0;
};

// Scans the degraded recording, fills gaps, writes the alignment CSV and
// (optionally) the aligned reference video ordered by r(i).
AlignSummary run_align(const std::string& degraded_path, const std::string& reference_path,
                       const std::string& out_csv, const std::string& out_aligned_video,
                       const marker::MarkerConfig& config);

// Computes the selected feature columns into a CSV. degraded/aligned
// reference/adm file are only needed when the selection calls for them.
void run_features(const std::string& alignment_csv, const std::string& degraded_path,
                  const std::string& aligned_reference_path, const std::string& selection,
                  const std::string& adm_csv, const std::string& out_csv, unsigned threads);

struct TrainResult {
    uint32_t best_epoch = 0;
    double val_pcc = 0;
    double val_rmse = 0;
    size_t train_clips = 0;
    size_t val_clips = 0;
};

// Trains from a manifest plus per-clip feature CSVs named
// <features_dir>/<clip_id>.csv; holds out the listed sources for validation
// and writes the best checkpoint (+ a JSONL epoch log when requested).
TrainResult run_train(const std::string& manifest_path, const std::string& features_dir,
                      const std::string& selection,
                      const std::vector<std::string>& validation_sources,
                      const model::ModelConfig& config, const std::string& out_checkpoint,
                      const std::string& out_log);

struct PredictResult {
    double clip_score = 0;
    size_t frames = 0;
};

// Scores one clip; optionally writes the per-frame timeline CSV with the
// freeze/skip traces (and one extra feature column when named).
PredictResult run_predict(const model::Checkpoint& checkpoint, const std::string& features_csv,
                          const std::string& out_timeline, const std::string& timeline_metric);
PredictResult run_predict(const std::string& checkpoint_path, const std::string& features_csv,
                          const std::string& out_timeline, const std::string& timeline_metric);

struct EvalResult {
    double pcc = 0;
    double rmse = 0;
    size_t n_clips = 0;
};

// Per-file evaluation: joins a predictions CSV (clip_id + score column)
// against manifest MOS, fits the sigmoid mapping, reports mapped PCC/RMSE.
// When calibration_ids_path is set the mapping is fitted on those clips only
// and the metrics are computed on the remaining ones.
EvalResult run_eval(const std::string& predictions_csv, const std::string& score_column,
                    const std::string& manifest_path, const std::string& model_name,
                    const std::string& out_report_json, const std::string& out_scatter_csv,
                    const std::string& calibration_ids_path);

struct SynthResult {
    std::string clip_id;
    std::string degraded_path;
    double mos = 0;
    size_t frames = 0;
};

// Applies a degradation script to a (marker-stamped) source, writes the
// degraded clip, the ground-truth alignment CSV and a manifest line under
// out_dir.
SynthResult run_synth(const std::string& script_path, const std::string& src_path,
                      const std::string& out_dir, uint64_t seed, const std::string& clip_id,
                      const std::string& source_id);

} // namespace vcm::pipeline

#endif
