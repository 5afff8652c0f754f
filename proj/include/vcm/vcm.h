/* vcm — videoconferencing quality toolkit, public C API.
 *
 * The library aligns degraded call recordings against marker-stamped
 * references, extracts temporal + image-quality features, scores clips with
 * a recurrent model and evaluates predictions against subjective MOS.
 *
 * All functions return VCM_OK on success; on failure they return a status
 * code and leave a human-readable message in vcm_last_error() (thread-local).
 * Paths accept .y4m files (YUV4MPEG2, 8-bit 4:2:0) and, where noted,
 * directories of P5 .pgm frames.
 */
#ifndef VCM_H
#define VCM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vcm_status {
    VCM_OK = 0,
    VCM_ERR_INVALID_ARG = 1, /* unusable parameters or selections */
    VCM_ERR_IO = 2,          /* missing/unreadable/unwritable files */
    VCM_ERR_FORMAT = 3,      /* malformed or inconsistent data */
    VCM_ERR_NUMERIC = 4      /* divergence or degenerate numerics */
} vcm_status;

const char* vcm_version(void);

/* Message for the most recent failure on this thread ("" if none). */
const char* vcm_last_error(void);

/* ---- video access ------------------------------------------------- */

typedef struct vcm_video_reader vcm_video_reader;

vcm_status vcm_video_reader_open(const char* path, vcm_video_reader** out);
vcm_status vcm_video_reader_info(const vcm_video_reader* reader, uint32_t* width,
                                 uint32_t* height, uint32_t* fps_num, uint32_t* fps_den);
/* Copies the next luma plane (width*height bytes) into `luma`.
 * Returns 1 on a frame, 0 on end of stream, -1 on error. */
int vcm_video_reader_next_luma(vcm_video_reader* reader, uint8_t* luma);
void vcm_video_reader_close(vcm_video_reader* reader);

/* ---- markers ------------------------------------------------------ */

typedef struct vcm_marker_config {
    uint32_t cell_size; /* pixels per cell, >= 2 */
    uint32_t margin;    /* pixels from the frame corner */
} vcm_marker_config;

void vcm_marker_config_default(vcm_marker_config* config);

uint8_t vcm_crc8(const uint8_t* data, size_t len);

/* Stamps both corner markers into a luma plane in place. */
vcm_status vcm_marker_stamp(uint8_t* luma, uint32_t width, uint32_t height,
                            uint32_t frame_index, const vcm_marker_config* config);

/* Returns 1 if decoded (confidence: 2 = both markers, 1 = single), 0 if the
 * frame is unreadable. */
int vcm_marker_decode(const uint8_t* luma, uint32_t width, uint32_t height,
                      const vcm_marker_config* config, uint32_t* frame_index, int* confidence);

/* ---- full-reference frame metrics (8-bit luma planes) ------------- */

vcm_status vcm_psnr(const uint8_t* ref, const uint8_t* deg, uint32_t width, uint32_t height,
                    double* out);
vcm_status vcm_ssim(const uint8_t* ref, const uint8_t* deg, uint32_t width, uint32_t height,
                    double* out);
vcm_status vcm_ms_ssim(const uint8_t* ref, const uint8_t* deg, uint32_t width, uint32_t height,
                       double* out);
/* out[0..3] = vif_scale0..3 */
vcm_status vcm_vif_scales(const uint8_t* ref, const uint8_t* deg, uint32_t width,
                          uint32_t height, double out[4]);

/* ---- pipeline stages ---------------------------------------------- */

/* Stamps frame indices onto every frame of src. */
vcm_status vcm_embed(const char* src_path, const char* out_path,
                     const vcm_marker_config* config);

typedef struct vcm_align_summary {
    uint64_t frames;
    uint64_t decoded_both;
    uint64_t decoded_single;
    uint64_t filled;
    uint64_t freezes;
    uint64_t skipped_indices;
    uint64_t backward_jumps;
} vcm_align_summary;

/* Scans markers, writes the alignment CSV and, when out_aligned_video is
 * non-NULL, the aligned reference ordered by r(i). reference_path must be a
 * .y4m file. */
vcm_status vcm_align(const char* degraded_path, const char* reference_path,
                     const char* out_alignment_csv, const char* out_aligned_video,
                     const vcm_marker_config* config, vcm_align_summary* summary);

/* selection: comma-separated groups out of
 * vif, adm, motion, skip, freeze, psnr, ssim.
 * degraded_path / aligned_reference_path / adm_csv may be NULL when the
 * selection does not need them. */
vcm_status vcm_compute_features(const char* alignment_csv, const char* degraded_path,
                                const char* aligned_reference_path, const char* selection,
                                const char* adm_csv, const char* out_csv, unsigned threads);

/* ---- model -------------------------------------------------------- */

typedef struct vcm_train_params {
    uint32_t num_layers;    /* default 6 */
    uint32_t hidden_size;   /* default 256 */
    uint32_t batch_size;    /* default 16 */
    uint32_t max_epochs;    /* default 30 */
    double learning_rate;   /* default 1e-3 */
    uint64_t seed;          /* default 0 */
} vcm_train_params;

void vcm_train_params_default(vcm_train_params* params);

typedef struct vcm_train_result {
    uint32_t best_epoch;
    double val_pcc;
    double val_rmse;
    uint64_t train_clips;
    uint64_t val_clips;
} vcm_train_result;

/* Trains from manifest + <features_dir>/<clip_id>.csv files, holding out the
 * comma-separated validation_sources; writes the best checkpoint and an
 * optional JSONL epoch log (log_path may be NULL). */
vcm_status vcm_train(const char* manifest_path, const char* features_dir,
                     const char* selection, const char* validation_sources,
                     const vcm_train_params* params, const char* out_checkpoint,
                     const char* log_path, vcm_train_result* result);

typedef struct vcm_model vcm_model;

vcm_status vcm_model_open(const char* checkpoint_path, vcm_model** out);
uint32_t vcm_model_num_features(const vcm_model* model);
/* Name of input column i, owned by the model handle. */
const char* vcm_model_feature_name(const vcm_model* model, uint32_t index);
vcm_status vcm_model_info(const vcm_model* model, uint32_t* num_layers, uint32_t* hidden_size,
                          uint32_t* best_epoch, double* val_pcc);
/* Scores a feature CSV; writes the per-frame timeline when out_timeline_csv
 * is non-NULL (timeline_metric may name one extra feature column to copy,
 * or be NULL). */
vcm_status vcm_model_predict(const vcm_model* model, const char* features_csv,
                             const char* out_timeline_csv, const char* timeline_metric,
                             double* clip_score);
void vcm_model_close(vcm_model* model);

/* ---- evaluation ----------------------------------------------------*/

typedef struct vcm_eval_result {
    double pcc;
    double rmse;
    uint64_t n_clips;
} vcm_eval_result;

/* Joins predictions (clip_id + score_column, default "score") against
 * manifest MOS, fits the sigmoid MOS mapping, writes report JSON and scatter
 * CSV (either may be NULL). calibration_ids_path (nullable) fits the mapping
 * on the listed clips and evaluates the rest. */
vcm_status vcm_evaluate(const char* predictions_csv, const char* score_column,
                        const char* manifest_path, const char* model_name,
                        const char* out_report_json, const char* out_scatter_csv,
                        const char* calibration_ids_path, vcm_eval_result* result);

/* ---- synthetic degradation generator ------------------------------ */

typedef struct vcm_synth_result {
    double mos;
    uint64_t frames;
    char clip_id[128];
} vcm_synth_result;

/* Applies a JSON degradation script to a stamped source, writing the
 * degraded clip, its ground-truth alignment CSV and a manifest line under
 * out_dir. clip_id/source_id may be NULL to derive them from the source. */
vcm_status vcm_synth(const char* script_path, const char* src_path, const char* out_dir,
                     uint64_t seed, const char* clip_id, const char* source_id,
                     vcm_synth_result* result);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* VCM_H */
