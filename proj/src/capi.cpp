#include "vcm/vcm.h"

#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "error.hpp"
#include "features.hpp"
#include "marker.hpp"
#include "media_io.hpp"
#include "model.hpp"
#include "pipeline.hpp"
#include "util.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

thread_local std::string g_last_error;

vcm_status status_for(vcm::ErrorKind kind) {
    switch (kind) {
    case vcm::ErrorKind::InvalidArg: return VCM_ERR_INVALID_ARG;
    case vcm::ErrorKind::Io: return VCM_ERR_IO;
    case vcm::ErrorKind::Format: return VCM_ERR_FORMAT;
    case vcm::ErrorKind::Numeric: return VCM_ERR_NUMERIC;
    }
    return VCM_ERR_INVALID_ARG;
}

// Runs fn, translating exceptions into status codes + the thread-local
// message. All entry points funnel through here.
template <typename Fn>
vcm_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return VCM_OK;
    } catch (const vcm::Error& e) {
        g_last_error = e.what();
        return status_for(e.kind());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return VCM_ERR_INVALID_ARG;
    }
}

vcm_status fail_invalid(const char* message) {
    g_last_error = message;
    return VCM_ERR_INVALID_ARG;
}

std::string or_empty(const char* s) { return s ? std::string(s) : std::string(); }

vcm::marker::MarkerConfig to_marker_config(const vcm_marker_config* config) {
    vcm::marker::MarkerConfig c;
    if (config) {
        c.cell_size = config->cell_size;
        c.margin = config->margin;
    }
    return c;
}

vcm::media::LumaPlane to_plane(const uint8_t* data, uint32_t w, uint32_t h) {
    vcm::media::LumaPlane p(w, h);
    std::memcpy(p.samples.data(), data, size_t(w) * h);
    return p;
}

} // namespace

extern "C" {

struct vcm_video_reader {
    std::unique_ptr<vcm::media::VideoReader> impl;
};

struct vcm_model {
    vcm::model::Checkpoint checkpoint;
};

const char* vcm_version(void) { return kVersion; }

const char* vcm_last_error(void) { return g_last_error.c_str(); }

vcm_status vcm_video_reader_open(const char* path, vcm_video_reader** out) {
    if (!path || !out) return fail_invalid("path and out must be non-NULL");
    *out = nullptr;
    return guarded([&] {
        auto handle = std::make_unique<vcm_video_reader>();
        handle->impl = vcm::media::open_video(path);
        *out = handle.release();
    });
}

vcm_status vcm_video_reader_info(const vcm_video_reader* reader, uint32_t* width,
                                 uint32_t* height, uint32_t* fps_num, uint32_t* fps_den) {
    if (!reader) return fail_invalid("reader must be non-NULL");
    const vcm::media::VideoHeader& h = reader->impl->header();
    if (width) *width = h.width;
    if (height) *height = h.height;
    if (fps_num) *fps_num = h.fps_num;
    if (fps_den) *fps_den = h.fps_den;
    g_last_error.clear();
    return VCM_OK;
}

int vcm_video_reader_next_luma(vcm_video_reader* reader, uint8_t* luma) {
    if (!reader || !luma) {
        fail_invalid("reader and luma must be non-NULL");
        return -1;
    }
    int got = 0;
    const vcm_status s = guarded([&] {
        vcm::media::Frame420 frame;
        if (reader->impl->next_frame(frame)) {
            std::memcpy(luma, frame.y.samples.data(), frame.y.samples.size());
            got = 1;
        }
    });
    return s == VCM_OK ? got : -1;
}

void vcm_video_reader_close(vcm_video_reader* reader) { delete reader; }

void vcm_marker_config_default(vcm_marker_config* config) {
    if (!config) return;
    const vcm::marker::MarkerConfig defaults;
    config->cell_size = defaults.cell_size;
    config->margin = defaults.margin;
}

uint8_t vcm_crc8(const uint8_t* data, size_t len) {
    if (!data || len == 0) return 0;
    return vcm::marker::crc8(std::span<const uint8_t>(data, len));
}

vcm_status vcm_marker_stamp(uint8_t* luma, uint32_t width, uint32_t height,
                            uint32_t frame_index, const vcm_marker_config* config) {
    if (!luma) return fail_invalid("luma must be non-NULL");
    return guarded([&] {
        vcm::media::LumaPlane plane = to_plane(luma, width, height);
        vcm::marker::render_markers(plane, frame_index, to_marker_config(config));
        std::memcpy(luma, plane.samples.data(), plane.samples.size());
    });
}

int vcm_marker_decode(const uint8_t* luma, uint32_t width, uint32_t height,
                      const vcm_marker_config* config, uint32_t* frame_index, int* confidence) {
    if (!luma) {
        fail_invalid("luma must be non-NULL");
        return 0;
    }
    int decoded = 0;
    guarded([&] {
        const vcm::media::LumaPlane plane = to_plane(luma, width, height);
        if (auto result = vcm::marker::decode_frame_index(plane, to_marker_config(config))) {
            if (frame_index) *frame_index = result->frame_index;
            if (confidence)
                *confidence = result->confidence == vcm::marker::Confidence::Both ? 2 : 1;
            decoded = 1;
        }
    });
    return decoded;
}

vcm_status vcm_psnr(const uint8_t* ref, const uint8_t* deg, uint32_t width, uint32_t height,
                    double* out) {
    if (!ref || !deg || !out) return fail_invalid("ref, deg and out must be non-NULL");
    return guarded([&] { *out = vcm::features::psnr(to_plane(ref, width, height),
                                                    to_plane(deg, width, height)); });
}

vcm_status vcm_ssim(const uint8_t* ref, const uint8_t* deg, uint32_t width, uint32_t height,
                    double* out) {
    if (!ref || !deg || !out) return fail_invalid("ref, deg and out must be non-NULL");
    return guarded([&] { *out = vcm::features::ssim(to_plane(ref, width, height),
                                                    to_plane(deg, width, height)); });
}

vcm_status vcm_ms_ssim(const uint8_t* ref, const uint8_t* deg, uint32_t width, uint32_t height,
                       double* out) {
    if (!ref || !deg || !out) return fail_invalid("ref, deg and out must be non-NULL");
    return guarded([&] { *out = vcm::features::ms_ssim(to_plane(ref, width, height),
                                                       to_plane(deg, width, height)); });
}

vcm_status vcm_vif_scales(const uint8_t* ref, const uint8_t* deg, uint32_t width,
                          uint32_t height, double out[4]) {
    if (!ref || !deg || !out) return fail_invalid("ref, deg and out must be non-NULL");
    return guarded([&] {
        const auto v = vcm::features::vif_scales(to_plane(ref, width, height),
                                                 to_plane(deg, width, height));
        for (size_t i = 0; i < 4; ++i) out[i] = v[i];
    });
}

vcm_status vcm_embed(const char* src_path, const char* out_path,
                     const vcm_marker_config* config) {
    if (!src_path || !out_path) return fail_invalid("src_path and out_path must be non-NULL");
    return guarded(
        [&] { vcm::pipeline::run_embed(src_path, out_path, to_marker_config(config)); });
}

vcm_status vcm_align(const char* degraded_path, const char* reference_path,
                     const char* out_alignment_csv, const char* out_aligned_video,
                     const vcm_marker_config* config, vcm_align_summary* summary) {
    if (!degraded_path || !reference_path || !out_alignment_csv)
        return fail_invalid("degraded_path, reference_path and out_alignment_csv are required");
    return guarded([&] {
        const auto s = vcm::pipeline::run_align(degraded_path, reference_path, out_alignment_csv,
                                                or_empty(out_aligned_video),
                                                to_marker_config(config));
        if (summary) {
            summary->frames = s.frames;
            summary->decoded_both = s.decoded_both;
            summary->decoded_single = s.decoded_single;
            summary->filled = s.filled;
            summary->freezes = s.freezes;
            summary->skipped_indices = s.skipped_indices;
            summary->backward_jumps = s.backward_jumps;
        }
    });
}

vcm_status vcm_compute_features(const char* alignment_csv, const char* degraded_path,
                                const char* aligned_reference_path, const char* selection,
                                const char* adm_csv, const char* out_csv, unsigned threads) {
    if (!alignment_csv || !selection || !out_csv)
        return fail_invalid("alignment_csv, selection and out_csv are required");
    return guarded([&] {
        vcm::pipeline::run_features(alignment_csv, or_empty(degraded_path),
                                    or_empty(aligned_reference_path), selection,
                                    or_empty(adm_csv), out_csv, threads);
    });
}

void vcm_train_params_default(vcm_train_params* params) {
    if (!params) return;
    const vcm::model::ModelConfig defaults;
    params->num_layers = defaults.num_layers;
    params->hidden_size = defaults.hidden_size;
    params->batch_size = defaults.batch_size;
    params->max_epochs = defaults.max_epochs;
    params->learning_rate = defaults.learning_rate;
    params->seed = defaults.seed;
}

vcm_status vcm_train(const char* manifest_path, const char* features_dir,
                     const char* selection, const char* validation_sources,
                     const vcm_train_params* params, const char* out_checkpoint,
                     const char* log_path, vcm_train_result* result) {
    if (!manifest_path || !features_dir || !selection || !validation_sources || !out_checkpoint)
        return fail_invalid(
            "manifest_path, features_dir, selection, validation_sources and out_checkpoint are "
            "required");
    return guarded([&] {
        vcm::model::ModelConfig config;
        if (params) {
            config.num_layers = params->num_layers;
            config.hidden_size = params->hidden_size;
            config.batch_size = params->batch_size;
            config.max_epochs = params->max_epochs;
            config.learning_rate = params->learning_rate;
            config.seed = params->seed;
        }
        std::vector<std::string> sources;
        for (const std::string& s : vcm::util::split(validation_sources, ','))
            if (!vcm::util::trim(s).empty()) sources.push_back(vcm::util::trim(s));
        const auto r = vcm::pipeline::run_train(manifest_path, features_dir, selection, sources,
                                                config, out_checkpoint, or_empty(log_path));
        if (result) {
            result->best_epoch = r.best_epoch;
            result->val_pcc = r.val_pcc;
            result->val_rmse = r.val_rmse;
            result->train_clips = r.train_clips;
            result->val_clips = r.val_clips;
        }
    });
}

vcm_status vcm_model_open(const char* checkpoint_path, vcm_model** out) {
    if (!checkpoint_path || !out) return fail_invalid("checkpoint_path and out are required");
    *out = nullptr;
    return guarded([&] {
        auto handle = std::make_unique<vcm_model>();
        handle->checkpoint = vcm::model::load_checkpoint(checkpoint_path);
        *out = handle.release();
    });
}

uint32_t vcm_model_num_features(const vcm_model* model) {
    return model ? uint32_t(model->checkpoint.column_names.size()) : 0;
}

const char* vcm_model_feature_name(const vcm_model* model, uint32_t index) {
    if (!model || index >= model->checkpoint.column_names.size()) return nullptr;
    return model->checkpoint.column_names[index].c_str();
}

vcm_status vcm_model_info(const vcm_model* model, uint32_t* num_layers, uint32_t* hidden_size,
                          uint32_t* best_epoch, double* val_pcc) {
    if (!model) return fail_invalid("model must be non-NULL");
    if (num_layers) *num_layers = model->checkpoint.weights.num_layers;
    if (hidden_size) *hidden_size = model->checkpoint.weights.hidden_size;
    if (best_epoch) *best_epoch = model->checkpoint.best_epoch;
    if (val_pcc) *val_pcc = model->checkpoint.val_pcc;
    g_last_error.clear();
    return VCM_OK;
}

vcm_status vcm_model_predict(const vcm_model* model, const char* features_csv,
                             const char* out_timeline_csv, const char* timeline_metric,
                             double* clip_score) {
    if (!model || !features_csv) return fail_invalid("model and features_csv are required");
    return guarded([&] {
        const auto r = vcm::pipeline::run_predict(model->checkpoint, features_csv,
                                                  or_empty(out_timeline_csv),
                                                  or_empty(timeline_metric));
        if (clip_score) *clip_score = r.clip_score;
    });
}

void vcm_model_close(vcm_model* model) { delete model; }

vcm_status vcm_evaluate(const char* predictions_csv, const char* score_column,
                        const char* manifest_path, const char* model_name,
                        const char* out_report_json, const char* out_scatter_csv,
                        const char* calibration_ids_path, vcm_eval_result* result) {
    if (!predictions_csv || !manifest_path)
        return fail_invalid("predictions_csv and manifest_path are required");
    return guarded([&] {
        const auto r = vcm::pipeline::run_eval(
            predictions_csv, or_empty(score_column), manifest_path, or_empty(model_name),
            or_empty(out_report_json), or_empty(out_scatter_csv),
            or_empty(calibration_ids_path));
        if (result) {
            result->pcc = r.pcc;
            result->rmse = r.rmse;
            result->n_clips = r.n_clips;
        }
    });
}

vcm_status vcm_synth(const char* script_path, const char* src_path, const char* out_dir,
                     uint64_t seed, const char* clip_id, const char* source_id,
                     vcm_synth_result* result) {
    if (!script_path || !src_path || !out_dir)
        return fail_invalid("script_path, src_path and out_dir are required");
    return guarded([&] {
        const auto r = vcm::pipeline::run_synth(script_path, src_path, out_dir, seed,
                                                or_empty(clip_id), or_empty(source_id));
        if (result) {
            result->mos = r.mos;
            result->frames = r.frames;
            std::snprintf(result->clip_id, sizeof result->clip_id, "%s", r.clip_id.c_str());
        }
    });
}

} // extern "C"
