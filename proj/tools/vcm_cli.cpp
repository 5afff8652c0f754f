// vcm command line: embed / align / features / train / predict / eval / synth.
// Talks to the toolkit exclusively through the public C API.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vcm/vcm.h"

namespace {

// 0 success, 2 usage or missing input, 3 data/validation error, 4 numeric.
int exit_code_for(vcm_status s) {
    switch (s) {
    case VCM_OK: return 0;
    case VCM_ERR_INVALID_ARG: return 2;
    case VCM_ERR_IO: return 2;
    case VCM_ERR_FORMAT: return 3;
    case VCM_ERR_NUMERIC: return 4;
    }
    return 3;
}

int report_failure(vcm_status s) {
    std::fprintf(stderr, "vcm: %s\n", vcm_last_error());
    return exit_code_for(s);
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

struct MarkerOpts {
    vcm_marker_config config{};

    void attach(CLI::App* cmd) {
        vcm_marker_config_default(&config);
        cmd->add_option("--cell-size", config.cell_size, "Marker cell size in pixels")
            ->capture_default_str();
        cmd->add_option("--margin", config.margin, "Marker margin from the frame corner")
            ->capture_default_str();
    }
};

std::string run_suffix_path(const std::string& path, uint32_t run, uint32_t total_runs) {
    if (total_runs <= 1) return path;
    const size_t dot = path.rfind('.');
    const std::string stem = dot == std::string::npos ? path : path.substr(0, dot);
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    return stem + ".run" + std::to_string(run) + ext;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Videoconferencing quality toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(vcm_version()));

    int rc = 0;

    // ---- embed ----
    auto* embed = app.add_subcommand("embed", "Stamp frame-index markers onto every frame");
    std::string embed_src, embed_out;
    MarkerOpts embed_marker;
    embed->add_option("src", embed_src, "Source video (.y4m or PGM directory)")->required();
    embed->add_option("out", embed_out, "Stamped output video (.y4m)")->required();
    embed_marker.attach(embed);
    embed->callback([&] {
        const vcm_status s = vcm_embed(embed_src.c_str(), embed_out.c_str(), &embed_marker.config);
        if (s != VCM_OK) {
            rc = report_failure(s);
            return;
        }
        std::printf("stamped %s -> %s\n", embed_src.c_str(), embed_out.c_str());
    });

    // ---- align ----
    auto* align = app.add_subcommand("align", "Recover r(i) and assemble the aligned reference");
    std::string align_deg, align_ref, align_csv = "alignment.csv", align_video = "aligned_ref.y4m";
    bool align_no_video = false;
    MarkerOpts align_marker;
    align->add_option("degraded", align_deg, "Degraded recording (.y4m or PGM directory)")
        ->required();
    align->add_option("reference", align_ref, "Marker-stamped reference (.y4m)")->required();
    align->add_option("--csv", align_csv, "Alignment CSV output path")->capture_default_str();
    align->add_option("--aligned", align_video, "Aligned reference video output path")
        ->capture_default_str();
    align->add_flag("--no-aligned", align_no_video, "Skip writing the aligned reference video");
    align_marker.attach(align);
    align->callback([&] {
        vcm_align_summary summary{};
        const vcm_status s =
            vcm_align(align_deg.c_str(), align_ref.c_str(), align_csv.c_str(),
                      align_no_video ? nullptr : align_video.c_str(), &align_marker.config,
                      &summary);
        if (s != VCM_OK) {
            rc = report_failure(s);
            return;
        }
        std::printf("frames=%llu decoded_both=%llu decoded_single=%llu filled=%llu "
                    "freezes=%llu skipped_indices=%llu backward_jumps=%llu\n",
                    (unsigned long long)summary.frames, (unsigned long long)summary.decoded_both,
                    (unsigned long long)summary.decoded_single,
                    (unsigned long long)summary.filled, (unsigned long long)summary.freezes,
                    (unsigned long long)summary.skipped_indices,
                    (unsigned long long)summary.backward_jumps);
        if (summary.backward_jumps > 0)
            std::fprintf(stderr, "warning: %llu backward jumps in the alignment vector\n",
                         (unsigned long long)summary.backward_jumps);
    });

    // ---- features ----
    auto* features = app.add_subcommand("features", "Compute per-frame feature columns");
    std::string feat_alignment, feat_deg, feat_ref, feat_adm, feat_out;
    std::string feat_select = "vif,motion,skip,freeze";
    unsigned feat_threads = 1;
    features->add_option("alignment", feat_alignment, "Alignment CSV from `vcm align`")
        ->required();
    features->add_option("-o,--out", feat_out, "Feature CSV output path")->required();
    features->add_option("--select", feat_select,
                         "Feature groups: vif,adm,motion,skip,freeze,psnr,ssim")
        ->capture_default_str();
    features->add_option("--deg", feat_deg, "Degraded recording (for image metrics)");
    features->add_option("--ref", feat_ref, "Aligned reference video (for image metrics/motion)");
    features->add_option("--adm", feat_adm, "External per-frame feature CSV providing adm columns");
    features->add_option("--threads", feat_threads, "Worker threads for per-frame metrics")
        ->capture_default_str();
    features->callback([&] {
        const vcm_status s =
            vcm_compute_features(feat_alignment.c_str(), opt(feat_deg), opt(feat_ref),
                                 feat_select.c_str(), opt(feat_adm), feat_out.c_str(),
                                 feat_threads);
        if (s != VCM_OK) {
            rc = report_failure(s);
            return;
        }
        std::printf("wrote %s\n", feat_out.c_str());
    });

    // ---- train ----
    auto* train = app.add_subcommand("train", "Train the per-frame quality model");
    std::string train_manifest, train_features_dir, train_val_sources, train_out;
    std::string train_select = "vif,motion,skip,freeze", train_log, train_report;
    uint32_t train_runs = 1;
    vcm_train_params train_params{};
    vcm_train_params_default(&train_params);
    train->add_option("manifest", train_manifest, "JSON-lines clip manifest")->required();
    train->add_option("--features-dir", train_features_dir,
                      "Directory holding <clip_id>.csv feature files")
        ->required();
    train->add_option("--val-sources", train_val_sources,
                      "Comma-separated source ids held out for validation")
        ->required();
    train->add_option("-o,--out", train_out, "Checkpoint output path")->required();
    train->add_option("--select", train_select, "Feature groups to train on")
        ->capture_default_str();
    train->add_option("--log", train_log, "JSONL epoch log path");
    train->add_option("--report", train_report, "Averaged multi-run report JSON path");
    train->add_option("--runs", train_runs, "Independent training runs (seeds seed+0..n-1)")
        ->capture_default_str();
    train->add_option("--layers", train_params.num_layers, "LSTM layers")->capture_default_str();
    train->add_option("--hidden", train_params.hidden_size, "Hidden units per layer")
        ->capture_default_str();
    train->add_option("--epochs", train_params.max_epochs, "Max training epochs")
        ->capture_default_str();
    train->add_option("--batch", train_params.batch_size, "Batch size")->capture_default_str();
    train->add_option("--lr", train_params.learning_rate, "Learning rate")->capture_default_str();
    train->add_option("--seed", train_params.seed, "Base RNG seed")->capture_default_str();
    train->callback([&] {
        if (train_runs < 1) {
            std::fprintf(stderr, "vcm: --runs must be >= 1\n");
            rc = 2;
            return;
        }
        double sum_pcc = 0, sum_rmse = 0;
        std::string per_run_json;
        for (uint32_t run = 0; run < train_runs; ++run) {
            vcm_train_params params = train_params;
            params.seed = train_params.seed + run;
            const std::string ckpt = run_suffix_path(train_out, run, train_runs);
            const std::string log =
                train_log.empty() ? "" : run_suffix_path(train_log, run, train_runs);
            vcm_train_result result{};
            const vcm_status s = vcm_train(train_manifest.c_str(), train_features_dir.c_str(),
                                           train_select.c_str(), train_val_sources.c_str(),
                                           &params, ckpt.c_str(), opt(log), &result);
            if (s != VCM_OK) {
                rc = report_failure(s);
                return;
            }
            std::printf("run %u: checkpoint=%s best_epoch=%u val_pcc=%.6f val_rmse=%.6f\n", run,
                        ckpt.c_str(), result.best_epoch, result.val_pcc, result.val_rmse);
            sum_pcc += result.val_pcc;
            sum_rmse += result.val_rmse;
            if (!per_run_json.empty()) per_run_json += ",";
            per_run_json += "{\"run\":" + std::to_string(run) +
                            ",\"checkpoint\":\"" + ckpt + "\",\"best_epoch\":" +
                            std::to_string(result.best_epoch) +
                            ",\"val_pcc\":" + std::to_string(result.val_pcc) +
                            ",\"val_rmse\":" + std::to_string(result.val_rmse) + "}";
        }
        const double mean_pcc = sum_pcc / train_runs;
        const double mean_rmse = sum_rmse / train_runs;
        std::printf("runs=%u mean_val_pcc=%.6f mean_val_rmse=%.6f\n", train_runs, mean_pcc,
                    mean_rmse);
        if (!train_report.empty()) {
            FILE* f = std::fopen(train_report.c_str(), "wb");
            if (!f) {
                std::fprintf(stderr, "vcm: cannot open '%s' for writing\n", train_report.c_str());
                rc = 2;
                return;
            }
            std::fprintf(f,
                         "{\"runs\":%u,\"mean_val_pcc\":%.9g,\"mean_val_rmse\":%.9g,"
                         "\"per_run\":[%s]}\n",
                         train_runs, mean_pcc, mean_rmse, per_run_json.c_str());
            std::fclose(f);
        }
    });

    // ---- predict ----
    auto* predict = app.add_subcommand("predict", "Score a clip from its feature CSV");
    std::string pred_ckpt, pred_features, pred_timeline, pred_metric;
    predict->add_option("checkpoint", pred_ckpt, "Model checkpoint")->required();
    predict->add_option("features", pred_features, "Per-frame feature CSV")->required();
    predict->add_option("-o,--timeline", pred_timeline, "Per-frame timeline CSV output");
    predict->add_option("--timeline-metric", pred_metric,
                        "Feature column copied into the timeline CSV");
    predict->callback([&] {
        vcm_model* model = nullptr;
        vcm_status s = vcm_model_open(pred_ckpt.c_str(), &model);
        if (s != VCM_OK) {
            rc = report_failure(s);
            return;
        }
        double clip_score = 0;
        s = vcm_model_predict(model, pred_features.c_str(), opt(pred_timeline), opt(pred_metric),
                              &clip_score);
        vcm_model_close(model);
        if (s != VCM_OK) {
            rc = report_failure(s);
            return;
        }
        std::printf("%.6f\n", clip_score);
    });

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "Map predictions to MOS and report PCC/RMSE");
    std::string eval_preds, eval_manifest, eval_column = "score", eval_report, eval_scatter;
    std::string eval_calibration, eval_model_name;
    eval->add_option("predictions", eval_preds, "CSV with clip_id and a score column")->required();
    eval->add_option("manifest", eval_manifest, "JSON-lines clip manifest with MOS labels")
        ->required();
    eval->add_option("--column", eval_column, "Score column name")->capture_default_str();
    eval->add_option("--report", eval_report, "Report JSON output path");
    eval->add_option("--scatter", eval_scatter, "Scatter CSV output path (clip_id,mos,raw,mapped)");
    eval->add_option("--calibrate", eval_calibration,
                     "File listing clip ids used to fit the mapping (evaluates the rest)");
    eval->add_option("--model-name", eval_model_name, "Model name recorded in the report");
    eval->callback([&] {
        vcm_eval_result result{};
        const vcm_status s =
            vcm_evaluate(eval_preds.c_str(), eval_column.c_str(), eval_manifest.c_str(),
                         opt(eval_model_name), opt(eval_report), opt(eval_scatter),
                         opt(eval_calibration), &result);
        if (s != VCM_OK) {
            rc = report_failure(s);
            return;
        }
        std::printf("pcc=%.6f rmse=%.6f n_clips=%llu\n", result.pcc, result.rmse,
                    (unsigned long long)result.n_clips);
    });

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "Apply a degradation script to a stamped source");
    std::string synth_script, synth_src, synth_out_dir, synth_clip_id, synth_source_id;
    uint64_t synth_seed = 0;
    synth->add_option("script", synth_script, "Degradation script JSON")->required();
    synth->add_option("src", synth_src, "Marker-stamped source video (.y4m)")->required();
    synth->add_option("out_dir", synth_out_dir, "Output directory (clip + manifest line)")
        ->required();
    synth->add_option("--seed", synth_seed, "Noise RNG seed")->capture_default_str();
    synth->add_option("--clip-id", synth_clip_id, "Clip id (default derived from source + seed)");
    synth->add_option("--source-id", synth_source_id, "Source id recorded in the manifest");
    synth->callback([&] {
        vcm_synth_result result{};
        const vcm_status s = vcm_synth(synth_script.c_str(), synth_src.c_str(),
                                       synth_out_dir.c_str(), synth_seed, opt(synth_clip_id),
                                       opt(synth_source_id), &result);
        if (s != VCM_OK) {
            rc = report_failure(s);
            return;
        }
        std::printf("clip_id=%s frames=%llu mos=%.3f\n", result.clip_id,
                    (unsigned long long)result.frames, result.mos);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2; // usage error
    }
    return rc;
}
