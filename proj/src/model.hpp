#ifndef VCM_MODEL_HPP
#define VCM_MODEL_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "features.hpp"

namespace vcm::model {

struct ModelConfig {
    uint32_t num_layers = 6;
    uint32_t hidden_size = 256;
    uint32_t input_size = 0;
    double learning_rate = 1e-3;
    uint32_t batch_size = 16;
    uint32_t max_epochs = 30;
    uint64_t seed = 0;

    void validate() const;
};

// Flat parameter vector. Layout, per layer l (input dim D_l = input_size for
// l = 0, hidden_size above): W_x (4H x D_l, row-major), W_h (4H x H), bias
// (4H); then head weight (H) and head bias (1). Gate row order inside 4H
// blocks is input, forget, cell, output.
struct Weights {
    uint32_t num_layers = 0;
    uint32_t hidden_size = 0;
    uint32_t input_size = 0;
    std::vector<double> flat;

    size_t layer_input(size_t layer) const { return layer == 0 ? input_size : hidden_size; }
    size_t wx_offset(size_t layer) const;
    size_t wh_offset(size_t layer) const;
    size_t bias_offset(size_t layer) const;
    size_t head_w_offset() const;
    size_t head_b_offset() const;
    static size_t param_count(uint32_t layers, uint32_t hidden, uint32_t input);
};

// uniform(-k, k) with k = 1/sqrt(hidden_size), +1.0 on the forget-gate bias;
// deterministic in config.seed.
Weights init_model(const ModelConfig& config);

struct QualityTimeline {
    std::vector<double> per_frame; // unclamped MOS-scale scores
    double clip_score = 0;         // arithmetic mean of per_frame

    std::vector<double> clamped() const; // [1,5] view for plotting
};

// Runs the stacked LSTM over a (normalized) T x F matrix: per-frame linear
// head on the top hidden state, then average pooling for the clip score.
QualityTimeline forward(const Weights& weights, const features::FeatureMatrix& input);

struct Sample {
    const features::FeatureMatrix* input = nullptr; // normalized features
    double mos = 0;
};

// Mean squared error on clip scores plus full-BPTT gradients; gradients have
// the same flat layout as the weights.
struct LossAndGrad {
    double loss = 0;
    std::vector<double> grad;
};
LossAndGrad loss_and_gradients(const Weights& weights, std::span<const Sample> batch);

struct Checkpoint {
    ModelConfig config;
    Weights weights;
    features::NormalizationStats norm; // column order == column_names
    std::vector<std::string> column_names;
    uint32_t best_epoch = 0;
    double val_pcc = 0;
    double val_rmse = 0;
};

struct EpochLog {
    uint32_t epoch = 0;
    double train_loss = 0;
    double val_pcc = 0;
    double val_rmse = 0;
};
using LogSink = std::function<void(const EpochLog&)>;

// Adam with gradient-norm clipping at 5.0; after every epoch the validation
// PCC decides the retained checkpoint. Inputs are raw feature matrices; the
// z-score stats are fitted on the training set and stored in the checkpoint.
Checkpoint train(std::span<const features::FeatureMatrix> train_features,
                 std::span<const double> train_mos,
                 std::span<const features::FeatureMatrix> val_features,
                 std::span<const double> val_mos, const ModelConfig& config,
                 const LogSink& log = {});

// Applies the checkpoint to a raw feature matrix: columns are selected and
// ordered per the checkpoint (missing columns are reported by name),
// normalized, and run through the network.
QualityTimeline predict(const Checkpoint& checkpoint, const features::FeatureMatrix& raw);

// Binary format "VCMM" v1, little-endian; see README for the exact layout.
// load(save(x)) is bit-exact.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace vcm::model

#endif
