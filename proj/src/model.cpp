#include "model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "error.hpp"
#include "eval.hpp"

namespace vcm::model {

void ModelConfig::validate() const {
    if (num_layers < 1) raise(ErrorKind::InvalidArg, "num_layers must be >= 1");
    if (hidden_size < 1) raise(ErrorKind::InvalidArg, "hidden_size must be >= 1");
    if (input_size < 1) raise(ErrorKind::InvalidArg, "input_size must be >= 1");
    if (!(learning_rate > 0)) raise(ErrorKind::InvalidArg, "learning_rate must be positive");
    if (batch_size < 1) raise(ErrorKind::InvalidArg, "batch_size must be >= 1");
}

size_t Weights::param_count(uint32_t layers, uint32_t hidden, uint32_t input) {
    size_t n = 0;
    for (uint32_t l = 0; l < layers; ++l) {
        const size_t d = (l == 0) ? input : hidden;
        n += size_t(4) * hidden * d + size_t(4) * hidden * hidden + size_t(4) * hidden;
    }
    return n + hidden + 1; // head
}

size_t Weights::wx_offset(size_t layer) const {
    size_t off = 0;
    for (size_t l = 0; l < layer; ++l) {
        const size_t d = layer_input(l);
        off += size_t(4) * hidden_size * d + size_t(4) * hidden_size * hidden_size +
               size_t(4) * hidden_size;
    }
    return off;
}

size_t Weights::wh_offset(size_t layer) const {
    return wx_offset(layer) + size_t(4) * hidden_size * layer_input(layer);
}

size_t Weights::bias_offset(size_t layer) const {
    return wh_offset(layer) + size_t(4) * hidden_size * hidden_size;
}

size_t Weights::head_w_offset() const {
    return wx_offset(num_layers); // one past the last layer block
}

size_t Weights::head_b_offset() const { return head_w_offset() + hidden_size; }

namespace {

// [0,1) from the top 53 bits; keeps initialization identical across platforms.
double next_unit(std::mt19937_64& rng) {
    return double(rng() >> 11) * 0x1.0p-53;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

Weights init_model(const ModelConfig& config) {
    config.validate();
    Weights w;
    w.num_layers = config.num_layers;
    w.hidden_size = config.hidden_size;
    w.input_size = config.input_size;
    w.flat.resize(Weights::param_count(config.num_layers, config.hidden_size, config.input_size));

    std::mt19937_64 rng(config.seed);
    const double k = 1.0 / std::sqrt(double(config.hidden_size));
    for (double& p : w.flat) p = (2.0 * next_unit(rng) - 1.0) * k;
    // forget-gate bias offset stabilizes early training of deep stacks
    const uint32_t h = config.hidden_size;
    for (uint32_t l = 0; l < config.num_layers; ++l) {
        double* bias = w.flat.data() + w.bias_offset(l);
        for (uint32_t u = 0; u < h; ++u) bias[h + u] += 1.0;
    }
    return w;
}

std::vector<double> QualityTimeline::clamped() const {
    std::vector<double> out(per_frame.size());
    for (size_t i = 0; i < per_frame.size(); ++i) out[i] = std::clamp(per_frame[i], 1.0, 5.0);
    return out;
}

namespace {

// Per-(t, layer) activations kept for backpropagation.
struct Cache {
    size_t steps = 0, layers = 0, hidden = 0;
    std::vector<double> gate_i, gate_f, gate_g, gate_o, cell, tanh_cell, hidden_out;

    void reset(size_t t, size_t l, size_t h) {
        steps = t;
        layers = l;
        hidden = h;
        const size_t n = t * l * h;
        gate_i.assign(n, 0);
        gate_f.assign(n, 0);
        gate_g.assign(n, 0);
        gate_o.assign(n, 0);
        cell.assign(n, 0);
        tanh_cell.assign(n, 0);
        hidden_out.assign(n, 0);
    }
    size_t idx(size_t t, size_t l) const { return (t * layers + l) * hidden; }
};

QualityTimeline forward_impl(const Weights& w, const features::FeatureMatrix& input,
                             Cache* cache) {
    if (input.cols() != w.input_size)
        raise(ErrorKind::Format, "input has " + std::to_string(input.cols()) +
                                     " features, model expects " + std::to_string(w.input_size));
    if (input.rows == 0) raise(ErrorKind::InvalidArg, "input has no frames");

    const size_t T = input.rows, L = w.num_layers, H = w.hidden_size;
    if (cache) cache->reset(T, L, H);

    std::vector<double> h_state(L * H, 0.0), c_state(L * H, 0.0);
    std::vector<double> pre(4 * H), x_buf(std::max<size_t>(w.input_size, H));

    QualityTimeline out;
    out.per_frame.resize(T);
    const double* head_w = w.flat.data() + w.head_w_offset();
    const double head_b = w.flat[w.head_b_offset()];

    for (size_t t = 0; t < T; ++t) {
        const double* x = &input.values[t * w.input_size];
        for (size_t l = 0; l < L; ++l) {
            const size_t d = w.layer_input(l);
            const double* wx = w.flat.data() + w.wx_offset(l);
            const double* wh = w.flat.data() + w.wh_offset(l);
            const double* bias = w.flat.data() + w.bias_offset(l);
            double* h_prev = h_state.data() + l * H;
            double* c_prev = c_state.data() + l * H;

            for (size_t r = 0; r < 4 * H; ++r) {
                double acc = bias[r];
                const double* wx_row = wx + r * d;
                for (size_t j = 0; j < d; ++j) acc += wx_row[j] * x[j];
                const double* wh_row = wh + r * H;
                for (size_t j = 0; j < H; ++j) acc += wh_row[j] * h_prev[j];
                pre[r] = acc;
            }
            for (size_t u = 0; u < H; ++u) {
                const double gi = sigmoid(pre[u]);
                const double gf = sigmoid(pre[H + u]);
                const double gg = std::tanh(pre[2 * H + u]);
                const double go = sigmoid(pre[3 * H + u]);
                const double c = gf * c_prev[u] + gi * gg;
                const double tc = std::tanh(c);
                const double h = go * tc;
                if (cache) {
                    const size_t k = cache->idx(t, l) + u;
                    cache->gate_i[k] = gi;
                    cache->gate_f[k] = gf;
                    cache->gate_g[k] = gg;
                    cache->gate_o[k] = go;
                    cache->cell[k] = c;
                    cache->tanh_cell[k] = tc;
                    cache->hidden_out[k] = h;
                }
                c_prev[u] = c;
                h_prev[u] = h;
            }
            // this layer's output feeds the next layer at the same t
            std::memcpy(x_buf.data(), h_prev, H * sizeof(double));
            x = x_buf.data();
        }
        double q = head_b;
        const double* h_top = h_state.data() + (L - 1) * H;
        for (size_t u = 0; u < H; ++u) q += head_w[u] * h_top[u];
        out.per_frame[t] = q;
    }

    double sum = 0;
    for (double q : out.per_frame) sum += q;
    out.clip_score = sum / double(T);
    return out;
}

// Accumulates parameter gradients for one clip given dL/dq per frame.
void backward_impl(const Weights& w, const features::FeatureMatrix& input, const Cache& cache,
                   std::span<const double> dq, std::vector<double>& grad) {
    const size_t T = cache.steps, L = cache.layers, H = cache.hidden;
    const double* head_w = w.flat.data() + w.head_w_offset();

    std::vector<double> dh_next(L * H, 0.0), dc_next(L * H, 0.0);
    std::vector<double> dh(H), dpre(4 * H), dx_above(std::max<size_t>(w.input_size, H));

    for (size_t t = T; t-- > 0;) {
        // head gradients and the seed for the top layer
        {
            const double* h_top = &cache.hidden_out[cache.idx(t, L - 1)];
            double* g_head_w = grad.data() + w.head_w_offset();
            for (size_t u = 0; u < H; ++u) g_head_w[u] += dq[t] * h_top[u];
            grad[w.head_b_offset()] += dq[t];
        }
        bool have_dx_above = false;
        for (size_t l = L; l-- > 0;) {
            const size_t k0 = cache.idx(t, l);
            const double* gi = &cache.gate_i[k0];
            const double* gf = &cache.gate_f[k0];
            const double* gg = &cache.gate_g[k0];
            const double* go = &cache.gate_o[k0];
            const double* tc = &cache.tanh_cell[k0];
            const double* c_prev = (t > 0) ? &cache.cell[cache.idx(t - 1, l)] : nullptr;
            const double* h_prev = (t > 0) ? &cache.hidden_out[cache.idx(t - 1, l)] : nullptr;

            for (size_t u = 0; u < H; ++u) {
                double v = dh_next[l * H + u];
                if (l == L - 1) v += head_w[u] * dq[t];
                else if (have_dx_above) v += dx_above[u];
                dh[u] = v;
            }

            for (size_t u = 0; u < H; ++u) {
                const double d_o = dh[u] * tc[u];
                double dc = dh[u] * go[u] * (1.0 - tc[u] * tc[u]) + dc_next[l * H + u];
                const double di = dc * gg[u];
                const double df = dc * (c_prev ? c_prev[u] : 0.0);
                const double dg = dc * gi[u];
                dpre[u] = di * gi[u] * (1.0 - gi[u]);
                dpre[H + u] = df * gf[u] * (1.0 - gf[u]);
                dpre[2 * H + u] = dg * (1.0 - gg[u] * gg[u]);
                dpre[3 * H + u] = d_o * go[u] * (1.0 - go[u]);
                dc_next[l * H + u] = dc * gf[u];
            }

            const size_t d = w.layer_input(l);
            const double* x = (l == 0) ? &input.values[t * w.input_size]
                                       : &cache.hidden_out[cache.idx(t, l - 1)];
            double* g_wx = grad.data() + w.wx_offset(l);
            double* g_wh = grad.data() + w.wh_offset(l);
            double* g_b = grad.data() + w.bias_offset(l);
            const double* wx = w.flat.data() + w.wx_offset(l);
            const double* wh = w.flat.data() + w.wh_offset(l);

            std::fill(dx_above.begin(), dx_above.begin() + std::ptrdiff_t(d), 0.0);
            for (size_t r = 0; r < 4 * H; ++r) {
                const double dp = dpre[r];
                if (dp == 0.0) continue;
                double* g_wx_row = g_wx + r * d;
                const double* wx_row = wx + r * d;
                for (size_t j = 0; j < d; ++j) {
                    g_wx_row[j] += dp * x[j];
                    dx_above[j] += wx_row[j] * dp;
                }
                g_b[r] += dp;
                double* g_wh_row = g_wh + r * H;
                if (h_prev) {
                    for (size_t j = 0; j < H; ++j) g_wh_row[j] += dp * h_prev[j];
                }
            }
            // recurrent gradient into h_{t-1} of this layer
            for (size_t u = 0; u < H; ++u) {
                double acc = 0;
                for (size_t r = 0; r < 4 * H; ++r) acc += wh[r * H + u] * dpre[r];
                dh_next[l * H + u] = acc;
            }
            have_dx_above = true;
        }
    }
}

} // namespace

QualityTimeline forward(const Weights& weights, const features::FeatureMatrix& input) {
    return forward_impl(weights, input, nullptr);
}

LossAndGrad loss_and_gradients(const Weights& weights, std::span<const Sample> batch) {
    if (batch.empty()) raise(ErrorKind::InvalidArg, "empty batch");
    LossAndGrad out;
    out.grad.assign(weights.flat.size(), 0.0);
    const double inv_b = 1.0 / double(batch.size());

    Cache cache;
    for (const Sample& sample : batch) {
        const QualityTimeline tl = forward_impl(weights, *sample.input, &cache);
        const double err = tl.clip_score - sample.mos;
        out.loss += err * err * inv_b;
        // d(loss)/dq_t: mean over batch, clip = mean over frames
        std::vector<double> dq(sample.input->rows, 2.0 * err * inv_b / double(sample.input->rows));
        backward_impl(weights, *sample.input, cache, dq, out.grad);
    }
    return out;
}

namespace {

double safe_pearson(std::span<const double> x, std::span<const double> y) {
    try {
        return eval::pearson(x, y);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Numeric) return 0.0; // degenerate predictions
        throw;
    }
}

struct ValScore {
    double pcc = 0, rmse = 0;
};

ValScore validate_on(const Weights& w, std::span<const features::FeatureMatrix> val,
                     std::span<const double> mos) {
    std::vector<double> preds;
    preds.reserve(val.size());
    for (const auto& m : val) preds.push_back(forward(w, m).clip_score);
    ValScore s;
    s.pcc = safe_pearson(preds, mos);
    s.rmse = eval::rmse(preds, mos);
    return s;
}

} // namespace

Checkpoint train(std::span<const features::FeatureMatrix> train_features,
                 std::span<const double> train_mos,
                 std::span<const features::FeatureMatrix> val_features,
                 std::span<const double> val_mos, const ModelConfig& config, const LogSink& log) {
    if (train_features.empty() || val_features.empty())
        raise(ErrorKind::InvalidArg, "training and validation sets must be non-empty");
    if (train_features.size() != train_mos.size() || val_features.size() != val_mos.size())
        raise(ErrorKind::InvalidArg, "feature/label count mismatch");

    const auto& columns = train_features[0].column_names;
    for (const auto& m : train_features)
        if (m.column_names != columns)
            raise(ErrorKind::Format, "training matrices have differing columns");
    for (const auto& m : val_features)
        if (m.column_names != columns)
            raise(ErrorKind::Format,
                  "validation matrix '" + m.clip_id + "' columns differ from training set");

    ModelConfig cfg = config;
    cfg.input_size = uint32_t(columns.size());
    cfg.validate();

    const features::NormalizationStats norm = features::fit_normalization(train_features);
    std::vector<features::FeatureMatrix> train_n(train_features.begin(), train_features.end());
    std::vector<features::FeatureMatrix> val_n(val_features.begin(), val_features.end());
    for (auto& m : train_n) features::apply_normalization(m, norm);
    for (auto& m : val_n) features::apply_normalization(m, norm);

    Weights weights = init_model(cfg);

    // Adam state
    std::vector<double> adam_m(weights.flat.size(), 0.0), adam_v(weights.flat.size(), 0.0);
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
    constexpr double kClipNorm = 5.0;
    size_t adam_step = 0;

    Checkpoint best;
    best.config = cfg;
    best.weights = weights;
    best.norm = norm;
    best.column_names = columns;
    best.best_epoch = 0;
    {
        const ValScore s0 = validate_on(weights, val_n, val_mos);
        best.val_pcc = s0.pcc;
        best.val_rmse = s0.rmse;
        if (log) log(EpochLog{0, 0.0, s0.pcc, s0.rmse});
    }

    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<size_t> order(train_n.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (uint32_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        // Fisher-Yates with the session RNG keeps runs reproducible
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[size_t(rng() % i)]);

        double epoch_loss = 0;
        size_t clips_seen = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<Sample> batch;
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i)
                batch.push_back(Sample{&train_n[order[i]], train_mos[order[i]]});

            LossAndGrad lg = loss_and_gradients(weights, batch);
            if (!std::isfinite(lg.loss))
                raise(ErrorKind::Numeric, "training diverged (loss is not finite) at epoch " +
                                              std::to_string(epoch));
            epoch_loss += lg.loss * double(batch.size());
            clips_seen += batch.size();

            double norm_sq = 0;
            for (double g : lg.grad) norm_sq += g * g;
            if (norm_sq > kClipNorm * kClipNorm) {
                const double scale = kClipNorm / std::sqrt(norm_sq);
                for (double& g : lg.grad) g *= scale;
            }

            ++adam_step;
            const double bc1 = 1.0 - std::pow(kBeta1, double(adam_step));
            const double bc2 = 1.0 - std::pow(kBeta2, double(adam_step));
            for (size_t i = 0; i < weights.flat.size(); ++i) {
                adam_m[i] = kBeta1 * adam_m[i] + (1.0 - kBeta1) * lg.grad[i];
                adam_v[i] = kBeta2 * adam_v[i] + (1.0 - kBeta2) * lg.grad[i] * lg.grad[i];
                const double m_hat = adam_m[i] / bc1;
                const double v_hat = adam_v[i] / bc2;
                weights.flat[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + kAdamEps);
            }
        }

        const ValScore s = validate_on(weights, val_n, val_mos);
        if (log) log(EpochLog{epoch, epoch_loss / double(clips_seen), s.pcc, s.rmse});
        if (s.pcc > best.val_pcc) {
            best.weights = weights;
            best.best_epoch = epoch;
            best.val_pcc = s.pcc;
            best.val_rmse = s.rmse;
        }
    }
    return best;
}

QualityTimeline predict(const Checkpoint& checkpoint, const features::FeatureMatrix& raw) {
    features::FeatureMatrix selected = features::select_columns(raw, checkpoint.column_names);
    features::apply_normalization(selected, checkpoint.norm);
    return forward(checkpoint.weights, selected);
}

// ---- serialization ----

namespace {

constexpr char kMagic[4] = {'V', 'C', 'M', 'M'};
constexpr uint16_t kVersion = 1;

void put_bytes(std::ostream& out, const void* p, size_t n) {
    out.write(static_cast<const char*>(p), std::streamsize(n));
}
void put_u16(std::ostream& out, uint16_t v) {
    uint8_t b[2] = {uint8_t(v), uint8_t(v >> 8)};
    put_bytes(out, b, 2);
}
void put_u32(std::ostream& out, uint32_t v) {
    uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    put_bytes(out, b, 4);
}
void put_u64(std::ostream& out, uint64_t v) {
    uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = uint8_t(v >> (8 * i));
    put_bytes(out, b, 8);
}
void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

void get_bytes(std::istream& in, void* p, size_t n) {
    in.read(static_cast<char*>(p), std::streamsize(n));
    if (size_t(in.gcount()) != n) raise(ErrorKind::Format, "truncated checkpoint");
}
uint16_t get_u16(std::istream& in) {
    uint8_t b[2];
    get_bytes(in, b, 2);
    return uint16_t(b[0] | (uint16_t(b[1]) << 8));
}
uint32_t get_u32(std::istream& in) {
    uint8_t b[4];
    get_bytes(in, b, 4);
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
           (uint32_t(b[3]) << 24);
}
uint64_t get_u64(std::istream& in) {
    uint8_t b[8];
    get_bytes(in, b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
    return v;
}
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

} // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
    const Weights& w = checkpoint.weights;
    if (checkpoint.column_names.size() != w.input_size)
        raise(ErrorKind::Format, "checkpoint column count does not match input size");
    if (checkpoint.norm.column_names != checkpoint.column_names)
        raise(ErrorKind::Format, "checkpoint normalization stats do not match columns");
    if (w.flat.size() != Weights::param_count(w.num_layers, w.hidden_size, w.input_size))
        raise(ErrorKind::Format, "checkpoint weight tensor size is inconsistent");

    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::Io, "cannot open '" + path + "' for writing");
    put_bytes(out, kMagic, 4);
    put_u16(out, kVersion);
    put_u16(out, 0); // reserved
    put_u32(out, w.num_layers);
    put_u32(out, w.hidden_size);
    put_u32(out, w.input_size);
    put_f64(out, checkpoint.config.learning_rate);
    put_u32(out, checkpoint.config.batch_size);
    put_u32(out, checkpoint.config.max_epochs);
    put_u64(out, checkpoint.config.seed);
    put_u32(out, checkpoint.best_epoch);
    put_f64(out, checkpoint.val_pcc);
    put_f64(out, checkpoint.val_rmse);
    put_u32(out, uint32_t(checkpoint.column_names.size()));
    for (const std::string& name : checkpoint.column_names) {
        put_u32(out, uint32_t(name.size()));
        put_bytes(out, name.data(), name.size());
    }
    for (double v : checkpoint.norm.mean) put_f64(out, v);
    for (double v : checkpoint.norm.stddev) put_f64(out, v);
    put_u64(out, w.flat.size());
    for (double v : w.flat) put_f64(out, v);
    out.flush();
    if (!out) raise(ErrorKind::Io, "write failure on '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::Io, "cannot open '" + path + "' for reading");
    char magic[4];
    get_bytes(in, magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        raise(ErrorKind::Format, "'" + path + "' is not a model checkpoint (bad magic)");
    const uint16_t version = get_u16(in);
    if (version != kVersion)
        raise(ErrorKind::Format, "unsupported checkpoint version " + std::to_string(version) +
                                     " (this build reads version " + std::to_string(kVersion) +
                                     ")");
    get_u16(in); // reserved

    Checkpoint ck;
    ck.weights.num_layers = get_u32(in);
    ck.weights.hidden_size = get_u32(in);
    ck.weights.input_size = get_u32(in);
    ck.config.num_layers = ck.weights.num_layers;
    ck.config.hidden_size = ck.weights.hidden_size;
    ck.config.input_size = ck.weights.input_size;
    ck.config.learning_rate = get_f64(in);
    ck.config.batch_size = get_u32(in);
    ck.config.max_epochs = get_u32(in);
    ck.config.seed = get_u64(in);
    ck.best_epoch = get_u32(in);
    ck.val_pcc = get_f64(in);
    ck.val_rmse = get_f64(in);

    const uint32_t ncols = get_u32(in);
    if (ncols == 0 || ncols != ck.weights.input_size || ncols > 65536)
        raise(ErrorKind::Format, "checkpoint column count " + std::to_string(ncols) +
                                     " does not match input size " +
                                     std::to_string(ck.weights.input_size));
    ck.column_names.reserve(ncols);
    for (uint32_t i = 0; i < ncols; ++i) {
        const uint32_t len = get_u32(in);
        if (len > 4096) raise(ErrorKind::Format, "unreasonable column name length");
        std::string name(len, '\0');
        get_bytes(in, name.data(), len);
        ck.column_names.push_back(std::move(name));
    }
    ck.norm.column_names = ck.column_names;
    ck.norm.mean.resize(ncols);
    ck.norm.stddev.resize(ncols);
    for (double& v : ck.norm.mean) v = get_f64(in);
    for (double& v : ck.norm.stddev) v = get_f64(in);

    const uint64_t n_params = get_u64(in);
    const size_t expected =
        Weights::param_count(ck.weights.num_layers, ck.weights.hidden_size, ck.weights.input_size);
    if (n_params != expected)
        raise(ErrorKind::Format, "checkpoint has " + std::to_string(n_params) +
                                     " parameters, dims require " + std::to_string(expected));
    ck.weights.flat.resize(expected);
    for (double& v : ck.weights.flat) v = get_f64(in);

    if (in.peek() != EOF) raise(ErrorKind::Format, "trailing bytes after checkpoint payload");

    ModelConfig check = ck.config;
    check.validate();
    return ck;
}

} // namespace vcm::model
