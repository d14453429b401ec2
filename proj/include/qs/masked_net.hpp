#ifndef QS_MASKED_NET_HPP
#define QS_MASKED_NET_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qs::net {

// channels x T signal, row-major per channel.
struct Signal {
    int channels = 0;
    int t_len = 0;
    std::vector<double> data;

    static Signal zeros(int channels, int t_len) {
        Signal s;
        s.channels = channels;
        s.t_len = t_len;
        s.data.assign(static_cast<size_t>(channels) * t_len, 0.0);
        return s;
    }
    double* ch(int c) { return data.data() + static_cast<size_t>(c) * t_len; }
    const double* ch(int c) const { return data.data() + static_cast<size_t>(c) * t_len; }
    double& at(int c, int t) { return data[static_cast<size_t>(c) * t_len + t]; }
    double at(int c, int t) const { return data[static_cast<size_t>(c) * t_len + t]; }
};

struct Band {
    int past = 512;
    int future = 1;
};

// Batched channels x T x batch layout with the batch dimension contiguous;
// training kernels stream each weight row once per mini-batch.
struct BatchPlanes {
    int channels = 0;
    int t_len = 0;
    int batch = 0;
    std::vector<double> data;

    static BatchPlanes zeros(int channels, int t_len, int batch) {
        BatchPlanes p;
        p.channels = channels;
        p.t_len = t_len;
        p.batch = batch;
        p.data.assign(static_cast<size_t>(channels) * t_len * batch, 0.0);
        return p;
    }
    double* lane(int c, int t) {
        return data.data() + (static_cast<size_t>(c) * t_len + t) * batch;
    }
    const double* lane(int c, int t) const {
        return data.data() + (static_cast<size_t>(c) * t_len + t) * batch;
    }
};

BatchPlanes to_planes(const std::vector<const Signal*>& samples);
std::vector<Signal> from_planes(const BatchPlanes& planes);

// Named parameter array with optional band metadata, registered with the
// optimizer and the checkpoint writer.
struct Tensor {
    std::string name;
    std::vector<int> shape;
    std::optional<Band> band;
    bool trainable = true;
    std::vector<double> value;
    std::vector<double> grad;

    size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

// Banded dense time-to-time linear map: weights vary with absolute time and
// are exactly zero outside {(tau, t) : tau - past <= t <= tau + future}.
// Rows are stored packed (only the in-band run of each output step), so the
// full-past last layer is a contiguous lower-triangle-plus-superdiagonal and
// out-of-band weights are structurally zero.
class MaskedLinear {
public:
    MaskedLinear() = default;
    MaskedLinear(std::string name, int in_ch, int out_ch, int t_len, Band band,
                 bool with_bias = true);

    void init_uniform(double scale, class InitStream& stream);

    void forward(const Signal& x, Signal& y) const;
    // Accumulates parameter gradients for (x, grad_y).
    void accumulate_grads(const Signal& x, const Signal& grad_y);
    // Adds the input gradient of grad_y into grad_x.
    void backprop_input(const Signal& grad_y, Signal& grad_x) const;

    // Batched variants over the batch-contiguous layout.
    void forward_b(const BatchPlanes& x, BatchPlanes& y) const;
    void accumulate_grads_b(const BatchPlanes& x, const BatchPlanes& grad_y);
    void backprop_input_b(const BatchPlanes& grad_y, BatchPlanes& grad_x) const;

    // First/last input step feeding output step tau, and the packed row span.
    int t_start(int tau) const { return std::max(0, tau - band_.past); }
    int t_end(int tau) const { return std::min(t_len_ - 1, tau + band_.future); }
    int row_len(int tau) const { return t_end(tau) - t_start(tau) + 1; }
    size_t row_offset(int tau) const { return prefix_[static_cast<size_t>(tau)]; }
    size_t pair_size() const { return pair_size_; }

    // Weight at (out channel, in channel, output step, input step); exactly
    // zero outside the band.
    double weight_at(int o, int c, int tau, int t) const;
    void set_weight_at(int o, int c, int tau, int t, double value);

    Tensor weights; // [out_ch][in_ch][packed rows]
    Tensor bias;    // [out_ch][T]
    int in_ch_ = 0, out_ch_ = 0, t_len_ = 0;
    Band band_;
    bool with_bias_ = true;
    double init_scale() const;

private:
    std::vector<size_t> prefix_; // packed offset of each row within a channel pair
    size_t pair_size_ = 0;
};

// 1-D cross-correlation with asymmetric zero padding; output length equals
// input length (pad_left + pad_right = kernel - 1).
class Conv1D {
public:
    Conv1D() = default;
    Conv1D(std::string name, int in_ch, int out_ch, int kernel, int pad_left,
           int pad_right, int t_len);

    void init_uniform(double scale, class InitStream& stream);
    void forward(const Signal& x, Signal& y) const;
    void accumulate_grads(const Signal& x, const Signal& grad_y);
    void backprop_input(const Signal& grad_y, Signal& grad_x) const;

    void forward_b(const BatchPlanes& x, BatchPlanes& y) const;
    void accumulate_grads_b(const BatchPlanes& x, const BatchPlanes& grad_y);
    void backprop_input_b(const BatchPlanes& grad_y, BatchPlanes& grad_x) const;

    Tensor weights; // [out_ch][in_ch][kernel]
    Tensor bias;    // [out_ch]
    int in_ch_ = 0, out_ch_ = 0, kernel_ = 0, pad_left_ = 0, pad_right_ = 0, t_len_ = 0;
    double init_scale() const;
};

struct NetworkConfig {
    int t_step = 4096;
    Band band{512, 1};      // layers 1-7 and the per-floor head layers
    int response_channels = 4;
    int single_channel_layers = 4; // layers 1..4 are 1-channel
    int backbone_layers = 8;       // layer 8 uses band (T, future)
    int n_floors = 20;
    int conv_kernel = 2048;

    int conv_pad_right() const { return 1; }
    int conv_pad_left() const { return conv_kernel - 1 - conv_pad_right(); }
    // Steps of future input an output sample may depend on.
    int source_lookahead() const { return backbone_layers * band.future; }
    int target_lookahead() const {
        return source_lookahead() + conv_pad_right() + band.future;
    }

    static NetworkConfig paper();
    static NetworkConfig desk();
    void validate() const;
};

// Deterministic stream of init draws.
class InitStream;

// Source surrogate (8 masked layers, residual skips, tanh) plus an optional
// transfer head (conv + one masked layer per floor). Channel order of the
// source output: rel. accel, rel. vel, rel. disp, restoring force.
class MaskedNetwork {
public:
    explicit MaskedNetwork(const NetworkConfig& cfg, uint64_t init_seed);

    // Adds the transfer head and freezes every backbone tensor.
    void attach_head(uint64_t init_seed);
    bool has_head() const { return !floor_heads_.empty(); }

    struct Trace {
        std::vector<Signal> layer_inputs; // x_l for each backbone layer
        std::vector<Signal> activations;  // tanh output per layer (empty for l8)
        Signal source_out;                // backbone output
        Signal conv_out;                  // head intermediate
    };

    struct BatchTrace {
        std::vector<BatchPlanes> layer_inputs;
        std::vector<BatchPlanes> activations;
        BatchPlanes source_out;
        BatchPlanes conv_out;
    };

    Signal forward_source(const Signal& gm, Trace* trace = nullptr) const;
    Signal forward_target(const Signal& gm, Trace* trace = nullptr) const;

    // Head forward from cached backbone features (transfer training path).
    Signal forward_head(const Signal& features, Trace* trace = nullptr) const;

    // Full backward through the backbone; adds into grad_gm when given.
    void backward_source(const Trace& trace, const Signal& grad_out,
                         Signal* grad_gm = nullptr);
    // Backward through head and backbone.
    void backward_target(const Trace& trace, const Signal& grad_out,
                         Signal* grad_gm = nullptr);
    // Head-only backward from cached features (backbone untouched); fills
    // grad_features when given.
    void backward_head(const Signal& features, const Trace& trace,
                       const Signal& grad_out, Signal* grad_features = nullptr);

    // Mini-batch paths used by the trainers: one weight-row read serves the
    // whole batch.
    BatchPlanes forward_source_b(const BatchPlanes& gm, BatchTrace* trace = nullptr) const;
    BatchPlanes forward_head_b(const BatchPlanes& features, BatchTrace* trace = nullptr) const;
    BatchPlanes forward_target_b(const BatchPlanes& gm, BatchTrace* trace = nullptr) const;
    void backward_source_b(const BatchTrace& trace, const BatchPlanes& grad_out);
    void backward_head_b(const BatchPlanes& features, const BatchTrace& trace,
                         const BatchPlanes& grad_out);

    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    void zero_grads();
    uint64_t backbone_checksum() const;

    const NetworkConfig& config() const { return cfg_; }

    // Layer access for serialization and tests.
    std::vector<MaskedLinear>& backbone() { return layers_; }
    MaskedLinear* skip_projection() { return skip_proj_ ? &*skip_proj_ : nullptr; }
    Conv1D* conv() { return conv_ ? &*conv_ : nullptr; }
    std::vector<MaskedLinear>& floor_heads() { return floor_heads_; }

private:
    NetworkConfig cfg_;
    std::vector<MaskedLinear> layers_;
    std::optional<MaskedLinear> skip_proj_; // 1 -> 4 masked projection at the transition
    std::optional<Conv1D> conv_;
    std::vector<MaskedLinear> floor_heads_;
};

// --- losses ---------------------------------------------------------------

double huber(double y, double y_hat, double delta);
double huber_mean(std::span<const double> y, std::span<const double> y_hat, double delta);

struct LossConfig {
    double huber_delta = 1.0;
    double physics_weight = 5e-6;
    int physics_switch_epoch = 50;
    double dt_s = 0.01;
};

// Sum over output steps of the Huber gap between the running rectangular
// integral of v_hat and d_hat.
double physics_loss(std::span<const double> v_hat, std::span<const double> d_hat,
                    double dt_s, double delta);
// Adds d(loss)/d(v_hat), d(loss)/d(d_hat) scaled by `scale` into the outputs.
void physics_loss_backward(std::span<const double> v_hat, std::span<const double> d_hat,
                           double dt_s, double delta, double scale,
                           std::span<double> grad_v, std::span<double> grad_d);

// Per-sample per-channel peak normalization by the true response, Huber
// mean, plus the physics term once epoch >= switch. Samples with a zero-peak
// channel are skipped with a warning. grads (when non-null) receives
// d(loss)/d(pred) per sample.
double source_loss(const std::vector<Signal>& pred, const std::vector<Signal>& truth,
                   int epoch, const LossConfig& cfg,
                   std::vector<Signal>* grads = nullptr);

// Eq.-(8)-style loss: Huber of per-sample per-floor peak-normalized pairs,
// averaged over samples x floors x steps. No physics term.
double target_loss(const std::vector<Signal>& pred, const std::vector<Signal>& truth,
                   double delta, std::vector<Signal>* grads = nullptr);

// --- optimizer ------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(std::vector<Tensor*> params, AdamConfig cfg);

    void step();
    int64_t step_count() const { return t_; }

    std::vector<Tensor*>& params() { return params_; }
    std::vector<std::vector<double>>& moment1() { return m_; }
    std::vector<std::vector<double>>& moment2() { return v_; }
    const std::vector<std::vector<double>>& moment1() const { return m_; }
    const std::vector<std::vector<double>>& moment2() const { return v_; }
    void set_step_count(int64_t t) { t_ = t; }
    const AdamConfig& config() const { return cfg_; }

private:
    std::vector<Tensor*> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    int64_t t_ = 0;
};

// --- training -------------------------------------------------------------

struct Dataset {
    std::vector<Signal> inputs;  // 1 x T, normalized
    std::vector<Signal> outputs; // C x T, normalized
};

struct TrainCurves {
    std::vector<double> train;
    std::vector<double> val;
    int best_epoch = -1;
};

struct SourceTrainConfig {
    int epochs = 1000;
    double lr = 5e-5;
    int batch = 16;
    uint64_t seed = 1;
    LossConfig loss;
};

TrainCurves train_source(MaskedNetwork& net, Adam& adam, const Dataset& train,
                         const Dataset& val, const SourceTrainConfig& cfg);

// Batched inference over a list of inputs (chunked mini-batches).
std::vector<Signal> predict_source(const MaskedNetwork& net,
                                   const std::vector<Signal>& inputs, int chunk = 16);
std::vector<Signal> predict_target(const MaskedNetwork& net,
                                   const std::vector<Signal>& inputs, int chunk = 16);

struct TargetTrainConfig {
    int max_epochs = 2000;
    int patience = 200;
    double lr = 1e-3;
    int batch = 16;
    uint64_t seed = 1;
    double huber_delta = 1.0;
};

// Backbone stays frozen; features are cached once per motion. Early stopping
// on the holdout loss when a holdout is given.
TrainCurves train_target(MaskedNetwork& net, Adam& adam, const Dataset& train,
                         const Dataset& holdout, const TargetTrainConfig& cfg);

} // namespace qs::net

#endif // QS_MASKED_NET_HPP
