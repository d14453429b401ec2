#include "qs/masked_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "qs/errors.hpp"
#include "qs/hashing.hpp"
#include "qs/rng.hpp"

namespace qs::net {

// Deterministic stream of init draws shared by all layers of one network.
class InitStream {
public:
    explicit InitStream(uint64_t seed) : rng_(seed) {}
    double uniform(double lo, double hi) { return rng_.uniform(lo, hi); }

private:
    Rng rng_;
};

namespace micro {

// Row kernels walking pre-offset pointers; the batch lane is blocked in
// registers, templated on the batch width so the lane loops fully unroll.

template <int B>
void fwd_row(const double* wr, int len, const double* xl, double* yl) {
    double acc[B];
    for (int b = 0; b < B; ++b) acc[b] = yl[b];
    for (int i = 0; i < len; ++i, xl += B) {
        const double w = wr[i];
        for (int b = 0; b < B; ++b) acc[b] += w * xl[b];
    }
    for (int b = 0; b < B; ++b) yl[b] = acc[b];
}

template <int B>
void grad_row(double* gw, int len, const double* gl, const double* xl) {
    double g[B];
    for (int b = 0; b < B; ++b) g[b] = gl[b];
    for (int i = 0; i < len; ++i, xl += B) {
        double s = 0.0;
        for (int b = 0; b < B; ++b) s += g[b] * xl[b];
        gw[i] += s;
    }
}

template <int B>
void bwd_row(const double* wr, int len, const double* gl, double* gxl) {
    double g[B];
    for (int b = 0; b < B; ++b) g[b] = gl[b];
    for (int i = 0; i < len; ++i, gxl += B) {
        const double w = wr[i];
        for (int b = 0; b < B; ++b) gxl[b] += w * g[b];
    }
}

void fwd_row_any(int batch, const double* wr, int len, const double* xl, double* yl) {
    switch (batch) {
        case 16: fwd_row<16>(wr, len, xl, yl); return;
        case 8: fwd_row<8>(wr, len, xl, yl); return;
        case 4: fwd_row<4>(wr, len, xl, yl); return;
        default:
            for (int i = 0; i < len; ++i, xl += batch) {
                const double w = wr[i];
                for (int b = 0; b < batch; ++b) yl[b] += w * xl[b];
            }
    }
}

void grad_row_any(int batch, double* gw, int len, const double* gl, const double* xl) {
    switch (batch) {
        case 16: grad_row<16>(gw, len, gl, xl); return;
        case 8: grad_row<8>(gw, len, gl, xl); return;
        case 4: grad_row<4>(gw, len, gl, xl); return;
        default:
            for (int i = 0; i < len; ++i, xl += batch) {
                double s = 0.0;
                for (int b = 0; b < batch; ++b) s += gl[b] * xl[b];
                gw[i] += s;
            }
    }
}

void bwd_row_any(int batch, const double* wr, int len, const double* gl, double* gxl) {
    switch (batch) {
        case 16: bwd_row<16>(wr, len, gl, gxl); return;
        case 8: bwd_row<8>(wr, len, gl, gxl); return;
        case 4: bwd_row<4>(wr, len, gl, gxl); return;
        default:
            for (int i = 0; i < len; ++i, gxl += batch) {
                const double w = wr[i];
                for (int b = 0; b < batch; ++b) gxl[b] += w * gl[b];
            }
    }
}

} // namespace micro

BatchPlanes to_planes(const std::vector<const Signal*>& samples) {
    if (samples.empty()) return {};
    const int channels = samples[0]->channels;
    const int t_len = samples[0]->t_len;
    const int batch = static_cast<int>(samples.size());
    BatchPlanes p = BatchPlanes::zeros(channels, t_len, batch);
    for (int b = 0; b < batch; ++b) {
        const Signal& s = *samples[static_cast<size_t>(b)];
        if (s.channels != channels || s.t_len != t_len)
            throw Error(ErrorClass::Shape, "to_planes: mixed sample shapes");
        for (int c = 0; c < channels; ++c) {
            const double* sc = s.ch(c);
            for (int t = 0; t < t_len; ++t) p.lane(c, t)[b] = sc[t];
        }
    }
    return p;
}

std::vector<Signal> from_planes(const BatchPlanes& planes) {
    std::vector<Signal> out(static_cast<size_t>(planes.batch));
    for (int b = 0; b < planes.batch; ++b) {
        Signal s = Signal::zeros(planes.channels, planes.t_len);
        for (int c = 0; c < planes.channels; ++c) {
            double* sc = s.ch(c);
            for (int t = 0; t < planes.t_len; ++t) sc[t] = planes.lane(c, t)[b];
        }
        out[static_cast<size_t>(b)] = std::move(s);
    }
    return out;
}

// --- MaskedLinear -----------------------------------------------------------

MaskedLinear::MaskedLinear(std::string name, int in_ch, int out_ch, int t_len,
                           Band band, bool with_bias)
    : in_ch_(in_ch), out_ch_(out_ch), t_len_(t_len), band_(band), with_bias_(with_bias) {
    if (band.past < 0 || band.future < 0 || band.past > t_len)
        throw Error(ErrorClass::Config, "masked layer: invalid band");
    prefix_.resize(static_cast<size_t>(t_len) + 1, 0);
    for (int tau = 0; tau < t_len; ++tau)
        prefix_[static_cast<size_t>(tau) + 1] =
            prefix_[static_cast<size_t>(tau)] + static_cast<size_t>(row_len(tau));
    pair_size_ = prefix_.back();

    weights.name = name + ".w";
    weights.shape = {out_ch, in_ch, static_cast<int>(pair_size_)};
    weights.band = band;
    weights.value.assign(static_cast<size_t>(out_ch) * in_ch * pair_size_, 0.0);
    weights.grad.assign(weights.value.size(), 0.0);
    if (with_bias) {
        bias.name = name + ".b";
        bias.shape = {out_ch, t_len};
        bias.value.assign(static_cast<size_t>(out_ch) * t_len, 0.0);
        bias.grad.assign(bias.value.size(), 0.0);
    }
}

double MaskedLinear::init_scale() const {
    return std::sqrt(1.0 / (static_cast<double>(in_ch_) * (band_.past + band_.future + 1)));
}

void MaskedLinear::init_uniform(double scale, InitStream& stream) {
    for (double& w : weights.value) w = stream.uniform(-scale, scale);
}

double MaskedLinear::weight_at(int o, int c, int tau, int t) const {
    if (t < t_start(tau) || t > t_end(tau)) return 0.0;
    return weights.value[(static_cast<size_t>(o) * in_ch_ + c) * pair_size_ +
                         row_offset(tau) + static_cast<size_t>(t - t_start(tau))];
}

void MaskedLinear::set_weight_at(int o, int c, int tau, int t, double value) {
    if (t < t_start(tau) || t > t_end(tau))
        throw Error(ErrorClass::Domain, "set_weight_at: (tau, t) outside the band");
    weights.value[(static_cast<size_t>(o) * in_ch_ + c) * pair_size_ + row_offset(tau) +
                  static_cast<size_t>(t - t_start(tau))] = value;
}

void MaskedLinear::forward(const Signal& x, Signal& y) const {
    if (x.channels != in_ch_ || x.t_len != t_len_)
        throw Error(ErrorClass::Shape, "masked layer " + weights.name + ": input shape mismatch");
    y = Signal::zeros(out_ch_, t_len_);
    for (int o = 0; o < out_ch_; ++o) {
        double* yo = y.ch(o);
        if (with_bias_) {
            const double* bo = bias.value.data() + static_cast<size_t>(o) * t_len_;
            std::copy(bo, bo + t_len_, yo);
        }
        for (int c = 0; c < in_ch_; ++c) {
            const double* xc = x.ch(c);
            const double* wpair = weights.value.data() +
                                  (static_cast<size_t>(o) * in_ch_ + c) * pair_size_;
            for (int tau = 0; tau < t_len_; ++tau) {
                const double* wr = wpair + row_offset(tau);
                const double* xp = xc + t_start(tau);
                const int len = row_len(tau);
                double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
                int i = 0;
                for (; i + 3 < len; i += 4) {
                    a0 += wr[i] * xp[i];
                    a1 += wr[i + 1] * xp[i + 1];
                    a2 += wr[i + 2] * xp[i + 2];
                    a3 += wr[i + 3] * xp[i + 3];
                }
                for (; i < len; ++i) a0 += wr[i] * xp[i];
                yo[tau] += (a0 + a1) + (a2 + a3);
            }
        }
    }
}

void MaskedLinear::accumulate_grads(const Signal& x, const Signal& grad_y) {
    for (int o = 0; o < out_ch_; ++o) {
        const double* gy = grad_y.ch(o);
        if (with_bias_) {
            double* gb = bias.grad.data() + static_cast<size_t>(o) * t_len_;
            for (int tau = 0; tau < t_len_; ++tau) gb[tau] += gy[tau];
        }
        for (int c = 0; c < in_ch_; ++c) {
            const double* xc = x.ch(c);
            double* gpair = weights.grad.data() +
                            (static_cast<size_t>(o) * in_ch_ + c) * pair_size_;
            for (int tau = 0; tau < t_len_; ++tau) {
                const double g = gy[tau];
                if (g == 0.0) continue;
                double* gw = gpair + row_offset(tau);
                const double* xp = xc + t_start(tau);
                const int len = row_len(tau);
                for (int i = 0; i < len; ++i) gw[i] += g * xp[i];
            }
        }
    }
}

void MaskedLinear::backprop_input(const Signal& grad_y, Signal& grad_x) const {
    for (int c = 0; c < in_ch_; ++c) {
        double* gx = grad_x.ch(c);
        for (int o = 0; o < out_ch_; ++o) {
            const double* gy = grad_y.ch(o);
            const double* wpair = weights.value.data() +
                                  (static_cast<size_t>(o) * in_ch_ + c) * pair_size_;
            for (int tau = 0; tau < t_len_; ++tau) {
                const double g = gy[tau];
                if (g == 0.0) continue;
                const double* wr = wpair + row_offset(tau);
                double* gxp = gx + t_start(tau);
                const int len = row_len(tau);
                for (int i = 0; i < len; ++i) gxp[i] += wr[i] * g;
            }
        }
    }
}

void MaskedLinear::forward_b(const BatchPlanes& x, BatchPlanes& y) const {
    if (x.channels != in_ch_ || x.t_len != t_len_)
        throw Error(ErrorClass::Shape, "masked layer " + weights.name + ": batch shape mismatch");
    y = BatchPlanes::zeros(out_ch_, t_len_, x.batch);
    const int B = x.batch;
    for (int o = 0; o < out_ch_; ++o) {
        if (with_bias_) {
            const double* bo = bias.value.data() + static_cast<size_t>(o) * t_len_;
            for (int tau = 0; tau < t_len_; ++tau) {
                double* yl = y.lane(o, tau);
                for (int b = 0; b < B; ++b) yl[b] = bo[tau];
            }
        }
        for (int c = 0; c < in_ch_; ++c) {
            const double* wpair = weights.value.data() +
                                  (static_cast<size_t>(o) * in_ch_ + c) * pair_size_;
            const double* xc = x.lane(c, 0);
            for (int tau = 0; tau < t_len_; ++tau)
                micro::fwd_row_any(B, wpair + row_offset(tau), row_len(tau),
                                   xc + static_cast<size_t>(t_start(tau)) * B,
                                   y.lane(o, tau));
        }
    }
}

void MaskedLinear::accumulate_grads_b(const BatchPlanes& x, const BatchPlanes& grad_y) {
    const int B = x.batch;
    for (int o = 0; o < out_ch_; ++o) {
        if (with_bias_) {
            double* gb = bias.grad.data() + static_cast<size_t>(o) * t_len_;
            for (int tau = 0; tau < t_len_; ++tau) {
                const double* gl = grad_y.lane(o, tau);
                double acc = 0.0;
                for (int b = 0; b < B; ++b) acc += gl[b];
                gb[tau] += acc;
            }
        }
        for (int c = 0; c < in_ch_; ++c) {
            double* gpair = weights.grad.data() +
                            (static_cast<size_t>(o) * in_ch_ + c) * pair_size_;
            const double* xc = x.lane(c, 0);
            for (int tau = 0; tau < t_len_; ++tau)
                micro::grad_row_any(B, gpair + row_offset(tau), row_len(tau),
                                    grad_y.lane(o, tau),
                                    xc + static_cast<size_t>(t_start(tau)) * B);
        }
    }
}

void MaskedLinear::backprop_input_b(const BatchPlanes& grad_y, BatchPlanes& grad_x) const {
    const int B = grad_y.batch;
    for (int c = 0; c < in_ch_; ++c) {
        double* gxc = grad_x.lane(c, 0);
        for (int o = 0; o < out_ch_; ++o) {
            const double* wpair = weights.value.data() +
                                  (static_cast<size_t>(o) * in_ch_ + c) * pair_size_;
            for (int tau = 0; tau < t_len_; ++tau)
                micro::bwd_row_any(B, wpair + row_offset(tau), row_len(tau),
                                   grad_y.lane(o, tau),
                                   gxc + static_cast<size_t>(t_start(tau)) * B);
        }
    }
}

// --- Conv1D -----------------------------------------------------------------

Conv1D::Conv1D(std::string name, int in_ch, int out_ch, int kernel, int pad_left,
               int pad_right, int t_len)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), pad_left_(pad_left),
      pad_right_(pad_right), t_len_(t_len) {
    if (pad_left + pad_right != kernel - 1)
        throw Error(ErrorClass::Config, "conv: padding must preserve length");
    weights.name = name + ".w";
    weights.shape = {out_ch, in_ch, kernel};
    weights.value.assign(static_cast<size_t>(out_ch) * in_ch * kernel, 0.0);
    weights.grad.assign(weights.value.size(), 0.0);
    bias.name = name + ".b";
    bias.shape = {out_ch};
    bias.value.assign(static_cast<size_t>(out_ch), 0.0);
    bias.grad.assign(bias.value.size(), 0.0);
}

double Conv1D::init_scale() const {
    return std::sqrt(1.0 / (static_cast<double>(in_ch_) * kernel_));
}

void Conv1D::init_uniform(double scale, InitStream& stream) {
    for (double& w : weights.value) w = stream.uniform(-scale, scale);
}

void Conv1D::forward(const Signal& x, Signal& y) const {
    if (x.channels != in_ch_ || x.t_len != t_len_)
        throw Error(ErrorClass::Shape, "conv: input shape mismatch");
    y = Signal::zeros(out_ch_, t_len_);
    for (int o = 0; o < out_ch_; ++o) {
        double* yo = y.ch(o);
        const double b = bias.value[static_cast<size_t>(o)];
        for (int tau = 0; tau < t_len_; ++tau) yo[tau] = b;
        for (int c = 0; c < in_ch_; ++c) {
            const double* xc = x.ch(c);
            const double* w = weights.value.data() +
                              (static_cast<size_t>(o) * in_ch_ + c) * kernel_;
            for (int tau = 0; tau < t_len_; ++tau) {
                const int k_lo = std::max(0, pad_left_ - tau);
                const int k_hi = std::min(kernel_ - 1, t_len_ - 1 + pad_left_ - tau);
                const double* xp = xc + tau - pad_left_;
                double acc = 0.0;
                for (int k = k_lo; k <= k_hi; ++k) acc += w[k] * xp[k];
                yo[tau] += acc;
            }
        }
    }
}

void Conv1D::accumulate_grads(const Signal& x, const Signal& grad_y) {
    for (int o = 0; o < out_ch_; ++o) {
        const double* gy = grad_y.ch(o);
        double gb = 0.0;
        for (int tau = 0; tau < t_len_; ++tau) gb += gy[tau];
        bias.grad[static_cast<size_t>(o)] += gb;
        for (int c = 0; c < in_ch_; ++c) {
            const double* xc = x.ch(c);
            double* gw = weights.grad.data() +
                         (static_cast<size_t>(o) * in_ch_ + c) * kernel_;
            for (int tau = 0; tau < t_len_; ++tau) {
                const double g = gy[tau];
                if (g == 0.0) continue;
                const int k_lo = std::max(0, pad_left_ - tau);
                const int k_hi = std::min(kernel_ - 1, t_len_ - 1 + pad_left_ - tau);
                const double* xp = xc + tau - pad_left_;
                for (int k = k_lo; k <= k_hi; ++k) gw[k] += g * xp[k];
            }
        }
    }
}

void Conv1D::backprop_input(const Signal& grad_y, Signal& grad_x) const {
    for (int c = 0; c < in_ch_; ++c) {
        double* gx = grad_x.ch(c);
        for (int o = 0; o < out_ch_; ++o) {
            const double* gy = grad_y.ch(o);
            const double* w = weights.value.data() +
                              (static_cast<size_t>(o) * in_ch_ + c) * kernel_;
            for (int tau = 0; tau < t_len_; ++tau) {
                const double g = gy[tau];
                if (g == 0.0) continue;
                const int k_lo = std::max(0, pad_left_ - tau);
                const int k_hi = std::min(kernel_ - 1, t_len_ - 1 + pad_left_ - tau);
                double* gxp = gx + tau - pad_left_;
                for (int k = k_lo; k <= k_hi; ++k) gxp[k] += w[k] * g;
            }
        }
    }
}

void Conv1D::forward_b(const BatchPlanes& x, BatchPlanes& y) const {
    if (x.channels != in_ch_ || x.t_len != t_len_)
        throw Error(ErrorClass::Shape, "conv: batch shape mismatch");
    y = BatchPlanes::zeros(out_ch_, t_len_, x.batch);
    const int B = x.batch;
    for (int o = 0; o < out_ch_; ++o) {
        const double b = bias.value[static_cast<size_t>(o)];
        for (int tau = 0; tau < t_len_; ++tau) {
            double* yl = y.lane(o, tau);
            for (int i = 0; i < B; ++i) yl[i] = b;
        }
        for (int c = 0; c < in_ch_; ++c) {
            const double* w = weights.value.data() +
                              (static_cast<size_t>(o) * in_ch_ + c) * kernel_;
            for (int tau = 0; tau < t_len_; ++tau) {
                const int k_lo = std::max(0, pad_left_ - tau);
                const int k_hi = std::min(kernel_ - 1, t_len_ - 1 + pad_left_ - tau);
                micro::fwd_row_any(B, w + k_lo, k_hi - k_lo + 1,
                                   x.lane(c, tau - pad_left_ + k_lo), y.lane(o, tau));
            }
        }
    }
}

void Conv1D::accumulate_grads_b(const BatchPlanes& x, const BatchPlanes& grad_y) {
    const int B = x.batch;
    for (int o = 0; o < out_ch_; ++o) {
        double gb = 0.0;
        for (int tau = 0; tau < t_len_; ++tau) {
            const double* gl = grad_y.lane(o, tau);
            for (int i = 0; i < B; ++i) gb += gl[i];
        }
        bias.grad[static_cast<size_t>(o)] += gb;
        for (int c = 0; c < in_ch_; ++c) {
            double* gw = weights.grad.data() +
                         (static_cast<size_t>(o) * in_ch_ + c) * kernel_;
            for (int tau = 0; tau < t_len_; ++tau) {
                const int k_lo = std::max(0, pad_left_ - tau);
                const int k_hi = std::min(kernel_ - 1, t_len_ - 1 + pad_left_ - tau);
                micro::grad_row_any(B, gw + k_lo, k_hi - k_lo + 1, grad_y.lane(o, tau),
                                    x.lane(c, tau - pad_left_ + k_lo));
            }
        }
    }
}

void Conv1D::backprop_input_b(const BatchPlanes& grad_y, BatchPlanes& grad_x) const {
    const int B = grad_y.batch;
    for (int c = 0; c < in_ch_; ++c) {
        for (int o = 0; o < out_ch_; ++o) {
            const double* w = weights.value.data() +
                              (static_cast<size_t>(o) * in_ch_ + c) * kernel_;
            for (int tau = 0; tau < t_len_; ++tau) {
                const int k_lo = std::max(0, pad_left_ - tau);
                const int k_hi = std::min(kernel_ - 1, t_len_ - 1 + pad_left_ - tau);
                micro::bwd_row_any(B, w + k_lo, k_hi - k_lo + 1, grad_y.lane(o, tau),
                                   grad_x.lane(c, tau - pad_left_ + k_lo));
            }
        }
    }
}

// --- NetworkConfig ----------------------------------------------------------

NetworkConfig NetworkConfig::paper() { return NetworkConfig{}; }

NetworkConfig NetworkConfig::desk() {
    NetworkConfig cfg;
    cfg.t_step = 512;
    cfg.band = {64, 1};
    cfg.n_floors = 4;
    cfg.conv_kernel = 256;
    return cfg;
}

void NetworkConfig::validate() const {
    if (t_step < 2)
        throw Error(ErrorClass::Config, "network: t_step must be >= 2");
    if (band.past < 1 || band.past > t_step || band.future < 0)
        throw Error(ErrorClass::Config, "network: invalid band");
    if (response_channels < 1 || n_floors < 1)
        throw Error(ErrorClass::Config, "network: invalid channel counts");
    if (single_channel_layers < 1 || single_channel_layers >= backbone_layers)
        throw Error(ErrorClass::Config, "network: invalid layer split");
    if (conv_kernel < 2 || conv_kernel > 2 * t_step)
        throw Error(ErrorClass::Config, "network: invalid conv kernel");
}

// --- MaskedNetwork ----------------------------------------------------------

MaskedNetwork::MaskedNetwork(const NetworkConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    InitStream stream(derive_seed({init_seed, 0x4E4554ULL /*"NET"*/}));
    const int t = cfg_.t_step;
    layers_.reserve(static_cast<size_t>(cfg_.backbone_layers));
    for (int l = 1; l <= cfg_.backbone_layers; ++l) {
        // out channels switch to the response count right after the single-
        // channel block; the input of layer l is the output of layer l-1.
        const int in_ch = l <= cfg_.single_channel_layers + 1 ? 1 : cfg_.response_channels;
        const int out_ch = l <= cfg_.single_channel_layers ? 1 : cfg_.response_channels;
        Band band = cfg_.band;
        if (l == cfg_.backbone_layers) band.past = t; // full past on the last layer
        layers_.emplace_back("backbone.l" + std::to_string(l), in_ch, out_ch, t, band);
        layers_.back().init_uniform(layers_.back().init_scale(), stream);
    }
    // Learned masked projection skip at the 1 -> 4 channel transition.
    skip_proj_.emplace("backbone.skip" + std::to_string(cfg_.single_channel_layers + 1),
                       1, cfg_.response_channels, t, cfg_.band, /*with_bias=*/false);
    skip_proj_->init_uniform(skip_proj_->init_scale(), stream);
}

void MaskedNetwork::attach_head(uint64_t init_seed) {
    if (has_head())
        throw Error(ErrorClass::State, "attach_head: head already attached");
    InitStream stream(derive_seed({init_seed, 0x484541ULL /*"HEA"*/}));
    const int t = cfg_.t_step;
    conv_.emplace("head.conv", cfg_.response_channels, cfg_.n_floors, cfg_.conv_kernel,
                  cfg_.conv_pad_left(), cfg_.conv_pad_right(), t);
    conv_->init_uniform(conv_->init_scale(), stream);
    floor_heads_.reserve(static_cast<size_t>(cfg_.n_floors));
    for (int k = 0; k < cfg_.n_floors; ++k) {
        floor_heads_.emplace_back("head.floor" + std::to_string(k), 1, 1, t, cfg_.band);
        floor_heads_.back().init_uniform(floor_heads_.back().init_scale(), stream);
    }
    for (auto& l : layers_) {
        l.weights.trainable = false;
        l.bias.trainable = false;
    }
    skip_proj_->weights.trainable = false;
}

namespace {
Signal tanh_of(const Signal& x) {
    Signal y = x;
    for (double& v : y.data) v = std::tanh(v);
    return y;
}
} // namespace

Signal MaskedNetwork::forward_source(const Signal& gm, Trace* trace) const {
    if (gm.channels != 1 || gm.t_len != cfg_.t_step)
        throw Error(ErrorClass::Shape, "forward_source: expected 1 x t_step input");
    if (trace) {
        trace->layer_inputs.clear();
        trace->activations.clear();
    }
    Signal x = gm;
    for (size_t li = 0; li < layers_.size(); ++li) {
        const auto& layer = layers_[li];
        const bool last = li + 1 == layers_.size();
        const bool transition = static_cast<int>(li) == cfg_.single_channel_layers;

        if (trace) trace->layer_inputs.push_back(x);

        Signal m;
        layer.forward(x, m);
        Signal a = last ? std::move(m) : tanh_of(m);
        if (trace && !last) trace->activations.push_back(a);
        if (trace && last) trace->activations.emplace_back(); // placeholder

        // Residual: identity when channels match, learned projection at the
        // channel transition.
        if (transition) {
            Signal s;
            skip_proj_->forward(x, s);
            for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += s.data[i];
        } else {
            for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += x.data[i];
        }
        x = std::move(a);
    }
    if (trace) trace->source_out = x;
    return x;
}

Signal MaskedNetwork::forward_head(const Signal& features, Trace* trace) const {
    if (!has_head())
        throw Error(ErrorClass::State, "forward_head: no head attached");
    Signal h;
    conv_->forward(features, h);
    if (trace) trace->conv_out = h;
    Signal out = Signal::zeros(cfg_.n_floors, cfg_.t_step);
    for (int k = 0; k < cfg_.n_floors; ++k) {
        Signal hk = Signal::zeros(1, cfg_.t_step);
        std::copy(h.ch(k), h.ch(k) + cfg_.t_step, hk.ch(0));
        Signal ok;
        floor_heads_[static_cast<size_t>(k)].forward(hk, ok);
        std::copy(ok.ch(0), ok.ch(0) + cfg_.t_step, out.ch(k));
    }
    return out;
}

Signal MaskedNetwork::forward_target(const Signal& gm, Trace* trace) const {
    Signal features = forward_source(gm, trace);
    return forward_head(features, trace);
}

void MaskedNetwork::backward_source(const Trace& trace, const Signal& grad_out,
                                    Signal* grad_gm) {
    Signal g = grad_out;
    for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
        auto& layer = layers_[static_cast<size_t>(li)];
        const bool last = li + 1 == static_cast<int>(layers_.size());
        const bool transition = li == cfg_.single_channel_layers;
        const Signal& x = trace.layer_inputs[static_cast<size_t>(li)];

        Signal gm_branch = g;
        if (!last) {
            const Signal& a = trace.activations[static_cast<size_t>(li)];
            for (size_t i = 0; i < gm_branch.data.size(); ++i)
                gm_branch.data[i] *= 1.0 - a.data[i] * a.data[i];
        }
        layer.accumulate_grads(x, gm_branch);

        Signal gx = Signal::zeros(x.channels, x.t_len);
        layer.backprop_input(gm_branch, gx);
        if (transition) {
            skip_proj_->accumulate_grads(x, g);
            skip_proj_->backprop_input(g, gx);
        } else {
            for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += g.data[i];
        }
        g = std::move(gx);
    }
    if (grad_gm)
        for (size_t i = 0; i < g.data.size(); ++i) grad_gm->data[i] += g.data[i];
}

void MaskedNetwork::backward_head(const Signal& features, const Trace& trace,
                                  const Signal& grad_out, Signal* grad_features) {
    if (!has_head())
        throw Error(ErrorClass::State, "backward_head: no head attached");
    const Signal& h = trace.conv_out;
    Signal gh = Signal::zeros(cfg_.n_floors, cfg_.t_step);
    for (int k = 0; k < cfg_.n_floors; ++k) {
        Signal hk = Signal::zeros(1, cfg_.t_step);
        std::copy(h.ch(k), h.ch(k) + cfg_.t_step, hk.ch(0));
        Signal gk = Signal::zeros(1, cfg_.t_step);
        std::copy(grad_out.ch(k), grad_out.ch(k) + cfg_.t_step, gk.ch(0));
        auto& head = floor_heads_[static_cast<size_t>(k)];
        head.accumulate_grads(hk, gk);
        Signal ghk = Signal::zeros(1, cfg_.t_step);
        head.backprop_input(gk, ghk);
        std::copy(ghk.ch(0), ghk.ch(0) + cfg_.t_step, gh.ch(k));
    }
    conv_->accumulate_grads(features, gh);
    if (grad_features) conv_->backprop_input(gh, *grad_features);
}

void MaskedNetwork::backward_target(const Trace& trace, const Signal& grad_out,
                                    Signal* grad_gm) {
    Signal gfeat = Signal::zeros(cfg_.response_channels, cfg_.t_step);
    backward_head(trace.source_out, trace, grad_out, &gfeat);
    backward_source(trace, gfeat, grad_gm);
}

BatchPlanes MaskedNetwork::forward_source_b(const BatchPlanes& gm, BatchTrace* trace) const {
    if (gm.channels != 1 || gm.t_len != cfg_.t_step)
        throw Error(ErrorClass::Shape, "forward_source_b: expected 1 x t_step batch");
    if (trace) {
        trace->layer_inputs.clear();
        trace->activations.clear();
    }
    BatchPlanes x = gm;
    for (size_t li = 0; li < layers_.size(); ++li) {
        const auto& layer = layers_[li];
        const bool last = li + 1 == layers_.size();
        const bool transition = static_cast<int>(li) == cfg_.single_channel_layers;

        if (trace) trace->layer_inputs.push_back(x);

        BatchPlanes a;
        layer.forward_b(x, a);
        if (!last)
            for (double& v : a.data) v = std::tanh(v);
        if (trace) {
            if (!last)
                trace->activations.push_back(a);
            else
                trace->activations.emplace_back();
        }

        if (transition) {
            BatchPlanes s;
            skip_proj_->forward_b(x, s);
            for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += s.data[i];
        } else {
            for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += x.data[i];
        }
        x = std::move(a);
    }
    if (trace) trace->source_out = x;
    return x;
}

void MaskedNetwork::backward_source_b(const BatchTrace& trace, const BatchPlanes& grad_out) {
    BatchPlanes g = grad_out;
    for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
        auto& layer = layers_[static_cast<size_t>(li)];
        const bool last = li + 1 == static_cast<int>(layers_.size());
        const bool transition = li == cfg_.single_channel_layers;
        const BatchPlanes& x = trace.layer_inputs[static_cast<size_t>(li)];

        BatchPlanes gm_branch = g;
        if (!last) {
            const BatchPlanes& a = trace.activations[static_cast<size_t>(li)];
            for (size_t i = 0; i < gm_branch.data.size(); ++i)
                gm_branch.data[i] *= 1.0 - a.data[i] * a.data[i];
        }
        layer.accumulate_grads_b(x, gm_branch);

        BatchPlanes gx = BatchPlanes::zeros(x.channels, x.t_len, x.batch);
        layer.backprop_input_b(gm_branch, gx);
        if (transition) {
            skip_proj_->accumulate_grads_b(x, g);
            skip_proj_->backprop_input_b(g, gx);
        } else {
            for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += g.data[i];
        }
        g = std::move(gx);
    }
}

BatchPlanes MaskedNetwork::forward_head_b(const BatchPlanes& features,
                                          BatchTrace* trace) const {
    if (!has_head())
        throw Error(ErrorClass::State, "forward_head_b: no head attached");
    BatchPlanes h;
    conv_->forward_b(features, h);
    if (trace) trace->conv_out = h;
    BatchPlanes out = BatchPlanes::zeros(cfg_.n_floors, cfg_.t_step, features.batch);
    const size_t plane = static_cast<size_t>(cfg_.t_step) * features.batch;
    for (int k = 0; k < cfg_.n_floors; ++k) {
        BatchPlanes hk = BatchPlanes::zeros(1, cfg_.t_step, features.batch);
        std::copy(h.data.begin() + static_cast<long>(k * plane),
                  h.data.begin() + static_cast<long>((k + 1) * plane), hk.data.begin());
        BatchPlanes ok;
        floor_heads_[static_cast<size_t>(k)].forward_b(hk, ok);
        std::copy(ok.data.begin(), ok.data.end(),
                  out.data.begin() + static_cast<long>(k * plane));
    }
    return out;
}

BatchPlanes MaskedNetwork::forward_target_b(const BatchPlanes& gm, BatchTrace* trace) const {
    BatchPlanes features = forward_source_b(gm, trace);
    return forward_head_b(features, trace);
}

void MaskedNetwork::backward_head_b(const BatchPlanes& features, const BatchTrace& trace,
                                    const BatchPlanes& grad_out) {
    if (!has_head())
        throw Error(ErrorClass::State, "backward_head_b: no head attached");
    const BatchPlanes& h = trace.conv_out;
    const size_t plane = static_cast<size_t>(cfg_.t_step) * features.batch;
    BatchPlanes gh = BatchPlanes::zeros(cfg_.n_floors, cfg_.t_step, features.batch);
    for (int k = 0; k < cfg_.n_floors; ++k) {
        BatchPlanes hk = BatchPlanes::zeros(1, cfg_.t_step, features.batch);
        std::copy(h.data.begin() + static_cast<long>(k * plane),
                  h.data.begin() + static_cast<long>((k + 1) * plane), hk.data.begin());
        BatchPlanes gk = BatchPlanes::zeros(1, cfg_.t_step, features.batch);
        std::copy(grad_out.data.begin() + static_cast<long>(k * plane),
                  grad_out.data.begin() + static_cast<long>((k + 1) * plane),
                  gk.data.begin());
        auto& head = floor_heads_[static_cast<size_t>(k)];
        head.accumulate_grads_b(hk, gk);
        BatchPlanes ghk = BatchPlanes::zeros(1, cfg_.t_step, features.batch);
        head.backprop_input_b(gk, ghk);
        std::copy(ghk.data.begin(), ghk.data.end(),
                  gh.data.begin() + static_cast<long>(k * plane));
    }
    conv_->accumulate_grads_b(features, gh);
}

std::vector<Tensor*> MaskedNetwork::parameters() {
    std::vector<Tensor*> ps;
    for (auto& l : layers_) {
        ps.push_back(&l.weights);
        if (l.with_bias_) ps.push_back(&l.bias);
    }
    if (skip_proj_) ps.push_back(&skip_proj_->weights);
    if (conv_) {
        ps.push_back(&conv_->weights);
        ps.push_back(&conv_->bias);
    }
    for (auto& h : floor_heads_) {
        ps.push_back(&h.weights);
        if (h.with_bias_) ps.push_back(&h.bias);
    }
    return ps;
}

std::vector<const Tensor*> MaskedNetwork::parameters() const {
    auto ps = const_cast<MaskedNetwork*>(this)->parameters();
    return {ps.begin(), ps.end()};
}

void MaskedNetwork::zero_grads() {
    for (Tensor* t : parameters()) t->zero_grad();
}

uint64_t MaskedNetwork::backbone_checksum() const {
    Fnv1a64 h;
    auto add = [&](const Tensor& t) {
        h.update(t.name);
        h.update(t.value.data(), t.value.size() * sizeof(double));
    };
    for (const auto& l : layers_) {
        add(l.weights);
        if (l.with_bias_) add(l.bias);
    }
    if (skip_proj_) add(skip_proj_->weights);
    return h.digest();
}

// --- losses -----------------------------------------------------------------

namespace {
double huber_deriv(double e, double delta) {
    if (std::fabs(e) <= delta) return e;
    return e >= 0.0 ? delta : -delta;
}
} // namespace

double huber(double y, double y_hat, double delta) {
    if (delta <= 0.0) throw Error(ErrorClass::Domain, "huber: delta must be > 0");
    double e = y - y_hat;
    double ae = std::fabs(e);
    if (ae <= delta) return 0.5 * e * e;
    return delta * (ae - 0.5 * delta);
}

double huber_mean(std::span<const double> y, std::span<const double> y_hat, double delta) {
    if (y.size() != y_hat.size() || y.empty())
        throw Error(ErrorClass::Shape, "huber_mean: size mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < y.size(); ++i) acc += huber(y[i], y_hat[i], delta);
    return acc / static_cast<double>(y.size());
}

double physics_loss(std::span<const double> v_hat, std::span<const double> d_hat,
                    double dt_s, double delta) {
    if (v_hat.size() != d_hat.size() || v_hat.empty())
        throw Error(ErrorClass::Shape, "physics_loss: size mismatch");
    double cum = 0.0;
    double loss = 0.0;
    for (size_t t = 0; t < v_hat.size(); ++t) {
        cum += v_hat[t] * dt_s;
        loss += huber(cum, d_hat[t], delta);
    }
    return loss;
}

void physics_loss_backward(std::span<const double> v_hat, std::span<const double> d_hat,
                           double dt_s, double delta, double scale,
                           std::span<double> grad_v, std::span<double> grad_d) {
    const size_t n = v_hat.size();
    std::vector<double> hd(n);
    double cum = 0.0;
    for (size_t t = 0; t < n; ++t) {
        cum += v_hat[t] * dt_s;
        hd[t] = huber_deriv(cum - d_hat[t], delta);
    }
    // d(loss)/d(v[t]) = dt * sum_{T >= t} h'(e_T); suffix sum.
    double suffix = 0.0;
    for (size_t t = n; t-- > 0;) {
        suffix += hd[t];
        grad_v[t] += scale * dt_s * suffix;
        grad_d[t] += scale * (-hd[t]);
    }
}

double source_loss(const std::vector<Signal>& pred, const std::vector<Signal>& truth,
                   int epoch, const LossConfig& cfg, std::vector<Signal>* grads) {
    if (pred.size() != truth.size() || pred.empty())
        throw Error(ErrorClass::Shape, "source_loss: batch size mismatch");
    const int channels = truth[0].channels;
    const int t_len = truth[0].t_len;
    const bool physics = epoch >= cfg.physics_switch_epoch;

    if (grads) {
        grads->clear();
        for (const auto& p : pred) grads->push_back(Signal::zeros(p.channels, p.t_len));
    }

    // Peak of each true channel; samples with a dead channel are skipped.
    std::vector<int> live;
    std::vector<std::vector<double>> peaks(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i].channels != channels || pred[i].t_len != t_len ||
            truth[i].channels != channels || truth[i].t_len != t_len)
            throw Error(ErrorClass::Shape, "source_loss: sample shape mismatch");
        peaks[i].resize(static_cast<size_t>(channels));
        bool ok = true;
        for (int c = 0; c < channels; ++c) {
            double m = 0.0;
            const double* tc = truth[i].ch(c);
            for (int t = 0; t < t_len; ++t) m = std::max(m, std::fabs(tc[t]));
            peaks[i][static_cast<size_t>(c)] = m;
            if (m == 0.0) ok = false;
        }
        if (ok)
            live.push_back(static_cast<int>(i));
        else
            std::fprintf(stderr,
                         "source_loss: skipping degenerate sample %zu (zero-peak channel)\n", i);
    }
    if (live.empty())
        throw Error(ErrorClass::Degenerate, "source_loss: all samples degenerate");

    const double inv_b = 1.0 / static_cast<double>(live.size());
    const double inv_elems = 1.0 / (static_cast<double>(channels) * t_len);
    double total = 0.0;

    std::vector<double> v_norm(static_cast<size_t>(t_len)),
        d_norm(static_cast<size_t>(t_len));
    std::vector<double> gv(static_cast<size_t>(t_len)), gd(static_cast<size_t>(t_len));

    for (int idx : live) {
        const size_t i = static_cast<size_t>(idx);
        double data_term = 0.0;
        for (int c = 0; c < channels; ++c) {
            const double a = peaks[i][static_cast<size_t>(c)];
            const double* tc = truth[i].ch(c);
            const double* pc = pred[i].ch(c);
            double* gc = grads ? (*grads)[i].ch(c) : nullptr;
            for (int t = 0; t < t_len; ++t) {
                double e = (tc[t] - pc[t]) / a;
                data_term += huber(tc[t] / a, pc[t] / a, cfg.huber_delta);
                if (gc)
                    gc[t] += -huber_deriv(e, cfg.huber_delta) / a * inv_elems * inv_b;
            }
        }
        total += data_term * inv_elems;

        if (physics && channels >= 3 && cfg.physics_weight != 0.0) {
            const double av = peaks[i][1], ad = peaks[i][2];
            const double* pv = pred[i].ch(1);
            const double* pd = pred[i].ch(2);
            for (int t = 0; t < t_len; ++t) {
                v_norm[static_cast<size_t>(t)] = pv[t] / av;
                d_norm[static_cast<size_t>(t)] = pd[t] / ad;
            }
            total += cfg.physics_weight * physics_loss(v_norm, d_norm, cfg.dt_s, cfg.huber_delta);
            if (grads) {
                std::fill(gv.begin(), gv.end(), 0.0);
                std::fill(gd.begin(), gd.end(), 0.0);
                physics_loss_backward(v_norm, d_norm, cfg.dt_s, cfg.huber_delta,
                                      cfg.physics_weight * inv_b, gv, gd);
                double* gcv = (*grads)[i].ch(1);
                double* gcd = (*grads)[i].ch(2);
                for (int t = 0; t < t_len; ++t) {
                    gcv[t] += gv[static_cast<size_t>(t)] / av;
                    gcd[t] += gd[static_cast<size_t>(t)] / ad;
                }
            }
        }
    }
    return total * inv_b;
}

double target_loss(const std::vector<Signal>& pred, const std::vector<Signal>& truth,
                   double delta, std::vector<Signal>* grads) {
    if (pred.size() != truth.size() || pred.empty())
        throw Error(ErrorClass::Shape, "target_loss: batch size mismatch");
    const int floors = truth[0].channels;
    const int t_len = truth[0].t_len;
    if (grads) {
        grads->clear();
        for (const auto& p : pred) grads->push_back(Signal::zeros(p.channels, p.t_len));
    }
    const double inv = 1.0 / (static_cast<double>(pred.size()) * floors * t_len);
    double total = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i].channels != floors || pred[i].t_len != t_len ||
            truth[i].channels != floors || truth[i].t_len != t_len)
            throw Error(ErrorClass::Shape, "target_loss: sample shape mismatch");
        for (int k = 0; k < floors; ++k) {
            const double* tk = truth[i].ch(k);
            const double* pk = pred[i].ch(k);
            double a = 0.0;
            for (int t = 0; t < t_len; ++t) a = std::max(a, std::fabs(tk[t]));
            if (a == 0.0)
                throw Error(ErrorClass::Degenerate,
                            "target_loss: zero peak for sample " + std::to_string(i) +
                                " floor " + std::to_string(k));
            double* gk = grads ? (*grads)[i].ch(k) : nullptr;
            for (int t = 0; t < t_len; ++t) {
                double e = (tk[t] - pk[t]) / a;
                total += huber(tk[t] / a, pk[t] / a, delta);
                if (gk) gk[t] += -huber_deriv(e, delta) / a * inv;
            }
        }
    }
    return total * inv;
}

// --- Adam -------------------------------------------------------------------

Adam::Adam(std::vector<Tensor*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor* t : params_) {
        m_.emplace_back(t->size(), 0.0);
        v_.emplace_back(t->size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t p = 0; p < params_.size(); ++p) {
        Tensor* t = params_[p];
        if (!t->trainable) continue;
        double* m = m_[p].data();
        double* v = v_[p].data();
        double* val = t->value.data();
        double* g = t->grad.data();
        const size_t n = t->size();
        // Gradients are consumed and cleared in the same pass, so the next
        // backward accumulates into zeroed buffers.
        for (size_t i = 0; i < n; ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            val[i] -= cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
            g[i] = 0.0;
        }
    }
}

} // namespace qs::net
