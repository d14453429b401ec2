#include "qs/hazard.hpp"

#include <cmath>
#include <string>

#include "qs/errors.hpp"
#include "qs/rng.hpp"

namespace qs::hazard {

namespace {
constexpr double kPi = 3.14159265358979323846;

// Two cascaded biquads (RBJ forms): high-pass at f_lo, low-pass at f_hi.
struct Biquad {
    double b0, b1, b2, a1, a2;
    double z1 = 0.0, z2 = 0.0;

    double step(double x) {
        double y = b0 * x + z1;
        z1 = b1 * x - a1 * y + z2;
        z2 = b2 * x - a2 * y;
        return y;
    }
};

Biquad make_lowpass(double fc, double dt) {
    double w0 = 2.0 * kPi * fc * dt;
    double alpha = std::sin(w0) / std::sqrt(2.0); // Q = 1/sqrt(2)
    double c = std::cos(w0);
    double a0 = 1.0 + alpha;
    return {(1.0 - c) / (2.0 * a0), (1.0 - c) / a0, (1.0 - c) / (2.0 * a0),
            -2.0 * c / a0, (1.0 - alpha) / a0};
}

Biquad make_highpass(double fc, double dt) {
    double w0 = 2.0 * kPi * fc * dt;
    double alpha = std::sin(w0) / std::sqrt(2.0);
    double c = std::cos(w0);
    double a0 = 1.0 + alpha;
    return {(1.0 + c) / (2.0 * a0), -(1.0 + c) / a0, (1.0 + c) / (2.0 * a0),
            -2.0 * c / a0, (1.0 - alpha) / a0};
}
} // namespace

void HazardConfig::validate() const {
    if (rate_per_year < 0.0)
        throw Error(ErrorClass::Config, "hazard: rate_per_year must be >= 0");
    if (window_years <= 0.0)
        throw Error(ErrorClass::Config, "hazard: window_years must be > 0");
    if (n_windows < 1)
        throw Error(ErrorClass::Config, "hazard: n_windows must be >= 1");
    if (!(mw_min < mw_max))
        throw Error(ErrorClass::Config, "hazard: mw_min must be < mw_max");
    if (b_value <= 0.0)
        throw Error(ErrorClass::Config, "hazard: b_value must be > 0");
    if (source_radius_km <= 0.0)
        throw Error(ErrorClass::Config, "hazard: source_radius_km must be > 0");
    if (depth_km < 0.0)
        throw Error(ErrorClass::Config, "hazard: depth_km must be >= 0");
    if (n_steps < 1)
        throw Error(ErrorClass::Config, "hazard: n_steps must be >= 1");
    if (dt_s <= 0.0)
        throw Error(ErrorClass::Config, "hazard: dt_s must be > 0");
}

void SynthesizerConfig::validate(double dt_s) const {
    double nyquist = 0.5 / dt_s;
    if (!(band_low_hz > 0.0 && band_low_hz < nyquist))
        throw Error(ErrorClass::Config, "synthesizer: band_low_hz outside (0, nyquist)");
    if (!(band_high_hz > band_low_hz && band_high_hz < nyquist))
        throw Error(ErrorClass::Config, "synthesizer: band_high_hz outside (band_low, nyquist)");
    if (attn_r_exp < 0.0)
        throw Error(ErrorClass::Config, "synthesizer: attn_r_exp must be >= 0");
    if (attn_r_offset_km <= 0.0)
        throw Error(ErrorClass::Config, "synthesizer: attn_r_offset_km must be > 0");
    if (duration_s_base <= 0.0 || duration_s_per_mw < 0.0)
        throw Error(ErrorClass::Config, "synthesizer: invalid duration parameters");
    if (envelope_shape <= 0.0 || envelope_peak_frac <= 0.0 || envelope_peak_frac >= 1.0)
        throw Error(ErrorClass::Config, "synthesizer: invalid envelope parameters");
}

double sample_magnitude(double u, double b_value, double mw_min, double mw_max) {
    if (u < 0.0 || u > 1.0)
        throw Error(ErrorClass::Domain, "sample_magnitude: u outside [0, 1]");
    double beta = b_value * std::log(10.0);
    double span = mw_max - mw_min;
    double tail = 1.0 - std::exp(-beta * span);
    double mw = mw_min - std::log(1.0 - u * tail) / beta;
    return std::min(mw, mw_max);
}

std::pair<double, double> sample_location(double u1, double u2,
                                          double radius_km, double depth_km) {
    if (u1 < 0.0 || u1 > 1.0 || u2 < 0.0 || u2 > 1.0)
        throw Error(ErrorClass::Domain, "sample_location: inputs outside [0, 1]");
    double r_epi = radius_km * std::sqrt(u1);
    double r_rup = std::hypot(r_epi, depth_km);
    return {r_epi, r_rup};
}

std::vector<CatalogEvent> simulate_catalog(const HazardConfig& cfg) {
    cfg.validate();
    std::vector<CatalogEvent> events;
    if (cfg.rate_per_year == 0.0) return events;
    events.reserve(static_cast<size_t>(
        cfg.rate_per_year * cfg.window_years * cfg.n_windows * 1.05) + 16);

    for (int w = 0; w < cfg.n_windows; ++w) {
        Rng rng(derive_seed({cfg.seed, 0x434154ULL /*"CAT"*/, static_cast<uint64_t>(w)}));
        double t = 0.0;
        while (true) {
            double u = rng.uniform();
            if (u >= 1.0) u = std::nextafter(1.0, 0.0);
            t += -std::log(1.0 - u) / cfg.rate_per_year;
            if (t > cfg.window_years) break;
            CatalogEvent ev;
            ev.window_index = w;
            ev.time_years = t;
            ev.mw = sample_magnitude(rng.uniform(), cfg.b_value, cfg.mw_min, cfg.mw_max);
            auto [r_epi, r_rup] =
                sample_location(rng.uniform(), rng.uniform(), cfg.source_radius_km, cfg.depth_km);
            ev.r_epi_km = r_epi;
            ev.r_rup_km = r_rup;
            events.push_back(ev);
        }
    }
    return events; // already sorted by (window_index, time_years)
}

uint64_t motion_seed(uint64_t base_seed, int window_index, int event_index) {
    return derive_seed({base_seed, 0x4D4F54ULL /*"MOT"*/,
                        static_cast<uint64_t>(window_index),
                        static_cast<uint64_t>(event_index)});
}

signals::Waveform synthesize_motion(const CatalogEvent& event,
                                    const SynthesizerConfig& synth,
                                    int n_steps, double dt_s,
                                    uint64_t noise_seed) {
    synth.validate(dt_s);

    signals::Waveform w;
    w.dt_s = dt_s;
    w.samples.resize(static_cast<size_t>(n_steps));

    // Band-limited unit-variance noise.
    Rng rng(noise_seed);
    Biquad hp = make_highpass(synth.band_low_hz, dt_s);
    Biquad lp = make_lowpass(synth.band_high_hz, dt_s);
    double sum_sq = 0.0;
    for (int t = 0; t < n_steps; ++t) {
        double x = lp.step(hp.step(rng.normal()));
        w.samples[static_cast<size_t>(t)] = x;
        sum_sq += x * x;
    }
    double std_dev = std::sqrt(sum_sq / n_steps);
    if (std_dev <= 0.0) std_dev = 1.0;

    // Envelope peaking at 1, duration linear in magnitude.
    double duration = synth.duration_s_base +
                      synth.duration_s_per_mw * (event.mw - synth.mw_ref);
    double t_peak = synth.envelope_peak_frac * duration;
    double shape = synth.envelope_shape;

    double amp = synth.base_scale * std::pow(10.0, synth.attn_mw * event.mw) /
                 std::pow(event.r_rup_km + synth.attn_r_offset_km, synth.attn_r_exp);

    for (int t = 0; t < n_steps; ++t) {
        double time = t * dt_s;
        double env = std::pow(time / t_peak, shape) *
                     std::exp(shape * (1.0 - time / t_peak));
        w.samples[static_cast<size_t>(t)] *= amp * env / std_dev;
    }
    return w;
}

} // namespace qs::hazard
