#ifndef QS_HAZARD_HPP
#define QS_HAZARD_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "qs/waveform.hpp"

namespace qs::hazard {

// Monte-Carlo seismicity configuration: stationary Poisson occurrence over
// repeated evaluation windows, doubly-truncated Gutenberg-Richter
// magnitudes, uniform epicenters on a disc source at fixed depth.
struct HazardConfig {
    double rate_per_year = 0.5;
    double window_years = 50.0;
    int n_windows = 10000;
    double mw_min = 5.5;
    double mw_max = 6.8;
    double b_value = 0.9;
    double source_radius_km = 55.0;
    double depth_km = 15.0;
    double vs30_mps = 400.0; // metadata only, carried through outputs
    int n_steps = 4096;
    double dt_s = 0.01;
    uint64_t seed = 1;

    void validate() const;
};

struct CatalogEvent {
    int window_index = 0;
    double time_years = 0.0;
    double mw = 0.0;
    double r_epi_km = 0.0;
    double r_rup_km = 0.0;
};

// Stochastic waveform synthesizer: band-limited Gaussian noise shaped by a
// magnitude-dependent envelope and a magnitude/distance amplitude law
//   amp = base_scale * 10^(attn_mw * mw) / (r_rup + attn_r_offset)^attn_r_exp.
struct SynthesizerConfig {
    double band_low_hz = 0.2;
    double band_high_hz = 20.0;
    double envelope_shape = 2.0;       // exponent of the rise
    double envelope_peak_frac = 0.25;  // peak time as fraction of duration
    double duration_s_base = 3.0;      // strong-motion duration at mw_min
    double duration_s_per_mw = 2.5;    // linear growth with (mw - mw_min)
    double attn_mw = 1.25;
    double attn_r_exp = 1.8;
    double attn_r_offset_km = 6.0;
    double base_scale = 2.0e-5;        // sets absolute PGA level, m/s^2
    double mw_ref = 5.5;               // duration reference magnitude

    void validate(double dt_s) const;
};

// Inverse CDF of the doubly-truncated exponential (Gutenberg-Richter) law.
double sample_magnitude(double u, double b_value, double mw_min, double mw_max);

// Uniform epicenter over a disc of the given radius; returns (r_epi, r_rup)
// with r_rup = sqrt(r_epi^2 + depth^2). u2 fixes the (unused) azimuth.
std::pair<double, double> sample_location(double u1, double u2,
                                          double radius_km, double depth_km);

// One Poisson event sequence per window, inverse-CDF exponential
// inter-arrival times. Deterministic per (seed, window). Events are sorted
// by (window_index, time_years).
std::vector<CatalogEvent> simulate_catalog(const HazardConfig& cfg);

// RNG stream key for a motion: (base seed, window index, event index in window).
uint64_t motion_seed(uint64_t base_seed, int window_index, int event_index);

signals::Waveform synthesize_motion(const CatalogEvent& event,
                                    const SynthesizerConfig& synth,
                                    int n_steps, double dt_s,
                                    uint64_t noise_seed);

} // namespace qs::hazard

#endif // QS_HAZARD_HPP
