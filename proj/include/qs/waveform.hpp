#ifndef QS_WAVEFORM_HPP
#define QS_WAVEFORM_HPP

#include <span>
#include <string>
#include <vector>

namespace qs::signals {

// Uniformly sampled ground-acceleration time history.
struct Waveform {
    std::vector<double> samples; // m/s^2
    double dt_s = 0.0;
    std::string id;

    size_t size() const { return samples.size(); }
};

struct IntensityMeasures {
    double pga = 0.0; // m/s^2
    double pgv = 0.0; // m/s
};

// Peak ground acceleration: max |a(t)|.
double compute_pga(const Waveform& w);

// Peak ground velocity: trapezoidal integration from zero initial velocity,
// no baseline correction, then max |v(t)|.
double compute_pgv(const Waveform& w);

IntensityMeasures compute_intensity(const Waveform& w);

// Velocity series by trapezoidal integration, v[0] = 0.
std::vector<double> integrate_velocity(std::span<const double> accel, double dt_s);

// Dataset-level normalization scales. One input scale for ground motions,
// one scale per response family (e.g. the four SDOF channels, or one per
// EDP family for building responses).
struct NormalizationStats {
    double input_scale = 1.0;
    std::vector<double> response_scales;
};

using SeriesView = std::span<const double>;

// input_scale = global max-abs over all input samples; response_scales[f] =
// global max-abs over every series in family f. Throws a degenerate-scale
// error when a family (or the inputs) are identically zero.
NormalizationStats fit_normalization(
    const std::vector<Waveform>& inputs,
    const std::vector<std::vector<SeriesView>>& response_families);

double max_abs(SeriesView s);

} // namespace qs::signals

#endif // QS_WAVEFORM_HPP
