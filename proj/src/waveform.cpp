#include "qs/waveform.hpp"

#include <algorithm>
#include <cmath>

#include "qs/errors.hpp"

namespace qs::signals {

double max_abs(SeriesView s) {
    double m = 0.0;
    for (double x : s) m = std::max(m, std::fabs(x));
    return m;
}

double compute_pga(const Waveform& w) {
    if (w.samples.empty())
        throw Error(ErrorClass::Domain, "compute_pga: empty waveform");
    return max_abs(w.samples);
}

std::vector<double> integrate_velocity(std::span<const double> accel, double dt_s) {
    std::vector<double> v(accel.size(), 0.0);
    for (size_t i = 1; i < accel.size(); ++i)
        v[i] = v[i - 1] + 0.5 * dt_s * (accel[i - 1] + accel[i]);
    return v;
}

double compute_pgv(const Waveform& w) {
    if (w.samples.empty())
        throw Error(ErrorClass::Domain, "compute_pgv: empty waveform");
    return max_abs(integrate_velocity(w.samples, w.dt_s));
}

IntensityMeasures compute_intensity(const Waveform& w) {
    return {compute_pga(w), compute_pgv(w)};
}

NormalizationStats fit_normalization(
    const std::vector<Waveform>& inputs,
    const std::vector<std::vector<SeriesView>>& response_families) {
    if (inputs.empty())
        throw Error(ErrorClass::Domain, "fit_normalization: no input waveforms");

    NormalizationStats stats;
    stats.input_scale = 0.0;
    for (const auto& w : inputs)
        stats.input_scale = std::max(stats.input_scale, max_abs(w.samples));
    if (stats.input_scale <= 0.0)
        throw Error(ErrorClass::Degenerate, "fit_normalization: all-zero inputs");

    stats.response_scales.reserve(response_families.size());
    for (size_t f = 0; f < response_families.size(); ++f) {
        double m = 0.0;
        for (const auto& series : response_families[f])
            m = std::max(m, max_abs(series));
        if (m <= 0.0)
            throw Error(ErrorClass::Degenerate,
                        "fit_normalization: all-zero response family " + std::to_string(f));
        stats.response_scales.push_back(m);
    }
    return stats;
}

} // namespace qs::signals
