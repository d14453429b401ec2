#ifndef QS_EVALUATION_HPP
#define QS_EVALUATION_HPP

#include <optional>
#include <span>
#include <vector>

#include "qs/solver.hpp"

namespace qs::eval {

// Pearson correlation coefficient.
double correlation(std::span<const double> y, std::span<const double> y_hat);

// Mean of per-floor correlations; expected_floors guards completeness.
double avg_correlation(const std::vector<double>& per_floor_r, size_t expected_floors);

// Nearest-rank percentile exemplars: for each level p the original index of
// the value at sorted rank ceil(p*n/100); ties resolve to the lowest index.
std::vector<size_t> percentile_exemplars(const std::vector<double>& values,
                                         const std::vector<double>& levels = {5, 50, 95});

struct BoxStats {
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double whisker_low = 0.0;
    double whisker_high = 0.0;
    std::vector<double> outliers;
};

// Quartiles by linear interpolation; whiskers at the most extreme data
// within 1.5 IQR of the quartiles.
BoxStats box_stats(const std::vector<double>& values);

struct FloorPeaks {
    std::vector<double> pfa;      // m/s^2 per floor
    std::vector<double> peak_idr; // per story
};

// Per-floor peak EDPs. Relative floor acceleration by default; the absolute
// variant adds the ground acceleration before taking the peak.
FloorPeaks peak_edp(const solver::ResponseHistory& history,
                    bool absolute_accel = false,
                    const signals::Waveform* gm = nullptr);

struct ExceedanceCurve {
    std::vector<double> thresholds;
    std::vector<double> probabilities;
};

// Empirical per-window exceedance: fraction of windows whose peak strictly
// exceeds each threshold; windows without events never exceed.
ExceedanceCurve exceedance_curve(const std::vector<std::optional<double>>& per_window_peaks,
                                 std::vector<double> thresholds);

} // namespace qs::eval

#endif // QS_EVALUATION_HPP
