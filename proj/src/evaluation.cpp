#include "qs/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qs/errors.hpp"

namespace qs::eval {

double correlation(std::span<const double> y, std::span<const double> y_hat) {
    if (y.size() != y_hat.size() || y.size() < 2)
        throw Error(ErrorClass::Domain, "correlation: need two equal-length series");
    const double n = static_cast<double>(y.size());
    double my = 0.0, mh = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
        my += y[i];
        mh += y_hat[i];
    }
    my /= n;
    mh /= n;
    double cov = 0.0, vy = 0.0, vh = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
        double a = y[i] - my, b = y_hat[i] - mh;
        cov += a * b;
        vy += a * a;
        vh += b * b;
    }
    if (vy <= 0.0 || vh <= 0.0)
        throw Error(ErrorClass::Degenerate, "correlation: zero variance");
    return cov / std::sqrt(vy * vh);
}

double avg_correlation(const std::vector<double>& per_floor_r, size_t expected_floors) {
    if (per_floor_r.size() != expected_floors || per_floor_r.empty())
        throw Error(ErrorClass::Completeness, "avg_correlation: missing floor records");
    double s = std::accumulate(per_floor_r.begin(), per_floor_r.end(), 0.0);
    return s / static_cast<double>(per_floor_r.size());
}

std::vector<size_t> percentile_exemplars(const std::vector<double>& values,
                                         const std::vector<double>& levels) {
    if (values.empty())
        throw Error(ErrorClass::Domain, "percentile_exemplars: empty values");
    std::vector<size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (values[a] != values[b]) return values[a] < values[b];
        return a < b; // ties -> lowest original index first
    });
    const double n = static_cast<double>(values.size());
    std::vector<size_t> out;
    out.reserve(levels.size());
    for (double p : levels) {
        auto rank = static_cast<size_t>(std::ceil(p * n / 100.0));
        rank = std::clamp<size_t>(rank, 1, values.size());
        out.push_back(order[rank - 1]);
    }
    return out;
}

namespace {
// Linear-interpolation quantile on sorted data (R type 7).
double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = static_cast<size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}
} // namespace

BoxStats box_stats(const std::vector<double>& values) {
    if (values.empty())
        throw Error(ErrorClass::Domain, "box_stats: empty values");
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());

    BoxStats s;
    s.median = quantile_sorted(sorted, 0.5);
    s.q1 = quantile_sorted(sorted, 0.25);
    s.q3 = quantile_sorted(sorted, 0.75);
    const double iqr = s.q3 - s.q1;
    const double lo_fence = s.q1 - 1.5 * iqr;
    const double hi_fence = s.q3 + 1.5 * iqr;

    s.whisker_low = s.q1;
    s.whisker_high = s.q3;
    bool any_inside = false;
    for (double v : sorted) {
        if (v >= lo_fence && v <= hi_fence) {
            if (!any_inside) {
                s.whisker_low = v;
                any_inside = true;
            }
            s.whisker_high = v;
        } else {
            s.outliers.push_back(v);
        }
    }
    return s;
}

FloorPeaks peak_edp(const solver::ResponseHistory& history, bool absolute_accel,
                    const signals::Waveform* gm) {
    FloorPeaks peaks;
    const size_t floors = history.rel_accel.size();
    peaks.pfa.resize(floors, 0.0);
    for (size_t k = 0; k < floors; ++k) {
        const auto& a = history.rel_accel[k];
        if (absolute_accel) {
            if (!gm || gm->samples.size() != a.size())
                throw Error(ErrorClass::Domain,
                            "peak_edp: absolute acceleration needs the ground motion");
            double m = 0.0;
            for (size_t t = 0; t < a.size(); ++t)
                m = std::max(m, std::fabs(a[t] + gm->samples[t]));
            peaks.pfa[k] = m;
        } else {
            double m = 0.0;
            for (double v : a) m = std::max(m, std::fabs(v));
            peaks.pfa[k] = m;
        }
    }
    peaks.peak_idr.resize(history.idr.size(), 0.0);
    for (size_t k = 0; k < history.idr.size(); ++k) {
        double m = 0.0;
        for (double v : history.idr[k]) m = std::max(m, std::fabs(v));
        peaks.peak_idr[k] = m;
    }
    return peaks;
}

ExceedanceCurve exceedance_curve(const std::vector<std::optional<double>>& per_window_peaks,
                                 std::vector<double> thresholds) {
    if (per_window_peaks.empty())
        throw Error(ErrorClass::Domain, "exceedance_curve: no windows");
    if (thresholds.empty())
        throw Error(ErrorClass::Domain, "exceedance_curve: no thresholds");
    std::sort(thresholds.begin(), thresholds.end());

    ExceedanceCurve curve;
    curve.thresholds = std::move(thresholds);
    curve.probabilities.reserve(curve.thresholds.size());
    const double n = static_cast<double>(per_window_peaks.size());
    for (double x : curve.thresholds) {
        size_t count = 0;
        for (const auto& peak : per_window_peaks)
            if (peak.has_value() && *peak > x) ++count;
        curve.probabilities.push_back(static_cast<double>(count) / n);
    }
    return curve;
}

} // namespace qs::eval
