#ifndef QS_CALIBRATION_HPP
#define QS_CALIBRATION_HPP

#include <cstdint>
#include <vector>

#include "qs/solver.hpp"
#include "qs/waveform.hpp"

namespace qs::calibration {

struct ParameterBounds {
    double lo = 0.0;
    double hi = 1.0;
};

// Mean-square displacement mismatch against precomputed target top-floor
// displacement histories, minimized over (period, damping, yield force,
// post-yield ratio) with unit mass.
struct CalibrationProblem {
    ParameterBounds period_s{1.2, 4.8};
    ParameterBounds damping_ratio{0.005, 0.10};
    ParameterBounds yield_force_n{0.1, 20.0};
    ParameterBounds post_yield_ratio{0.01, 0.9};
    double mass_kg = 1.0;
    std::vector<signals::Waveform> motions;
    std::vector<std::vector<double>> target_disp; // per motion, top floor

    void validate() const;
};

struct Trial {
    solver::SDOFParams params;
    double objective_value = 0.0; // m^2
};

// Sum over motions of the per-step mean squared displacement difference.
double objective(const solver::SDOFParams& params,
                 const std::vector<signals::Waveform>& motions,
                 const std::vector<std::vector<double>>& target_disp);

// Latin-hypercube initialization followed by Nelder-Mead refinement around
// the incumbent; budget counts objective evaluations. Deterministic per seed.
Trial optimize(const CalibrationProblem& problem, int budget, uint64_t seed);

// All evaluated trials from the latest optimize() call are also returned
// through this overload for reporting.
Trial optimize(const CalibrationProblem& problem, int budget, uint64_t seed,
               std::vector<Trial>* all_trials);

} // namespace qs::calibration

#endif // QS_CALIBRATION_HPP
