#include "qs/calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "qs/errors.hpp"
#include "qs/rng.hpp"

namespace qs::calibration {

namespace {

using Point = std::array<double, 4>; // period, damping, yield force, post-yield ratio

solver::SDOFParams to_params(const Point& x, double mass) {
    solver::SDOFParams p;
    p.mass_kg = mass;
    p.period_s = x[0];
    p.damping_ratio = x[1];
    p.yield_force_n = x[2];
    p.post_yield_ratio = x[3];
    return p;
}

} // namespace

void CalibrationProblem::validate() const {
    auto check = [](const ParameterBounds& b, const char* name) {
        if (!(b.lo < b.hi) || !std::isfinite(b.lo) || !std::isfinite(b.hi))
            throw Error(ErrorClass::Config,
                        std::string("calibration: invalid bounds for ") + name);
    };
    check(period_s, "period_s");
    check(damping_ratio, "damping_ratio");
    check(yield_force_n, "yield_force_n");
    check(post_yield_ratio, "post_yield_ratio");
    if (motions.empty() || motions.size() != target_disp.size())
        throw Error(ErrorClass::Config, "calibration: motions and targets must pair up");
    for (size_t i = 0; i < motions.size(); ++i)
        if (motions[i].samples.size() != target_disp[i].size())
            throw Error(ErrorClass::Config,
                        "calibration: target history length mismatch for motion " +
                            std::to_string(i));
}

double objective(const solver::SDOFParams& params,
                 const std::vector<signals::Waveform>& motions,
                 const std::vector<std::vector<double>>& target_disp) {
    double total = 0.0;
    for (size_t i = 0; i < motions.size(); ++i) {
        auto h = solver::newmark_sdof(params, motions[i]);
        const auto& y_s = h.rel_disp[0];
        const auto& y_t = target_disp[i];
        double acc = 0.0;
        for (size_t t = 0; t < y_s.size(); ++t) {
            double d = y_s[t] - y_t[t];
            acc += d * d;
        }
        total += acc / static_cast<double>(y_s.size());
    }
    return total;
}

Trial optimize(const CalibrationProblem& problem, int budget, uint64_t seed) {
    return optimize(problem, budget, seed, nullptr);
}

Trial optimize(const CalibrationProblem& problem, int budget, uint64_t seed,
               std::vector<Trial>* all_trials) {
    problem.validate();
    if (budget < 1)
        throw Error(ErrorClass::Config, "calibration: budget must be >= 1");

    const std::array<ParameterBounds, 4> bounds = {
        problem.period_s, problem.damping_ratio, problem.yield_force_n,
        problem.post_yield_ratio};

    auto clamp = [&](Point x) {
        for (int d = 0; d < 4; ++d) x[d] = std::clamp(x[d], bounds[d].lo, bounds[d].hi);
        return x;
    };

    int evals_left = budget;
    Point best_x{};
    double best_f = std::numeric_limits<double>::infinity();
    bool any_ok = false;

    auto evaluate = [&](const Point& x) {
        --evals_left;
        double f;
        try {
            f = objective(to_params(x, problem.mass_kg), problem.motions,
                          problem.target_disp);
        } catch (const Error&) {
            f = std::numeric_limits<double>::infinity();
        }
        if (all_trials)
            all_trials->push_back({to_params(x, problem.mass_kg), f});
        if (f < best_f) {
            best_f = f;
            best_x = x;
            any_ok = std::isfinite(f) || any_ok;
        }
        if (std::isfinite(f)) any_ok = true;
        return f;
    };

    // Phase 1: Latin hypercube over the box (half the budget, at least 1).
    int n_init = std::max(1, budget / 2);
    Rng rng(derive_seed({seed, 0x43414CULL /*"CAL"*/}));
    std::vector<Point> lhs(static_cast<size_t>(n_init));
    for (int d = 0; d < 4; ++d) {
        std::vector<size_t> perm(static_cast<size_t>(n_init));
        for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        rng.shuffle(perm);
        for (int i = 0; i < n_init; ++i) {
            double u = (static_cast<double>(perm[static_cast<size_t>(i)]) + rng.uniform()) /
                       n_init;
            lhs[static_cast<size_t>(i)][d] =
                bounds[d].lo + u * (bounds[d].hi - bounds[d].lo);
        }
    }
    for (const auto& x : lhs) {
        if (evals_left <= 0) break;
        evaluate(x);
    }

    // Phase 2: Nelder-Mead around the incumbent, clamped to the box.
    if (evals_left > 4) {
        std::array<Point, 5> simplex;
        std::array<double, 5> fval;
        simplex[0] = best_x;
        fval[0] = best_f;
        for (int d = 0; d < 4; ++d) {
            Point x = best_x;
            double step = 0.08 * (bounds[d].hi - bounds[d].lo);
            x[d] = (x[d] + step <= bounds[d].hi) ? x[d] + step : x[d] - step;
            simplex[static_cast<size_t>(d) + 1] = clamp(x);
            fval[static_cast<size_t>(d) + 1] = evaluate(simplex[static_cast<size_t>(d) + 1]);
            if (evals_left <= 0) break;
        }

        const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
        while (evals_left > 0) {
            // Sort simplex by objective (stable to keep determinism on ties).
            std::array<size_t, 5> order = {0, 1, 2, 3, 4};
            std::stable_sort(order.begin(), order.end(),
                             [&](size_t a, size_t b) { return fval[a] < fval[b]; });
            std::array<Point, 5> sx;
            std::array<double, 5> sf;
            for (size_t i = 0; i < 5; ++i) {
                sx[i] = simplex[order[i]];
                sf[i] = fval[order[i]];
            }
            simplex = sx;
            fval = sf;

            Point centroid{};
            for (size_t i = 0; i < 4; ++i)
                for (int d = 0; d < 4; ++d) centroid[d] += simplex[i][d] / 4.0;

            auto affine = [&](double t) {
                Point x;
                for (int d = 0; d < 4; ++d)
                    x[d] = centroid[d] + t * (simplex[4][d] - centroid[d]);
                return clamp(x);
            };

            Point xr = affine(-alpha);
            double fr = evaluate(xr);
            if (evals_left <= 0) break;
            if (fr < fval[0]) {
                Point xe = affine(-gamma);
                double fe = evaluate(xe);
                if (fe < fr) {
                    simplex[4] = xe;
                    fval[4] = fe;
                } else {
                    simplex[4] = xr;
                    fval[4] = fr;
                }
            } else if (fr < fval[3]) {
                simplex[4] = xr;
                fval[4] = fr;
            } else {
                Point xc = affine(rho);
                double fc = evaluate(xc);
                if (evals_left <= 0) break;
                if (fc < fval[4]) {
                    simplex[4] = xc;
                    fval[4] = fc;
                } else {
                    for (size_t i = 1; i < 5; ++i) {
                        for (int d = 0; d < 4; ++d)
                            simplex[i][d] =
                                simplex[0][d] + sigma * (simplex[i][d] - simplex[0][d]);
                        simplex[i] = clamp(simplex[i]);
                        fval[i] = evaluate(simplex[i]);
                        if (evals_left <= 0) break;
                    }
                }
            }
        }
    }

    if (!any_ok)
        throw Error(ErrorClass::Calibration, "calibration: every trial failed");
    return {to_params(best_x, problem.mass_kg), best_f};
}

} // namespace qs::calibration
