#ifndef QS_SOLVER_HPP
#define QS_SOLVER_HPP

#include <utility>
#include <vector>

#include "qs/waveform.hpp"

namespace qs::solver {

struct SDOFParams {
    double mass_kg = 1.0;
    double period_s = 1.0;
    double damping_ratio = 0.05;
    double yield_force_n = 1.0;
    double post_yield_ratio = 0.1;

    double stiffness() const; // mass * (2*pi/period)^2
    double omega() const;     // 2*pi/period
    void validate() const;
};

struct RayleighSpec {
    int mode_i = 1; // 1-based mode numbers
    int mode_j = 2;
    double zeta_i = 0.03;
    double zeta_j = 0.03;
};

struct ShearBuildingParams {
    std::vector<double> masses_kg;
    std::vector<double> story_heights_m;
    std::vector<double> story_stiffness_n_per_m;
    std::vector<double> story_yield_force_n;
    std::vector<double> post_yield_ratio;
    RayleighSpec rayleigh;

    size_t n_stories() const { return masses_kg.size(); }
    void validate() const;
};

// Bilinear kinematic-hardening spring state. back_force_n tracks the center
// of the yield surface; |force - back_force| <= yield_force always holds.
struct BilinearState {
    double disp_m = 0.0;
    double force_n = 0.0;
    double back_force_n = 0.0;
};

// Advance the spring to new_disp; returns (force, updated state).
std::pair<double, BilinearState> bilinear_force(const BilinearState& state,
                                                double new_disp, double k0,
                                                double f_y, double r_post);

// Tangent stiffness consistent with bilinear_force at new_disp.
double bilinear_tangent(const BilinearState& state, double new_disp,
                        double k0, double f_y, double r_post);

struct ResponseHistory {
    double dt_s = 0.0;
    // [dof][step]; one DOF for the SDOF model
    std::vector<std::vector<double>> rel_accel;
    std::vector<std::vector<double>> rel_vel;
    std::vector<std::vector<double>> rel_disp;
    std::vector<double> restoring_force; // SDOF only
    std::vector<std::vector<double>> idr; // building only, per story
};

struct InitialState {
    double disp_m = 0.0;
    double vel_mps = 0.0;
};

// Newmark average-acceleration (gamma=1/2, beta=1/4) with a Newton
// iteration on the bilinear spring each step. Zero initial conditions by
// default; the initial-state overload supports free-vibration checks.
ResponseHistory newmark_sdof(const SDOFParams& params, const signals::Waveform& gm,
                             InitialState init = {});

ResponseHistory newmark_mdof(const ShearBuildingParams& params,
                             const signals::Waveform& gm);

// Natural periods (s) in descending order from the generalized symmetric
// eigenproblem on (K, M).
std::vector<double> eigen_analysis(const ShearBuildingParams& params);

// a0, a1 with zeta_i = a0/(2 w_i) + a1 w_i / 2 at the two anchor frequencies.
std::pair<double, double> rayleigh_coefficients(double omega1, double omega2,
                                                double zeta1, double zeta2);

// Scale all story stiffnesses uniformly so the fundamental period matches
// target_t1 within 0.1%. Yield forces are left untouched.
ShearBuildingParams tune_building(double target_t1, ShearBuildingParams tmpl);

// Desk-scale default: uniform masses, stiffness tapering linearly to 40% at
// the roof, story yield drift 1% of height, r_post 0.1, Rayleigh 3%/3% on
// modes 1-2, tuned to the target fundamental period.
ShearBuildingParams default_building(int n_stories, double target_t1,
                                     double story_height_m = 3.0,
                                     double story_mass_kg = 1.0);

} // namespace qs::solver

#endif // QS_SOLVER_HPP
