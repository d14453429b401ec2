#include "qs/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "qs/errors.hpp"

namespace qs::solver {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr int kMaxNewton = 50;
} // namespace

double SDOFParams::omega() const { return 2.0 * kPi / period_s; }
double SDOFParams::stiffness() const { return mass_kg * omega() * omega(); }

void SDOFParams::validate() const {
    if (mass_kg <= 0.0 || period_s <= 0.0 || damping_ratio <= 0.0 || yield_force_n <= 0.0)
        throw Error(ErrorClass::Config, "sdof: mass, period, damping, yield force must be > 0");
    if (post_yield_ratio < 0.0 || post_yield_ratio > 1.0)
        throw Error(ErrorClass::Config, "sdof: post_yield_ratio must be in [0, 1]");
}

void ShearBuildingParams::validate() const {
    size_t n = masses_kg.size();
    if (n == 0)
        throw Error(ErrorClass::Config, "building: no stories");
    if (story_heights_m.size() != n || story_stiffness_n_per_m.size() != n ||
        story_yield_force_n.size() != n || post_yield_ratio.size() != n)
        throw Error(ErrorClass::Config, "building: per-story arrays must share length");
    for (size_t i = 0; i < n; ++i) {
        if (masses_kg[i] <= 0 || story_heights_m[i] <= 0 ||
            story_stiffness_n_per_m[i] <= 0 || story_yield_force_n[i] <= 0)
            throw Error(ErrorClass::Config, "building: story values must be > 0");
        if (post_yield_ratio[i] < 0.0 || post_yield_ratio[i] > 1.0)
            throw Error(ErrorClass::Config, "building: post_yield_ratio must be in [0, 1]");
    }
    if (rayleigh.mode_i == rayleigh.mode_j && n > 1)
        throw Error(ErrorClass::Config, "building: rayleigh modes must differ");
    if (rayleigh.mode_i < 1 || rayleigh.mode_j < 1 ||
        static_cast<size_t>(rayleigh.mode_i) > n || static_cast<size_t>(rayleigh.mode_j) > n)
        throw Error(ErrorClass::Config, "building: rayleigh mode out of range");
}

std::pair<double, BilinearState> bilinear_force(const BilinearState& state,
                                                double new_disp, double k0,
                                                double f_y, double r_post) {
    double f_trial = state.force_n + k0 * (new_disp - state.disp_m);
    double rel = f_trial - state.back_force_n;
    double phi = std::fabs(rel) - f_y;
    BilinearState next{new_disp, f_trial, state.back_force_n};
    if (phi > 0.0 && r_post < 1.0) {
        double hardening = k0 * r_post / (1.0 - r_post);
        double dgamma = phi / (k0 + hardening);
        double sgn = rel >= 0.0 ? 1.0 : -1.0;
        next.force_n = f_trial - k0 * dgamma * sgn;
        next.back_force_n = state.back_force_n + hardening * dgamma * sgn;
    }
    return {next.force_n, next};
}

double bilinear_tangent(const BilinearState& state, double new_disp,
                        double k0, double f_y, double r_post) {
    double f_trial = state.force_n + k0 * (new_disp - state.disp_m);
    double phi = std::fabs(f_trial - state.back_force_n) - f_y;
    return (phi > 0.0 && r_post < 1.0) ? r_post * k0 : k0;
}

ResponseHistory newmark_sdof(const SDOFParams& params, const signals::Waveform& gm,
                             InitialState init) {
    params.validate();
    if (gm.samples.empty() || gm.dt_s <= 0.0)
        throw Error(ErrorClass::Domain, "newmark_sdof: invalid waveform");

    size_t n_steps = gm.samples.size();
    double dt = gm.dt_s;
    double m = params.mass_kg;
    double k0 = params.stiffness();
    double c = 2.0 * params.damping_ratio * m * params.omega();
    double f_y = params.yield_force_n;
    double r = params.post_yield_ratio;
    double tol = 1e-10 * f_y;

    ResponseHistory h;
    h.dt_s = dt;
    h.rel_accel.assign(1, std::vector<double>(n_steps));
    h.rel_vel.assign(1, std::vector<double>(n_steps));
    h.rel_disp.assign(1, std::vector<double>(n_steps));
    h.restoring_force.assign(n_steps, 0.0);

    // Spring state consistent with a backbone push to the initial displacement.
    BilinearState state;
    double fs;
    std::tie(fs, state) = bilinear_force(state, init.disp_m, k0, f_y, r);

    double u = init.disp_m;
    double v = init.vel_mps;
    double a = (-m * gm.samples[0] - c * v - fs) / m;

    h.rel_disp[0][0] = u;
    h.rel_vel[0][0] = v;
    h.rel_accel[0][0] = a;
    h.restoring_force[0] = fs;

    const double c0 = 4.0 / (dt * dt); // u-coefficient in accel update
    const double c1 = 2.0 / dt;        // u-coefficient in vel update

    for (size_t n = 1; n < n_steps; ++n) {
        double p = -m * gm.samples[n];
        // Average-acceleration relations:
        //   a1 = c0 (u1 - u0) - c0 dt v0 - a0
        //   v1 = v0 + dt (a0 + a1) / 2 = c1 (u1 - u0) - v0
        double u1 = u; // warm start from the previous displacement
        BilinearState trial = state;
        double fs1 = 0.0, a1 = 0.0, v1 = 0.0;
        bool converged = false;
        for (int it = 0; it < kMaxNewton; ++it) {
            std::tie(fs1, trial) = bilinear_force(state, u1, k0, f_y, r);
            a1 = c0 * (u1 - u) - c0 * dt * v - a;
            v1 = c1 * (u1 - u) - v;
            double residual = m * a1 + c * v1 + fs1 - p;
            if (std::fabs(residual) < tol) {
                converged = true;
                break;
            }
            double kt = bilinear_tangent(state, u1, k0, f_y, r);
            double k_eff = c0 * m + c1 * c + kt;
            u1 -= residual / k_eff;
        }
        if (!converged)
            throw Error(ErrorClass::Solver,
                        "newmark_sdof: Newton failed to converge at step " + std::to_string(n));
        u = u1;
        v = v1;
        a = a1;
        state = trial;
        h.rel_disp[0][n] = u;
        h.rel_vel[0][n] = v;
        h.rel_accel[0][n] = a;
        h.restoring_force[n] = fs1;
    }
    return h;
}

namespace {

Eigen::MatrixXd stiffness_matrix(const ShearBuildingParams& p,
                                 const std::vector<double>& k) {
    size_t n = p.n_stories();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
    for (size_t i = 0; i < n; ++i) {
        K(i, i) += k[i];
        if (i + 1 < n) {
            K(i, i) += k[i + 1];
            K(i, i + 1) -= k[i + 1];
            K(i + 1, i) -= k[i + 1];
        }
    }
    return K;
}

std::vector<double> natural_frequencies(const ShearBuildingParams& p) {
    size_t n = p.n_stories();
    Eigen::MatrixXd K = stiffness_matrix(p, p.story_stiffness_n_per_m);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (size_t i = 0; i < n; ++i) M(i, i) = p.masses_kg[i];

    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorClass::Model, "eigen_analysis: stiffness matrix not SPD");

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M);
    if (es.info() != Eigen::Success)
        throw Error(ErrorClass::Model, "eigen_analysis: eigensolver failed");

    std::vector<double> omegas(n);
    for (size_t i = 0; i < n; ++i) {
        double lam = es.eigenvalues()[static_cast<Eigen::Index>(i)];
        if (lam <= 0.0)
            throw Error(ErrorClass::Model, "eigen_analysis: non-positive eigenvalue");
        omegas[i] = std::sqrt(lam); // ascending
    }
    return omegas;
}

} // namespace

std::vector<double> eigen_analysis(const ShearBuildingParams& params) {
    params.validate();
    auto omegas = natural_frequencies(params);
    std::vector<double> periods(omegas.size());
    for (size_t i = 0; i < omegas.size(); ++i) periods[i] = 2.0 * kPi / omegas[i];
    return periods; // descending since omegas ascend
}

std::pair<double, double> rayleigh_coefficients(double omega1, double omega2,
                                                double zeta1, double zeta2) {
    if (omega1 <= 0.0 || omega2 <= 0.0)
        throw Error(ErrorClass::Domain, "rayleigh: frequencies must be > 0");
    if (omega1 == omega2)
        throw Error(ErrorClass::Model, "rayleigh: equal anchor frequencies are singular");
    // zeta_i = a0/(2 w_i) + a1 w_i / 2; eliminate a0 by scaling each row by w_i.
    double a1 = 2.0 * (zeta2 * omega2 - zeta1 * omega1) / (omega2 * omega2 - omega1 * omega1);
    double a0 = 2.0 * zeta1 * omega1 - a1 * omega1 * omega1;
    return {a0, a1};
}

ResponseHistory newmark_mdof(const ShearBuildingParams& params,
                             const signals::Waveform& gm) {
    params.validate();
    if (gm.samples.empty() || gm.dt_s <= 0.0)
        throw Error(ErrorClass::Domain, "newmark_mdof: invalid waveform");

    const size_t n = params.n_stories();
    const size_t n_steps = gm.samples.size();
    const double dt = gm.dt_s;

    auto omegas = natural_frequencies(params);
    double a0c, a1c;
    if (params.rayleigh.mode_i == params.rayleigh.mode_j) {
        // Single anchor (one-story model): mass-proportional damping.
        a0c = 2.0 * params.rayleigh.zeta_i * omegas[params.rayleigh.mode_i - 1];
        a1c = 0.0;
    } else {
        std::tie(a0c, a1c) = rayleigh_coefficients(omegas[params.rayleigh.mode_i - 1],
                                                   omegas[params.rayleigh.mode_j - 1],
                                                   params.rayleigh.zeta_i,
                                                   params.rayleigh.zeta_j);
    }

    Eigen::MatrixXd K0 = stiffness_matrix(params, params.story_stiffness_n_per_m);
    Eigen::VectorXd mass(n);
    for (size_t i = 0; i < n; ++i) mass[static_cast<Eigen::Index>(i)] = params.masses_kg[i];
    Eigen::MatrixXd C = a1c * K0;
    C.diagonal() += a0c * mass;

    double f_y_ref = *std::min_element(params.story_yield_force_n.begin(),
                                       params.story_yield_force_n.end());
    double tol = 1e-10 * f_y_ref;

    ResponseHistory h;
    h.dt_s = dt;
    h.rel_accel.assign(n, std::vector<double>(n_steps));
    h.rel_vel.assign(n, std::vector<double>(n_steps));
    h.rel_disp.assign(n, std::vector<double>(n_steps));
    h.idr.assign(n, std::vector<double>(n_steps));

    std::vector<BilinearState> springs(n);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);

    // Restoring force from story springs at displacement x given committed states.
    auto spring_forces = [&](const Eigen::VectorXd& x,
                             std::vector<BilinearState>& states_out) {
        Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
        for (size_t s = 0; s < n; ++s) {
            double drift = x[static_cast<Eigen::Index>(s)] -
                           (s > 0 ? x[static_cast<Eigen::Index>(s - 1)] : 0.0);
            auto [fs, st] = bilinear_force(springs[s], drift,
                                           params.story_stiffness_n_per_m[s],
                                           params.story_yield_force_n[s],
                                           params.post_yield_ratio[s]);
            states_out[s] = st;
            f[static_cast<Eigen::Index>(s)] += fs;
            if (s > 0) f[static_cast<Eigen::Index>(s - 1)] -= fs;
        }
        return f;
    };

    auto tangent_matrix = [&](const Eigen::VectorXd& x) {
        std::vector<double> kt(n);
        for (size_t s = 0; s < n; ++s) {
            double drift = x[static_cast<Eigen::Index>(s)] -
                           (s > 0 ? x[static_cast<Eigen::Index>(s - 1)] : 0.0);
            kt[s] = bilinear_tangent(springs[s], drift,
                                     params.story_stiffness_n_per_m[s],
                                     params.story_yield_force_n[s],
                                     params.post_yield_ratio[s]);
        }
        return stiffness_matrix(params, kt);
    };

    std::vector<BilinearState> trial(n);
    Eigen::VectorXd fs = spring_forces(u, trial);
    springs = trial;
    Eigen::VectorXd a = (-mass * gm.samples[0] - C * v - fs).cwiseQuotient(mass);

    auto record = [&](size_t step, const Eigen::VectorXd& uu, const Eigen::VectorXd& vv,
                      const Eigen::VectorXd& aa) {
        for (size_t i = 0; i < n; ++i) {
            h.rel_disp[i][step] = uu[static_cast<Eigen::Index>(i)];
            h.rel_vel[i][step] = vv[static_cast<Eigen::Index>(i)];
            h.rel_accel[i][step] = aa[static_cast<Eigen::Index>(i)];
            double below = i > 0 ? uu[static_cast<Eigen::Index>(i - 1)] : 0.0;
            h.idr[i][step] = (uu[static_cast<Eigen::Index>(i)] - below) / params.story_heights_m[i];
        }
    };
    record(0, u, v, a);

    const double c0 = 4.0 / (dt * dt);
    const double c1 = 2.0 / dt;

    for (size_t step = 1; step < n_steps; ++step) {
        Eigen::VectorXd p = -mass * gm.samples[step];
        Eigen::VectorXd u1 = u;
        Eigen::VectorXd a1(n), v1(n);
        bool converged = false;
        for (int it = 0; it < kMaxNewton; ++it) {
            Eigen::VectorXd f1 = spring_forces(u1, trial);
            a1 = c0 * (u1 - u) - c0 * dt * v - a;
            v1 = c1 * (u1 - u) - v;
            Eigen::VectorXd residual =
                mass.asDiagonal() * a1 + C * v1 + f1 - p;
            if (residual.lpNorm<Eigen::Infinity>() < tol) {
                converged = true;
                break;
            }
            Eigen::MatrixXd k_eff = tangent_matrix(u1);
            k_eff.diagonal() += c0 * mass;
            k_eff += c1 * C;
            u1 -= k_eff.ldlt().solve(residual);
        }
        if (!converged)
            throw Error(ErrorClass::Solver,
                        "newmark_mdof: Newton failed to converge at step " + std::to_string(step));
        u = u1;
        v = v1;
        a = a1;
        springs = trial;
        record(step, u, v, a);
    }
    return h;
}

ShearBuildingParams tune_building(double target_t1, ShearBuildingParams tmpl) {
    tmpl.validate();
    if (target_t1 <= 0.0)
        throw Error(ErrorClass::Domain, "tune_building: target period must be > 0");
    double t1 = eigen_analysis(tmpl)[0];
    double scale = (t1 / target_t1) * (t1 / target_t1);
    for (double& k : tmpl.story_stiffness_n_per_m) k *= scale;
    double t1_new = eigen_analysis(tmpl)[0];
    if (std::fabs(t1_new - target_t1) > 1e-3 * target_t1)
        throw Error(ErrorClass::Model, "tune_building: period tuning failed");
    return tmpl;
}

ShearBuildingParams default_building(int n_stories, double target_t1,
                                     double story_height_m, double story_mass_kg) {
    if (n_stories < 1)
        throw Error(ErrorClass::Config, "default_building: need at least one story");
    ShearBuildingParams p;
    size_t n = static_cast<size_t>(n_stories);
    p.masses_kg.assign(n, story_mass_kg);
    p.story_heights_m.assign(n, story_height_m);
    p.story_stiffness_n_per_m.resize(n);
    for (size_t i = 0; i < n; ++i) {
        double frac = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
        p.story_stiffness_n_per_m[i] = 1.0 - 0.6 * frac; // taper to 40% at roof
    }
    p.story_yield_force_n.assign(n, 1.0);
    p.post_yield_ratio.assign(n, 0.1);
    p.rayleigh = {1, std::min(2, n_stories), 0.03, 0.03};

    if (n_stories >= 2) {
        p = tune_building(target_t1, p);
    } else {
        double om = 2.0 * kPi / target_t1;
        p.story_stiffness_n_per_m[0] = story_mass_kg * om * om;
    }
    // Yield at 1% story drift based on the tuned stiffness.
    for (size_t i = 0; i < n; ++i)
        p.story_yield_force_n[i] =
            p.story_stiffness_n_per_m[i] * 0.01 * p.story_heights_m[i];
    return p;
}

} // namespace qs::solver
