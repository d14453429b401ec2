#ifndef QS_RUN_CONFIG_HPP
#define QS_RUN_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qs/hazard.hpp"
#include "qs/masked_net.hpp"
#include "qs/selection.hpp"
#include "qs/solver.hpp"

namespace qs::pipeline {

// Shear-building template recipe; the concrete model is tuned to the target
// period when instantiated.
struct BuildingSpec {
    int n_stories = 20;
    double target_period_s = 2.40;
    double story_height_m = 3.0;
    double story_mass_kg = 1.0;
    double yield_drift_frac = 0.01;
    double post_yield_ratio = 0.1;
    double taper_roof_frac = 0.4;
    double zeta_1 = 0.03;
    double zeta_2 = 0.03;

    solver::ShearBuildingParams make() const;
};

struct CalibrationConfig {
    int budget = 500;
    int n_motions = 20;
    double period_lo_frac = 0.5; // x building target period
    double period_hi_frac = 2.0;
    double damping_lo = 0.005;
    double damping_hi = 0.10;
    double yield_lo_n = 0.1;
    double yield_hi_n = 20.0;
    double post_yield_lo = 0.01;
    double post_yield_hi = 0.9;
};

struct SourceTrainParams {
    int epochs = 1000;
    double lr = 5e-5;
    int batch = 16;
};

struct TargetTrainParams {
    int max_epochs = 2000;
    int patience = 200;
    double lr = 1e-3;
    int batch = 16;
    double holdout_frac = 0.2;
};

struct EvalOptions {
    std::vector<double> percentile_levels = {5, 50, 95};
    bool absolute_pfa = false;
    int exceedance_thresholds = 40;
    std::vector<int> exceedance_floors; // empty = all floors
    int target_size = -1;               // -1 = largest configured size
    int target_replicate = 0;
};

struct RunConfig {
    uint64_t master_seed = 1;
    std::filesystem::path out_dir = "runs/out";

    hazard::HazardConfig hazard;
    hazard::SynthesizerConfig synth;
    selection::SelectionPlan plan;

    solver::SDOFParams source_model; // used when use_calibrated = false
    bool use_calibrated = true;
    BuildingSpec building;
    CalibrationConfig calibration;

    net::NetworkConfig network;
    net::LossConfig loss;
    SourceTrainParams train_source;
    TargetTrainParams train_target;
    EvalOptions eval;

    void validate() const;
    // Network floor count always mirrors the building.
    net::NetworkConfig network_for_building() const;
};

RunConfig desk_profile();
RunConfig paper_profile();
RunConfig profile_by_name(const std::string& name);

// Parse the sectioned key=value config file over the given base profile.
// Unknown sections or keys raise configuration errors.
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base);

// Canonical text form (stable key order, full precision); basis for hashing.
std::string serialize_config(const RunConfig& cfg);
uint64_t config_hash(const RunConfig& cfg);

} // namespace qs::pipeline

#endif // QS_RUN_CONFIG_HPP
