#include "qs/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "qs/calibration.hpp"
#include "qs/errors.hpp"
#include "qs/evaluation.hpp"
#include "qs/hashing.hpp"
#include "qs/hazard.hpp"
#include "qs/rng.hpp"
#include "qs/selection.hpp"
#include "qs/store.hpp"
#include "qs/svg.hpp"

namespace qs::pipeline {

namespace {

namespace fs = std::filesystem;

std::string fmt17(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(line);
    while (std::getline(is, item, ',')) out.push_back(item);
    return out;
}

std::string now_iso8601() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return buf;
}

class StageTimer {
public:
    StageTimer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

// Relative artifact paths inside the run directory.
struct Paths {
    fs::path out;
    explicit Paths(const RunConfig& cfg) : out(cfg.out_dir) {}

    fs::path catalog() const { return out / "catalog.csv"; }
    fs::path motions() const { return out / "motions.qswf"; }
    fs::path motions_index() const { return out / "motions.qswf.index.csv"; }
    fs::path features() const { return out / "features.csv"; }
    fs::path select_dir() const { return out / "select"; }
    fs::path pool_csv(const std::string& name) const { return select_dir() / (name + ".csv"); }
    fs::path target_pool_csv(int size, size_t rep) const {
        return select_dir() /
               ("target_N" + std::to_string(size) + "_r" + std::to_string(rep) + ".csv");
    }
    fs::path calib_dir() const { return out / "calibration"; }
    fs::path calib_trials() const { return calib_dir() / "trials.csv"; }
    fs::path calib_params() const { return calib_dir() / "sdof_params.csv"; }
    fs::path responses_dir() const { return out / "responses"; }
    fs::path source_train_store() const { return responses_dir() / "source_train.qsrh"; }
    fs::path source_val_store() const { return responses_dir() / "source_val.qsrh"; }
    fs::path target_store(int size, size_t rep, const std::string& head) const {
        return responses_dir() / ("target_N" + std::to_string(size) + "_r" +
                                  std::to_string(rep) + "_" + head + ".qsrh");
    }
    fs::path target_val_store(const std::string& head) const {
        return responses_dir() / ("target_val_" + head + ".qsrh");
    }
    fs::path ckpt_dir() const { return out / "checkpoints"; }
    fs::path source_ckpt() const { return ckpt_dir() / "source.qsck"; }
    fs::path target_ckpt(const std::string& head, int size, size_t rep) const {
        return ckpt_dir() / ("target_" + head + "_N" + std::to_string(size) + "_r" +
                             std::to_string(rep) + ".qsck");
    }
    fs::path curves_dir() const { return out / "curves"; }
    fs::path eval_dir() const { return out / "eval"; }
    fs::path exceed_dir() const { return out / "exceedance"; }

    std::string rel(const fs::path& p) const { return fs::relative(p, out).string(); }
};

void add_outputs(StageRecord& rec, const Paths& paths, const std::vector<fs::path>& files) {
    for (const auto& f : files) rec.outputs[paths.rel(f)] = hash_hex(hash_file(f));
}

void add_inputs(StageRecord& rec, const Paths& paths, const std::vector<fs::path>& files) {
    for (const auto& f : files) rec.inputs[paths.rel(f)] = hash_hex(hash_file(f));
}

StageRecord base_record(const RunConfig& cfg, Stage stage, uint64_t seed) {
    StageRecord rec;
    rec.stage = stage_name(stage);
    rec.config_hash = config_hash(cfg);
    rec.seed = seed;
    rec.timestamp = now_iso8601();
    return rec;
}

uint64_t stage_seed(const RunConfig& cfg, const char* tag) {
    return derive_seed({cfg.master_seed, hash_string(tag)});
}

// --- catalog / synth --------------------------------------------------------

hazard::HazardConfig hazard_with_seed(const RunConfig& cfg) {
    auto hz = cfg.hazard;
    hz.seed = stage_seed(cfg, "hazard");
    return hz;
}

void write_catalog_csv(const fs::path& path, const std::vector<hazard::CatalogEvent>& events) {
    std::ofstream out(path, std::ios::trunc);
    out << "window_index,time_years,mw,r_epi_km,r_rup_km\n";
    for (const auto& e : events)
        out << e.window_index << "," << fmt17(e.time_years) << "," << fmt17(e.mw) << ","
            << fmt17(e.r_epi_km) << "," << fmt17(e.r_rup_km) << "\n";
}

std::vector<hazard::CatalogEvent> read_catalog_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorClass::Dependency, "catalog: cannot open " + path.string());
    std::vector<hazard::CatalogEvent> events;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv(line);
        if (cells.size() != 5)
            throw Error(ErrorClass::Format, "catalog: malformed row '" + line + "'");
        hazard::CatalogEvent e;
        e.window_index = std::stoi(cells[0]);
        e.time_years = std::stod(cells[1]);
        e.mw = std::stod(cells[2]);
        e.r_epi_km = std::stod(cells[3]);
        e.r_rup_km = std::stod(cells[4]);
        events.push_back(e);
    }
    return events;
}

std::string motion_id_for(int window, int idx) {
    return "w" + std::to_string(window) + "e" + std::to_string(idx);
}

void stage_catalog(const RunConfig& cfg, Manifest& manifest) {
    StageTimer timer;
    auto hz = hazard_with_seed(cfg);
    auto events = hazard::simulate_catalog(hz);
    Paths paths(cfg);
    fs::create_directories(paths.out);
    write_catalog_csv(paths.catalog(), events);

    auto rec = base_record(cfg, Stage::Catalog, hz.seed);
    rec.info["n_events"] = std::to_string(events.size());
    add_outputs(rec, paths, {paths.catalog()});
    rec.wall_time_s = timer.seconds();
    manifest.record(std::move(rec));
}

void stage_synth(const RunConfig& cfg, Manifest& manifest) {
    StageTimer timer;
    Paths paths(cfg);
    manifest.require(stage_name(Stage::Catalog), config_hash(cfg));

    auto events = read_catalog_csv(paths.catalog());
    uint64_t synth_seed = stage_seed(cfg, "synth");

    std::vector<signals::Waveform> motions;
    motions.reserve(events.size());
    int window = -1, idx = 0;
    for (const auto& e : events) {
        if (e.window_index != window) {
            window = e.window_index;
            idx = 0;
        }
        auto w = hazard::synthesize_motion(e, cfg.synth, cfg.hazard.n_steps, cfg.hazard.dt_s,
                                           hazard::motion_seed(synth_seed, e.window_index, idx));
        w.id = motion_id_for(e.window_index, idx);
        motions.push_back(std::move(w));
        ++idx;
    }
    store::save_waveforms(paths.motions(), motions);

    // Features come from the stored 32-bit samples so that downstream stages
    // see exactly the same values.
    auto reloaded = store::load_waveforms(paths.motions());
    std::ofstream feat(paths.features(), std::ios::trunc);
    feat << "motion_id,pga,pgv\n";
    for (const auto& w : reloaded) {
        auto im = signals::compute_intensity(w);
        feat << w.id << "," << fmt17(im.pga) << "," << fmt17(im.pgv) << "\n";
    }
    feat.close();

    auto rec = base_record(cfg, Stage::Synth, synth_seed);
    add_inputs(rec, paths, {paths.catalog()});
    add_outputs(rec, paths, {paths.motions(), paths.motions_index(), paths.features()});
    rec.info["n_motions"] = std::to_string(motions.size());
    rec.wall_time_s = timer.seconds();
    manifest.record(std::move(rec));
}

// --- select -------------------------------------------------------------------

std::vector<selection::FeaturePoint> read_features(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorClass::Dependency, "features: cannot open " + path.string());
    std::vector<selection::FeaturePoint> points;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv(line);
        if (cells.size() != 3)
            throw Error(ErrorClass::Format, "features: malformed row '" + line + "'");
        points.push_back({std::stod(cells[1]), std::stod(cells[2]), cells[0]});
    }
    return points;
}

void write_id_list(const fs::path& path, const std::vector<std::string>& ids) {
    std::ofstream out(path, std::ios::trunc);
    out << "motion_id\n";
    for (const auto& id : ids) out << id << "\n";
}

std::vector<std::string> read_id_list(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorClass::Dependency, "selection: cannot open " + path.string());
    std::vector<std::string> ids;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line))
        if (!line.empty()) ids.push_back(line);
    return ids;
}

void stage_select(const RunConfig& cfg, Manifest& manifest) {
    StageTimer timer;
    Paths paths(cfg);
    manifest.require(stage_name(Stage::Synth), config_hash(cfg));

    auto points = read_features(paths.features());
    auto part = selection::partition_pools(points, cfg.plan);
    fs::create_directories(paths.select_dir());

    auto ids_of = [&](const std::vector<size_t>& idx) {
        std::vector<std::string> ids;
        ids.reserve(idx.size());
        for (size_t i : idx) ids.push_back(points[i].motion_id);
        return ids;
    };

    std::vector<fs::path> outputs;
    write_id_list(paths.pool_csv("source_train"), ids_of(part.source_train));
    outputs.push_back(paths.pool_csv("source_train"));
    write_id_list(paths.pool_csv("validation"), ids_of(part.validation));
    outputs.push_back(paths.pool_csv("validation"));
    for (size_t s = 0; s < cfg.plan.target_sizes.size(); ++s)
        for (size_t r = 0; r < cfg.plan.replicate_seeds.size(); ++r) {
            auto p = paths.target_pool_csv(cfg.plan.target_sizes[s], r);
            write_id_list(p, ids_of(part.target_train[s][r]));
            outputs.push_back(p);
        }

    // Calibration motions: drawn from a target-training subset of at least
    // the requested count.
    int chosen_size = -1;
    for (int size : cfg.plan.target_sizes)
        if (size >= cfg.calibration.n_motions &&
            (chosen_size == -1 || size < chosen_size))
            chosen_size = size;
    if (chosen_size == -1)
        throw Error(ErrorClass::Config,
                    "selection: no target size can host the calibration motions");
    size_t size_idx = 0;
    for (size_t s = 0; s < cfg.plan.target_sizes.size(); ++s)
        if (cfg.plan.target_sizes[s] == chosen_size) size_idx = s;
    auto calib_ids = ids_of(part.target_train[size_idx][0]);
    calib_ids.resize(static_cast<size_t>(cfg.calibration.n_motions));
    write_id_list(paths.pool_csv("calibration_motions"), calib_ids);
    outputs.push_back(paths.pool_csv("calibration_motions"));

    auto rec = base_record(cfg, Stage::Select, cfg.master_seed);
    add_inputs(rec, paths, {paths.features()});
    add_outputs(rec, paths, outputs);
    rec.wall_time_s = timer.seconds();
    manifest.record(std::move(rec));
}

// --- waveform lookup ----------------------------------------------------------

std::map<std::string, size_t> index_by_id(const std::vector<signals::Waveform>& motions) {
    std::map<std::string, size_t> m;
    for (size_t i = 0; i < motions.size(); ++i) m[motions[i].id] = i;
    return m;
}

std::vector<signals::Waveform> pick_motions(const std::vector<signals::Waveform>& all,
                                            const std::map<std::string, size_t>& by_id,
                                            const std::vector<std::string>& ids) {
    std::vector<signals::Waveform> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw Error(ErrorClass::Dependency, "motion id not in store: " + id);
        out.push_back(all[it->second]);
    }
    return out;
}

// --- calibrate ------------------------------------------------------------------

solver::SDOFParams read_sdof_params(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorClass::Dependency, "calibration: cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (!std::getline(in, line))
        throw Error(ErrorClass::Format, "calibration: empty parameter file");
    auto cells = split_csv(line);
    if (cells.size() != 6)
        throw Error(ErrorClass::Format, "calibration: malformed parameter row");
    solver::SDOFParams p;
    p.mass_kg = std::stod(cells[0]);
    p.period_s = std::stod(cells[1]);
    p.damping_ratio = std::stod(cells[2]);
    p.yield_force_n = std::stod(cells[3]);
    p.post_yield_ratio = std::stod(cells[4]);
    return p;
}

void stage_calibrate(const RunConfig& cfg, Manifest& manifest) {
    StageTimer timer;
    Paths paths(cfg);
    manifest.require(stage_name(Stage::Synth), config_hash(cfg));
    manifest.require(stage_name(Stage::Select), config_hash(cfg));

    auto all = store::load_waveforms(paths.motions());
    auto by_id = index_by_id(all);
    auto calib_ids = read_id_list(paths.pool_csv("calibration_motions"));
    auto motions = pick_motions(all, by_id, calib_ids);

    auto building = cfg.building.make();
    calibration::CalibrationProblem problem;
    problem.mass_kg = 1.0;
    problem.period_s = {cfg.calibration.period_lo_frac * cfg.building.target_period_s,
                        cfg.calibration.period_hi_frac * cfg.building.target_period_s};
    problem.damping_ratio = {cfg.calibration.damping_lo, cfg.calibration.damping_hi};
    problem.yield_force_n = {cfg.calibration.yield_lo_n, cfg.calibration.yield_hi_n};
    problem.post_yield_ratio = {cfg.calibration.post_yield_lo, cfg.calibration.post_yield_hi};
    problem.motions = motions;
    size_t top = building.n_stories() - 1;
    for (const auto& m : motions) {
        auto h = solver::newmark_mdof(building, m);
        problem.target_disp.push_back(h.rel_disp[top]);
    }

    uint64_t seed = stage_seed(cfg, "calibrate");
    std::vector<calibration::Trial> trials;
    auto best = calibration::optimize(problem, cfg.calibration.budget, seed, &trials);

    fs::create_directories(paths.calib_dir());
    {
        std::ofstream out(paths.calib_trials(), std::ios::trunc);
        out << "period_s,damping_ratio,yield_force_n,post_yield_ratio,objective_m2\n";
        for (const auto& t : trials)
            out << fmt17(t.params.period_s) << "," << fmt17(t.params.damping_ratio) << ","
                << fmt17(t.params.yield_force_n) << "," << fmt17(t.params.post_yield_ratio)
                << "," << fmt17(t.objective_value) << "\n";
    }
    {
        std::ofstream out(paths.calib_params(), std::ios::trunc);
        out << "mass_kg,period_s,damping_ratio,yield_force_n,post_yield_ratio,objective_m2\n";
        out << fmt17(best.params.mass_kg) << "," << fmt17(best.params.period_s) << ","
            << fmt17(best.params.damping_ratio) << "," << fmt17(best.params.yield_force_n)
            << "," << fmt17(best.params.post_yield_ratio) << ","
            << fmt17(best.objective_value) << "\n";
    }

    auto rec = base_record(cfg, Stage::Calibrate, seed);
    add_inputs(rec, paths, {paths.motions(), paths.pool_csv("calibration_motions")});
    add_outputs(rec, paths, {paths.calib_trials(), paths.calib_params()});
    rec.info["best_period_s"] = fmt17(best.params.period_s);
    rec.info["best_damping_ratio"] = fmt17(best.params.damping_ratio);
    rec.info["best_yield_force_n"] = fmt17(best.params.yield_force_n);
    rec.info["best_post_yield_ratio"] = fmt17(best.params.post_yield_ratio);
    rec.info["best_objective_m2"] = fmt17(best.objective_value);
    rec.wall_time_s = timer.seconds();
    manifest.record(std::move(rec));
}

// --- simulate -------------------------------------------------------------------

store::HistoryRecord sdof_record(const std::string& id, const solver::ResponseHistory& h) {
    store::HistoryRecord rec;
    rec.id = id;
    rec.channels = {h.rel_accel[0], h.rel_vel[0], h.rel_disp[0], h.restoring_force};
    return rec;
}

solver::SDOFParams source_params_for(const RunConfig& cfg, const Paths& paths,
                                     Manifest& manifest) {
    if (!cfg.use_calibrated) return cfg.source_model;
    manifest.require(stage_name(Stage::Calibrate), config_hash(cfg));
    return read_sdof_params(paths.calib_params());
}

void stage_simulate_source(const RunConfig& cfg, Manifest& manifest) {
    StageTimer timer;
    Paths paths(cfg);
    manifest.require(stage_name(Stage::Synth), config_hash(cfg));
    manifest.require(stage_name(Stage::Select), config_hash(cfg));
    auto params = source_params_for(cfg, paths, manifest);

    auto all = store::load_waveforms(paths.motions());
    auto by_id = index_by_id(all);
    auto train_ids = read_id_list(paths.pool_csv("source_train"));
    auto val_ids = read_id_list(paths.pool_csv("validation"));

    fs::create_directories(paths.responses_dir());
    auto run_set = [&](const std::vector<std::string>& ids) {
        std::vector<store::HistoryRecord> recs;
        recs.reserve(ids.size());
        for (const auto& id : ids) {
            const auto& gm = all[by_id.at(id)];
            recs.push_back(sdof_record(id, solver::newmark_sdof(params, gm)));
        }
        return recs;
    };
    auto train_recs = run_set(train_ids);
    auto val_recs = run_set(val_ids);
    store::save_histories(paths.source_train_store(), train_recs, cfg.hazard.dt_s);
    store::save_histories(paths.source_val_store(), val_recs, cfg.hazard.dt_s);

    // Dataset normalization over the entire source dataset (train + val).
    std::vector<signals::Waveform> inputs = pick_motions(all, by_id, train_ids);
    auto val_motions = pick_motions(all, by_id, val_ids);
    inputs.insert(inputs.end(), val_motions.begin(), val_motions.end());
    std::vector<std::vector<signals::SeriesView>> families(4);
    auto add_views = [&](const std::vector<store::HistoryRecord>& recs) {
        for (const auto& r : recs)
            for (size_t c = 0; c < 4; ++c)
                families[c].push_back(r.channels[c]);
    };
    add_views(train_recs);
    add_views(val_recs);
    auto stats = signals::fit_normalization(inputs, families);

    auto rec = base_record(cfg, Stage::SimulateSource, cfg.master_seed);
    add_inputs(rec, paths,
               {paths.motions(), paths.pool_csv("source_train"), paths.pool_csv("validation")});
    add_outputs(rec, paths, {paths.source_train_store(), paths.source_val_store()});
    rec.info["input_scale"] = fmt17(stats.input_scale);
    const char* names[4] = {"scale_accel", "scale_vel", "scale_disp", "scale_force"};
    for (int c = 0; c < 4; ++c) rec.info[names[c]] = fmt17(stats.response_scales[c]);
    rec.info["sdof_period_s"] = fmt17(params.period_s);
    rec.info["sdof_damping_ratio"] = fmt17(params.damping_ratio);
    rec.info["sdof_yield_force_n"] = fmt17(params.yield_force_n);
    rec.info["sdof_post_yield_ratio"] = fmt17(params.post_yield_ratio);
    rec.wall_time_s = timer.seconds();
    manifest.record(std::move(rec));
}

void stage_simulate_target(const RunConfig& cfg, Manifest& manifest) {
    StageTimer timer;
    Paths paths(cfg);
    manifest.require(stage_name(Stage::Synth), config_hash(cfg));
    manifest.require(stage_name(Stage::Select), config_hash(cfg));

    auto all = store::load_waveforms(paths.motions());
    auto by_id = index_by_id(all);
    auto building = cfg.building.make();
    const size_t floors = building.n_stories();

    fs::create_directories(paths.responses_dir());
    // Memoize building analyses across overlapping target sets.
    std::map<std::string, solver::ResponseHistory> memo;
    auto analyze = [&](const std::string& id) -> const solver::ResponseHistory& {
        auto it = memo.find(id);
        if (it == memo.end())
            it = memo.emplace(id, solver::newmark_mdof(building, all[by_id.at(id)])).first;
        return it->second;
    };
    auto records_for = [&](const std::vector<std::string>& ids, bool idr) {
        std::vector<store::HistoryRecord> recs;
        recs.reserve(ids.size());
        for (const auto& id : ids) {
            const auto& h = analyze(id);
            store::HistoryRecord rec;
            rec.id = id;
            rec.channels.reserve(floors);
            for (size_t k = 0; k < floors; ++k)
                rec.channels.push_back(idr ? h.idr[k] : h.rel_accel[k]);
            recs.push_back(std::move(rec));
        }
        return recs;
    };

    std::vector<fs::path> outputs;
    std::vector<fs::path> inputs = {paths.motions()};
    for (size_t s = 0; s < cfg.plan.target_sizes.size(); ++s) {
        int size = cfg.plan.target_sizes[s];
        for (size_t r = 0; r < cfg.plan.replicate_seeds.size(); ++r) {
            auto ids = read_id_list(paths.target_pool_csv(size, r));
            inputs.push_back(paths.target_pool_csv(size, r));
            store::save_histories(paths.target_store(size, r, "accel"),
                                  records_for(ids, false), cfg.hazard.dt_s);
            store::save_histories(paths.target_store(size, r, "idr"),
                                  records_for(ids, true), cfg.hazard.dt_s);
            outputs.push_back(paths.target_store(size, r, "accel"));
            outputs.push_back(paths.target_store(size, r, "idr"));
        }
    }
    auto val_ids = read_id_list(paths.pool_csv("validation"));
    inputs.push_back(paths.pool_csv("validation"));
    store::save_histories(paths.target_val_store("accel"), records_for(val_ids, false),
                          cfg.hazard.dt_s);
    store::save_histories(paths.target_val_store("idr"), records_for(val_ids, true),
                          cfg.hazard.dt_s);
    outputs.push_back(paths.target_val_store("accel"));
    outputs.push_back(paths.target_val_store("idr"));

    auto rec = base_record(cfg, Stage::SimulateTarget, cfg.master_seed);
    add_inputs(rec, paths, inputs);
    add_outputs(rec, paths, outputs);
    rec.info["n_analyses"] = std::to_string(memo.size());
    rec.wall_time_s = timer.seconds();
    manifest.record(std::move(rec));
}

// --- datasets -------------------------------------------------------------------

net::Signal waveform_signal(const signals::Waveform& w, double input_scale) {
    net::Signal s = net::Signal::zeros(1, static_cast<int>(w.samples.size()));
    for (size_t t = 0; t < w.samples.size(); ++t)
        s.data[t] = w.samples[t] / input_scale;
    return s;
}

net::Signal history_signal(const store::HistoryRecord& rec,
                           const std::vector<double>& channel_scales) {
    const int channels = static_cast<int>(rec.channels.size());
    const int t_len = static_cast<int>(rec.channels[0].size());
    net::Signal s = net::Signal::zeros(channels, t_len);
    for (int c = 0; c < channels; ++c) {
        double scale = channel_scales.size() == 1 ? channel_scales[0]
                                                  : channel_scales[static_cast<size_t>(c)];
        for (int t = 0; t < t_len; ++t) s.at(c, t) = rec.channels[static_cast<size_t>(c)][t] / scale;
    }
    return s;
}

void write_curves_csv(const fs::path& path, const net::TrainCurves& curves) {
    std::ofstream out(path, std::ios::trunc);
    out << "epoch,train_loss,val_loss\n";
    for (size_t e = 0; e < curves.train.size(); ++e)
        out << e << "," << fmt17(curves.train[e]) << ","
            << (e < curves.val.size() ? fmt17(curves.val[e]) : "") << "\n";
}

// --- train-source ---------------------------------------------------------------

void stage_train_source(const RunConfig& cfg, Manifest& manifest) {
    StageTimer timer;
    Paths paths(cfg);
    const auto& sim = manifest.require(stage_name(Stage::SimulateSource), config_hash(cfg));

    signals::NormalizationStats stats;
    stats.input_scale = std::stod(sim.info.at("input_scale"));
    stats.response_scales = {
        std::stod(sim.info.at("scale_accel")), std::stod(sim.info.at("scale_vel")),
        std::stod(sim.info.at("scale_disp")), std::stod(sim.info.at("scale_force"))};

    auto all = store::load_waveforms(paths.motions());
    auto by_id = index_by_id(all);
    auto train_store = store::load_histories(paths.source_train_store());
    auto val_store = store::load_histories(paths.source_val_store());

    auto make_dataset = [&](const store::HistoryStore& hs) {
        net::Dataset ds;
        for (const auto& rec : hs.records) {
            ds.inputs.push_back(waveform_signal(all[by_id.at(rec.id)], stats.input_scale));
            ds.outputs.push_back(history_signal(rec, stats.response_scales));
        }
        return ds;
    };
    auto train_ds = make_dataset(train_store);
    auto val_ds = make_dataset(val_store);

    net::MaskedNetwork network(cfg.network_for_building(), stage_seed(cfg, "net_init"));
    net::Adam adam(network.parameters(), {cfg.train_source.lr});
    net::SourceTrainConfig tcfg;
    tcfg.epochs = cfg.train_source.epochs;
    tcfg.lr = cfg.train_source.lr;
    tcfg.batch = cfg.train_source.batch;
    tcfg.seed = stage_seed(cfg, "train_source");
    tcfg.loss = cfg.loss;
    tcfg.loss.dt_s = cfg.hazard.dt_s;
    auto curves = net::train_source(network, adam, train_ds, val_ds, tcfg);

    fs::create_directories(paths.ckpt_dir());
    fs::create_directories(paths.curves_dir());
    store::CheckpointExtras extras{stats, config_hash(cfg), curves};
    store::save_checkpoint(paths.source_ckpt(), network, &adam, extras);
    write_curves_csv(paths.curves_dir() / "train_source.csv", curves);

    auto rec = base_record(cfg, Stage::TrainSource, tcfg.seed);
    add_inputs(rec, paths,
               {paths.motions(), paths.source_train_store(), paths.source_val_store()});
    add_outputs(rec, paths,
                {paths.source_ckpt(), paths.curves_dir() / "train_source.csv"});
    rec.info["final_train_loss"] =
        curves.train.empty() ? "nan" : fmt17(curves.train.back());
    rec.wall_time_s = timer.seconds();
    manifest.record(std::move(rec));
}

// --- train-target ---------------------------------------------------------------

const std::vector<std::string> kHeads = {"accel", "idr"};

void stage_train_target(const RunConfig& cfg, Manifest& manifest) {
    StageTimer timer;
    Paths paths(cfg);
    manifest.require(stage_name(Stage::TrainSource), config_hash(cfg));
    manifest.require(stage_name(Stage::SimulateTarget), config_hash(cfg));

    auto all = store::load_waveforms(paths.motions());
    auto by_id = index_by_id(all);

    auto rec = base_record(cfg, Stage::TrainTarget, stage_seed(cfg, "train_target"));
    add_inputs(rec, paths, {paths.motions(), paths.source_ckpt()});
    std::vector<fs::path> outputs;
    fs::create_directories(paths.ckpt_dir());
    fs::create_directories(paths.curves_dir());

    for (size_t s = 0; s < cfg.plan.target_sizes.size(); ++s) {
        int size = cfg.plan.target_sizes[s];
        for (size_t r = 0; r < cfg.plan.replicate_seeds.size(); ++r) {
            for (const auto& head : kHeads) {
                auto ckpt = store::load_checkpoint(paths.source_ckpt());
                if (ckpt.has_head)
                    throw Error(ErrorClass::Compatibility,
                                "train-target: source checkpoint already has a head");
                auto& network = *ckpt.network;
                uint64_t head_seed = derive_seed({cfg.master_seed, hash_string("head_init"),
                                                  static_cast<uint64_t>(size), r,
                                                  hash_string(head)});
                network.attach_head(head_seed);

                auto hs = store::load_histories(paths.target_store(size, r, head));
                rec.inputs[paths.rel(paths.target_store(size, r, head))] =
                    hash_hex(hash_file(paths.target_store(size, r, head)));

                // Response family scale from this training set only; inputs
                // reuse the source scale (the union's maximum is identical by
                // construction since target motions come from the source pool).
                double response_scale = 0.0;
                for (const auto& hrec : hs.records)
                    for (const auto& chan : hrec.channels)
                        response_scale = std::max(response_scale, signals::max_abs(chan));
                if (response_scale <= 0.0)
                    throw Error(ErrorClass::Degenerate,
                                "train-target: all-zero response family");
                signals::NormalizationStats stats;
                stats.input_scale = ckpt.extras.norm_stats.input_scale;
                stats.response_scales = {response_scale};

                net::Dataset full;
                for (const auto& hrec : hs.records) {
                    full.inputs.push_back(
                        waveform_signal(all[by_id.at(hrec.id)], stats.input_scale));
                    full.outputs.push_back(history_signal(hrec, stats.response_scales));
                }
                // Hold out the tail of the selection order for early stopping.
                size_t n = full.inputs.size();
                size_t holdout_n =
                    n >= 5 ? static_cast<size_t>(std::lround(cfg.train_target.holdout_frac *
                                                             static_cast<double>(n)))
                           : 0;
                holdout_n = std::min(holdout_n, n > 1 ? n - 1 : 0);
                net::Dataset train_ds, holdout_ds;
                for (size_t i = 0; i < n - holdout_n; ++i) {
                    train_ds.inputs.push_back(full.inputs[i]);
                    train_ds.outputs.push_back(full.outputs[i]);
                }
                for (size_t i = n - holdout_n; i < n; ++i) {
                    holdout_ds.inputs.push_back(full.inputs[i]);
                    holdout_ds.outputs.push_back(full.outputs[i]);
                }

                net::Adam adam(network.parameters(), {cfg.train_target.lr});
                net::TargetTrainConfig tcfg;
                tcfg.max_epochs = cfg.train_target.max_epochs;
                tcfg.patience = cfg.train_target.patience;
                tcfg.lr = cfg.train_target.lr;
                tcfg.batch = cfg.train_target.batch;
                tcfg.seed = derive_seed({cfg.master_seed, hash_string("train_target"),
                                         static_cast<uint64_t>(size), r, hash_string(head)});
                tcfg.huber_delta = cfg.loss.huber_delta;
                auto curves = net::train_target(network, adam, train_ds, holdout_ds, tcfg);

                store::CheckpointExtras extras{stats, config_hash(cfg), curves};
                auto ckpt_path = paths.target_ckpt(head, size, r);
                store::save_checkpoint(ckpt_path, network, &adam, extras);
                outputs.push_back(ckpt_path);
                auto curve_path = paths.curves_dir() /
                                  ("train_target_" + head + "_N" + std::to_string(size) +
                                   "_r" + std::to_string(r) + ".csv");
                write_curves_csv(curve_path, curves);
                outputs.push_back(curve_path);
            }
        }
    }

    add_outputs(rec, paths, outputs);
    rec.wall_time_s = timer.seconds();
    manifest.record(std::move(rec));
}

// --- evaluate -------------------------------------------------------------------

struct TargetEvalRow {
    std::string head;
    int size;
    size_t rep;
    std::string motion_id;
    double r_bar;
};

void stage_evaluate(const RunConfig& cfg, Manifest& manifest) {
    StageTimer timer;
    Paths paths(cfg);
    manifest.require(stage_name(Stage::TrainSource), config_hash(cfg));
    const auto* target_rec = manifest.find(stage_name(Stage::TrainTarget));
    if (!target_rec)
        throw Error(ErrorClass::Dependency,
                    "evaluate: no trained target checkpoint (run train-target first)");
    manifest.require(stage_name(Stage::TrainTarget), config_hash(cfg));
    manifest.require(stage_name(Stage::SimulateTarget), config_hash(cfg));

    auto all = store::load_waveforms(paths.motions());
    auto by_id = index_by_id(all);
    auto val_ids = read_id_list(paths.pool_csv("validation"));
    fs::create_directories(paths.eval_dir());
    std::vector<fs::path> outputs;

    // -- source surrogate on the validation set --
    {
        auto ckpt = store::load_checkpoint(paths.source_ckpt());
        auto& network = *ckpt.network;
        const auto& stats = ckpt.extras.norm_stats;
        auto val_store = store::load_histories(paths.source_val_store());

        const char* channel_names[4] = {"accel", "vel", "disp", "force"};
        std::vector<net::Signal> val_inputs;
        for (const auto& hrec : val_store.records)
            val_inputs.push_back(waveform_signal(all[by_id.at(hrec.id)], stats.input_scale));
        auto preds = net::predict_source(network, val_inputs);
        std::vector<std::array<double, 4>> rs;
        for (size_t vi = 0; vi < val_store.records.size(); ++vi) {
            const auto& hrec = val_store.records[vi];
            const auto& pred = preds[vi];
            std::array<double, 4> r{};
            for (int c = 0; c < 4; ++c) {
                std::vector<double> phys(pred.ch(c), pred.ch(c) + pred.t_len);
                for (auto& v : phys) v *= stats.response_scales[static_cast<size_t>(c)];
                r[static_cast<size_t>(c)] =
                    eval::correlation(hrec.channels[static_cast<size_t>(c)], phys);
            }
            rs.push_back(r);
        }

        auto p = paths.eval_dir() / "source_correlations.csv";
        std::ofstream out(p, std::ios::trunc);
        out << "motion_id,r_accel,r_vel,r_disp,r_force\n";
        for (size_t i = 0; i < rs.size(); ++i) {
            out << val_store.records[i].id;
            for (int c = 0; c < 4; ++c) out << "," << fmt17(rs[i][static_cast<size_t>(c)]);
            out << "\n";
        }
        out.close();
        outputs.push_back(p);

        // Box stats + percentile exemplars per channel.
        auto pbox = paths.eval_dir() / "source_box_stats.csv";
        std::ofstream bout(pbox, std::ios::trunc);
        bout << "channel,median,q1,q3,whisker_low,whisker_high,n_outliers\n";
        auto pex = paths.eval_dir() / "source_exemplars.csv";
        std::ofstream eout(pex, std::ios::trunc);
        eout << "channel,level,motion_id,r\n";
        for (int c = 0; c < 4; ++c) {
            std::vector<double> values;
            for (const auto& r : rs) values.push_back(r[static_cast<size_t>(c)]);
            auto box = eval::box_stats(values);
            bout << channel_names[c] << "," << fmt17(box.median) << "," << fmt17(box.q1)
                 << "," << fmt17(box.q3) << "," << fmt17(box.whisker_low) << ","
                 << fmt17(box.whisker_high) << "," << box.outliers.size() << "\n";
            auto ex = eval::percentile_exemplars(values, cfg.eval.percentile_levels);
            for (size_t li = 0; li < ex.size(); ++li)
                eout << channel_names[c] << "," << cfg.eval.percentile_levels[li] << ","
                     << val_store.records[ex[li]].id << "," << fmt17(values[ex[li]]) << "\n";
        }
        bout.close();
        eout.close();
        outputs.push_back(pbox);
        outputs.push_back(pex);

        // Displacement exemplar overlays (truth vs prediction).
        std::vector<double> disp_r;
        for (const auto& r : rs) disp_r.push_back(r[2]);
        auto ex = eval::percentile_exemplars(disp_r, cfg.eval.percentile_levels);
        for (size_t li = 0; li < ex.size(); ++li) {
            const auto& hrec = val_store.records[ex[li]];
            std::vector<double> t(static_cast<size_t>(preds[ex[li]].t_len));
            for (size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i) * cfg.hazard.dt_s;
            svg::Series truth{"response analysis", t, hrec.channels[2], "#444444"};
            std::vector<double> pred_phys(preds[ex[li]].ch(2),
                                          preds[ex[li]].ch(2) + preds[ex[li]].t_len);
            for (auto& v : pred_phys) v *= stats.response_scales[2];
            svg::Series pred{"surrogate", t, pred_phys, "#b2182b"};
            svg::PlotOptions opts;
            opts.title = "Validation displacement, percentile " +
                         std::to_string(static_cast<int>(cfg.eval.percentile_levels[li]));
            opts.x_label = "time (s)";
            opts.y_label = "relative displacement (m)";
            auto sp = paths.eval_dir() /
                      ("source_exemplar_p" +
                       std::to_string(static_cast<int>(cfg.eval.percentile_levels[li])) +
                       "_disp.svg");
            svg::line_chart(sp, {truth, pred}, opts);
            outputs.push_back(sp);
        }

        // Loss curve plot.
        std::vector<double> epochs(ckpt.extras.curves.train.size());
        for (size_t i = 0; i < epochs.size(); ++i) epochs[i] = static_cast<double>(i);
        svg::PlotOptions lopts;
        lopts.title = "Source training";
        lopts.x_label = "epoch";
        lopts.y_label = "loss";
        lopts.log_y = true;
        auto lp = paths.eval_dir() / "source_loss_curve.svg";
        svg::line_chart(lp,
                        {{"train", epochs, ckpt.extras.curves.train, "#1f6fb2"},
                         {"validation", epochs, ckpt.extras.curves.val, "#b2182b"}},
                        lopts);
        outputs.push_back(lp);
    }

    // -- target surrogates on the validation set --
    {
        std::map<std::string, store::HistoryStore> val_truth;
        val_truth["accel"] = store::load_histories(paths.target_val_store("accel"));
        val_truth["idr"] = store::load_histories(paths.target_val_store("idr"));
        const int floors = cfg.building.n_stories;

        std::vector<TargetEvalRow> rows;
        auto pcorr = paths.eval_dir() / "target_correlations.csv";
        std::ofstream cout_(pcorr, std::ios::trunc);
        cout_ << "head,target_size,replicate,motion_id,floor,r\n";

        std::map<std::string, std::map<int, std::vector<double>>> pooled; // head -> N -> r_bars

        for (const auto& head : kHeads) {
            for (size_t s = 0; s < cfg.plan.target_sizes.size(); ++s) {
                int size = cfg.plan.target_sizes[s];
                for (size_t r = 0; r < cfg.plan.replicate_seeds.size(); ++r) {
                    auto ckpt_path = paths.target_ckpt(head, size, r);
                    if (!fs::exists(ckpt_path))
                        throw Error(ErrorClass::Dependency,
                                    "evaluate: missing checkpoint " + ckpt_path.string());
                    auto ckpt = store::load_checkpoint(ckpt_path);
                    auto& network = *ckpt.network;
                    const auto& stats = ckpt.extras.norm_stats;

                    const auto& truth = val_truth.at(head);
                    std::vector<net::Signal> val_inputs;
                    for (const auto& hrec : truth.records)
                        val_inputs.push_back(
                            waveform_signal(all[by_id.at(hrec.id)], stats.input_scale));
                    auto val_preds = net::predict_target(network, val_inputs);
                    for (size_t vi = 0; vi < truth.records.size(); ++vi) {
                        const auto& hrec = truth.records[vi];
                        const auto& pred = val_preds[vi];
                        std::vector<double> per_floor;
                        for (int k = 0; k < floors; ++k) {
                            std::vector<double> phys(pred.ch(k), pred.ch(k) + pred.t_len);
                            for (auto& v : phys) v *= stats.response_scales[0];
                            double rr = eval::correlation(hrec.channels[static_cast<size_t>(k)],
                                                          phys);
                            per_floor.push_back(rr);
                            cout_ << head << "," << size << "," << r << "," << hrec.id << ","
                                  << k + 1 << "," << fmt17(rr) << "\n";
                        }
                        double rbar =
                            eval::avg_correlation(per_floor, static_cast<size_t>(floors));
                        rows.push_back({head, size, r, hrec.id, rbar});
                        pooled[head][size].push_back(rbar);
                    }
                }
            }
        }
        cout_.close();
        outputs.push_back(pcorr);

        auto pbar = paths.eval_dir() / "target_avg_correlations.csv";
        std::ofstream bout(pbar, std::ios::trunc);
        bout << "head,target_size,replicate,motion_id,r_bar\n";
        for (const auto& row : rows)
            bout << row.head << "," << row.size << "," << row.rep << "," << row.motion_id
                 << "," << fmt17(row.r_bar) << "\n";
        bout.close();
        outputs.push_back(pbar);

        auto pboxes = paths.eval_dir() / "target_box_stats.csv";
        std::ofstream xout(pboxes, std::ios::trunc);
        xout << "head,target_size,median,q1,q3,whisker_low,whisker_high,n_outliers\n";
        for (const auto& head : kHeads) {
            std::vector<std::string> labels;
            std::vector<eval::BoxStats> boxes;
            for (int size : cfg.plan.target_sizes) {
                auto box = eval::box_stats(pooled[head][size]);
                xout << head << "," << size << "," << fmt17(box.median) << "," << fmt17(box.q1)
                     << "," << fmt17(box.q3) << "," << fmt17(box.whisker_low) << ","
                     << fmt17(box.whisker_high) << "," << box.outliers.size() << "\n";
                labels.push_back("N=" + std::to_string(size));
                boxes.push_back(box);
            }
            svg::PlotOptions opts;
            opts.title = "Average correlation vs training size (" + head + ")";
            opts.x_label = "target training size";
            opts.y_label = "mean correlation";
            auto bp = paths.eval_dir() / ("target_rbar_box_" + head + ".svg");
            svg::box_chart(bp, labels, boxes, opts);
            outputs.push_back(bp);
        }
        xout.close();
        outputs.push_back(pboxes);

        // Peak-EDP scatter for the headline configuration.
        int size = cfg.eval.target_size > 0
                       ? cfg.eval.target_size
                       : *std::max_element(cfg.plan.target_sizes.begin(),
                                           cfg.plan.target_sizes.end());
        size_t rep = static_cast<size_t>(cfg.eval.target_replicate);
        for (const auto& head : kHeads) {
            auto ckpt = store::load_checkpoint(paths.target_ckpt(head, size, rep));
            auto& network = *ckpt.network;
            const auto& stats = ckpt.extras.norm_stats;
            const auto& truth = val_truth.at(head);
            svg::Series pts;
            pts.label = head;
            auto pcsv = paths.eval_dir() / ("target_peak_scatter_" + head + ".csv");
            std::ofstream sout(pcsv, std::ios::trunc);
            sout << "motion_id,floor,peak_true,peak_pred\n";
            std::vector<net::Signal> scatter_inputs;
            for (const auto& hrec : truth.records)
                scatter_inputs.push_back(
                    waveform_signal(all[by_id.at(hrec.id)], stats.input_scale));
            auto scatter_preds = net::predict_target(network, scatter_inputs);
            for (size_t vi = 0; vi < truth.records.size(); ++vi) {
                const auto& hrec = truth.records[vi];
                const auto& pred = scatter_preds[vi];
                for (int k = 0; k < floors; ++k) {
                    double pt = 0.0, pp = 0.0;
                    for (int t = 0; t < pred.t_len; ++t) {
                        pt = std::max(pt,
                                      std::fabs(hrec.channels[static_cast<size_t>(k)]
                                                             [static_cast<size_t>(t)]));
                        pp = std::max(pp, std::fabs(pred.at(k, t) * stats.response_scales[0]));
                    }
                    pts.x.push_back(pt);
                    pts.y.push_back(pp);
                    sout << hrec.id << "," << k + 1 << "," << fmt17(pt) << "," << fmt17(pp)
                         << "\n";
                }
            }
            sout.close();
            outputs.push_back(pcsv);
            svg::PlotOptions opts;
            opts.title = "Peak " + std::string(head == "accel" ? "floor acceleration" : "IDR") +
                         " (N=" + std::to_string(size) + ")";
            opts.x_label = "response analysis";
            opts.y_label = "surrogate";
            opts.log_x = true;
            opts.log_y = true;
            auto sp = paths.eval_dir() / ("target_peak_scatter_" + head + ".svg");
            svg::scatter_chart(sp, {pts}, opts, /*identity_line=*/true);
            outputs.push_back(sp);
        }
    }

    auto rec = base_record(cfg, Stage::Evaluate, cfg.master_seed);
    add_inputs(rec, paths,
               {paths.source_ckpt(), paths.source_val_store(),
                paths.target_val_store("accel"), paths.target_val_store("idr")});
    add_outputs(rec, paths, outputs);
    rec.wall_time_s = timer.seconds();
    manifest.record(std::move(rec));
}

// --- exceedance -----------------------------------------------------------------

void stage_exceedance(const RunConfig& cfg, Manifest& manifest) {
    StageTimer timer;
    Paths paths(cfg);
    manifest.require(stage_name(Stage::Synth), config_hash(cfg));
    manifest.require(stage_name(Stage::TrainTarget), config_hash(cfg));

    int size = cfg.eval.target_size > 0
                   ? cfg.eval.target_size
                   : *std::max_element(cfg.plan.target_sizes.begin(),
                                       cfg.plan.target_sizes.end());
    size_t rep = static_cast<size_t>(cfg.eval.target_replicate);

    auto events = read_catalog_csv(paths.catalog());
    auto all = store::load_waveforms(paths.motions());
    const int floors = cfg.building.n_stories;
    std::vector<int> wanted_floors = cfg.eval.exceedance_floors;
    if (wanted_floors.empty())
        for (int k = 1; k <= floors; ++k) wanted_floors.push_back(k);

    fs::create_directories(paths.exceed_dir());
    std::vector<fs::path> outputs;

    auto rec = base_record(cfg, Stage::Exceedance, cfg.master_seed);
    add_inputs(rec, paths, {paths.catalog(), paths.motions()});

    for (const auto& head : kHeads) {
        auto ckpt = store::load_checkpoint(paths.target_ckpt(head, size, rep));
        rec.inputs[paths.rel(paths.target_ckpt(head, size, rep))] =
            hash_hex(hash_file(paths.target_ckpt(head, size, rep)));
        auto& network = *ckpt.network;
        const auto& stats = ckpt.extras.norm_stats;

        // Peak prediction per motion per floor; motions align with catalog rows.
        if (all.size() != events.size())
            throw Error(ErrorClass::Integrity, "exceedance: catalog/motion count mismatch");
        // Per-window peak per floor, predicted in mini-batches.
        std::map<int, std::vector<double>> window_peaks; // window -> per-floor peak
        const size_t chunk = 16;
        for (size_t start = 0; start < all.size(); start += chunk) {
            size_t stop = std::min(all.size(), start + chunk);
            std::vector<net::Signal> inputs;
            inputs.reserve(stop - start);
            for (size_t i = start; i < stop; ++i)
                inputs.push_back(waveform_signal(all[i], stats.input_scale));
            auto preds = net::predict_target(network, inputs, static_cast<int>(chunk));
            for (size_t i = start; i < stop; ++i) {
                const auto& pred = preds[i - start];
                auto& wp = window_peaks[events[i].window_index];
                if (wp.empty()) wp.assign(static_cast<size_t>(floors), 0.0);
                for (int k = 0; k < floors; ++k) {
                    double m = 0.0;
                    for (int t = 0; t < pred.t_len; ++t)
                        m = std::max(m, std::fabs(pred.at(k, t)));
                    wp[static_cast<size_t>(k)] =
                        std::max(wp[static_cast<size_t>(k)], m * stats.response_scales[0]);
                }
            }
        }

        // Thresholds: log-spaced across the observed peak range (all floors).
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (const auto& [w, wp] : window_peaks)
            for (double v : wp) {
                if (v > 0.0) lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        if (!(hi > 0.0))
            throw Error(ErrorClass::Degenerate, "exceedance: all-zero predictions");
        lo = std::max(lo, hi * 1e-6);
        std::vector<double> thresholds;
        for (int i = 0; i < cfg.eval.exceedance_thresholds; ++i) {
            double f = static_cast<double>(i) / (cfg.eval.exceedance_thresholds - 1);
            thresholds.push_back(lo * std::pow(hi / lo, f));
        }

        std::vector<eval::ExceedanceCurve> curves;
        for (int k : wanted_floors) {
            std::vector<std::optional<double>> per_window(
                static_cast<size_t>(cfg.hazard.n_windows));
            for (const auto& [w, wp] : window_peaks)
                per_window[static_cast<size_t>(w)] = wp[static_cast<size_t>(k - 1)];
            curves.push_back(eval::exceedance_curve(per_window, thresholds));
        }

        auto pcsv = paths.exceed_dir() / ("exceedance_" + head + ".csv");
        std::ofstream out(pcsv, std::ios::trunc);
        out << "threshold";
        for (int k : wanted_floors) out << ",floor_" << k;
        out << "\n";
        for (size_t i = 0; i < thresholds.size(); ++i) {
            out << fmt17(curves[0].thresholds[i]);
            for (size_t c = 0; c < curves.size(); ++c)
                out << "," << fmt17(curves[c].probabilities[i]);
            out << "\n";
        }
        out.close();
        outputs.push_back(pcsv);

        std::vector<svg::Series> series;
        const char* palette[5] = {"#1f6fb2", "#b2182b", "#2ca25f", "#756bb1", "#e6550d"};
        for (size_t c = 0; c < curves.size(); ++c) {
            svg::Series srs;
            srs.label = "floor " + std::to_string(wanted_floors[c]);
            srs.x = curves[c].thresholds;
            srs.y = curves[c].probabilities;
            srs.color = palette[c % 5];
            series.push_back(srs);
        }
        svg::PlotOptions opts;
        opts.title = std::string("50-year exceedance probability (") +
                     (head == "accel" ? "PFA" : "peak IDR") + ")";
        opts.x_label = head == "accel" ? "peak floor acceleration (m/s^2)" : "peak IDR";
        opts.y_label = "exceedance probability";
        opts.log_x = true;
        auto sp = paths.exceed_dir() / ("exceedance_" + head + ".svg");
        svg::line_chart(sp, series, opts);
        outputs.push_back(sp);
    }

    add_outputs(rec, paths, outputs);
    rec.info["target_size"] = std::to_string(size);
    rec.info["replicate"] = std::to_string(rep);
    rec.wall_time_s = timer.seconds();
    manifest.record(std::move(rec));
}

} // namespace

const char* stage_name(Stage stage) {
    switch (stage) {
        case Stage::Catalog: return "catalog";
        case Stage::Synth: return "synth";
        case Stage::Select: return "select";
        case Stage::Calibrate: return "calibrate";
        case Stage::SimulateSource: return "simulate-source";
        case Stage::SimulateTarget: return "simulate-target";
        case Stage::TrainSource: return "train-source";
        case Stage::TrainTarget: return "train-target";
        case Stage::Evaluate: return "evaluate";
        case Stage::Exceedance: return "exceedance";
    }
    return "unknown";
}

const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> stages = {
        Stage::Catalog,        Stage::Synth,       Stage::Select,
        Stage::Calibrate,      Stage::SimulateSource, Stage::SimulateTarget,
        Stage::TrainSource,    Stage::TrainTarget, Stage::Evaluate,
        Stage::Exceedance,
    };
    return stages;
}

Stage stage_from_name(const std::string& name) {
    for (Stage s : all_stages())
        if (name == stage_name(s)) return s;
    throw Error(ErrorClass::Config, "unknown stage: " + name);
}

void run_stage(const RunConfig& cfg, Stage stage) {
    cfg.validate();
    std::filesystem::create_directories(cfg.out_dir);
    auto manifest = Manifest::load_or_create(cfg.out_dir);
    switch (stage) {
        case Stage::Catalog: stage_catalog(cfg, manifest); break;
        case Stage::Synth: stage_synth(cfg, manifest); break;
        case Stage::Select: stage_select(cfg, manifest); break;
        case Stage::Calibrate: stage_calibrate(cfg, manifest); break;
        case Stage::SimulateSource: stage_simulate_source(cfg, manifest); break;
        case Stage::SimulateTarget: stage_simulate_target(cfg, manifest); break;
        case Stage::TrainSource: stage_train_source(cfg, manifest); break;
        case Stage::TrainTarget: stage_train_target(cfg, manifest); break;
        case Stage::Evaluate: stage_evaluate(cfg, manifest); break;
        case Stage::Exceedance: stage_exceedance(cfg, manifest); break;
    }
}

void run_pipeline(const RunConfig& cfg, std::optional<Stage> through) {
    for (Stage s : all_stages()) {
        run_stage(cfg, s);
        if (through && s == *through) break;
    }
}

} // namespace qs::pipeline
