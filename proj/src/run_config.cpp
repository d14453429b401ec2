#include "qs/run_config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "qs/errors.hpp"
#include "qs/hashing.hpp"

namespace qs::pipeline {

solver::ShearBuildingParams BuildingSpec::make() const {
    if (n_stories < 1)
        throw Error(ErrorClass::Config, "building: n_stories must be >= 1");
    solver::ShearBuildingParams p;
    size_t n = static_cast<size_t>(n_stories);
    p.masses_kg.assign(n, story_mass_kg);
    p.story_heights_m.assign(n, story_height_m);
    p.story_stiffness_n_per_m.resize(n);
    for (size_t i = 0; i < n; ++i) {
        double frac = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
        p.story_stiffness_n_per_m[i] = 1.0 - (1.0 - taper_roof_frac) * frac;
    }
    p.story_yield_force_n.assign(n, 1.0);
    p.post_yield_ratio.assign(n, post_yield_ratio);
    p.rayleigh = {1, n_stories >= 2 ? 2 : 1, zeta_1, zeta_2};

    if (n_stories >= 2) {
        p = solver::tune_building(target_period_s, p);
    } else {
        double om = 2.0 * 3.14159265358979323846 / target_period_s;
        p.story_stiffness_n_per_m[0] = story_mass_kg * om * om;
    }
    for (size_t i = 0; i < n; ++i)
        p.story_yield_force_n[i] =
            p.story_stiffness_n_per_m[i] * yield_drift_frac * p.story_heights_m[i];
    return p;
}

net::NetworkConfig RunConfig::network_for_building() const {
    net::NetworkConfig cfg = network;
    cfg.n_floors = building.n_stories;
    return cfg;
}

void RunConfig::validate() const {
    hazard.validate();
    synth.validate(hazard.dt_s);
    network_for_building().validate();
    if (network.t_step != hazard.n_steps)
        throw Error(ErrorClass::Config,
                    "config: network t_step must equal hazard n_steps");
    if (!use_calibrated) source_model.validate();
    if (train_source.epochs < 0 || train_target.max_epochs < 0)
        throw Error(ErrorClass::Config, "config: negative epoch counts");
    if (train_target.holdout_frac < 0.0 || train_target.holdout_frac > 0.5)
        throw Error(ErrorClass::Config, "config: holdout_frac must be in [0, 0.5]");
    if (calibration.budget < 1 || calibration.n_motions < 1)
        throw Error(ErrorClass::Config, "config: calibration budget/motions must be >= 1");
    if (eval.exceedance_thresholds < 2)
        throw Error(ErrorClass::Config, "config: need at least 2 exceedance thresholds");
}

RunConfig paper_profile() {
    RunConfig cfg;
    cfg.hazard.n_windows = 10000;
    cfg.hazard.n_steps = 4096;
    cfg.hazard.dt_s = 0.01;
    cfg.plan.n_source_train = 1200;
    cfg.plan.n_validation = 60;
    cfg.plan.target_sizes = {10, 20, 40, 60, 80, 120};
    cfg.plan.replicate_seeds = {101, 102, 103, 104, 105, 106, 107, 108, 109};
    cfg.building.n_stories = 20;
    cfg.network = net::NetworkConfig::paper();
    cfg.network.n_floors = 20;
    cfg.loss.dt_s = cfg.hazard.dt_s;
    // Paper-scale reference source model (kept as regression constants).
    cfg.source_model = {1.0, 2.41, 0.032, 4.33, 0.370};
    return cfg;
}

RunConfig desk_profile() {
    RunConfig cfg = paper_profile();
    cfg.hazard.n_windows = 200;
    cfg.hazard.n_steps = 512;
    cfg.hazard.dt_s = 0.02;
    cfg.plan.n_source_train = 200;
    cfg.plan.n_validation = 60;
    cfg.plan.target_sizes = {10, 20, 40};
    cfg.plan.replicate_seeds = {101, 102, 103};
    cfg.building.n_stories = 4;
    cfg.network = net::NetworkConfig::desk();
    cfg.network.n_floors = 4;
    cfg.loss.dt_s = cfg.hazard.dt_s;
    cfg.train_source.epochs = 500;
    return cfg;
}

RunConfig profile_by_name(const std::string& name) {
    if (name == "desk") return desk_profile();
    if (name == "paper") return paper_profile();
    throw Error(ErrorClass::Config, "unknown profile: " + name);
}

namespace {

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

template <typename T>
std::string fmt_list(const std::vector<T>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) os << ",";
        if constexpr (std::is_same_v<T, double>)
            os << fmt_double(v[i]);
        else
            os << v[i];
    }
    return os.str();
}

// One settable key: parse from text, emit canonical text.
struct Key {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

using Schema = std::map<std::string, std::map<std::string, Key>>;

double parse_double(const std::string& s) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorClass::Config, "config: bad numeric value '" + s + "'");
    }
}

int parse_int(const std::string& s) {
    try {
        size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorClass::Config, "config: bad integer value '" + s + "'");
    }
}

uint64_t parse_u64(const std::string& s) {
    try {
        size_t pos = 0;
        uint64_t v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorClass::Config, "config: bad unsigned value '" + s + "'");
    }
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw Error(ErrorClass::Config, "config: bad boolean value '" + s + "'");
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& s, Parse parse) {
    std::vector<T> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) {
        if (!item.empty()) out.push_back(parse(item));
    }
    return out;
}

Key make_double(std::function<double&(RunConfig&)> ref) {
    return Key{[ref](RunConfig& c, const std::string& s) { ref(c) = parse_double(s); },
               [ref](const RunConfig& c) { return fmt_double(ref(const_cast<RunConfig&>(c))); }};
}

Key make_int(std::function<int&(RunConfig&)> ref) {
    return Key{[ref](RunConfig& c, const std::string& s) { ref(c) = parse_int(s); },
               [ref](const RunConfig& c) {
                   return std::to_string(ref(const_cast<RunConfig&>(c)));
               }};
}

Key make_u64(std::function<uint64_t&(RunConfig&)> ref) {
    return Key{[ref](RunConfig& c, const std::string& s) { ref(c) = parse_u64(s); },
               [ref](const RunConfig& c) {
                   return std::to_string(ref(const_cast<RunConfig&>(c)));
               }};
}

Key make_bool(std::function<bool&(RunConfig&)> ref) {
    return Key{[ref](RunConfig& c, const std::string& s) { ref(c) = parse_bool(s); },
               [ref](const RunConfig& c) {
                   return ref(const_cast<RunConfig&>(c)) ? "true" : "false";
               }};
}

Key make_int_list(std::function<std::vector<int>&(RunConfig&)> ref) {
    return Key{[ref](RunConfig& c, const std::string& s) {
                   ref(c) = parse_list<int>(s, parse_int);
               },
               [ref](const RunConfig& c) {
                   return fmt_list(ref(const_cast<RunConfig&>(c)));
               }};
}

Key make_u64_list(std::function<std::vector<uint64_t>&(RunConfig&)> ref) {
    return Key{[ref](RunConfig& c, const std::string& s) {
                   ref(c) = parse_list<uint64_t>(s, parse_u64);
               },
               [ref](const RunConfig& c) {
                   return fmt_list(ref(const_cast<RunConfig&>(c)));
               }};
}

Key make_double_list(std::function<std::vector<double>&(RunConfig&)> ref) {
    return Key{[ref](RunConfig& c, const std::string& s) {
                   ref(c) = parse_list<double>(s, parse_double);
               },
               [ref](const RunConfig& c) {
                   return fmt_list(ref(const_cast<RunConfig&>(c)));
               }};
}

const Schema& schema() {
    static const Schema s = [] {
        Schema sc;
        auto& run = sc["run"];
        run["master_seed"] = make_u64([](RunConfig& c) -> uint64_t& { return c.master_seed; });
        run["out_dir"] = Key{
            [](RunConfig& c, const std::string& v) { c.out_dir = v; },
            [](const RunConfig& c) { return c.out_dir.string(); }};

        auto& hz = sc["hazard"];
        hz["rate_per_year"] = make_double([](RunConfig& c) -> double& { return c.hazard.rate_per_year; });
        hz["window_years"] = make_double([](RunConfig& c) -> double& { return c.hazard.window_years; });
        hz["n_windows"] = make_int([](RunConfig& c) -> int& { return c.hazard.n_windows; });
        hz["mw_min"] = make_double([](RunConfig& c) -> double& { return c.hazard.mw_min; });
        hz["mw_max"] = make_double([](RunConfig& c) -> double& { return c.hazard.mw_max; });
        hz["b_value"] = make_double([](RunConfig& c) -> double& { return c.hazard.b_value; });
        hz["source_radius_km"] = make_double([](RunConfig& c) -> double& { return c.hazard.source_radius_km; });
        hz["depth_km"] = make_double([](RunConfig& c) -> double& { return c.hazard.depth_km; });
        hz["vs30_mps"] = make_double([](RunConfig& c) -> double& { return c.hazard.vs30_mps; });
        hz["n_steps"] = make_int([](RunConfig& c) -> int& { return c.hazard.n_steps; });
        hz["dt_s"] = make_double([](RunConfig& c) -> double& { return c.hazard.dt_s; });

        auto& sy = sc["synthesizer"];
        sy["band_low_hz"] = make_double([](RunConfig& c) -> double& { return c.synth.band_low_hz; });
        sy["band_high_hz"] = make_double([](RunConfig& c) -> double& { return c.synth.band_high_hz; });
        sy["envelope_shape"] = make_double([](RunConfig& c) -> double& { return c.synth.envelope_shape; });
        sy["envelope_peak_frac"] = make_double([](RunConfig& c) -> double& { return c.synth.envelope_peak_frac; });
        sy["duration_s_base"] = make_double([](RunConfig& c) -> double& { return c.synth.duration_s_base; });
        sy["duration_s_per_mw"] = make_double([](RunConfig& c) -> double& { return c.synth.duration_s_per_mw; });
        sy["attn_mw"] = make_double([](RunConfig& c) -> double& { return c.synth.attn_mw; });
        sy["attn_r_exp"] = make_double([](RunConfig& c) -> double& { return c.synth.attn_r_exp; });
        sy["attn_r_offset_km"] = make_double([](RunConfig& c) -> double& { return c.synth.attn_r_offset_km; });
        sy["base_scale"] = make_double([](RunConfig& c) -> double& { return c.synth.base_scale; });
        sy["mw_ref"] = make_double([](RunConfig& c) -> double& { return c.synth.mw_ref; });

        auto& se = sc["selection"];
        se["n_source_train"] = make_int([](RunConfig& c) -> int& { return c.plan.n_source_train; });
        se["n_validation"] = make_int([](RunConfig& c) -> int& { return c.plan.n_validation; });
        se["target_sizes"] = make_int_list([](RunConfig& c) -> std::vector<int>& { return c.plan.target_sizes; });
        se["replicate_seeds"] = make_u64_list([](RunConfig& c) -> std::vector<uint64_t>& { return c.plan.replicate_seeds; });

        auto& sm = sc["source_model"];
        sm["mass_kg"] = make_double([](RunConfig& c) -> double& { return c.source_model.mass_kg; });
        sm["period_s"] = make_double([](RunConfig& c) -> double& { return c.source_model.period_s; });
        sm["damping_ratio"] = make_double([](RunConfig& c) -> double& { return c.source_model.damping_ratio; });
        sm["yield_force_n"] = make_double([](RunConfig& c) -> double& { return c.source_model.yield_force_n; });
        sm["post_yield_ratio"] = make_double([](RunConfig& c) -> double& { return c.source_model.post_yield_ratio; });
        sm["use_calibrated"] = make_bool([](RunConfig& c) -> bool& { return c.use_calibrated; });

        auto& bd = sc["building"];
        bd["n_stories"] = make_int([](RunConfig& c) -> int& { return c.building.n_stories; });
        bd["target_period_s"] = make_double([](RunConfig& c) -> double& { return c.building.target_period_s; });
        bd["story_height_m"] = make_double([](RunConfig& c) -> double& { return c.building.story_height_m; });
        bd["story_mass_kg"] = make_double([](RunConfig& c) -> double& { return c.building.story_mass_kg; });
        bd["yield_drift_frac"] = make_double([](RunConfig& c) -> double& { return c.building.yield_drift_frac; });
        bd["post_yield_ratio"] = make_double([](RunConfig& c) -> double& { return c.building.post_yield_ratio; });
        bd["taper_roof_frac"] = make_double([](RunConfig& c) -> double& { return c.building.taper_roof_frac; });
        bd["zeta_1"] = make_double([](RunConfig& c) -> double& { return c.building.zeta_1; });
        bd["zeta_2"] = make_double([](RunConfig& c) -> double& { return c.building.zeta_2; });

        auto& cal = sc["calibration"];
        cal["budget"] = make_int([](RunConfig& c) -> int& { return c.calibration.budget; });
        cal["n_motions"] = make_int([](RunConfig& c) -> int& { return c.calibration.n_motions; });
        cal["period_lo_frac"] = make_double([](RunConfig& c) -> double& { return c.calibration.period_lo_frac; });
        cal["period_hi_frac"] = make_double([](RunConfig& c) -> double& { return c.calibration.period_hi_frac; });
        cal["damping_lo"] = make_double([](RunConfig& c) -> double& { return c.calibration.damping_lo; });
        cal["damping_hi"] = make_double([](RunConfig& c) -> double& { return c.calibration.damping_hi; });
        cal["yield_lo_n"] = make_double([](RunConfig& c) -> double& { return c.calibration.yield_lo_n; });
        cal["yield_hi_n"] = make_double([](RunConfig& c) -> double& { return c.calibration.yield_hi_n; });
        cal["post_yield_lo"] = make_double([](RunConfig& c) -> double& { return c.calibration.post_yield_lo; });
        cal["post_yield_hi"] = make_double([](RunConfig& c) -> double& { return c.calibration.post_yield_hi; });

        auto& nw = sc["network"];
        nw["t_step"] = make_int([](RunConfig& c) -> int& { return c.network.t_step; });
        nw["band_past"] = make_int([](RunConfig& c) -> int& { return c.network.band.past; });
        nw["band_future"] = make_int([](RunConfig& c) -> int& { return c.network.band.future; });
        nw["conv_kernel"] = make_int([](RunConfig& c) -> int& { return c.network.conv_kernel; });

        auto& lo = sc["loss"];
        lo["huber_delta"] = make_double([](RunConfig& c) -> double& { return c.loss.huber_delta; });
        lo["physics_weight"] = make_double([](RunConfig& c) -> double& { return c.loss.physics_weight; });
        lo["physics_switch_epoch"] = make_int([](RunConfig& c) -> int& { return c.loss.physics_switch_epoch; });

        auto& ts = sc["train_source"];
        ts["epochs"] = make_int([](RunConfig& c) -> int& { return c.train_source.epochs; });
        ts["lr"] = make_double([](RunConfig& c) -> double& { return c.train_source.lr; });
        ts["batch"] = make_int([](RunConfig& c) -> int& { return c.train_source.batch; });

        auto& tt = sc["train_target"];
        tt["max_epochs"] = make_int([](RunConfig& c) -> int& { return c.train_target.max_epochs; });
        tt["patience"] = make_int([](RunConfig& c) -> int& { return c.train_target.patience; });
        tt["lr"] = make_double([](RunConfig& c) -> double& { return c.train_target.lr; });
        tt["batch"] = make_int([](RunConfig& c) -> int& { return c.train_target.batch; });
        tt["holdout_frac"] = make_double([](RunConfig& c) -> double& { return c.train_target.holdout_frac; });

        auto& ev = sc["evaluation"];
        ev["percentile_levels"] = make_double_list([](RunConfig& c) -> std::vector<double>& { return c.eval.percentile_levels; });
        ev["absolute_pfa"] = make_bool([](RunConfig& c) -> bool& { return c.eval.absolute_pfa; });
        ev["exceedance_thresholds"] = make_int([](RunConfig& c) -> int& { return c.eval.exceedance_thresholds; });
        ev["exceedance_floors"] = make_int_list([](RunConfig& c) -> std::vector<int>& { return c.eval.exceedance_floors; });
        ev["target_size"] = make_int([](RunConfig& c) -> int& { return c.eval.target_size; });
        ev["target_replicate"] = make_int([](RunConfig& c) -> int& { return c.eval.target_replicate; });
        return sc;
    }();
    return s;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

} // namespace

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorClass::Config, "config: cannot open " + path.string());

    const Schema& sc = schema();
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw Error(ErrorClass::Config,
                            "config: malformed section at line " + std::to_string(line_no));
            section = trim(line.substr(1, line.size() - 2));
            if (!sc.count(section))
                throw Error(ErrorClass::Config, "config: unknown section [" + section + "]");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorClass::Config,
                        "config: expected key = value at line " + std::to_string(line_no));
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (section.empty())
            throw Error(ErrorClass::Config,
                        "config: key '" + key + "' outside any section");
        const auto& keys = sc.at(section);
        auto it = keys.find(key);
        if (it == keys.end())
            throw Error(ErrorClass::Config,
                        "config: unknown key '" + key + "' in section [" + section + "]");
        it->second.set(base, value);
    }
    base.loss.dt_s = base.hazard.dt_s;
    return base;
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream os;
    for (const auto& [section, keys] : schema()) {
        os << "[" << section << "]\n";
        for (const auto& [key, accessor] : keys)
            os << key << " = " << accessor.get(cfg) << "\n";
        os << "\n";
    }
    return os.str();
}

uint64_t config_hash(const RunConfig& cfg) {
    // out_dir does not affect artifact content; hash everything else.
    RunConfig c = cfg;
    c.out_dir = "";
    return hash_string(serialize_config(c));
}

} // namespace qs::pipeline
