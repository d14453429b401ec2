#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "qs/calibration.hpp"
#include "qs/errors.hpp"
#include "qs/evaluation.hpp"
#include "qs/hazard.hpp"
#include "qs/masked_net.hpp"
#include "qs/pipeline.hpp"
#include "qs/run_config.hpp"
#include "qs/selection.hpp"
#include "qs/solver.hpp"
#include "qs/store.hpp"
#include "qs/waveform.hpp"

namespace py = pybind11;

namespace {

using Rows = std::vector<std::vector<double>>;

qs::net::Signal signal_from_rows(const Rows& rows) {
    if (rows.empty()) return {};
    auto s = qs::net::Signal::zeros(static_cast<int>(rows.size()),
                                    static_cast<int>(rows[0].size()));
    for (size_t c = 0; c < rows.size(); ++c) {
        if (rows[c].size() != rows[0].size())
            throw qs::Error(qs::ErrorClass::Shape, "signal rows must share length");
        std::copy(rows[c].begin(), rows[c].end(), s.ch(static_cast<int>(c)));
    }
    return s;
}

Rows rows_from_signal(const qs::net::Signal& s) {
    Rows rows(static_cast<size_t>(s.channels));
    for (int c = 0; c < s.channels; ++c)
        rows[static_cast<size_t>(c)].assign(s.ch(c), s.ch(c) + s.t_len);
    return rows;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Core bindings: hazard simulation, nonlinear response analysis, "
              "masked-network surrogates, and evaluation metrics";

    py::register_exception<qs::Error>(m, "QsError");

    // --- signals ---
    py::class_<qs::signals::Waveform>(m, "Waveform")
        .def(py::init<>())
        .def_readwrite("samples", &qs::signals::Waveform::samples)
        .def_readwrite("dt_s", &qs::signals::Waveform::dt_s)
        .def_readwrite("id", &qs::signals::Waveform::id);
    m.def("compute_pga", &qs::signals::compute_pga);
    m.def("compute_pgv", &qs::signals::compute_pgv);

    // --- hazard ---
    py::class_<qs::hazard::HazardConfig>(m, "HazardConfig")
        .def(py::init<>())
        .def_readwrite("rate_per_year", &qs::hazard::HazardConfig::rate_per_year)
        .def_readwrite("window_years", &qs::hazard::HazardConfig::window_years)
        .def_readwrite("n_windows", &qs::hazard::HazardConfig::n_windows)
        .def_readwrite("mw_min", &qs::hazard::HazardConfig::mw_min)
        .def_readwrite("mw_max", &qs::hazard::HazardConfig::mw_max)
        .def_readwrite("b_value", &qs::hazard::HazardConfig::b_value)
        .def_readwrite("source_radius_km", &qs::hazard::HazardConfig::source_radius_km)
        .def_readwrite("depth_km", &qs::hazard::HazardConfig::depth_km)
        .def_readwrite("vs30_mps", &qs::hazard::HazardConfig::vs30_mps)
        .def_readwrite("n_steps", &qs::hazard::HazardConfig::n_steps)
        .def_readwrite("dt_s", &qs::hazard::HazardConfig::dt_s)
        .def_readwrite("seed", &qs::hazard::HazardConfig::seed);
    py::class_<qs::hazard::CatalogEvent>(m, "CatalogEvent")
        .def(py::init<>())
        .def_readwrite("window_index", &qs::hazard::CatalogEvent::window_index)
        .def_readwrite("time_years", &qs::hazard::CatalogEvent::time_years)
        .def_readwrite("mw", &qs::hazard::CatalogEvent::mw)
        .def_readwrite("r_epi_km", &qs::hazard::CatalogEvent::r_epi_km)
        .def_readwrite("r_rup_km", &qs::hazard::CatalogEvent::r_rup_km);
    py::class_<qs::hazard::SynthesizerConfig>(m, "SynthesizerConfig")
        .def(py::init<>())
        .def_readwrite("band_low_hz", &qs::hazard::SynthesizerConfig::band_low_hz)
        .def_readwrite("band_high_hz", &qs::hazard::SynthesizerConfig::band_high_hz)
        .def_readwrite("base_scale", &qs::hazard::SynthesizerConfig::base_scale)
        .def_readwrite("attn_mw", &qs::hazard::SynthesizerConfig::attn_mw)
        .def_readwrite("attn_r_exp", &qs::hazard::SynthesizerConfig::attn_r_exp)
        .def_readwrite("attn_r_offset_km", &qs::hazard::SynthesizerConfig::attn_r_offset_km);
    m.def("sample_magnitude", &qs::hazard::sample_magnitude, py::arg("u"),
          py::arg("b_value"), py::arg("mw_min"), py::arg("mw_max"));
    m.def("sample_location", &qs::hazard::sample_location, py::arg("u1"), py::arg("u2"),
          py::arg("radius_km"), py::arg("depth_km"));
    m.def("simulate_catalog", &qs::hazard::simulate_catalog);
    m.def("synthesize_motion", &qs::hazard::synthesize_motion, py::arg("event"),
          py::arg("synth"), py::arg("n_steps"), py::arg("dt_s"), py::arg("noise_seed"));

    // --- selection ---
    py::class_<qs::selection::FeaturePoint>(m, "FeaturePoint")
        .def(py::init<>())
        .def(py::init([](double pga, double pgv, std::string id) {
                 return qs::selection::FeaturePoint{pga, pgv, std::move(id)};
             }),
             py::arg("pga"), py::arg("pgv"), py::arg("motion_id") = "")
        .def_readwrite("pga", &qs::selection::FeaturePoint::pga)
        .def_readwrite("pgv", &qs::selection::FeaturePoint::pgv)
        .def_readwrite("motion_id", &qs::selection::FeaturePoint::motion_id);
    m.def("select_fps", &qs::selection::select_fps, py::arg("points"), py::arg("k"),
          py::arg("standardize") = true);

    // --- solver ---
    py::class_<qs::solver::SDOFParams>(m, "SDOFParams")
        .def(py::init<>())
        .def_readwrite("mass_kg", &qs::solver::SDOFParams::mass_kg)
        .def_readwrite("period_s", &qs::solver::SDOFParams::period_s)
        .def_readwrite("damping_ratio", &qs::solver::SDOFParams::damping_ratio)
        .def_readwrite("yield_force_n", &qs::solver::SDOFParams::yield_force_n)
        .def_readwrite("post_yield_ratio", &qs::solver::SDOFParams::post_yield_ratio)
        .def("stiffness", &qs::solver::SDOFParams::stiffness);
    py::class_<qs::solver::ShearBuildingParams>(m, "ShearBuildingParams")
        .def(py::init<>())
        .def_readwrite("masses_kg", &qs::solver::ShearBuildingParams::masses_kg)
        .def_readwrite("story_heights_m", &qs::solver::ShearBuildingParams::story_heights_m)
        .def_readwrite("story_stiffness_n_per_m",
                       &qs::solver::ShearBuildingParams::story_stiffness_n_per_m)
        .def_readwrite("story_yield_force_n",
                       &qs::solver::ShearBuildingParams::story_yield_force_n)
        .def_readwrite("post_yield_ratio", &qs::solver::ShearBuildingParams::post_yield_ratio);
    py::class_<qs::solver::ResponseHistory>(m, "ResponseHistory")
        .def_readonly("dt_s", &qs::solver::ResponseHistory::dt_s)
        .def_readonly("rel_accel", &qs::solver::ResponseHistory::rel_accel)
        .def_readonly("rel_vel", &qs::solver::ResponseHistory::rel_vel)
        .def_readonly("rel_disp", &qs::solver::ResponseHistory::rel_disp)
        .def_readonly("restoring_force", &qs::solver::ResponseHistory::restoring_force)
        .def_readonly("idr", &qs::solver::ResponseHistory::idr);
    m.def("newmark_sdof",
          [](const qs::solver::SDOFParams& p, const qs::signals::Waveform& gm) {
              return qs::solver::newmark_sdof(p, gm);
          });
    m.def("newmark_mdof", &qs::solver::newmark_mdof);
    m.def("eigen_analysis", &qs::solver::eigen_analysis);
    m.def("rayleigh_coefficients", &qs::solver::rayleigh_coefficients, py::arg("omega1"),
          py::arg("omega2"), py::arg("zeta1"), py::arg("zeta2"));
    m.def("tune_building", &qs::solver::tune_building);
    m.def("default_building", &qs::solver::default_building, py::arg("n_stories"),
          py::arg("target_t1"), py::arg("story_height_m") = 3.0,
          py::arg("story_mass_kg") = 1.0);

    // --- masked network ---
    py::class_<qs::net::NetworkConfig>(m, "NetworkConfig")
        .def(py::init<>())
        .def_static("desk", &qs::net::NetworkConfig::desk)
        .def_static("paper", &qs::net::NetworkConfig::paper)
        .def_readwrite("t_step", &qs::net::NetworkConfig::t_step)
        .def_readwrite("n_floors", &qs::net::NetworkConfig::n_floors)
        .def_readwrite("conv_kernel", &qs::net::NetworkConfig::conv_kernel)
        .def_property(
            "band_past", [](const qs::net::NetworkConfig& c) { return c.band.past; },
            [](qs::net::NetworkConfig& c, int v) { c.band.past = v; })
        .def_property(
            "band_future", [](const qs::net::NetworkConfig& c) { return c.band.future; },
            [](qs::net::NetworkConfig& c, int v) { c.band.future = v; })
        .def("source_lookahead", &qs::net::NetworkConfig::source_lookahead)
        .def("target_lookahead", &qs::net::NetworkConfig::target_lookahead);
    py::class_<qs::net::MaskedNetwork>(m, "MaskedNetwork")
        .def(py::init<const qs::net::NetworkConfig&, uint64_t>(), py::arg("config"),
             py::arg("init_seed"))
        .def("attach_head", &qs::net::MaskedNetwork::attach_head, py::arg("init_seed"))
        .def("has_head", &qs::net::MaskedNetwork::has_head)
        .def("backbone_checksum", &qs::net::MaskedNetwork::backbone_checksum)
        .def("forward_source",
             [](const qs::net::MaskedNetwork& n, const Rows& gm) {
                 return rows_from_signal(n.forward_source(signal_from_rows(gm)));
             })
        .def("forward_target", [](const qs::net::MaskedNetwork& n, const Rows& gm) {
            return rows_from_signal(n.forward_target(signal_from_rows(gm)));
        });
    m.def("huber", &qs::net::huber, py::arg("y"), py::arg("y_hat"), py::arg("delta"));
    m.def("physics_loss",
          [](const std::vector<double>& v, const std::vector<double>& d, double dt,
             double delta) { return qs::net::physics_loss(v, d, dt, delta); });

    // --- evaluation ---
    m.def("correlation", [](const std::vector<double>& y, const std::vector<double>& yh) {
        return qs::eval::correlation(y, yh);
    });
    py::class_<qs::eval::BoxStats>(m, "BoxStats")
        .def_readonly("median", &qs::eval::BoxStats::median)
        .def_readonly("q1", &qs::eval::BoxStats::q1)
        .def_readonly("q3", &qs::eval::BoxStats::q3)
        .def_readonly("whisker_low", &qs::eval::BoxStats::whisker_low)
        .def_readonly("whisker_high", &qs::eval::BoxStats::whisker_high)
        .def_readonly("outliers", &qs::eval::BoxStats::outliers);
    m.def("box_stats", &qs::eval::box_stats);
    m.def("percentile_exemplars", &qs::eval::percentile_exemplars, py::arg("values"),
          py::arg("levels") = std::vector<double>{5, 50, 95});
    m.def("exceedance_curve",
          [](const std::vector<std::optional<double>>& peaks,
             const std::vector<double>& thresholds) {
              auto curve = qs::eval::exceedance_curve(peaks, thresholds);
              return py::make_tuple(curve.thresholds, curve.probabilities);
          });

    // --- stores ---
    m.def("save_waveforms", &qs::store::save_waveforms);
    m.def("load_waveforms", &qs::store::load_waveforms);

    // --- pipeline ---
    m.def("desk_profile", &qs::pipeline::desk_profile);
    py::class_<qs::pipeline::RunConfig>(m, "RunConfig")
        .def_readwrite("master_seed", &qs::pipeline::RunConfig::master_seed)
        .def_property(
            "out_dir",
            [](const qs::pipeline::RunConfig& c) { return c.out_dir.string(); },
            [](qs::pipeline::RunConfig& c, const std::string& v) { c.out_dir = v; });
    m.def("run_stage", [](const qs::pipeline::RunConfig& cfg, const std::string& stage) {
        qs::pipeline::run_stage(cfg, qs::pipeline::stage_from_name(stage));
    });
    m.def("serialize_config", &qs::pipeline::serialize_config);
}
