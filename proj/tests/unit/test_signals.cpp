#include <cmath>
#include <doctest.h>

#include "qs/errors.hpp"
#include "qs/waveform.hpp"

using namespace qs;
using namespace qs::signals;

namespace {
Waveform make(std::vector<double> samples, double dt = 0.01) {
    Waveform w;
    w.samples = std::move(samples);
    w.dt_s = dt;
    return w;
}
} // namespace

TEST_SUITE_BEGIN("signals");

TEST_CASE("pga basics") {
    CHECK(compute_pga(make({0, 0, 0})) == 0.0);
    CHECK(compute_pga(make({1, -3, 2})) == 3.0);
    CHECK_THROWS_AS(compute_pga(make({})), Error);
}

TEST_CASE("pga of a grid-aligned sine hits the amplitude") {
    // 1 Hz sine sampled at 0.0025 s: a sample lands exactly on the crest.
    const double a = 2.5, f = 1.0, dt = 0.0025;
    std::vector<double> s(1601);
    for (size_t i = 0; i < s.size(); ++i)
        s[i] = a * std::sin(2 * M_PI * f * static_cast<double>(i) * dt);
    CHECK(compute_pga(make(std::move(s), dt)) == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("pgv of constant acceleration is a*T") {
    const double a = 1.7, dt = 0.01;
    const size_t n = 501; // T = 5 s
    Waveform w = make(std::vector<double>(n, a), dt);
    CHECK(compute_pgv(w) == doctest::Approx(a * 5.0).epsilon(1e-12));
    CHECK(compute_pgv(make({0, 0, 0})) == 0.0);
    CHECK_THROWS_AS(compute_pgv(make({})), Error);
}

TEST_CASE("pgv of a sine approaches 2a/omega") {
    const double a = 1.0, f = 0.5, omega = 2 * M_PI * f, dt = 0.001;
    std::vector<double> s(4001); // two full cycles
    for (size_t i = 0; i < s.size(); ++i)
        s[i] = a * std::sin(omega * static_cast<double>(i) * dt);
    CHECK(compute_pgv(make(std::move(s), dt)) ==
          doctest::Approx(2 * a / omega).epsilon(1e-4));
}

TEST_CASE("pga/pgv invariant under sign flip") {
    Waveform w = make({0.3, -1.2, 0.8, -0.1, 0.9}, 0.02);
    Waveform flipped = w;
    for (auto& v : flipped.samples) v = -v;
    CHECK(compute_pga(w) == compute_pga(flipped));
    CHECK(compute_pgv(w) == compute_pgv(flipped));
}

TEST_CASE("fit_normalization picks global max-abs per family") {
    std::vector<Waveform> inputs = {make({1, -2, 0.5}), make({-5, 1, 0})};
    std::vector<double> fam_a = {0.1, -0.4};
    std::vector<double> fam_a2 = {0.2, 0.05};
    std::vector<double> fam_b = {-7, 3};
    std::vector<std::vector<SeriesView>> families = {{fam_a, fam_a2}, {fam_b}};
    auto stats = fit_normalization(inputs, families);
    CHECK(stats.input_scale == 5.0);
    CHECK(stats.response_scales[0] == 0.4);
    CHECK(stats.response_scales[1] == 7.0);
}

TEST_CASE("normalization is idempotent under duplication") {
    std::vector<Waveform> once = {make({1, -2})};
    std::vector<Waveform> twice = {make({1, -2}), make({1, -2})};
    std::vector<double> resp = {3.0, -1.0};
    std::vector<std::vector<SeriesView>> fam = {{resp}};
    std::vector<std::vector<SeriesView>> fam2 = {{resp, resp}};
    auto s1 = fit_normalization(once, fam);
    auto s2 = fit_normalization(twice, fam2);
    CHECK(s1.input_scale == s2.input_scale);
    CHECK(s1.response_scales[0] == s2.response_scales[0]);
}

TEST_CASE("normalized data re-fits to unit scales (fixed point)") {
    std::vector<Waveform> inputs = {make({2, -8, 4}), make({1, 0.5, -0.25})};
    std::vector<double> resp0 = {0.5, -2.0};
    std::vector<double> resp1 = {1.5, 0.75};
    std::vector<std::vector<SeriesView>> fams = {{resp0}, {resp1}};
    auto stats = fit_normalization(inputs, fams);

    std::vector<Waveform> norm_in = inputs;
    for (auto& w : norm_in)
        for (auto& v : w.samples) v /= stats.input_scale;
    std::vector<double> n0 = resp0, n1 = resp1;
    for (auto& v : n0) v /= stats.response_scales[0];
    for (auto& v : n1) v /= stats.response_scales[1];
    std::vector<std::vector<SeriesView>> nfams = {{n0}, {n1}};
    auto stats2 = fit_normalization(norm_in, nfams);
    CHECK(stats2.input_scale == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(stats2.response_scales[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(stats2.response_scales[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("degenerate families rejected") {
    std::vector<Waveform> inputs = {make({1, 2})};
    std::vector<double> zeros = {0.0, 0.0};
    std::vector<std::vector<SeriesView>> fams = {{zeros}};
    CHECK_THROWS_AS(fit_normalization(inputs, fams), Error);
    std::vector<Waveform> zin = {make({0, 0})};
    std::vector<double> ok = {1.0};
    std::vector<std::vector<SeriesView>> okf = {{ok}};
    CHECK_THROWS_AS(fit_normalization(zin, okf), Error);
}

TEST_SUITE_END();
