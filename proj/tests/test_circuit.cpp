#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "emfp/circuit.hpp"

using namespace emfp;

namespace {

CircuitParams make_params(double c, double l, double r, double v0) {
    CircuitParams p;
    p.capacitance = c;
    p.inductance = l;
    p.resistance = r;
    p.charge_voltage = v0;
    return p;
}

// largest |closed form - RK4| over the waveform, normalized by the peak
double closed_vs_rk4(const CircuitParams& p, double t_end, double dt) {
    const CurrentWaveform w = integrate_rlc(p, t_end, dt);
    double peak = 0;
    for (double i : w.currents) peak = std::max(peak, std::abs(i));
    double worst = 0;
    for (std::size_t k = 0; k < w.times.size(); ++k)
        worst = std::max(worst, std::abs(discharge_current(p, w.times[k]) - w.currents[k]));
    return worst / peak;
}

} // namespace

TEST_CASE("natural frequency") {
    CHECK(natural_frequency(make_params(1.0, 1.0, 0.0, 0.0)) == doctest::Approx(1.0).epsilon(1e-14));
    // 1/sqrt(10 uH * 160 uF) is exactly 25000 rad/s
    CHECK(natural_frequency(make_params(160e-6, 10e-6, 0.0, 0.0)) ==
          doctest::Approx(25000.0).epsilon(1e-12));
    const CircuitParams a = make_params(3.3e-6, 7.7e-7, 0.01, 100);
    const CircuitParams b = make_params(6.6e-6, 15.4e-7, 0.01, 100);
    CHECK(natural_frequency(a) / natural_frequency(b) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("damping ratio") {
    CHECK(damping_ratio(make_params(1e-4, 1e-6, 0.0, 0.0)) == 0.0);
    const double l = 10e-6, c = 160e-6;
    CHECK(damping_ratio(make_params(c, l, 2.0 * std::sqrt(l / c), 0.0)) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(damping_ratio(make_params(160e-6, 10e-6, 0.01, 0.0)) ==
          doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("discharge energy identity") {
    const CircuitParams p = make_params(160e-6, 0.56e-6, 0.0142, 8440.9715080670661);
    const double e = discharge_energy(p).joules;
    CHECK(e == doctest::Approx(0.5 * p.capacitance * p.charge_voltage * p.charge_voltage)
                   .epsilon(1e-12));
}

TEST_CASE("closed-form current basics") {
    const CircuitParams p = make_params(160e-6, 0.56e-6, 0.0142, 8000.0);
    CHECK(discharge_current(p, 0.0) == 0.0);

    // undamped: peak V0*sqrt(C/L) at t = pi/(2*wn)
    const CircuitParams u = make_params(160e-6, 0.56e-6, 0.0, 5000.0);
    const double wn = natural_frequency(u);
    const double peak = u.charge_voltage * std::sqrt(u.capacitance / u.inductance);
    CHECK(discharge_current(u, std::numbers::pi / (2.0 * wn)) ==
          doctest::Approx(peak).epsilon(1e-12));

    CHECK_THROWS_AS(discharge_current(make_params(1e-4, 1e-6, 1.0, 100.0), 1e-6),
                    OverdampedCircuit);
}

TEST_CASE("closed form matches RK4 over randomized underdamped circuits") {
    std::mt19937 rng(20240817);
    std::uniform_real_distribution<double> logc(-5.0, -3.0), logl(-7.0, -5.0), zeta(0.01, 0.8);
    for (int trial = 0; trial < 25; ++trial) {
        const double c = std::pow(10.0, logc(rng));
        const double l = std::pow(10.0, logl(rng));
        const double z = zeta(rng);
        const double r = 2.0 * z * std::sqrt(l / c);
        const CircuitParams p = make_params(c, l, r, 1000.0);
        const double wn = natural_frequency(p);
        const double fd = wn * std::sqrt(1.0 - z * z) / (2.0 * std::numbers::pi);
        const double t_end = 5.0 / fd;
        CHECK(closed_vs_rk4(p, t_end, t_end / 400.0) < 1e-6);
    }
}

TEST_CASE("first zero crossing at half the damped period") {
    const CircuitParams p = make_params(160e-6, 0.56e-6, 0.0142, 8000.0);
    const double wn = natural_frequency(p);
    const double z = damping_ratio(p);
    const double fd = wn * std::sqrt(1.0 - z * z) / (2.0 * std::numbers::pi);
    const double dt = 1e-9;
    const CurrentWaveform w = integrate_rlc(p, 1.2 / fd, dt);
    double crossing = -1;
    for (std::size_t k = 1; k < w.times.size(); ++k)
        if (w.currents[k - 1] > 0 && w.currents[k] <= 0) {
            crossing = w.times[k];
            break;
        }
    REQUIRE(crossing > 0);
    CHECK(std::abs(crossing - 0.5 / fd) <= 2.0 * dt);
}

TEST_CASE("RK4 plumbing") {
    const CircuitParams zero_v = make_params(1e-4, 1e-6, 0.001, 0.0);
    for (double i : integrate_rlc(zero_v, 1e-4, 1e-6).currents) CHECK(i == 0.0);

    // no dissipation: successive maxima keep their amplitude
    const CircuitParams lossless = make_params(1e-4, 1e-6, 0.0, 500.0);
    const double period = 2.0 * std::numbers::pi / natural_frequency(lossless);
    const CurrentWaveform w = integrate_rlc(lossless, 4.0 * period, period / 2000.0);
    std::vector<double> maxima;
    for (std::size_t k = 1; k + 1 < w.currents.size(); ++k)
        if (w.currents[k] > w.currents[k - 1] && w.currents[k] >= w.currents[k + 1])
            maxima.push_back(w.currents[k]);
    REQUIRE(maxima.size() >= 3);
    for (double m : maxima)
        CHECK(m == doctest::Approx(maxima.front()).epsilon(1e-6));
}

TEST_CASE("parameter validation") {
    CircuitParams p = make_params(-1.0, 1e-6, 0.0, 0.0);
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = make_params(1e-4, 1e-6, 0.01, 100.0);
    CircuitBreakdown b;
    b.machine_inductance = 0.4e-6;
    b.equivalent_inductance = 0.6e-6;
    b.machine_resistance = 0.004;
    b.equivalent_resistance = 0.006;
    p.breakdown = b;
    CHECK_NOTHROW(p.validate()); // 0.4 + 0.6 = 1.0 uH, 4 + 6 = 10 mOhm
    p.breakdown->machine_inductance = 0.5e-6;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("damped sinusoid fit round trip") {
    const double amp = 120e3, lam = 12000.0, f = 16.7e3, phi = 0.0;
    CurrentWaveform w;
    for (int k = 0; k <= 600; ++k) {
        const double t = k * 0.05e-6;
        w.times.push_back(t);
        w.currents.push_back(amp * std::exp(-lam * t) * std::sin(2.0 * std::numbers::pi * f * t + phi));
    }
    const SinusoidFit fit = fit_damped_sinusoid(w);
    CHECK(fit.amplitude == doctest::Approx(amp).epsilon(1e-3));
    CHECK(fit.decay_rate == doctest::Approx(lam).epsilon(1e-3));
    CHECK(fit.frequency == doctest::Approx(f).epsilon(1e-3));
    CHECK(fit.residual < 1e-6);

    SUBCASE("1% noise still recovers the frequency within 1%") {
        std::mt19937 rng(7);
        std::normal_distribution<double> noise(0.0, 0.01 * amp);
        CurrentWaveform nw = w;
        for (double& i : nw.currents) i += noise(rng);
        const SinusoidFit nfit = fit_damped_sinusoid(nw);
        CHECK(nfit.frequency == doctest::Approx(f).epsilon(0.01));
    }

    SUBCASE("zero waveform diverges") {
        CurrentWaveform z = w;
        for (double& i : z.currents) i = 0.0;
        CHECK_THROWS_AS(fit_damped_sinusoid(z), FitDiverged);
    }
}

TEST_CASE("waveform CSV") {
    const char* path = "test_waveform_tmp.csv";

    SUBCASE("default microseconds/kiloamps units") {
        std::FILE* f = std::fopen(path, "w");
        std::fputs("0,0\n1,10\n", f);
        std::fclose(f);
        const CurrentWaveform w = load_waveform_csv(path);
        REQUIRE(w.times.size() == 2);
        CHECK(w.times[1] == doctest::Approx(1e-6).epsilon(1e-14));
        CHECK(w.currents[1] == doctest::Approx(1e4).epsilon(1e-14));
    }

    SUBCASE("non-monotonic times rejected") {
        std::FILE* f = std::fopen(path, "w");
        std::fputs("time_us,current_kA\n0,0\n2,5\n1,10\n", f);
        std::fclose(f);
        CHECK_THROWS_AS(load_waveform_csv(path), NonMonotonicTime);
    }

    SUBCASE("garbage line reported with its number") {
        std::FILE* f = std::fopen(path, "w");
        std::fputs("0,0\n1,ten\n", f);
        std::fclose(f);
        try {
            load_waveform_csv(path);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 2);
        }
    }

    SUBCASE("write-read round trip is exact in SI units") {
        CurrentWaveform w;
        w.times = {0.0, 1.37e-6, 2.9e-6, 3.1e-6};
        w.currents = {0.0, 1.2345678912345678e4, -7.6e3, 1.0 / 3.0};
        save_waveform_csv(w, path, WaveformUnits::SecondsAmps);
        const CurrentWaveform r = load_waveform_csv(path);
        REQUIRE(r.times.size() == w.times.size());
        for (std::size_t k = 0; k < w.times.size(); ++k) {
            CHECK(r.times[k] == w.times[k]);
            CHECK(r.currents[k] == w.currents[k]);
        }
    }
    std::remove(path);
}

TEST_CASE("waveform evaluation") {
    CurrentWaveform w;
    w.times = {1.0, 2.0, 4.0};
    w.currents = {10.0, 20.0, 0.0};
    CHECK(w.eval(0.5) == 0.0);           // before start
    CHECK(w.eval(1.5) == doctest::Approx(15.0));
    CHECK(w.eval(3.0) == doctest::Approx(10.0));
    CHECK(w.eval(9.0) == 0.0);           // hold_after_end holds the last value
    w.hold_after_end = false;
    CHECK(w.eval(9.0) == 0.0);
    w.currents.back() = 5.0;
    w.hold_after_end = true;
    CHECK(w.eval(9.0) == 5.0);
}
