#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "emfp/material.hpp"

using namespace emfp;

namespace {

JCMaterial aluminum() {
    JCMaterial m;
    m.name = "al6061-t6";
    m.density = 2703.0;
    m.youngs = 69.8e9;
    m.poisson = 0.33;
    m.shear = m.shear_from_elastic();
    m.conductivity = 25e6;
    m.a = 324.1e6;
    m.b = 113.8e6;
    m.c = 0.002;
    m.n = 0.42;
    m.m = 1.34;
    m.t_melt = 925.0;
    m.t_ref = 293.0;
    m.rate_ref = 1.0;
    m.d1 = -0.77;
    m.d2 = 1.45;
    m.d3 = -0.47;
    m.d4 = 0.0;
    m.d5 = 1.6;
    m.damage_rate_ref = 1.0;
    m.specific_heat = 896.0;
    m.validate();
    return m;
}

Sym3 uniaxial_shape(double amp) {
    // isochoric increment with the deviator direction of uniaxial stress
    return Sym3{amp, -0.5 * amp, -0.5 * amp, 0, 0, 0};
}

} // namespace

TEST_CASE("material validation") {
    JCMaterial m = aluminum();
    CHECK_NOTHROW(m.validate());

    JCMaterial bad = aluminum();
    bad.poisson = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = aluminum();
    bad.poisson = 0.55;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = aluminum();
    bad.shear = 0.9 * bad.shear_from_elastic(); // 10% off the elastic value
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.shear_override = true;
    CHECK_NOTHROW(bad.validate());
    bad = aluminum();
    bad.a = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = aluminum();
    bad.n = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = aluminum();
    bad.t_melt = bad.t_ref;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("flow stress surface") {
    const JCMaterial m = aluminum();

    // at reference strain rate and temperature with no hardening strain
    CHECK(flow_stress(m, 0.0, m.rate_ref, m.t_ref) == doctest::Approx(m.a).epsilon(1e-12));

    // frozen reference values for this deck
    CHECK(flow_stress(m, 0.1, 1000.0, 300.0) ==
          doctest::Approx(371548561.13799821278).epsilon(1e-12));
    CHECK(flow_stress(m, 0.2, 1000.0, 600.0) ==
          doctest::Approx(240096279.97464611447).epsilon(1e-12));
    CHECK(flow_stress(m, 0.05, 1.0, 293.0) ==
          doctest::Approx(356437739.92209654211).epsilon(1e-12));

    // thermal softening vanishes at melt and cannot go negative
    CHECK(flow_stress(m, 0.1, 1.0, m.t_melt) == 0.0);
    CHECK(flow_stress(m, 0.1, 1.0, 2.0 * m.t_melt) == 0.0);

    // sub-reference rates clamp to the reference rate
    CHECK(flow_stress(m, 0.1, 0.25, 400.0) == flow_stress(m, 0.1, m.rate_ref, 400.0));

    std::mt19937 rng(5150);
    std::uniform_real_distribution<double> ue(0.0, 0.4), ur(1.0, 1e4), ut(293.0, 900.0);
    for (int k = 0; k < 200; ++k) {
        const double e = ue(rng), r = ur(rng), t = ut(rng);
        CHECK(flow_stress(m, e + 0.01, r, t) > flow_stress(m, e, r, t));
        CHECK(flow_stress(m, e, 2.0 * r, t) >= flow_stress(m, e, r, t));
        CHECK(flow_stress(m, e, r, t + 10.0) < flow_stress(m, e, r, t));
    }
}

TEST_CASE("wave speed") {
    const JCMaterial m = aluminum();
    CHECK(m.wave_speed() == doctest::Approx(6185.5284792631989618).epsilon(1e-12));
    CHECK(m.bulk_modulus() == doctest::Approx(m.youngs / (3 * (1 - 2 * m.poisson))).epsilon(1e-14));
}

TEST_CASE("homologous temperature") {
    const JCMaterial m = aluminum();
    CHECK(homologous_temperature(m, m.t_ref) == 0.0);
    CHECK(homologous_temperature(m, m.t_melt) == 1.0);
    CHECK(homologous_temperature(m, 0.5 * (m.t_ref + m.t_melt)) ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK(homologous_temperature(m, 100.0) == 0.0);  // clamped below
    CHECK(homologous_temperature(m, 2000.0) == 1.0); // clamped above
}

TEST_CASE("elastic response below yield") {
    const JCMaterial m = aluminum();
    PointState s;
    s.temperature = m.t_ref;
    const double de = 1e-4;
    const Sym3 dstrain{de, 0, 0, 0, 0, 0}; // uniaxial strain, well below yield
    const ReturnResult r = radial_return(m, s, dstrain, 1e-6);
    CHECK(r.deps_p == 0.0);
    CHECK(r.plastic_work == 0.0);
    CHECK(r.iterations == 0);
    const double k = m.bulk_modulus(), g = m.shear;
    CHECK(s.stress.xx == doctest::Approx((k + 4.0 * g / 3.0) * de).epsilon(1e-10));
    CHECK(s.stress.yy == doctest::Approx((k - 2.0 * g / 3.0) * de).epsilon(1e-10));
    CHECK(s.stress.zz == doctest::Approx(s.stress.yy).epsilon(1e-14));

    // zero increment is a fixed point
    const Sym3 before = s.stress;
    radial_return(m, s, Sym3{}, 1e-6);
    CHECK(s.stress.xx == before.xx);
    CHECK(s.stress.yy == before.yy);
    CHECK(s.eps_p == 0.0);
}

TEST_CASE("radial return tracks the uniaxial flow curve") {
    const JCMaterial m = aluminum();
    const double targets[] = {0.05, 0.1, 0.2};
    for (double rate : {1.0, 1e3}) {
        for (double temp : {293.0, 600.0}) {
            PointState s;
            s.temperature = temp;
            const double de = 1e-4;
            const double dt = de / rate; // total equivalent strain rate == target
            double checked = 0;
            std::size_t next = 0;
            for (int step = 0; step < 2200 && next < 3; ++step) {
                const ReturnResult r = radial_return(m, s, uniaxial_shape(de), dt);
                CHECK(r.plastic_work >= 0.0);
                if (r.deps_p > 0) {
                    // consistency: the stress sits on the rate- and
                    // temperature-dependent yield surface
                    const double q = von_mises(s.stress);
                    const double fs = flow_stress(m, s.eps_p, r.deps_p / dt, s.temperature);
                    CHECK(std::abs(q - fs) <= 1e-8 * m.a);
                }
                if (s.eps_p >= targets[next]) {
                    const double q = von_mises(s.stress);
                    const double ref = flow_stress(m, targets[next], rate, temp);
                    CHECK(std::abs(q - ref) / ref < 5e-3);
                    ++next;
                    ++checked;
                }
            }
            CHECK(checked == 3);
        }
    }
}

TEST_CASE("plastic flow is isochoric") {
    const JCMaterial m = aluminum();
    PointState s;
    s.temperature = m.t_ref;
    // mixed increment: volumetric part plus a large deviatoric push
    double vol_strain = 0;
    for (int step = 0; step < 200; ++step) {
        const Sym3 d{8e-4, -3.9e-4, -3.9e-4, 1e-4, 0, 0};
        vol_strain += d.trace();
        radial_return(m, s, d, 1e-6);
        const double p = s.stress.trace() / 3.0;
        CHECK(p == doctest::Approx(m.bulk_modulus() * vol_strain).epsilon(1e-10));
    }
    CHECK(s.eps_p > 0.01); // the path did go plastic
}

TEST_CASE("one large step still converges") {
    const JCMaterial m = aluminum();
    PointState s;
    s.temperature = m.t_ref;
    const ReturnResult r = radial_return(m, s, uniaxial_shape(0.05), 1e-6);
    CHECK(r.deps_p > 0.04);
    CHECK(r.iterations <= 50);
    const double q = von_mises(s.stress);
    CHECK(std::abs(q - flow_stress(m, s.eps_p, r.deps_p / 1e-6, s.temperature)) <= 1e-8 * m.a);
    CHECK(r.plastic_work > 0.0);
}

TEST_CASE("stress triaxiality") {
    const JCMaterial m = aluminum();
    CHECK(triaxiality(Sym3{200e6, 0, 0, 0, 0, 0}, m) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(triaxiality(Sym3{0, 0, 0, 80e6, 0, 0}, m) == doctest::Approx(0.0).epsilon(1e-15));
    // hydrostatic states exhaust the von Mises floor and clamp
    CHECK(triaxiality(Sym3{5e8, 5e8, 5e8, 0, 0, 0}, m) == 3.0);
    CHECK(triaxiality(Sym3{-5e8, -5e8, -5e8, 0, 0, 0}, m) == -3.0);
}

TEST_CASE("fracture strain") {
    const JCMaterial m = aluminum();
    CHECK(fracture_strain(m, 0.0, m.damage_rate_ref, 0.0) == doctest::Approx(0.68).epsilon(1e-12));

    // base curve root: eps_f collapses to the floor beyond it
    const double root = 1.34665600120615011195;
    CHECK(fracture_strain(m, root + 0.05, m.damage_rate_ref, 0.0) ==
          doctest::Approx(m.fracture_floor).epsilon(1e-12));

    // compression is more ductile than tension
    CHECK(fracture_strain(m, -1.0, 1.0, 0.0) > fracture_strain(m, 0.0, 1.0, 0.0));
    CHECK(fracture_strain(m, 0.0, 1.0, 0.0) > fracture_strain(m, 1.0, 1.0, 0.0));

    // this deck has no rate term (D4 = 0)
    CHECK(fracture_strain(m, 0.2, 1e4, 0.0) == fracture_strain(m, 0.2, 1.0, 0.0));

    // thermal term scales linearly with homologous temperature
    const double cold = fracture_strain(m, 0.2, 1.0, 0.0);
    CHECK(fracture_strain(m, 0.2, 1.0, 0.5) == doctest::Approx(cold * 1.8).epsilon(1e-12));
}

TEST_CASE("damage accumulation") {
    PointState s;
    s.stress = Sym3{2e8, 1e8, -5e7, 3e7, 0, 0};
    const double eps_f = 0.68;
    const int n = 7;
    for (int k = 0; k < n; ++k) {
        CHECK(!s.deleted);
        accumulate_damage(s, eps_f / n, eps_f);
    }
    CHECK(s.damage == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.deleted);
    // a failed point releases its stress
    CHECK(von_mises(s.stress) == 0.0);
    CHECK(s.stress.trace() == 0.0);
    accumulate_damage(s, 0.1, eps_f); // capped
    CHECK(s.damage <= 1.0);
}

TEST_CASE("adiabatic heating") {
    const JCMaterial m = aluminum();
    PointState s;
    s.temperature = 293.0;
    adiabatic_temperature_update(m, s, 1e8);
    CHECK(s.temperature == doctest::Approx(293.0 + 37.161090851434913588).epsilon(1e-12));
    adiabatic_temperature_update(m, s, 1e13);
    CHECK(s.temperature == m.t_melt); // capped at melt
}
