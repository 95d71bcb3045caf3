#include "emfp/material.hpp"

#include <algorithm>
#include <cmath>

namespace emfp {

void JCMaterial::validate() const {
    if (density <= 0 || youngs <= 0)
        throw ConfigError("material " + name + ": density and Young's modulus must be positive");
    if (poisson <= 0 || poisson >= 0.5)
        throw ConfigError("material " + name + ": Poisson ratio out of (0, 0.5)");
    if (shear <= 0)
        throw ConfigError("material " + name + ": shear modulus must be positive");
    if (!shear_override) {
        const double g_iso = shear_from_elastic();
        if (std::abs(shear - g_iso) > 0.01 * g_iso)
            throw ConfigError("material " + name +
                              ": shear modulus inconsistent with E, nu by more than 1% "
                              "(set shear_override to keep the tabulated value)");
    }
    if (a <= 0 || b < 0)
        throw ConfigError("material " + name + ": hardening constants out of range");
    if (n <= 0 || n > 1)
        throw ConfigError("material " + name + ": hardening exponent n must lie in (0, 1]");
    if (t_melt <= t_ref)
        throw ConfigError("material " + name + ": melt temperature must exceed reference");
    if (rate_ref <= 0 || damage_rate_ref <= 0)
        throw ConfigError("material " + name + ": reference strain rates must be positive");
    if (fracture_floor <= 0)
        throw ConfigError("material " + name + ": fracture strain floor must be positive");
    if (taylor_quinney < 0 || taylor_quinney > 1)
        throw ConfigError("material " + name + ": Taylor-Quinney factor out of [0, 1]");
    if (specific_heat <= 0)
        throw ConfigError("material " + name + ": specific heat must be positive");
}

double JCMaterial::wave_speed() const {
    return std::sqrt(youngs * (1.0 - poisson) /
                     ((1.0 + poisson) * (1.0 - 2.0 * poisson) * density));
}

double homologous_temperature(const JCMaterial& mat, double temperature) {
    const double t = (temperature - mat.t_ref) / (mat.t_melt - mat.t_ref);
    return std::clamp(t, 0.0, 1.0);
}

double flow_stress(const JCMaterial& mat, double eps_p, double eps_rate, double temperature) {
    const double hard = mat.a + mat.b * std::pow(std::max(eps_p, 0.0), mat.n);
    // rate term clamps at the reference rate: quasi-static below it
    const double rate = std::max(eps_rate, mat.rate_ref);
    const double rate_term = 1.0 + mat.c * std::log(rate / mat.rate_ref);
    const double tstar = homologous_temperature(mat, temperature);
    const double thermal = 1.0 - std::pow(tstar, mat.m);
    return hard * rate_term * std::max(thermal, 0.0);
}

namespace {

// d(flow)/d(deps_p) at fixed temperature, with rate = deps_p/dt
double flow_stress_slope(const JCMaterial& mat, double eps_p, double deps_p, double dt,
                         double thermal) {
    const double ep = std::max(eps_p + deps_p, 1e-12);
    const double hard = mat.a + mat.b * std::pow(ep, mat.n);
    const double dh = mat.b * mat.n * std::pow(ep, mat.n - 1.0);
    const double rate = deps_p / dt;
    double rate_term = 1.0, drate = 0.0;
    if (rate > mat.rate_ref) {
        rate_term = 1.0 + mat.c * std::log(rate / mat.rate_ref);
        drate = mat.c / deps_p; // d/d(deps) of ln(deps/(dt*ref))
    }
    return thermal * (dh * rate_term + hard * drate);
}

} // namespace

ReturnResult radial_return(const JCMaterial& mat, PointState& state, const Sym3& dstrain,
                           double dt) {
    ReturnResult res;
    const double g2 = 2.0 * mat.shear;
    const double k = mat.bulk_modulus();
    const double tr = dstrain.trace();
    const Sym3 de = deviator(dstrain);

    Sym3 trial = state.stress;
    trial.xx += g2 * de.xx + k * tr;
    trial.yy += g2 * de.yy + k * tr;
    trial.zz += g2 * de.zz + k * tr;
    trial.xy += g2 * de.xy;
    trial.yz += g2 * de.yz;
    trial.zx += g2 * de.zx;

    const double q_trial = von_mises(trial);
    const double sy0 = flow_stress(mat, state.eps_p, 0.0, state.temperature);
    if (q_trial <= sy0 || q_trial <= 0.0) {
        state.stress = trial;
        state.eps_rate = 0.0;
        return res;
    }

    const double g3 = 3.0 * mat.shear;
    const double thermal =
        std::max(1.0 - std::pow(homologous_temperature(mat, state.temperature), mat.m), 0.0);
    auto residual = [&](double dp) {
        return q_trial - g3 * dp - flow_stress(mat, state.eps_p + dp, dp / dt, state.temperature);
    };

    double lo = 0.0, hi = q_trial / g3; // residual(lo) > 0 >= residual(hi)
    double x = std::clamp((q_trial - sy0) / g3, 1e-20, hi);
    const double tol = 1e-11 * std::max(q_trial, mat.a);
    double g = residual(x);
    int it = 0;
    for (; it < 50; ++it) {
        if (std::abs(g) <= tol)
            break;
        (g > 0 ? lo : hi) = x;
        const double slope = -g3 - flow_stress_slope(mat, state.eps_p, x, dt, thermal);
        double next = x - g / slope;
        if (!std::isfinite(next) || next <= lo || next >= hi)
            next = 0.5 * (lo + hi);
        x = next;
        g = residual(x);
    }
    if (std::abs(g) > tol)
        throw NewtonNoConvergence("radial return consistency solve failed", g);

    const double deps_p = x;
    const double q_new = q_trial - g3 * deps_p;
    const double p_trial = trial.trace() / 3.0;
    Sym3 snew = deviator(trial) * (q_new / q_trial);
    snew.xx += p_trial;
    snew.yy += p_trial;
    snew.zz += p_trial;

    state.stress = snew;
    state.eps_p += deps_p;
    state.eps_rate = deps_p / dt;
    res.deps_p = deps_p;
    res.plastic_work = q_new * deps_p;
    res.iterations = it;
    return res;
}

double triaxiality(const Sym3& stress, const JCMaterial& mat) {
    const double mean = stress.trace() / 3.0;
    const double vm = std::max(von_mises(stress), 1e-6 * mat.a);
    return std::clamp(mean / vm, -3.0, 3.0);
}

double fracture_strain(const JCMaterial& mat, double sigma_star, double eps_rate,
                       double t_star) {
    const double bracket = mat.d1 + mat.d2 * std::exp(mat.d3 * sigma_star);
    const double rate = std::max(eps_rate, mat.damage_rate_ref);
    const double rate_term = 1.0 + mat.d4 * std::log(rate / mat.damage_rate_ref);
    const double thermal = 1.0 + mat.d5 * std::clamp(t_star, 0.0, 1.0);
    return std::max(bracket * rate_term * thermal, mat.fracture_floor);
}

double accumulate_damage(PointState& state, double deps_p, double eps_f) {
    if (deps_p < 0 || eps_f <= 0)
        throw std::invalid_argument("accumulate_damage: need deps_p >= 0 and eps_f > 0");
    if (!state.deleted) {
        state.damage = std::min(state.damage + deps_p / eps_f, 1.0);
        if (state.damage >= 1.0) {
            // failed material carries no stress from here on
            state.deleted = true;
            state.stress = Sym3{};
        }
    }
    return state.damage;
}

double adiabatic_temperature_update(const JCMaterial& mat, PointState& state,
                                    double plastic_work_density) {
    if (plastic_work_density < 0)
        throw std::invalid_argument("adiabatic_temperature_update: negative plastic work");
    const double dt_temp =
        mat.taylor_quinney * plastic_work_density / (mat.density * mat.specific_heat);
    state.temperature = std::min(state.temperature + dt_temp, mat.t_melt);
    return state.temperature;
}

} // namespace emfp
