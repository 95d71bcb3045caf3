#pragma once

#include <string>

#include "emfp/errors.hpp"
#include "emfp/vec.hpp"

namespace emfp {

/// Johnson-Cook elasto-viscoplastic material with ductile damage.
struct JCMaterial {
    std::string name;

    // elastic / physical
    double density = 0;       // kg/m^3
    double youngs = 0;        // Pa
    double poisson = 0;
    double shear = 0;         // Pa; tables may list a value inconsistent
    bool shear_override = false; // with E, nu -- set this to accept it
    double conductivity = 0;  // S/m

    // flow stress: (A + B*eps^n)(1 + C ln(rate/rate0))(1 - T*^m)
    double a = 0, b = 0, c = 0; // Pa, Pa, -
    double n = 0, m = 0;
    double t_melt = 0, t_ref = 0; // K
    double rate_ref = 1.0;        // 1/s

    // fracture strain: [D1 + D2 exp(D3 s*)][1 + D4 ln(rate/rate_ref)][1 + D5 T*]
    double d1 = 0, d2 = 0, d3 = 0, d4 = 0, d5 = 0;
    double damage_rate_ref = 1.0; // 1/s
    double fracture_floor = 1e-3;

    // adiabatic heating
    double taylor_quinney = 0.9;
    double specific_heat = 0; // J/(kg K)

    void validate() const;
    double shear_from_elastic() const { return youngs / (2.0 * (1.0 + poisson)); }
    double bulk_modulus() const { return youngs / (3.0 * (1.0 - 2.0 * poisson)); }
    /// Dilatational wave speed, the one that limits the explicit timestep.
    double wave_speed() const;
};

struct PointState {
    Sym3 stress{};          // Pa
    double eps_p = 0;       // equivalent plastic strain
    double eps_rate = 0;    // 1/s, last-step equivalent plastic strain rate
    double damage = 0;      // in [0, 1]
    double temperature = 0; // K
    bool deleted = false;
};

struct ReturnResult {
    double deps_p = 0;        // equivalent plastic strain increment
    double plastic_work = 0;  // J/m^3
    int iterations = 0;
};

double flow_stress(const JCMaterial& mat, double eps_p, double eps_rate, double temperature);

/// Hypoelastic radial-return update. `dstrain` is the (already co-rotated)
/// total strain increment; updates stress, eps_p and eps_rate in place.
/// Throws NewtonNoConvergence if the consistency solve stalls (50 iterations,
/// bisection-safeguarded, so this indicates corrupted inputs).
ReturnResult radial_return(const JCMaterial& mat, PointState& state, const Sym3& dstrain,
                           double dt);

/// sigma_m / sigma_vm, von Mises floor 1e-6*A, clamped to [-3, 3].
double triaxiality(const Sym3& stress, const JCMaterial& mat);

double fracture_strain(const JCMaterial& mat, double sigma_star, double eps_rate,
                       double t_star);

/// D += deps_p / eps_f, capped at 1; sets the deleted flag at D >= 1.
double accumulate_damage(PointState& state, double deps_p, double eps_f);

/// T += chi * w_p / (rho c_p), capped at melt.
double adiabatic_temperature_update(const JCMaterial& mat, PointState& state,
                                    double plastic_work_density);

/// Normalized temperature (T - T0)/(Tm - T0), clamped to [0, 1].
double homologous_temperature(const JCMaterial& mat, double temperature);

} // namespace emfp
