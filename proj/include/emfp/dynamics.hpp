#pragma once

#include <cstdint>
#include <vector>

#include "emfp/material.hpp"
#include "emfp/mesh.hpp"
#include "emfp/vec.hpp"

namespace emfp {

struct EnergyLedger {
    double kinetic = 0;        // J, recomputed each step from velocities
    double internal_energy = 0; // J, accumulated stress power of alive elements
    double contact = 0;        // J, energy taken by the normal penalty springs
    double friction = 0;       // J, dissipated by friction (non-negative)
    double external_work = 0;  // J, work of the EM loads
    double hourglass = 0;      // J, dissipated by hourglass viscosity
    double deleted = 0;        // J, internal energy of deleted elements
    double peak_external_work = 0;
    double initial_energy = 0; // J, energy present before any external work

    double stored() const {
        return kinetic + internal_energy + contact + friction + hourglass + deleted;
    }
    /// |W_ext - stored| normalized by peak external work (0 if nothing happened).
    double balance_error() const;
};

struct DynOptions {
    bool reduced_integration = false; // 1-point quadrature + hourglass viscosity
    double hourglass_coeff = 0.05;
    int n_threads = 1;
    bool constrain_end_rings = true; // transverse (x, y) DOFs of end rings fixed
};

struct DynState {
    std::vector<Vec3> pos, vel, acc;
    std::vector<double> mass;
    std::vector<PointState> points;      // n_elements * gauss points per element
    std::vector<std::uint8_t> elem_alive;
    std::vector<double> elem_energy;     // J, accumulated internal energy per element
    std::vector<std::uint8_t> fixed_xy;  // per-node transverse constraint
    int n_gp = 8;
    double time = 0;
    long step_count = 0;
    EnergyLedger ledger;

    PointState& point(int elem, int gp) {
        return points[static_cast<std::size_t>(elem) * static_cast<std::size_t>(n_gp) +
                      static_cast<std::size_t>(gp)];
    }
    const PointState& point(int elem, int gp) const {
        return points[static_cast<std::size_t>(elem) * static_cast<std::size_t>(n_gp) +
                      static_cast<std::size_t>(gp)];
    }
};

DynState init_state(const TubeMesh& mesh, const JCMaterial& mat, const DynOptions& opt);

/// Equal-split mass lumping: each node gets 1/8 of every attached element's
/// mass. Sum equals rho * mesh volume exactly.
std::vector<double> lumped_mass(const TubeMesh& mesh, double density);

/// Nodal internal forces from the current stress state on the current
/// configuration (no constitutive update).
void internal_forces(const TubeMesh& mesh, const DynState& state, const DynOptions& opt,
                     std::vector<Vec3>& forces);

/// CFL limit: safety * min over alive elements of char. length / wave speed,
/// characteristic length = volume / largest face area.
double stable_timestep(const TubeMesh& mesh, const std::vector<Vec3>& coords,
                       const std::vector<std::uint8_t>& elem_alive, const JCMaterial& mat,
                       double safety);

/// Split of the contact force for the energy ledger.
struct AppliedForces {
    const std::vector<Vec3>* external = nullptr;       // EM loads (may be null)
    const std::vector<Vec3>* contact_normal = nullptr;
    const std::vector<Vec3>* contact_tangent = nullptr;
};

/// One central-difference step: assemble internal forces, apply loads and
/// constraints, advance velocity/position, then run the constitutive update
/// (Jaumann-rotated radial return, damage, adiabatic heating) on the updated
/// configuration. Throws UnstableRun on non-finite state.
void step(const TubeMesh& mesh, const JCMaterial& mat, DynState& state, double dt,
          const AppliedForces& loads, const DynOptions& opt);

/// Masks every alive element whose gauss points all reached D >= 1; moves its
/// accumulated internal energy into the deleted bucket. Returns the number of
/// newly deleted elements.
int delete_elements(DynState& state);

/// Marks outer/inner facets of dead elements as inactive.
void facet_alive_from_elements(const TubeMesh& mesh, const std::vector<std::uint8_t>& elem_alive,
                               std::vector<std::uint8_t>& outer_alive,
                               std::vector<std::uint8_t>& inner_alive);

double kinetic_energy(const DynState& state);

} // namespace emfp
