#pragma once

#include <string>
#include <vector>

#include "emfp/tools.hpp"
#include "emfp/vec.hpp"

namespace emfp {

struct ContactEntry {
    int node = 0;
    int tool = 0;
    double depth = 0;       // m, > 0
    Vec3 normal{0, 0, 0};   // unit, away from the tool
    Vec3 slip_vel{0, 0, 0}; // m/s, tangential node velocity (tools are static)
};

struct ContactSet {
    std::vector<ContactEntry> entries; // sorted by node id
};

struct FrictionModel {
    double mu_static = 0.30;
    double mu_dynamic = 0.30;
    double v_reg = 1e-3; // m/s, stick-slip regularization
    void validate() const;
};

/// Nodes penetrating any tool. Broad phase: per-tool axis-aligned bounds
/// (the die bore is tested directly, its bound is unbounded). Deterministic
/// output order for any worker count.
ContactSet detect_penetrations(const std::vector<Vec3>& positions,
                               const std::vector<Vec3>& velocities,
                               const std::vector<RigidTool>& tools, int n_threads);

struct ContactForces {
    std::vector<Vec3> normal;     // per mesh node
    std::vector<Vec3> tangential; // per mesh node
    double max_penetration = 0;   // m
};

/// Penalty normal force k*depth plus viscous-regularized Coulomb friction:
/// |f_t| = mu_d * N * min(1, |v_t|/v_reg), opposing slip.
ContactForces penalty_forces(const ContactSet& contacts, std::size_t n_nodes, double stiffness,
                             const FrictionModel& fm);

/// Central-difference stability limit of a penalty spring against the
/// lightest node: safety * 2 * sqrt(m_min/k).
double contact_timestep_limit(double stiffness, const std::vector<double>& masses, double safety);

void write_contact_csv(const ContactSet& contacts, const std::string& path);

} // namespace emfp
