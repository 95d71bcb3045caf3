#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emfp/errors.hpp"
#include "emfp/mesh.hpp"
#include "emfp/vec.hpp"

namespace emfp {

inline constexpr double kMu0 = 1.2566370614359172954e-6; // H/m, 4*pi*1e-7

/// Multi-turn coil modeled as N coaxial circular loops spaced by `pitch`
/// and centered axially on `z_center`. Loops are discretized with a
/// midpoint rule using exact tangents, which is spectrally accurate for
/// smooth closed filaments.
struct CoilSpec {
    double radius = 9.0e-3;   // m
    int turns = 8;
    double pitch = 5.0e-3;    // m, loop spacing
    double z_center = 0.0;    // m
    int segments_per_loop = 256;

    // built by build(): filament sample points and current elements dl
    std::vector<Vec3> points;
    std::vector<Vec3> dl;

    void build();
    double axial_extent() const { return pitch * (turns - 1); }
};

struct FieldSample {
    Vec3 h{0, 0, 0}; // A/m
    Vec3 b{0, 0, 0}; // T
    Vec3 position{0, 0, 0};
};

struct ShieldingReport {
    double skin_depth = 0;      // m
    double wall = 0;            // m
    double ratio = 0;           // wall / skin depth
    bool shielded = false;
};

struct LoadField {
    std::vector<int> node_ids;       // outer surface node ids
    std::vector<Vec3> normals;       // current outward normals, unit (zero if bare)
    std::vector<double> pressures;   // Pa
    std::vector<Vec3> forces;        // N
    double time = 0;                 // s
    std::vector<Vec3> nodal_force;   // scatter over all mesh nodes
    double total_force_magnitude = 0;
};

struct LoadOptions {
    double eta = 1.0; // coupling efficiency in (0, 1]
    double mu = kMu0;
    int n_threads = 1;
};

/// delta = sqrt(2 / (omega * mu * kappa))
double skin_depth(double conductivity, double permeability, double angular_frequency);

ShieldingReport shielding_check(double wall, double skin_depth_m);

/// H field of the discretized coil carrying `current`. Throws SingularPoint
/// when the point lies within 1 nm of a filament sample.
FieldSample coil_field(const CoilSpec& coil, double current, const Vec3& point);

/// p = 1/2 * mu * H^2
double magnetic_pressure(double h_gap, double permeability);

/// Magnetic pressure loads on the deformed outer surface. Field sampled at
/// each node's current position; only the tangential component of H drives
/// pressure (the shielding currents cancel the normal component). Facets of
/// deleted elements contribute neither area nor normal.
LoadField build_surface_loads(const TubeMesh& mesh, const std::vector<Vec3>& coords,
                              const std::vector<std::uint8_t>& facet_alive, const CoilSpec& coil,
                              double current, double time, const LoadOptions& opt);

void write_load_csv(const LoadField& loads, const std::vector<Vec3>& coords,
                    const std::string& path);

} // namespace emfp
