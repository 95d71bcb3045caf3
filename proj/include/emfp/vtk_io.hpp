#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "emfp/dynamics.hpp"
#include "emfp/mesh.hpp"
#include "emfp/vec.hpp"

namespace emfp {

/// Hex-grid snapshot with named point vectors and cell scalars. Field order
/// is the insertion order and is preserved on disk.
struct VtkSnapshot {
    std::string title = "snapshot";
    std::vector<Vec3> points;
    std::vector<std::array<int, 8>> cells;
    std::vector<std::pair<std::string, std::vector<Vec3>>> point_vectors;
    std::vector<std::pair<std::string, std::vector<double>>> cell_scalars;
};

/// Legacy ASCII unstructured-grid file (hexahedra). Numbers are written in
/// shortest round-trip decimal form, so a write/read cycle is bit-exact.
void write_vtk(const VtkSnapshot& snap, const std::string& path);

/// Reads files in the exact layout write_vtk produces.
VtkSnapshot read_vtk(const std::string& path);

/// Captures the mechanical state: velocity and displacement point vectors,
/// von Mises / plastic strain / damage / alive cell fields.
VtkSnapshot snapshot_state(const TubeMesh& mesh, const DynState& state);

} // namespace emfp
