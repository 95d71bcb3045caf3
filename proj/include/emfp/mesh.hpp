#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "emfp/errors.hpp"
#include "emfp/vec.hpp"

namespace emfp {

/// Outer-surface quad facet. Node order gives an outward Newell normal.
struct SurfaceFacet {
    std::array<int, 4> nodes;
    int element; // owning hex
};

/// Structured hexahedral tube grid. Node (iz, ic, ir) layout:
/// axial plane index iz in [0, n_axial], circumferential ic in [0, n_circ),
/// radial layer ir in [0, n_thickness]. The tube axis is z, centered on z=0.
struct TubeMesh {
    std::vector<Vec3> nodes;
    std::vector<std::array<int, 8>> elements;
    double inner_radius = 0.0;
    double outer_radius = 0.0;
    double length = 0.0;
    int n_axial = 0, n_circ = 0, n_thickness = 0;

    std::vector<SurfaceFacet> outer_facets;
    std::vector<SurfaceFacet> inner_facets;
    std::vector<int> outer_nodes; // unique node ids on the outer surface
    std::vector<int> end_ring_nodes; // both end planes, all layers

    int node_id(int iz, int ic, int ir) const {
        ic = ((ic % n_circ) + n_circ) % n_circ;
        return (iz * n_circ + ic) * (n_thickness + 1) + ir;
    }
    int element_id(int iz, int ic, int ir) const {
        ic = ((ic % n_circ) + n_circ) % n_circ;
        return (iz * n_circ + ic) * n_thickness + ir;
    }
    /// Inverse of element_id.
    std::array<int, 3> element_grid(int e) const {
        int ir = e % n_thickness;
        int rest = e / n_thickness;
        return {rest / n_circ, rest % n_circ, ir};
    }

    Vec3 element_center(int e, const std::vector<Vec3>& coords) const {
        Vec3 c{0, 0, 0};
        for (int a : elements[static_cast<std::size_t>(e)]) c += coords[static_cast<std::size_t>(a)];
        return c * (1.0 / 8.0);
    }

    double wall_thickness() const { return outer_radius - inner_radius; }
};

TubeMesh generate_tube_mesh(double inner_radius, double thickness, double length,
                            int n_axial, int n_circ, int n_thickness);

/// Area-weighted split of alive outer facets onto their nodes, evaluated on
/// the given (possibly deformed) coordinates. Returns per-node area indexed
/// by global node id (zero off the outer surface).
std::vector<double> outer_tributary_areas(const TubeMesh& mesh, const std::vector<Vec3>& coords,
                                          const std::vector<std::uint8_t>& facet_alive);

/// Facet normal (unit) and area from Newell's formula on current coordinates.
void facet_normal_area(const SurfaceFacet& f, const std::vector<Vec3>& coords, Vec3& normal,
                       double& area);

/// Hex volume by 2x2x2 Gauss quadrature of det J.
double hex_volume(const std::array<int, 8>& conn, const std::vector<Vec3>& coords);

/// Minimum det J over the 2x2x2 quadrature points.
double hex_min_jacobian(const std::array<int, 8>& conn, const std::vector<Vec3>& coords);

/// Corner signs of the reference trilinear hex, VTK_HEXAHEDRON order with
/// parametric axes (xi, eta, zeta).
extern const double kHexCorner[8][3];
inline constexpr double kHexGauss = 0.57735026918962576; // 1/sqrt(3)

/// Shape function gradients w.r.t. reference coordinates.
void hex_shape_gradients(double xi, double eta, double zeta, double dN[8][3]);

/// Jacobian of the isoparametric map at a reference point.
Mat3 hex_jacobian(const std::array<int, 8>& conn, const std::vector<Vec3>& coords, double xi,
                  double eta, double zeta);

} // namespace emfp
