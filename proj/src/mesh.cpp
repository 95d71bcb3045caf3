#include "emfp/mesh.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace emfp {

// Trilinear hex, corner order matching VTK_HEXAHEDRON with the parametric
// axes mapped (xi, eta, zeta) -> (radial, circumferential, axial).
const double kHexCorner[8][3] = {
    {-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
    {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1},
};

void hex_shape_gradients(double xi, double eta, double zeta, double dN[8][3]) {
    for (int a = 0; a < 8; ++a) {
        double sx = kHexCorner[a][0], sy = kHexCorner[a][1], sz = kHexCorner[a][2];
        dN[a][0] = 0.125 * sx * (1 + sy * eta) * (1 + sz * zeta);
        dN[a][1] = 0.125 * (1 + sx * xi) * sy * (1 + sz * zeta);
        dN[a][2] = 0.125 * (1 + sx * xi) * (1 + sy * eta) * sz;
    }
}

Mat3 hex_jacobian(const std::array<int, 8>& conn, const std::vector<Vec3>& coords, double xi,
                  double eta, double zeta) {
    double dN[8][3];
    hex_shape_gradients(xi, eta, zeta, dN);
    Mat3 J{};
    for (int a = 0; a < 8; ++a) {
        const Vec3& x = coords[static_cast<std::size_t>(conn[static_cast<std::size_t>(a)])];
        for (int i = 0; i < 3; ++i) {
            J(0, i) += dN[a][i] * x.x;
            J(1, i) += dN[a][i] * x.y;
            J(2, i) += dN[a][i] * x.z;
        }
    }
    return J;
}

double hex_volume(const std::array<int, 8>& conn, const std::vector<Vec3>& coords) {
    double v = 0.0;
    for (int g = 0; g < 8; ++g) {
        double xi = kHexCorner[g][0] * kHexGauss, eta = kHexCorner[g][1] * kHexGauss,
               zeta = kHexCorner[g][2] * kHexGauss;
        v += hex_jacobian(conn, coords, xi, eta, zeta).det();
    }
    return v;
}

double hex_min_jacobian(const std::array<int, 8>& conn, const std::vector<Vec3>& coords) {
    double mn = std::numeric_limits<double>::max();
    for (int g = 0; g < 8; ++g) {
        double xi = kHexCorner[g][0] * kHexGauss, eta = kHexCorner[g][1] * kHexGauss,
               zeta = kHexCorner[g][2] * kHexGauss;
        mn = std::min(mn, hex_jacobian(conn, coords, xi, eta, zeta).det());
    }
    return mn;
}

TubeMesh generate_tube_mesh(double inner_radius, double thickness, double length, int n_axial,
                            int n_circ, int n_thickness) {
    if (!(thickness > 0.0) || !(inner_radius > 0.0) || !(length > 0.0))
        throw InvalidGeometry("tube mesh: radii, thickness and length must be positive");
    if (n_axial < 1 || n_thickness < 1 || n_circ < 8)
        throw InvalidGeometry("tube mesh: need n_axial >= 1, n_thickness >= 1, n_circ >= 8");

    TubeMesh m;
    m.inner_radius = inner_radius;
    m.outer_radius = inner_radius + thickness;
    m.length = length;
    m.n_axial = n_axial;
    m.n_circ = n_circ;
    m.n_thickness = n_thickness;

    m.nodes.resize(static_cast<std::size_t>(n_axial + 1) * n_circ * (n_thickness + 1));
    double dz = length / n_axial;
    double dth = 2.0 * std::numbers::pi / n_circ;
    double dr = thickness / n_thickness;
    for (int iz = 0; iz <= n_axial; ++iz) {
        double z = -0.5 * length + iz * dz;
        for (int ic = 0; ic < n_circ; ++ic) {
            double th = ic * dth;
            double c = std::cos(th), s = std::sin(th);
            for (int ir = 0; ir <= n_thickness; ++ir) {
                double r = inner_radius + ir * dr;
                m.nodes[static_cast<std::size_t>(m.node_id(iz, ic, ir))] = {r * c, r * s, z};
            }
        }
    }

    m.elements.resize(static_cast<std::size_t>(n_axial) * n_circ * n_thickness);
    for (int iz = 0; iz < n_axial; ++iz) {
        for (int ic = 0; ic < n_circ; ++ic) {
            for (int ir = 0; ir < n_thickness; ++ir) {
                // (xi, eta, zeta) -> (r, theta, z), a right-handed triple.
                std::array<int, 8> c = {
                    m.node_id(iz, ic, ir),         m.node_id(iz, ic, ir + 1),
                    m.node_id(iz, ic + 1, ir + 1), m.node_id(iz, ic + 1, ir),
                    m.node_id(iz + 1, ic, ir),     m.node_id(iz + 1, ic, ir + 1),
                    m.node_id(iz + 1, ic + 1, ir + 1), m.node_id(iz + 1, ic + 1, ir),
                };
                m.elements[static_cast<std::size_t>(m.element_id(iz, ic, ir))] = c;
            }
        }
    }

    for (int iz = 0; iz < n_axial; ++iz) {
        for (int ic = 0; ic < n_circ; ++ic) {
            SurfaceFacet outer;
            outer.element = m.element_id(iz, ic, n_thickness - 1);
            // Counter-clockwise seen from outside: +theta then +z.
            outer.nodes = {m.node_id(iz, ic, n_thickness), m.node_id(iz, ic + 1, n_thickness),
                           m.node_id(iz + 1, ic + 1, n_thickness),
                           m.node_id(iz + 1, ic, n_thickness)};
            m.outer_facets.push_back(outer);

            SurfaceFacet inner;
            inner.element = m.element_id(iz, ic, 0);
            inner.nodes = {m.node_id(iz, ic, 0), m.node_id(iz + 1, ic, 0),
                           m.node_id(iz + 1, ic + 1, 0), m.node_id(iz, ic + 1, 0)};
            m.inner_facets.push_back(inner);
        }
    }

    for (int iz = 0; iz <= n_axial; ++iz)
        for (int ic = 0; ic < n_circ; ++ic)
            m.outer_nodes.push_back(m.node_id(iz, ic, n_thickness));

    for (int ic = 0; ic < n_circ; ++ic) {
        for (int ir = 0; ir <= n_thickness; ++ir) {
            m.end_ring_nodes.push_back(m.node_id(0, ic, ir));
            m.end_ring_nodes.push_back(m.node_id(n_axial, ic, ir));
        }
    }
    return m;
}

void facet_normal_area(const SurfaceFacet& f, const std::vector<Vec3>& coords, Vec3& normal,
                       double& area) {
    Vec3 n{0, 0, 0};
    for (int k = 0; k < 4; ++k) {
        const Vec3& a = coords[static_cast<std::size_t>(f.nodes[static_cast<std::size_t>(k)])];
        const Vec3& b = coords[static_cast<std::size_t>(f.nodes[static_cast<std::size_t>((k + 1) % 4)])];
        n += cross(a, b);
    }
    n *= 0.5;
    area = norm(n);
    normal = area > 0.0 ? n / area : Vec3{0, 0, 0};
}

std::vector<double> outer_tributary_areas(const TubeMesh& mesh, const std::vector<Vec3>& coords,
                                          const std::vector<std::uint8_t>& facet_alive) {
    std::vector<double> areas(mesh.nodes.size(), 0.0);
    for (std::size_t fi = 0; fi < mesh.outer_facets.size(); ++fi) {
        if (!facet_alive.empty() && !facet_alive[fi]) continue;
        Vec3 n;
        double a;
        facet_normal_area(mesh.outer_facets[fi], coords, n, a);
        for (int node : mesh.outer_facets[fi].nodes)
            areas[static_cast<std::size_t>(node)] += 0.25 * a;
    }
    return areas;
}

} // namespace emfp
