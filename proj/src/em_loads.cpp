#include "emfp/em_loads.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "emfp/parallel.hpp"

namespace emfp {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kFourPi = 12.566370614359172954;
} // namespace

void CoilSpec::build() {
    if (radius <= 0)
        throw InvalidGeometry("coil radius must be positive");
    if (turns < 1)
        throw InvalidGeometry("coil needs at least one turn");
    if (segments_per_loop < 64)
        throw InvalidGeometry("coil discretization too coarse (need >= 64 segments per loop)");
    points.clear();
    dl.clear();
    points.reserve(static_cast<std::size_t>(turns) * segments_per_loop);
    dl.reserve(points.capacity());
    const double dtheta = kTwoPi / segments_per_loop;
    const double arc = radius * dtheta;
    for (int k = 0; k < turns; ++k) {
        const double z = z_center + (k - 0.5 * (turns - 1)) * pitch;
        for (int j = 0; j < segments_per_loop; ++j) {
            const double th = (j + 0.5) * dtheta;
            const double c = std::cos(th), s = std::sin(th);
            points.push_back({radius * c, radius * s, z});
            dl.push_back({-s * arc, c * arc, 0});
        }
    }
}

double skin_depth(double conductivity, double permeability, double angular_frequency) {
    if (conductivity <= 0 || permeability <= 0 || angular_frequency <= 0)
        throw std::invalid_argument("skin_depth arguments must be positive");
    return std::sqrt(2.0 / (angular_frequency * permeability * conductivity));
}

ShieldingReport shielding_check(double wall, double skin_depth_m) {
    if (wall <= 0 || skin_depth_m <= 0)
        throw std::invalid_argument("shielding_check arguments must be positive");
    ShieldingReport r;
    r.skin_depth = skin_depth_m;
    r.wall = wall;
    r.ratio = wall / skin_depth_m;
    r.shielded = wall >= skin_depth_m;
    return r;
}

FieldSample coil_field(const CoilSpec& coil, double current, const Vec3& point) {
    if (coil.points.empty())
        throw std::logic_error("coil_field: CoilSpec::build() not called");
    FieldSample out;
    out.position = point;
    Vec3 h{0, 0, 0};
    const std::size_t n = coil.points.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 r = point - coil.points[i];
        const double r2 = dot(r, r);
        if (r2 < 1e-18)
            throw SingularPoint("field point within 1 nm of a coil filament");
        const double inv_r3 = 1.0 / (r2 * std::sqrt(r2));
        h = h + inv_r3 * cross(coil.dl[i], r);
    }
    out.h = (current / kFourPi) * h;
    out.b = kMu0 * out.h;
    return out;
}

double magnetic_pressure(double h_gap, double permeability) {
    return 0.5 * permeability * h_gap * h_gap;
}

LoadField build_surface_loads(const TubeMesh& mesh, const std::vector<Vec3>& coords,
                              const std::vector<std::uint8_t>& facet_alive, const CoilSpec& coil,
                              double current, double time, const LoadOptions& opt) {
    if (opt.eta <= 0 || opt.eta > 1)
        throw ConfigError("coupling efficiency eta must lie in (0, 1]");
    if (facet_alive.size() != mesh.outer_facets.size())
        throw std::invalid_argument("facet_alive size mismatch");

    const std::size_t n_out = mesh.outer_nodes.size();
    LoadField lf;
    lf.time = time;
    lf.node_ids.assign(mesh.outer_nodes.begin(), mesh.outer_nodes.end());
    lf.normals.assign(n_out, Vec3{0, 0, 0});
    lf.pressures.assign(n_out, 0.0);
    lf.forces.assign(n_out, Vec3{0, 0, 0});
    lf.nodal_force.assign(coords.size(), Vec3{0, 0, 0});

    // node -> adjacent outer facets
    std::vector<int> facet_count(coords.size(), 0);
    for (const auto& f : mesh.outer_facets)
        for (int nid : f.nodes)
            ++facet_count[static_cast<std::size_t>(nid)];
    std::vector<int> facet_start(coords.size() + 1, 0);
    for (std::size_t i = 0; i < coords.size(); ++i)
        facet_start[i + 1] = facet_start[i] + facet_count[i];
    std::vector<int> facet_adj(static_cast<std::size_t>(facet_start.back()));
    std::vector<int> cursor(facet_start.begin(), facet_start.end() - 1);
    for (std::size_t fi = 0; fi < mesh.outer_facets.size(); ++fi)
        for (int nid : mesh.outer_facets[fi].nodes)
            facet_adj[static_cast<std::size_t>(cursor[static_cast<std::size_t>(nid)]++)] =
                static_cast<int>(fi);

    parallel_for(n_out, opt.n_threads, [&](std::size_t i) {
        const int nid = lf.node_ids[i];
        Vec3 normal{0, 0, 0};
        double area = 0;
        for (int k = facet_start[static_cast<std::size_t>(nid)];
             k < facet_start[static_cast<std::size_t>(nid) + 1]; ++k) {
            const int fi = facet_adj[static_cast<std::size_t>(k)];
            if (!facet_alive[static_cast<std::size_t>(fi)])
                continue;
            const auto& f = mesh.outer_facets[static_cast<std::size_t>(fi)];
            Vec3 fn;
            double fa;
            facet_normal_area(f, coords, fn, fa);
            normal += fa * fn;
            area += 0.25 * fa;
        }
        const double nn = norm(normal);
        if (nn < 1e-20 || area <= 0)
            return; // bare node: all adjacent facets deleted
        normal = (1.0 / nn) * normal;
        const FieldSample fs = coil_field(coil, current, coords[static_cast<std::size_t>(nid)]);
        const Vec3 h_tan = fs.h - dot(fs.h, normal) * normal;
        const double p = opt.eta * 0.5 * opt.mu * dot(h_tan, h_tan);
        lf.normals[i] = normal;
        lf.pressures[i] = p;
        lf.forces[i] = (p * area) * normal;
    });

    double total = 0;
    for (std::size_t i = 0; i < n_out; ++i) {
        lf.nodal_force[static_cast<std::size_t>(lf.node_ids[i])] = lf.forces[i];
        total += norm(lf.forces[i]);
    }
    lf.total_force_magnitude = total;
    return lf;
}

void write_load_csv(const LoadField& loads, const std::vector<Vec3>& coords,
                    const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f)
        throw IoError("cannot open load CSV for writing: " + path);
    std::fprintf(f, "node_id,x,y,z,pressure_Pa,fx,fy,fz\n");
    for (std::size_t i = 0; i < loads.node_ids.size(); ++i) {
        const auto& p = coords[static_cast<std::size_t>(loads.node_ids[i])];
        const auto& fv = loads.forces[i];
        std::fprintf(f, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", loads.node_ids[i], p.x,
                     p.y, p.z, loads.pressures[i], fv.x, fv.y, fv.z);
    }
    std::fclose(f);
}

} // namespace emfp
