#include "emfp/postprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <queue>
#include <set>

#include "emfp/errors.hpp"

namespace emfp {

namespace {

// shortest decimal form that round-trips the double: exact and byte-stable
std::string fmt(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double wrap_angle(double a) {
    const double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a < -std::numbers::pi)
        a += two_pi;
    if (a >= std::numbers::pi)
        a -= two_pi;
    return a;
}

// punch radius that defines the site window
double punch_radius(const RigidTool& tool) {
    return tool.kind == ToolKind::Pointed ? tool.pointed.shank_radius
                                          : tool.concave.cutter_radius;
}

// cross-section a complete hole must clear. The concave cutter shears its
// full face; the pointed cone only needs to pass the section it presents one
// wall thickness past the tip, so a cone-width opening already counts.
double completion_radius(const RigidTool& tool, double wall) {
    if (tool.kind == ToolKind::Concave)
        return tool.concave.cutter_radius;
    const double r =
        tool.pointed.tip_radius + std::tan(tool.pointed.half_angle) * wall;
    return std::min(r, tool.pointed.shank_radius);
}

struct Grid {
    int nz, nc, nt;
    const TubeMesh* mesh;
    int id(int iz, int ic, int ir) const { return mesh->element_id(iz, ic, ir); }
};

} // namespace

std::string to_string(HoleStatus s) {
    switch (s) {
    case HoleStatus::Intact: return "intact";
    case HoleStatus::Indented: return "indented";
    case HoleStatus::PetaledPartial: return "petaled_partial";
    case HoleStatus::Perforated: return "perforated";
    }
    return "unknown";
}

double equivalent_diameter(const std::vector<Vec3>& rim, const Vec3& origin, const Vec3& axis) {
    if (rim.size() < 3)
        return 0.0;
    const Vec3 n = normalized(axis);
    Vec3 seed = std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    const Vec3 e1 = normalized(seed - dot(seed, n) * n);
    const Vec3 e2 = cross(n, e1);

    std::vector<std::array<double, 2>> pts;
    pts.reserve(rim.size());
    double cx = 0, cy = 0;
    for (const Vec3& p : rim) {
        const Vec3 u = p - origin;
        pts.push_back({dot(u, e1), dot(u, e2)});
        cx += pts.back()[0];
        cy += pts.back()[1];
    }
    cx /= static_cast<double>(pts.size());
    cy /= static_cast<double>(pts.size());
    std::sort(pts.begin(), pts.end(), [&](const auto& a, const auto& b) {
        return std::atan2(a[1] - cy, a[0] - cx) < std::atan2(b[1] - cy, b[0] - cx);
    });
    double twice_area = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& a = pts[i];
        const auto& b = pts[(i + 1) % pts.size()];
        twice_area += a[0] * b[1] - b[0] * a[1];
    }
    const double area = 0.5 * std::abs(twice_area);
    return 2.0 * std::sqrt(area / std::numbers::pi);
}

std::vector<HoleRecord> detect_holes(const TubeMesh& mesh, const std::vector<Vec3>& coords,
                                     const std::vector<std::uint8_t>& elem_alive,
                                     const std::vector<double>& elem_eps,
                                     const std::vector<PlacedPunch>& punches,
                                     const HoleOptions& opt) {
    const std::size_t ne = mesh.elements.size();
    if (elem_alive.size() != ne)
        throw ConfigError("detect_holes: alive mask size does not match the mesh");
    if (!elem_eps.empty() && elem_eps.size() != ne)
        throw ConfigError("detect_holes: strain array size does not match the mesh");
    if (coords.size() != mesh.nodes.size())
        throw ConfigError("detect_holes: coordinate array size does not match the mesh");

    const Grid g{mesh.n_axial, mesh.n_circ, mesh.n_thickness, &mesh};
    const double dz = mesh.length / g.nz;
    const double dth = 2.0 * std::numbers::pi / g.nc;
    const double rm = 0.5 * (mesh.inner_radius + mesh.outer_radius);
    const double wall = mesh.wall_thickness();

    std::vector<HoleRecord> records;
    records.reserve(punches.size());

    // scratch masks, cleared per punch over the touched cells only
    std::vector<std::uint8_t> in_window(ne, 0), eff_deleted(ne, 0), visited(ne, 0);

    for (std::size_t ip = 0; ip < punches.size(); ++ip) {
        const PlacedPunch& punch = punches[ip];
        HoleRecord rec;
        rec.punch = static_cast<int>(ip);

        const double r_p = punch_radius(punch.tool);
        const double win = opt.window_scale * r_p;
        const int nz_half = static_cast<int>(std::ceil(win / dz));
        // a window never wraps onto itself, whatever the punch/tube ratio
        const int nc_half =
            std::min(static_cast<int>(std::ceil(win / (rm * dth))), (g.nc - 1) / 2);

        // element index of the site center on the undeformed grid
        const int iz_c = std::clamp(
            static_cast<int>(std::lround((punch.axial + 0.5 * mesh.length) / dz - 0.5)), 0,
            g.nz - 1);
        const int ic_c = static_cast<int>(std::lround(punch.angle / dth - 0.5));

        std::vector<int> window, touched;
        for (int iz = iz_c - nz_half; iz <= iz_c + nz_half; ++iz) {
            if (iz < 0 || iz >= g.nz)
                continue;
            const double z_e = -0.5 * mesh.length + (iz + 0.5) * dz;
            if (std::abs(z_e - punch.axial) > win)
                continue;
            for (int ic = ic_c - nc_half; ic <= ic_c + nc_half; ++ic) {
                const double th_e = (ic + 0.5) * dth;
                if (rm * std::abs(wrap_angle(th_e - punch.angle)) > win)
                    continue;
                for (int ir = 0; ir < g.nt; ++ir) {
                    const int e = g.id(iz, ic, ir);
                    window.push_back(e);
                    in_window[static_cast<std::size_t>(e)] = 1;
                }
            }
        }
        touched = window;

        for (int e : window) {
            const auto ue = static_cast<std::size_t>(e);
            if (!elem_alive[ue])
                ++rec.deleted_elements;
            else if (!elem_eps.empty())
                rec.max_eps_p = std::max(rec.max_eps_p, elem_eps[ue]);
        }

        auto for_neighbors = [&](int e, auto&& fn) {
            const auto [iz, ic, ir] = mesh.element_grid(e);
            if (iz > 0) fn(g.id(iz - 1, ic, ir));
            if (iz + 1 < g.nz) fn(g.id(iz + 1, ic, ir));
            fn(g.id(iz, ic - 1, ir));
            fn(g.id(iz, ic + 1, ir));
            if (ir > 0) fn(g.id(iz, ic, ir - 1));
            if (ir + 1 < g.nt) fn(g.id(iz, ic, ir + 1));
        };

        // alive cells in the window unreachable from the surrounding alive
        // bulk are a separated slug; they count as removed material below
        std::vector<int> island;
        {
            std::queue<int> q;
            for (int e : window) {
                if (!elem_alive[static_cast<std::size_t>(e)])
                    continue;
                bool border = false;
                for_neighbors(e, [&](int nb) {
                    if (!in_window[static_cast<std::size_t>(nb)] &&
                        elem_alive[static_cast<std::size_t>(nb)])
                        border = true;
                });
                if (border) {
                    visited[static_cast<std::size_t>(e)] = 1;
                    q.push(e);
                }
            }
            while (!q.empty()) {
                const int e = q.front();
                q.pop();
                for_neighbors(e, [&](int nb) {
                    const auto unb = static_cast<std::size_t>(nb);
                    if (in_window[unb] && elem_alive[unb] && !visited[unb]) {
                        visited[unb] = 1;
                        q.push(nb);
                    }
                });
            }
            for (int e : window)
                if (elem_alive[static_cast<std::size_t>(e)] && !visited[static_cast<std::size_t>(e)])
                    island.push_back(e);
        }
        rec.slug_separated = !island.empty();

        for (int e : window)
            if (!elem_alive[static_cast<std::size_t>(e)])
                eff_deleted[static_cast<std::size_t>(e)] = 1;
        for (int e : island)
            eff_deleted[static_cast<std::size_t>(e)] = 1;

        // face-connected removed-material components; a hole needs one that
        // spans every radial layer
        for (int e : window)
            visited[static_cast<std::size_t>(e)] = 0;
        std::vector<int> hole_elems;
        {
            for (int e0 : window) {
                const auto u0 = static_cast<std::size_t>(e0);
                if (!eff_deleted[u0] || visited[u0])
                    continue;
                std::vector<int> comp;
                std::uint64_t layers = 0;
                std::queue<int> q;
                visited[u0] = 1;
                q.push(e0);
                while (!q.empty()) {
                    const int e = q.front();
                    q.pop();
                    comp.push_back(e);
                    layers |= std::uint64_t{1} << mesh.element_grid(e)[2];
                    for_neighbors(e, [&](int nb) {
                        const auto unb = static_cast<std::size_t>(nb);
                        if (in_window[unb] && eff_deleted[unb] && !visited[unb]) {
                            visited[unb] = 1;
                            q.push(nb);
                        }
                    });
                }
                const std::uint64_t all = (std::uint64_t{1} << g.nt) - 1;
                if ((layers & all) == all)
                    hole_elems.insert(hole_elems.end(), comp.begin(), comp.end());
            }
        }

        if (hole_elems.empty()) {
            rec.status = (rec.deleted_elements > 0 || rec.max_eps_p >= opt.indent_eps)
                             ? HoleStatus::Indented
                             : HoleStatus::Intact;
        } else {
            // rim: outer-surface nodes between the hole and the surviving bulk
            std::set<int> rim;
            for (int e : hole_elems) {
                const auto [iz, ic, ir] = mesh.element_grid(e);
                if (ir != g.nt - 1)
                    continue;
                for (int a : mesh.elements[static_cast<std::size_t>(e)]) {
                    if (a % (g.nt + 1) != g.nt)
                        continue; // not on the outer surface
                    const int rest = a / (g.nt + 1);
                    const int icn = rest % g.nc;
                    const int izn = rest / g.nc;
                    bool survivor = false;
                    for (int jz = izn - 1; jz <= izn && !survivor; ++jz) {
                        if (jz < 0 || jz >= g.nz)
                            continue;
                        for (int jc = icn - 1; jc <= icn && !survivor; ++jc) {
                            const int nb = g.id(jz, jc, g.nt - 1);
                            const auto unb = static_cast<std::size_t>(nb);
                            if (elem_alive[unb] && !eff_deleted[unb])
                                survivor = true;
                        }
                    }
                    if (survivor)
                        rim.insert(a);
                }
            }
            rec.rim_nodes.assign(rim.begin(), rim.end());

            std::vector<Vec3> rim_pts;
            rim_pts.reserve(rec.rim_nodes.size());
            for (int a : rec.rim_nodes)
                rim_pts.push_back(coords[static_cast<std::size_t>(a)]);
            const double d =
                equivalent_diameter(rim_pts, punch.tool.front, punch.tool.axis);
            rec.opening_area = 0.25 * std::numbers::pi * d * d;

            const double r_need = completion_radius(punch.tool, wall);
            bool flaps = false;
            for (const Vec3& p : rim_pts)
                if (std::hypot(p.x, p.y) > mesh.outer_radius + opt.flap_margin * wall)
                    flaps = true;
            if (rec.opening_area < std::numbers::pi * r_need * r_need && flaps) {
                rec.status = HoleStatus::PetaledPartial;
            } else {
                rec.status = HoleStatus::Perforated;
                rec.diameter = d;
            }
        }

        for (int e : touched) {
            in_window[static_cast<std::size_t>(e)] = 0;
            eff_deleted[static_cast<std::size_t>(e)] = 0;
            visited[static_cast<std::size_t>(e)] = 0;
        }
        records.push_back(std::move(rec));
    }
    return records;
}

TrendReport build_trend_report(const std::vector<RunSummary>& runs) {
    TrendReport report;
    for (const RunSummary& run : runs) {
        TrendRow row;
        row.energy_kj = run.energy_kj;
        row.punch_type = run.punch_type;
        row.layout = run.layout;
        row.eta = run.eta;
        double sum_d = 0;
        for (const HoleRecord& h : run.holes)
            if (h.status == HoleStatus::Perforated) {
                ++row.holes;
                sum_d += h.diameter;
            }
        row.mean_diameter_mm = row.holes > 0 ? 1e3 * sum_d / row.holes : 0.0;
        report.rows.push_back(std::move(row));
    }
    std::sort(report.rows.begin(), report.rows.end(), [](const TrendRow& a, const TrendRow& b) {
        if (a.energy_kj != b.energy_kj)
            return a.energy_kj < b.energy_kj;
        if (a.punch_type != b.punch_type)
            return a.punch_type < b.punch_type;
        return a.layout < b.layout;
    });

    auto flag = [&](const std::string& name, bool pass) {
        report.flags.push_back(name + ": " + (pass ? "PASS" : "FAIL"));
    };

    // hole count vs energy within one (type, layout) family
    std::map<std::pair<std::string, int>, std::vector<const TrendRow*>> families;
    for (const TrendRow& r : report.rows)
        families[{r.punch_type, r.layout}].push_back(&r);
    for (const auto& [key, rows] : families) {
        if (rows.size() < 2)
            continue;
        bool monotone = true;
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i]->holes < rows[i - 1]->holes)
                monotone = false;
        flag("holes non-decreasing with energy (" + key.first + ", " +
                 std::to_string(key.second) + " punches)",
             monotone);
    }

    // concave vs pointed diameter at matched (energy, layout)
    for (const TrendRow& a : report.rows) {
        if (a.punch_type != "concave")
            continue;
        for (const TrendRow& b : report.rows) {
            if (b.punch_type != "pointed" || b.energy_kj != a.energy_kj || b.layout != a.layout)
                continue;
            if (a.holes > 0 && b.holes > 0)
                flag("concave opens wider than pointed (" + fmt(a.energy_kj) + " kJ, " +
                         std::to_string(a.layout) + " punches)",
                     a.mean_diameter_mm > b.mean_diameter_mm);
        }
    }

    // dense layout completes fewer holes at matched (energy, type)
    for (const TrendRow& a : report.rows) {
        for (const TrendRow& b : report.rows) {
            if (a.punch_type == b.punch_type && a.energy_kj == b.energy_kj && a.layout < b.layout)
                flag("denser layout completes fewer holes (" + a.punch_type + ", " +
                         fmt(a.energy_kj) + " kJ)",
                     b.holes < a.holes);
        }
    }
    return report;
}

void write_metrics_csv(const TrendReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open " + path + " for writing");
    out << "energy_kJ,punch_type,layout,holes,mean_diameter_mm,eta\n";
    for (const TrendRow& r : report.rows)
        out << fmt(r.energy_kj) << ',' << r.punch_type << ',' << r.layout << ',' << r.holes << ','
            << fmt(r.mean_diameter_mm) << ',' << fmt(r.eta) << '\n';
    if (!out)
        throw IoError("short write to " + path);
}

} // namespace emfp
