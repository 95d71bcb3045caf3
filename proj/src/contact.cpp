#include "emfp/contact.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "emfp/errors.hpp"
#include "emfp/parallel.hpp"

namespace emfp {

void FrictionModel::validate() const {
    if (mu_dynamic < 0 || mu_static < mu_dynamic)
        throw ConfigError("friction: need mu_static >= mu_dynamic >= 0");
    if (v_reg <= 0)
        throw ConfigError("friction: regularization velocity must be positive");
}

namespace {

struct Aabb {
    Vec3 lo{0, 0, 0}, hi{0, 0, 0};
    bool unbounded = false;

    bool contains(const Vec3& p) const {
        if (unbounded)
            return true;
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z &&
               p.z <= hi.z;
    }
};

Aabb tool_bounds(const RigidTool& t) {
    Aabb b;
    if (t.kind == ToolKind::Die) {
        b.unbounded = true; // the bore surrounds the whole tube
        return b;
    }
    const Vec3 a = t.front;
    const Vec3 c = t.front + t.back * t.axis;
    const double r = t.max_radius;
    b.lo = {std::min(a.x, c.x) - r, std::min(a.y, c.y) - r, std::min(a.z, c.z) - r};
    b.hi = {std::max(a.x, c.x) + r, std::max(a.y, c.y) + r, std::max(a.z, c.z) + r};
    return b;
}

} // namespace

ContactSet detect_penetrations(const std::vector<Vec3>& positions,
                               const std::vector<Vec3>& velocities,
                               const std::vector<RigidTool>& tools, int n_threads) {
    const std::size_t nn = positions.size();
    std::vector<Aabb> bounds(tools.size());
    for (std::size_t t = 0; t < tools.size(); ++t)
        bounds[t] = tool_bounds(tools[t]);

    // fixed-capacity per-node slots keep the parallel write pattern race-free
    constexpr int kMaxPerNode = 4;
    std::vector<ContactEntry> slots(nn * kMaxPerNode);
    std::vector<int> counts(nn, 0);
    parallel_for(nn, n_threads, [&](std::size_t i) {
        const Vec3& p = positions[i];
        int c = 0;
        for (std::size_t t = 0; t < tools.size() && c < kMaxPerNode; ++t) {
            if (!bounds[t].contains(p))
                continue;
            const SdfResult sd = tool_signed_distance(tools[t], p);
            if (sd.distance >= 0)
                continue;
            ContactEntry e;
            e.node = static_cast<int>(i);
            e.tool = static_cast<int>(t);
            e.depth = -sd.distance;
            e.normal = sd.normal;
            const Vec3& v = velocities[i];
            e.slip_vel = v - dot(v, sd.normal) * sd.normal;
            slots[i * kMaxPerNode + static_cast<std::size_t>(c)] = e;
            ++c;
        }
        counts[i] = c;
    });

    ContactSet out;
    for (std::size_t i = 0; i < nn; ++i)
        for (int c = 0; c < counts[i]; ++c)
            out.entries.push_back(slots[i * kMaxPerNode + static_cast<std::size_t>(c)]);
    return out;
}

ContactForces penalty_forces(const ContactSet& contacts, std::size_t n_nodes, double stiffness,
                             const FrictionModel& fm) {
    if (stiffness <= 0)
        throw ConfigError("contact stiffness must be positive");
    fm.validate();
    ContactForces f;
    f.normal.assign(n_nodes, Vec3{0, 0, 0});
    f.tangential.assign(n_nodes, Vec3{0, 0, 0});
    for (const auto& e : contacts.entries) {
        const double fn = stiffness * e.depth;
        f.normal[static_cast<std::size_t>(e.node)] += fn * e.normal;
        const double vt = norm(e.slip_vel);
        if (vt > 0) {
            const double ft = fm.mu_dynamic * fn * std::min(1.0, vt / fm.v_reg);
            f.tangential[static_cast<std::size_t>(e.node)] -= (ft / vt) * e.slip_vel;
        }
        f.max_penetration = std::max(f.max_penetration, e.depth);
    }
    return f;
}

double contact_timestep_limit(double stiffness, const std::vector<double>& masses,
                              double safety) {
    double m_min = std::numeric_limits<double>::max();
    for (double m : masses)
        if (m > 0)
            m_min = std::min(m_min, m);
    if (m_min == std::numeric_limits<double>::max() || stiffness <= 0)
        return std::numeric_limits<double>::max();
    return safety * 2.0 * std::sqrt(m_min / stiffness);
}

void write_contact_csv(const ContactSet& contacts, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f)
        throw IoError("cannot open contact CSV for writing: " + path);
    std::fprintf(f, "node_id,tool_id,depth_m,nx,ny,nz,slip_x,slip_y,slip_z\n");
    for (const auto& e : contacts.entries)
        std::fprintf(f, "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.node, e.tool,
                     e.depth, e.normal.x, e.normal.y, e.normal.z, e.slip_vel.x, e.slip_vel.y,
                     e.slip_vel.z);
    std::fclose(f);
}

} // namespace emfp
