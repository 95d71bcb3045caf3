#include "emfp/tools.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace emfp {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct P2 {
    double s, r;
};

double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    return a < 0 ? a + kTwoPi : a;
}

ProfilePiece make_segment(P2 a, P2 b, std::string patch) {
    ProfilePiece p;
    p.is_arc = false;
    p.ax = a.s;
    p.ar = a.r;
    p.bx = b.s;
    p.br = b.r;
    p.patch = std::move(patch);
    return p;
}

ProfilePiece make_arc(P2 c, double radius, double a0, double sweep, std::string patch) {
    ProfilePiece p;
    p.is_arc = true;
    p.cx = c.s;
    p.cr = c.r;
    p.radius = radius;
    p.a0 = a0;
    p.sweep = sweep;
    p.patch = std::move(patch);
    return p;
}

// Distance from q to one piece; fills the closest boundary point.
double piece_distance(const ProfilePiece& pc, P2 q, P2& nearest) {
    if (!pc.is_arc) {
        const double ds = pc.bx - pc.ax, dr = pc.br - pc.ar;
        const double len2 = ds * ds + dr * dr;
        double t = len2 > 0 ? ((q.s - pc.ax) * ds + (q.r - pc.ar) * dr) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        nearest = {pc.ax + t * ds, pc.ar + t * dr};
    } else {
        const double vs = q.s - pc.cx, vr = q.r - pc.cr;
        const double vn = std::hypot(vs, vr);
        const double phi = wrap_angle(std::atan2(vr, vs) - pc.a0);
        if (vn > 0 && phi <= pc.sweep) {
            nearest = {pc.cx + pc.radius * vs / vn, pc.cr + pc.radius * vr / vn};
        } else {
            const P2 e0{pc.cx + pc.radius * std::cos(pc.a0), pc.cr + pc.radius * std::sin(pc.a0)};
            const double a1 = pc.a0 + pc.sweep;
            const P2 e1{pc.cx + pc.radius * std::cos(a1), pc.cr + pc.radius * std::sin(a1)};
            const double d0 = std::hypot(q.s - e0.s, q.r - e0.r);
            const double d1 = std::hypot(q.s - e1.s, q.r - e1.r);
            nearest = d0 <= d1 ? e0 : e1;
        }
    }
    return std::hypot(q.s - nearest.s, q.r - nearest.r);
}

bool inside_pointed(const RigidTool& t, P2 q) {
    const auto& pr = t.pointed;
    if (q.s < 0 || q.s > t.back)
        return false;
    double profile;
    if (q.s <= t.tip_tan_s) {
        const double d = q.s - pr.tip_radius;
        profile = std::sqrt(std::max(0.0, pr.tip_radius * pr.tip_radius - d * d));
    } else if (q.s <= t.cone_end_s) {
        profile = pr.tip_radius * std::cos(pr.half_angle) +
                  (q.s - t.tip_tan_s) * std::tan(pr.half_angle);
    } else {
        profile = pr.shank_radius;
    }
    return q.r <= profile;
}

bool inside_concave(const RigidTool& t, P2 q) {
    const auto& pr = t.concave;
    if (q.s < 0 || q.s > t.back || q.r > pr.cutter_radius)
        return false;
    // outside the face sphere
    const double ds = q.s - t.sph_cs;
    if (ds * ds + q.r * q.r < t.sph_r * t.sph_r)
        return false;
    // rim fillet: inside the tangency wedge the material boundary is the
    // fillet circle, not the sharp rim corner
    const double ws = q.s - t.fil_cs, wr = q.r - t.fil_cr;
    const bool in_wedge = (/* CCW of straight-up */ -ws >= 0.0) &&
                          (/* CW of sphere tangency dir */ t.wedge_u1s * wr - t.wedge_u1r * ws <= 0.0);
    if (in_wedge && ws * ws + wr * wr > t.fil_r * t.fil_r)
        return false;
    return true;
}

} // namespace

void RigidTool::finalize() {
    pieces.clear();
    if (kind == ToolKind::Die) {
        if (bore_radius <= 0)
            throw InvalidGeometry("die bore radius must be positive");
        max_radius = bore_radius;
        back = 0;
        return;
    }
    if (kind == ToolKind::Pointed) {
        const auto& p = pointed;
        if (p.tip_radius <= 0 || p.shank_radius <= 0 || p.length <= 0)
            throw InvalidGeometry("pointed punch dimensions must be positive");
        if (p.half_angle <= 0 || p.half_angle >= 1.5607961601207294) // < 89.4 deg
            throw InvalidGeometry("pointed punch half angle out of range");
        const double sg = std::sin(p.half_angle), cg = std::cos(p.half_angle);
        if (p.shank_radius <= p.tip_radius * cg)
            throw InvalidGeometry("shank radius must exceed the tip cap radius");
        // tip sphere center sits at s = tip_radius so the apex is s = 0;
        // the cone flank is tangent to the sphere at angle (pi/2 + half_angle)
        const P2 center{p.tip_radius, 0};
        const P2 tan_pt{p.tip_radius * (1 - sg), p.tip_radius * cg};
        const double cone_end = tan_pt.s + (p.shank_radius - tan_pt.r) / std::tan(p.half_angle);
        if (cone_end >= p.length)
            throw InvalidGeometry("pointed punch too short for its cone");
        tip_tan_s = tan_pt.s;
        cone_end_s = cone_end;
        back = p.length;
        max_radius = p.shank_radius;
        pieces.push_back(make_arc(center, p.tip_radius, 1.5707963267948966 + p.half_angle,
                                  1.5707963267948966 - p.half_angle, "tip"));
        pieces.push_back(make_segment(tan_pt, {cone_end, p.shank_radius}, "cone"));
        pieces.push_back(make_segment({cone_end, p.shank_radius}, {p.length, p.shank_radius}, "shank"));
        pieces.push_back(make_segment({p.length, p.shank_radius}, {p.length, 0}, "back"));
        return;
    }
    // concave cutter
    const auto& c = concave;
    if (c.cutter_radius <= 0 || c.edge_fillet <= 0 || c.concavity_depth <= 0 || c.length <= 0)
        throw InvalidGeometry("concave punch dimensions must be positive");
    if (c.edge_fillet >= c.cutter_radius || c.concavity_depth >= c.length)
        throw InvalidGeometry("concave punch fillet/depth out of range");
    // face sphere through the sharp rim (0, r_cut) and the axis point (h, 0)
    const double R = (c.cutter_radius * c.cutter_radius + c.concavity_depth * c.concavity_depth) /
                     (2 * c.concavity_depth);
    const double os = c.concavity_depth - R; // sphere center, on the axis
    // fillet circle of radius r_f tangent to the face sphere (externally)
    // and to the cylinder side rho = r_cut:  |F - O| = R + r_f
    const double fr = c.cutter_radius - c.edge_fillet;
    const double under = (R + c.edge_fillet) * (R + c.edge_fillet) - fr * fr;
    if (under <= 0)
        throw InvalidGeometry("concave punch fillet incompatible with face sphere");
    const double fs = os + std::sqrt(under);
    const double alpha = std::atan2(fr, fs - os); // angle of F as seen from O
    const double front = fs - c.edge_fillet;      // frontmost material point (on the fillet)
    if (front <= 0)
        throw InvalidGeometry("concave punch fillet protrudes past the rim plane");

    sph_cs = os;
    sph_r = R;
    fil_cs = fs;
    fil_cr = fr;
    fil_r = c.edge_fillet;
    // unit direction from the fillet center to the sphere tangency point
    wedge_u1s = -(fs - os) / (R + c.edge_fillet);
    wedge_u1r = -fr / (R + c.edge_fillet);
    back = c.length;
    max_radius = c.cutter_radius;
    pieces.push_back(make_arc({os, 0}, R, 0, alpha, "face"));
    pieces.push_back(make_arc({fs, fr}, c.edge_fillet, 1.5707963267948966,
                              alpha + 1.5707963267948966, "fillet"));
    pieces.push_back(make_segment({fs, c.cutter_radius}, {c.length, c.cutter_radius}, "side"));
    pieces.push_back(make_segment({c.length, c.cutter_radius}, {c.length, 0}, "back"));
}

SdfResult tool_signed_distance(const RigidTool& tool, const Vec3& p) {
    SdfResult out;
    if (tool.kind == ToolKind::Die) {
        // material is the region rho >= bore_radius about the tube axis
        const Vec3 w = p - tool.front;
        const double s = dot(w, tool.axis);
        Vec3 rad = w - s * tool.axis;
        const double rho = norm(rad);
        out.distance = tool.bore_radius - rho;
        out.normal = rho > 1e-12 ? (-1.0 / rho) * rad : Vec3{0, 0, 0};
        out.patch = "bore";
        return out;
    }
    const Vec3 w = p - tool.front;
    const double s = dot(w, tool.axis);
    Vec3 rad = w - s * tool.axis;
    const double rho = norm(rad);
    Vec3 rhat;
    if (rho > 1e-12 * std::max(1.0, tool.back)) {
        rhat = (1.0 / rho) * rad;
    } else {
        // on-axis query: any meridian is valid
        const Vec3 seed = std::abs(tool.axis.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
        rhat = normalized(cross(tool.axis, seed));
    }
    const P2 q{s, rho};
    double best = std::numeric_limits<double>::infinity();
    P2 best_pt{0, 0};
    const ProfilePiece* best_piece = nullptr;
    for (const auto& pc : tool.pieces) {
        P2 np;
        const double d = piece_distance(pc, q, np);
        if (d < best) {
            best = d;
            best_pt = np;
            best_piece = &pc;
        }
    }
    const bool inside = tool.kind == ToolKind::Pointed ? inside_pointed(tool, q)
                                                       : inside_concave(tool, q);
    out.distance = inside ? -best : best;
    out.patch = best_piece->patch;
    const double ns = q.s - best_pt.s, nr = q.r - best_pt.r;
    const double nn = std::hypot(ns, nr);
    if (nn > 1e-14 * std::max(1.0, tool.back)) {
        const double sgn = inside ? -1.0 : 1.0;
        out.normal = (sgn / nn) * (ns * tool.axis + nr * rhat);
    } else {
        // exactly on the surface: use the piece's outward normal
        Vec3 n2;
        if (best_piece->is_arc) {
            const double vs = best_pt.s - best_piece->cx, vr = best_pt.r - best_piece->cr;
            const double vn = std::hypot(vs, vr);
            // face arc of the concave cutter bounds a cavity: outward from the
            // material points toward the arc center
            const double sgn = best_piece->patch == "face" ? -1.0 : 1.0;
            n2 = (sgn / vn) * (vs * tool.axis + vr * rhat);
        } else {
            const double ds = best_piece->bx - best_piece->ax, dr = best_piece->br - best_piece->ar;
            const double dn = std::hypot(ds, dr);
            // profile runs front-to-back with material below; rotate the
            // tangent by -90 deg in the (s, rho) plane
            n2 = (1.0 / dn) * (dr * tool.axis - ds * rhat);
        }
        out.normal = n2;
    }
    return out;
}

void PunchLayout::validate() const {
    if (total != 12 && total != 36)
        throw ConfigError("punch layout must have 12 or 36 punches");
    if (sets <= 0 || total % sets != 0)
        throw ConfigError("punch count must divide evenly into axial sets");
    if (set_spacing <= 0 || standoff < 0)
        throw ConfigError("punch layout spacing/standoff out of range");
}

std::vector<PlacedPunch> place_punches(const PunchLayout& layout, const RigidTool& tool_template,
                                       const TubeMesh& tube) {
    layout.validate();
    if (tool_template.kind == ToolKind::Die)
        throw ConfigError("die cannot be used as a punch");
    const int per_set = layout.punches_per_set();
    const double dphi = kTwoPi / per_set;
    const double z0 = -0.5 * (layout.sets - 1) * layout.set_spacing;
    std::vector<PlacedPunch> out;
    out.reserve(static_cast<std::size_t>(layout.total));
    for (int set = 0; set < layout.sets; ++set) {
        for (int slot = 0; slot < per_set; ++slot) {
            PlacedPunch p;
            p.set = set;
            p.slot = slot;
            p.angle = slot * dphi;
            p.axial = z0 + set * layout.set_spacing;
            p.tool = tool_template;
            const Vec3 dir{std::cos(p.angle), std::sin(p.angle), 0};
            p.tool.axis = dir;
            p.tool.front = (tube.outer_radius + layout.standoff) * dir + Vec3{0, 0, p.axial};
            p.tool.finalize();
            out.push_back(std::move(p));
        }
    }
    // reject overlapping punches: conservative capsule-capsule test on the
    // tool axes
    auto axis_distance = [](const PlacedPunch& a, const PlacedPunch& b) {
        // both axes are radial segments front -> front + back*axis
        const Vec3 p1 = a.tool.front, d1 = a.tool.axis;
        const Vec3 p2 = b.tool.front, d2 = b.tool.axis;
        const double L1 = a.tool.back, L2 = b.tool.back;
        double best = std::numeric_limits<double>::infinity();
        const int n = 32;
        for (int i = 0; i <= n; ++i) {
            const Vec3 q1 = p1 + (L1 * i / n) * d1;
            // closest point on segment 2 to q1
            const Vec3 w = q1 - p2;
            const double t = std::clamp(dot(w, d2), 0.0, L2);
            best = std::min(best, norm(q1 - (p2 + t * d2)));
        }
        return best;
    };
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = i + 1; j < out.size(); ++j) {
            const double clearance =
                axis_distance(out[i], out[j]) -
                (out[i].tool.max_radius + out[j].tool.max_radius);
            if (clearance < 0)
                throw LayoutOverlap("punches " + std::to_string(i) + " and " + std::to_string(j) +
                                    " overlap");
        }
    return out;
}

RigidTool make_die(double bore_radius) {
    RigidTool t;
    t.kind = ToolKind::Die;
    t.bore_radius = bore_radius;
    t.front = {0, 0, 0};
    t.axis = {0, 0, 1};
    t.finalize();
    return t;
}

} // namespace emfp
