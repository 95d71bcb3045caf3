#pragma once

#include <string>
#include <vector>

#include "emfp/errors.hpp"
#include "emfp/mesh.hpp"
#include "emfp/vec.hpp"

namespace emfp {

enum class ToolKind { Pointed, Concave, Die };

/// Sphere-capped cone blending into a cylindrical shank.
struct PointedProfile {
    double half_angle = 0.5235987755982988; // rad, 30 deg
    double tip_radius = 0.5e-3;             // m
    double shank_radius = 3.0e-3;           // m
    double length = 12.0e-3;                // m, front point to back face
};

/// Cylindrical cutter with a spherically concave end face; the rim carries a
/// small fillet and does the shearing.
struct ConcaveProfile {
    double cutter_radius = 3.0e-3;    // m
    double edge_fillet = 0.1e-3;      // m
    double concavity_depth = 1.0e-3;  // m, recess of the face at the axis
    double length = 12.0e-3;          // m
};

/// Piece of a 2D meridian profile: segment or circular arc in the
/// (axial s, radial rho) half-plane of the tool.
struct ProfilePiece {
    bool is_arc = false;
    // segment endpoints
    double ax = 0, ar = 0, bx = 0, br = 0;
    // arc: center, radius, start angle, CCW sweep
    double cx = 0, cr = 0, radius = 0, a0 = 0, sweep = 0;
    std::string patch; // contact-patch tag
};

/// Analytic rigid tool surface. Punches are surfaces of revolution about
/// their own (radial) axis; the die is a cylindrical bore about the tube
/// axis. Tools never move.
struct RigidTool {
    ToolKind kind = ToolKind::Pointed;
    Vec3 front{0, 0, 0}; // frontmost point (punches); any axis point (die)
    Vec3 axis{1, 0, 0};  // unit; outward radial for punches, tube axis for die
    PointedProfile pointed;
    ConcaveProfile concave;
    double bore_radius = 0.0; // m, die only

    // derived, built by finalize()
    std::vector<ProfilePiece> pieces;
    double back = 0;       // s of the back face
    double max_radius = 0; // bounding profile radius
    // concave inside-test data
    double sph_cs = 0, sph_r = 0;               // face sphere center s, radius
    double fil_cs = 0, fil_cr = 0, fil_r = 0;   // fillet center, radius
    double wedge_u1s = 0, wedge_u1r = 0;        // fillet wedge edge direction
    // pointed inside-test data
    double tip_tan_s = 0, cone_end_s = 0;

    void finalize();
};

struct SdfResult {
    double distance = 0.0; // negative inside the tool
    Vec3 normal{0, 0, 0};  // unit, points from the surface away from the tool
    std::string_view patch;
};

/// Exact signed Euclidean distance to the tool surface. C0 across patches,
/// 1-Lipschitz.
SdfResult tool_signed_distance(const RigidTool& tool, const Vec3& p);

struct PunchLayout {
    int total = 12;              // 12 or 36
    double set_spacing = 20e-3;  // m between axial sets
    double standoff = 1e-3;      // m tip clearance from the outer surface
    int sets = 3;

    int punches_per_set() const { return total / sets; }
    void validate() const;
};

struct PlacedPunch {
    RigidTool tool;
    int set = 0;        // axial set index, 0 = lowest z
    int slot = 0;       // angular slot within the set
    double angle = 0;   // rad
    double axial = 0;   // m, z of the punch axis
};

/// Poses punches radially on the (angle x axial-set) grid centered on the
/// tube mid-length. Throws LayoutOverlap when two punch bounding volumes
/// intersect.
std::vector<PlacedPunch> place_punches(const PunchLayout& layout, const RigidTool& tool_template,
                                       const TubeMesh& tube);

RigidTool make_die(double bore_radius);

} // namespace emfp
