#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emfp/mesh.hpp"
#include "emfp/tools.hpp"
#include "emfp/vec.hpp"

namespace emfp {

enum class HoleStatus { Intact, Indented, PetaledPartial, Perforated };

std::string to_string(HoleStatus s);

/// Outcome at one punch site. A diameter is reported only for complete
/// (Perforated) holes; petaled-partial openings are incomplete by definition.
struct HoleRecord {
    int punch = 0;
    HoleStatus status = HoleStatus::Intact;
    double diameter = 0;       // m, equivalent circle of the rim polygon
    double opening_area = 0;   // m^2, rim polygon projected onto the punch plane
    int deleted_elements = 0;  // inside the site window
    bool slug_separated = false;
    double max_eps_p = 0;      // over elements inside the site window
    std::vector<int> rim_nodes;
};

struct HoleOptions {
    double window_scale = 1.8; // site half-width as a multiple of the punch radius
    double indent_eps = 0.02;  // plastic strain that marks an indentation
    double flap_margin = 0.5;  // petal flag: rim radius beyond r_o + margin * wall
};

/// Classifies every punch site on the final state. A site is perforated when
/// a face-connected component of deleted elements spans every radial layer
/// inside its window; an alive island cut off from the bulk by that component
/// is a separated slug and counts as removed material. `elem_eps` holds one
/// plastic-strain scalar per element (max over its gauss points).
std::vector<HoleRecord> detect_holes(const TubeMesh& mesh, const std::vector<Vec3>& coords,
                                     const std::vector<std::uint8_t>& elem_alive,
                                     const std::vector<double>& elem_eps,
                                     const std::vector<PlacedPunch>& punches,
                                     const HoleOptions& opt = {});

/// Equivalent circle diameter 2*sqrt(A/pi) of the rim points projected onto
/// the plane through `origin` normal to `axis`, sorted by angle about their
/// centroid. Fewer than three points give zero.
double equivalent_diameter(const std::vector<Vec3>& rim, const Vec3& origin, const Vec3& axis);

/// One simulation reduced to the numbers the trend report needs.
struct RunSummary {
    double energy_kj = 0;
    std::string punch_type; // "pointed" or "concave"
    int layout = 0;         // total punch count
    double eta = 0;
    std::vector<HoleRecord> holes;
};

struct TrendRow {
    double energy_kj = 0;
    std::string punch_type;
    int layout = 0;
    int holes = 0;               // complete holes
    double mean_diameter_mm = 0; // over complete holes, 0 when none
    double eta = 0;
};

/// Rows sorted by (energy, type, layout); flags summarize the cross-run
/// comparisons that have enough data to evaluate.
struct TrendReport {
    std::vector<TrendRow> rows;
    std::vector<std::string> flags;
};

TrendReport build_trend_report(const std::vector<RunSummary>& runs);

/// CSV with the exact header
/// energy_kJ,punch_type,layout,holes,mean_diameter_mm,eta
void write_metrics_csv(const TrendReport& report, const std::string& path);

} // namespace emfp
