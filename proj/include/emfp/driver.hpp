#pragma once

#include <functional>
#include <string>
#include <vector>

#include "emfp/circuit.hpp"
#include "emfp/contact.hpp"
#include "emfp/dynamics.hpp"
#include "emfp/em_loads.hpp"
#include "emfp/material.hpp"
#include "emfp/mesh.hpp"
#include "emfp/postprocess.hpp"
#include "emfp/tools.hpp"

namespace emfp {

struct TubeConfig {
    double inner_radius = 11.8e-3; // m
    double wall = 1.2e-3;          // m
    double length = 96e-3;         // m
    int n_axial = 96;
    int n_circ = 48;
    int n_thickness = 2;
};

struct PunchConfig {
    int total = 12;
    std::string kind = "pointed"; // "pointed" or "concave"
    double set_spacing = 20e-3;   // m
    double standoff = 1e-3;       // m
    PointedProfile pointed;
    ConcaveProfile concave;
};

struct ContactConfig {
    // penalty stiffness = factor * E * mean tributary area / radial element size
    double stiffness_factor = 10.0;
    FrictionModel friction;
    double dt_safety = 0.5; // of the penalty-spring stability limit
};

struct StepControl {
    bool reduced_integration = false;
    double hourglass_coeff = 0.05;
    double cfl_safety = 0.9;
};

/// Full description of one forming shot. Loaded from JSON; all lengths and
/// times are SI internally (the file uses mm / us / uF for readability).
struct SimConfig {
    CircuitParams circuit;
    std::string waveform_csv;      // when set, replaces the closed-form source
    double waveform_energy_kj = 0; // discharge energy the stored trace belongs to
    double energy_kj = 0;          // target energy; > 0 rescales the source
    CoilSpec coil;
    std::string material_deck; // path to a material JSON file
    TubeConfig tube;
    PunchConfig punches;
    double die_bore = 14.5e-3; // m, radius
    double eta = 1.0;          // pressure coupling efficiency in (0, 1]
    double coupling_dt = 1e-7; // s, field refresh interval
    double total_time = 100e-6;
    double driven_time = 30e-6; // s, current forced to zero afterwards
    int frames = 200;
    int coupling_iterations = 1; // 1 staggered, > 1 fixed-point per window
    double coupling_tolerance = 1e-3;
    bool frozen_geometry = false; // sample fields on the undeformed surface
    ContactConfig contact;
    StepControl stepping;
    int threads = 1;
    double balance_abort = 0.10;         // ledger error that aborts the run
    double kinetic_exit_fraction = 1e-3; // ring-down exit level after the pulse

    void validate() const;
};

SimConfig load_config(const std::string& path);
JCMaterial load_material_deck(const std::string& path);

struct ProbePoint {
    double time = 0;
    double force = 0;     // N, surface-pressure force on the probe cells
    double velocity = 0;  // m/s, mean speed of the probe-cell nodes
    double von_mises = 0; // Pa, mean over gauss points
    double eps_p = 0;     // mean equivalent plastic strain
};

/// Four cells diagonally adjacent to one punch's footprint rim, sampled at
/// every output frame. Series start at t = 0 with zero fields.
struct ProbeSite {
    std::string name; // "center" or "end"
    int punch = -1;
    std::vector<int> elements;
    std::vector<ProbePoint> series;
};

struct LedgerSample {
    double time = 0;
    EnergyLedger ledger;
    double balance = 0;
};

using FrameCallback =
    std::function<void(int frame, double time, const TubeMesh& mesh, const DynState& state)>;

struct SimResult {
    SimConfig config;
    JCMaterial material;
    double energy_kj = 0; // actual discharge energy of the run
    TubeMesh mesh;
    DynState state; // final
    std::vector<PlacedPunch> punches;
    std::vector<ProbeSite> probes;
    std::vector<LedgerSample> ledger_history;
    std::vector<double> load_time;  // s, one entry per coupling window
    std::vector<double> load_total; // N, total surface-load magnitude
    std::vector<HoleRecord> holes;
    double max_balance_error = 0;
    double peak_kinetic = 0;     // J
    double max_penetration = 0;  // m
    double min_element_edge = 0; // m, undeformed
    double contact_stiffness = 0;
    long total_substeps = 0;
    double end_time = 0;

    RunSummary summary() const;
};

/// Staggered electromagnetic-mechanical loop: refresh the surface pressure
/// field from the coil current every coupling window, sub-step the explicit
/// solid with contact inside it, delete failed elements, classify holes at
/// the end. Deterministic for any thread count. Throws UnstableRun when the
/// energy ledger error exceeds the configured abort level.
SimResult run_simulation(const SimConfig& cfg, const FrameCallback& on_frame = {});

/// Config echo, probe series, ledger history, window loads and hole records;
/// every number survives a read back exactly.
void write_result_json(const SimResult& result, const std::string& path);

/// Rebuilds the trend-report inputs from a file written by write_result_json.
RunSummary load_summary_json(const std::string& path);

} // namespace emfp
