#include "emfp/driver.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <utility>

#include "json.hpp"

namespace emfp {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path);
    try {
        return json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
}

std::string resolve_path(const std::filesystem::path& base, const std::string& p) {
    if (p.empty() || std::filesystem::path(p).is_absolute())
        return p;
    return (base / p).lexically_normal().string();
}

double punch_radius(const RigidTool& tool) {
    return tool.kind == ToolKind::Pointed ? tool.pointed.shank_radius
                                          : tool.concave.cutter_radius;
}

/// Coil current vs time: rescaled closed-form discharge or a stored trace,
/// cut to zero outside the driven window.
struct CurrentSource {
    bool use_waveform = false;
    CurrentWaveform wave;
    CircuitParams circ;
    double scale = 1.0;
    double cutoff = 30e-6;

    double eval(double t) const {
        if (t <= 0 || t >= cutoff)
            return 0.0;
        return scale * (use_waveform ? wave.eval(t) : discharge_current(circ, t));
    }
};

CurrentSource make_source(const SimConfig& cfg, double& energy_kj_out) {
    CurrentSource s;
    s.cutoff = cfg.driven_time;
    if (!cfg.waveform_csv.empty()) {
        s.use_waveform = true;
        s.wave = load_waveform_csv(cfg.waveform_csv);
        s.wave.hold_after_end = false;
        if (cfg.energy_kj > 0 && cfg.waveform_energy_kj > 0)
            s.scale = std::sqrt(cfg.energy_kj / cfg.waveform_energy_kj);
        energy_kj_out = cfg.energy_kj > 0 ? cfg.energy_kj : cfg.waveform_energy_kj;
    } else {
        s.circ = cfg.circuit;
        if (cfg.energy_kj > 0)
            s.circ.charge_voltage = std::sqrt(2e3 * cfg.energy_kj / s.circ.capacitance);
        energy_kj_out = discharge_energy(s.circ).joules / 1e3;
    }
    return s;
}

/// Four outer-layer cells just outside the punch footprint, one per diagonal.
std::vector<int> probe_elements(const TubeMesh& mesh, const PlacedPunch& punch) {
    const double dz = mesh.length / mesh.n_axial;
    const double dth = 2.0 * std::numbers::pi / mesh.n_circ;
    const double r_p = punch_radius(punch.tool);
    const int iz_c = std::clamp(
        static_cast<int>(std::lround((punch.axial + 0.5 * mesh.length) / dz - 0.5)), 0,
        mesh.n_axial - 1);
    const int ic_c = static_cast<int>(std::lround(punch.angle / dth - 0.5));
    const int off_z = static_cast<int>(std::ceil(r_p / dz)) + 1;
    const int off_c = static_cast<int>(std::ceil(r_p / (mesh.outer_radius * dth))) + 1;

    std::vector<int> cells;
    for (int sz : {-1, 1})
        for (int sc : {-1, 1}) {
            const int iz = std::clamp(iz_c + sz * off_z, 0, mesh.n_axial - 1);
            cells.push_back(mesh.element_id(iz, ic_c + sc * off_c, mesh.n_thickness - 1));
        }
    return cells;
}

std::vector<ProbeSite> make_probes(const TubeMesh& mesh, const std::vector<PlacedPunch>& punches) {
    int center = -1, end = -1;
    for (std::size_t i = 0; i < punches.size(); ++i) {
        const PlacedPunch& p = punches[i];
        auto closer = [&](int cur, bool want_end) {
            if (cur < 0)
                return true;
            const PlacedPunch& q = punches[static_cast<std::size_t>(cur)];
            const double kp = want_end ? -p.axial : std::abs(p.axial);
            const double kq = want_end ? -q.axial : std::abs(q.axial);
            if (kp != kq)
                return kp < kq;
            return p.angle < q.angle;
        };
        if (closer(center, false))
            center = static_cast<int>(i);
        if (closer(end, true))
            end = static_cast<int>(i);
    }
    std::vector<ProbeSite> sites;
    for (auto [name, idx] : {std::pair<const char*, int>{"center", center}, {"end", end}}) {
        if (idx < 0)
            continue;
        ProbeSite site;
        site.name = name;
        site.punch = idx;
        site.elements = probe_elements(mesh, punches[static_cast<std::size_t>(idx)]);
        sites.push_back(std::move(site));
    }
    return sites;
}

} // namespace

void SimConfig::validate() const {
    if (waveform_csv.empty()) {
        circuit.validate();
        if (energy_kj <= 0 && circuit.charge_voltage <= 0)
            throw ConfigError("config: set energy_kJ or a circuit charge voltage");
    } else if (energy_kj > 0 && waveform_energy_kj <= 0) {
        throw ConfigError("config: rescaling a stored waveform needs its reference energy");
    }
    if (energy_kj < 0 || waveform_energy_kj < 0)
        throw ConfigError("config: discharge energies cannot be negative");
    if (!(eta > 0 && eta <= 1))
        throw ConfigError("config: eta must lie in (0, 1]");
    if (tube.inner_radius <= 0 || tube.wall <= 0 || tube.length <= 0)
        throw ConfigError("config: tube dimensions must be positive");
    if (tube.n_axial < 2 || tube.n_circ < 8 || tube.n_thickness < 1)
        throw ConfigError("config: tube element counts out of range");
    if (punches.kind != "pointed" && punches.kind != "concave")
        throw ConfigError("config: punch kind must be 'pointed' or 'concave'");
    if (die_bore <= tube.inner_radius + tube.wall)
        throw ConfigError("config: die bore must clear the undeformed outer surface");
    if (coil.radius <= 0 || coil.turns < 1 || coil.pitch <= 0 || coil.segments_per_loop < 8)
        throw ConfigError("config: coil geometry out of range");
    if (coil.radius >= tube.inner_radius)
        throw ConfigError("config: the coil must fit inside the tube bore");
    if (coupling_dt <= 0 || total_time < coupling_dt || driven_time < 0)
        throw ConfigError("config: time controls out of range");
    if (frames < 1 || coupling_iterations < 1 || coupling_tolerance <= 0)
        throw ConfigError("config: output/coupling controls out of range");
    if (contact.stiffness_factor <= 0 || !(contact.dt_safety > 0 && contact.dt_safety <= 1))
        throw ConfigError("config: contact controls out of range");
    contact.friction.validate();
    if (stepping.hourglass_coeff < 0 || !(stepping.cfl_safety > 0 && stepping.cfl_safety <= 1))
        throw ConfigError("config: stepping controls out of range");
    if (threads < 1)
        throw ConfigError("config: thread count must be at least 1");
    if (balance_abort <= 0 || kinetic_exit_fraction < 0)
        throw ConfigError("config: run guards out of range");
}

JCMaterial load_material_deck(const std::string& path) {
    const json j = parse_json_file(path);
    JCMaterial m;
    try {
        m.name = j.at("name").get<std::string>();
        m.density = j.at("density_kg_m3").get<double>();
        m.youngs = j.at("youngs_Pa").get<double>();
        m.poisson = j.at("poisson").get<double>();
        m.conductivity = j.at("conductivity_S_m").get<double>();
        if (j.contains("shear_Pa")) {
            m.shear = j.at("shear_Pa").get<double>();
            m.shear_override = j.value("shear_override", false);
        } else {
            m.shear = m.shear_from_elastic();
        }
        m.a = j.at("A_Pa").get<double>();
        m.b = j.at("B_Pa").get<double>();
        m.c = j.at("C").get<double>();
        m.n = j.at("n").get<double>();
        m.m = j.at("m").get<double>();
        m.t_melt = j.at("T_melt_K").get<double>();
        m.t_ref = j.at("T_ref_K").get<double>();
        m.rate_ref = j.value("rate_ref_s", 1.0);
        m.d1 = j.at("D1").get<double>();
        m.d2 = j.at("D2").get<double>();
        m.d3 = j.at("D3").get<double>();
        m.d4 = j.at("D4").get<double>();
        m.d5 = j.at("D5").get<double>();
        m.damage_rate_ref = j.value("damage_rate_ref_s", 1.0);
        m.fracture_floor = j.value("fracture_floor", 1e-3);
        m.taylor_quinney = j.value("taylor_quinney", 0.9);
        m.specific_heat = j.at("specific_heat_J_kgK").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError("material deck " + path + ": " + e.what());
    }
    m.validate();
    return m;
}

SimConfig load_config(const std::string& path) {
    const json j = parse_json_file(path);
    const std::filesystem::path base = std::filesystem::path(path).parent_path();

    static const char* known[] = {
        "energy_kJ",     "circuit",  "waveform",      "coil",
        "material",      "tube",     "punches",       "die_bore_mm",
        "eta",           "coupling_dt_us", "total_time_us", "driven_time_us",
        "frames",        "coupling_iterations", "coupling_tolerance", "frozen_geometry",
        "contact",       "stepping", "threads",       "balance_abort",
        "kinetic_exit_fraction"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find_if(std::begin(known), std::end(known),
                         [&](const char* k) { return key == k; }) == std::end(known))
            throw ConfigError("config " + path + ": unknown key '" + key + "'");
    }

    SimConfig c;
    try {
        c.energy_kj = j.value("energy_kJ", 0.0);
        if (j.contains("circuit")) {
            const json& cj = j.at("circuit");
            c.circuit.capacitance = cj.value("capacitance_uF", 0.0) * 1e-6;
            c.circuit.inductance = cj.value("inductance_uH", 0.0) * 1e-6;
            c.circuit.resistance = cj.value("resistance_mOhm", 0.0) * 1e-3;
            c.circuit.charge_voltage = cj.value("charge_voltage_V", 0.0);
        }
        if (j.contains("waveform")) {
            const json& wj = j.at("waveform");
            c.waveform_csv = resolve_path(base, wj.value("csv", std::string{}));
            c.waveform_energy_kj = wj.value("energy_kJ", 0.0);
        }
        if (j.contains("coil")) {
            const json& cj = j.at("coil");
            c.coil.radius = cj.value("radius_mm", c.coil.radius * 1e3) * 1e-3;
            c.coil.turns = cj.value("turns", c.coil.turns);
            c.coil.pitch = cj.value("pitch_mm", c.coil.pitch * 1e3) * 1e-3;
            c.coil.z_center = cj.value("z_center_mm", c.coil.z_center * 1e3) * 1e-3;
            c.coil.segments_per_loop = cj.value("segments_per_loop", c.coil.segments_per_loop);
        }
        c.material_deck = resolve_path(base, j.value("material", std::string{}));
        if (j.contains("tube")) {
            const json& tj = j.at("tube");
            c.tube.inner_radius = tj.value("inner_radius_mm", c.tube.inner_radius * 1e3) * 1e-3;
            c.tube.wall = tj.value("wall_mm", c.tube.wall * 1e3) * 1e-3;
            c.tube.length = tj.value("length_mm", c.tube.length * 1e3) * 1e-3;
            c.tube.n_axial = tj.value("n_axial", c.tube.n_axial);
            c.tube.n_circ = tj.value("n_circ", c.tube.n_circ);
            c.tube.n_thickness = tj.value("n_thickness", c.tube.n_thickness);
        }
        if (j.contains("punches")) {
            const json& pj = j.at("punches");
            c.punches.total = pj.value("total", c.punches.total);
            c.punches.kind = pj.value("kind", c.punches.kind);
            c.punches.set_spacing = pj.value("set_spacing_mm", c.punches.set_spacing * 1e3) * 1e-3;
            c.punches.standoff = pj.value("standoff_mm", c.punches.standoff * 1e3) * 1e-3;
            if (pj.contains("pointed")) {
                const json& q = pj.at("pointed");
                PointedProfile& p = c.punches.pointed;
                p.half_angle = q.value("half_angle_deg", p.half_angle * 180.0 / std::numbers::pi) *
                               std::numbers::pi / 180.0;
                p.tip_radius = q.value("tip_radius_mm", p.tip_radius * 1e3) * 1e-3;
                p.shank_radius = q.value("shank_radius_mm", p.shank_radius * 1e3) * 1e-3;
                p.length = q.value("length_mm", p.length * 1e3) * 1e-3;
            }
            if (pj.contains("concave")) {
                const json& q = pj.at("concave");
                ConcaveProfile& p = c.punches.concave;
                p.cutter_radius = q.value("cutter_radius_mm", p.cutter_radius * 1e3) * 1e-3;
                p.edge_fillet = q.value("edge_fillet_mm", p.edge_fillet * 1e3) * 1e-3;
                p.concavity_depth = q.value("concavity_depth_mm", p.concavity_depth * 1e3) * 1e-3;
                p.length = q.value("length_mm", p.length * 1e3) * 1e-3;
            }
        }
        c.die_bore = j.value("die_bore_mm", c.die_bore * 1e3) * 1e-3;
        c.eta = j.value("eta", c.eta);
        c.coupling_dt = j.value("coupling_dt_us", c.coupling_dt * 1e6) * 1e-6;
        c.total_time = j.value("total_time_us", c.total_time * 1e6) * 1e-6;
        c.driven_time = j.value("driven_time_us", c.driven_time * 1e6) * 1e-6;
        c.frames = j.value("frames", c.frames);
        c.coupling_iterations = j.value("coupling_iterations", c.coupling_iterations);
        c.coupling_tolerance = j.value("coupling_tolerance", c.coupling_tolerance);
        c.frozen_geometry = j.value("frozen_geometry", c.frozen_geometry);
        if (j.contains("contact")) {
            const json& cj = j.at("contact");
            c.contact.stiffness_factor = cj.value("stiffness_factor", c.contact.stiffness_factor);
            c.contact.friction.mu_static = cj.value("mu_static", c.contact.friction.mu_static);
            c.contact.friction.mu_dynamic = cj.value("mu_dynamic", c.contact.friction.mu_dynamic);
            c.contact.friction.v_reg = cj.value("v_reg", c.contact.friction.v_reg);
            c.contact.dt_safety = cj.value("dt_safety", c.contact.dt_safety);
        }
        if (j.contains("stepping")) {
            const json& sj = j.at("stepping");
            c.stepping.reduced_integration =
                sj.value("reduced_integration", c.stepping.reduced_integration);
            c.stepping.hourglass_coeff = sj.value("hourglass_coeff", c.stepping.hourglass_coeff);
            c.stepping.cfl_safety = sj.value("cfl_safety", c.stepping.cfl_safety);
        }
        c.threads = j.value("threads", c.threads);
        c.balance_abort = j.value("balance_abort", c.balance_abort);
        c.kinetic_exit_fraction = j.value("kinetic_exit_fraction", c.kinetic_exit_fraction);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    if (c.material_deck.empty())
        throw ConfigError("config " + path + ": 'material' deck path is required");
    c.validate();
    return c;
}

RunSummary SimResult::summary() const {
    RunSummary s;
    s.energy_kj = energy_kj;
    s.punch_type = config.punches.kind;
    s.layout = config.punches.total;
    s.eta = config.eta;
    s.holes = holes;
    return s;
}

SimResult run_simulation(const SimConfig& cfg, const FrameCallback& on_frame) {
    cfg.validate();

    SimResult res;
    res.config = cfg;
    res.material = load_material_deck(cfg.material_deck);
    const JCMaterial& mat = res.material;

    res.mesh = generate_tube_mesh(cfg.tube.inner_radius, cfg.tube.wall, cfg.tube.length,
                                  cfg.tube.n_axial, cfg.tube.n_circ, cfg.tube.n_thickness);
    const TubeMesh& mesh = res.mesh;
    const std::size_t nn = mesh.nodes.size();

    RigidTool tmpl;
    tmpl.kind = cfg.punches.kind == "pointed" ? ToolKind::Pointed : ToolKind::Concave;
    tmpl.pointed = cfg.punches.pointed;
    tmpl.concave = cfg.punches.concave;
    PunchLayout layout;
    layout.total = cfg.punches.total;
    layout.set_spacing = cfg.punches.set_spacing;
    layout.standoff = cfg.punches.standoff;
    res.punches = place_punches(layout, tmpl, mesh);

    std::vector<RigidTool> tools;
    tools.reserve(res.punches.size() + 1);
    for (const PlacedPunch& p : res.punches)
        tools.push_back(p.tool);
    tools.push_back(make_die(cfg.die_bore));

    CoilSpec coil = cfg.coil;
    coil.build();
    CurrentSource source = make_source(cfg, res.energy_kj);

    DynOptions dyn;
    dyn.reduced_integration = cfg.stepping.reduced_integration;
    dyn.hourglass_coeff = cfg.stepping.hourglass_coeff;
    dyn.n_threads = cfg.threads;
    DynState state = init_state(mesh, mat, dyn);

    std::vector<std::uint8_t> outer_alive(mesh.outer_facets.size(), 1);
    std::vector<std::uint8_t> inner_alive(mesh.inner_facets.size(), 1);

    // node -> attached elements, for dropping fully-detached debris nodes
    // from contact once every neighbor element is gone
    std::vector<std::vector<int>> node_elems(nn);
    for (std::size_t e = 0; e < mesh.elements.size(); ++e)
        for (int a : mesh.elements[e])
            node_elems[static_cast<std::size_t>(a)].push_back(static_cast<int>(e));
    std::vector<std::uint8_t> node_active(nn, 1);
    bool any_inactive = false;
    auto refresh_masks = [&]() {
        facet_alive_from_elements(mesh, state.elem_alive, outer_alive, inner_alive);
        any_inactive = false;
        for (std::size_t i = 0; i < nn; ++i) {
            std::uint8_t active = 0;
            for (int e : node_elems[i])
                if (state.elem_alive[static_cast<std::size_t>(e)]) {
                    active = 1;
                    break;
                }
            node_active[i] = active;
            if (!active)
                any_inactive = true;
        }
    };

    // penalty stiffness scaled to the outer-surface face stiffness of one
    // radial element layer
    {
        const std::vector<std::uint8_t> all_alive(mesh.outer_facets.size(), 1);
        const std::vector<double> trib = outer_tributary_areas(mesh, mesh.nodes, all_alive);
        double sum = 0;
        for (int nid : mesh.outer_nodes)
            sum += trib[static_cast<std::size_t>(nid)];
        const double mean_area = sum / static_cast<double>(mesh.outer_nodes.size());
        const double h_r = cfg.tube.wall / cfg.tube.n_thickness;
        res.contact_stiffness = cfg.contact.stiffness_factor * mat.youngs * mean_area / h_r;
    }
    const double dt_con =
        contact_timestep_limit(res.contact_stiffness, state.mass, cfg.contact.dt_safety);
    res.min_element_edge =
        std::min({cfg.tube.length / cfg.tube.n_axial, cfg.tube.wall / cfg.tube.n_thickness,
                  cfg.tube.inner_radius * 2.0 * std::numbers::pi / cfg.tube.n_circ});

    res.probes = make_probes(mesh, res.punches);

    // element -> outer facet, for probe pressures
    std::vector<int> elem_facet(mesh.elements.size(), -1);
    for (std::size_t fi = 0; fi < mesh.outer_facets.size(); ++fi)
        elem_facet[static_cast<std::size_t>(mesh.outer_facets[fi].element)] = static_cast<int>(fi);

    LoadField loads; // empty until the first window: zero fields at t = 0
    std::vector<double> node_pressure(nn, 0.0);
    auto sample_probes = [&](double t) {
        std::fill(node_pressure.begin(), node_pressure.end(), 0.0);
        for (std::size_t k = 0; k < loads.node_ids.size(); ++k)
            node_pressure[static_cast<std::size_t>(loads.node_ids[k])] = loads.pressures[k];
        for (ProbeSite& site : res.probes) {
            ProbePoint pt;
            pt.time = t;
            for (int e : site.elements) {
                const auto ue = static_cast<std::size_t>(e);
                const auto& conn = mesh.elements[ue];
                double speed = 0;
                for (int a : conn)
                    speed += norm(state.vel[static_cast<std::size_t>(a)]);
                pt.velocity += speed / 8.0;
                for (int g = 0; g < state.n_gp; ++g) {
                    const PointState& ps = state.point(e, g);
                    pt.eps_p += ps.eps_p / state.n_gp;
                    if (!ps.deleted)
                        pt.von_mises += von_mises(ps.stress) / state.n_gp;
                }
                const int fi = elem_facet[ue];
                if (fi >= 0 && state.elem_alive[ue] && outer_alive[static_cast<std::size_t>(fi)]) {
                    const SurfaceFacet& f = mesh.outer_facets[static_cast<std::size_t>(fi)];
                    double pbar = 0;
                    for (int nid : f.nodes)
                        pbar += 0.25 * node_pressure[static_cast<std::size_t>(nid)];
                    Vec3 fn;
                    double area = 0;
                    facet_normal_area(f, state.pos, fn, area);
                    pt.force += pbar * area;
                }
            }
            const double inv = 1.0 / static_cast<double>(site.elements.size());
            pt.force *= inv;
            pt.velocity *= inv;
            pt.von_mises *= inv;
            pt.eps_p *= inv;
            site.series.push_back(pt);
        }
    };
    auto record = [&](int frame, double t) {
        sample_probes(t);
        res.ledger_history.push_back({t, state.ledger, state.ledger.balance_error()});
        if (on_frame)
            on_frame(frame, t, mesh, state);
    };

    const int n_windows =
        std::max(1, static_cast<int>(std::lround(cfg.total_time / cfg.coupling_dt)));
    const int frame_every = std::max(1, n_windows / std::max(1, cfg.frames));

    record(0, 0.0);
    int frame_idx = 1;

    LoadOptions lo;
    lo.eta = cfg.eta;
    lo.n_threads = cfg.threads;

    for (int w = 0; w < n_windows; ++w) {
        const double t0 = state.time;
        const double i_mid = source.eval(t0 + 0.5 * cfg.coupling_dt);
        auto build_loads = [&]() {
            const std::vector<Vec3>& coords = cfg.frozen_geometry ? mesh.nodes : state.pos;
            return build_surface_loads(mesh, coords, outer_alive, coil, i_mid, t0, lo);
        };
        loads = build_loads();
        res.load_time.push_back(t0);
        res.load_total.push_back(loads.total_force_magnitude);

        auto advance = [&](double window) {
            const double dt_cfl =
                stable_timestep(mesh, state.pos, state.elem_alive, mat, cfg.stepping.cfl_safety);
            const double dt = std::min(dt_cfl, dt_con);
            const int n_sub = std::max(1, static_cast<int>(std::ceil(window / dt - 1e-9)));
            const double dt_sub = window / n_sub;
            for (int s = 0; s < n_sub; ++s) {
                ContactSet contacts =
                    detect_penetrations(state.pos, state.vel, tools, cfg.threads);
                if (any_inactive)
                    std::erase_if(contacts.entries, [&](const ContactEntry& e) {
                        return !node_active[static_cast<std::size_t>(e.node)];
                    });
                const ContactForces cf =
                    penalty_forces(contacts, nn, res.contact_stiffness, cfg.contact.friction);
                res.max_penetration = std::max(res.max_penetration, cf.max_penetration);
                const AppliedForces af{&loads.nodal_force, &cf.normal, &cf.tangential};
                step(mesh, mat, state, dt_sub, af, dyn);
                ++res.total_substeps;
                if (delete_elements(state) > 0) {
                    refresh_masks();
                    loads = build_loads(); // dead facets stop carrying pressure now
                }
            }
        };

        if (cfg.coupling_iterations <= 1) {
            advance(cfg.coupling_dt);
        } else {
            // fixed point on the load field over this window: re-advance from
            // the saved state until the post-window field matches the one
            // that produced it
            const DynState saved = state;
            for (int it = 0;; ++it) {
                advance(cfg.coupling_dt);
                if (it + 1 >= cfg.coupling_iterations)
                    break;
                const LoadField next = [&] {
                    const std::vector<Vec3>& coords =
                        cfg.frozen_geometry ? mesh.nodes : state.pos;
                    return build_surface_loads(mesh, coords, outer_alive, coil, i_mid, t0, lo);
                }();
                double diff = 0, ref = 0;
                for (std::size_t i = 0; i < nn; ++i) {
                    diff = std::max(diff, norm(next.nodal_force[i] - loads.nodal_force[i]));
                    ref = std::max(ref, norm(loads.nodal_force[i]));
                }
                if (diff <= cfg.coupling_tolerance * std::max(ref, 1e-300))
                    break;
                state = saved;
                refresh_masks();
                loads = next;
            }
        }

        const double bal = state.ledger.balance_error();
        res.max_balance_error = std::max(res.max_balance_error, bal);
        res.peak_kinetic = std::max(res.peak_kinetic, state.ledger.kinetic);
        if (bal > cfg.balance_abort)
            throw UnstableRun("energy ledger error " + std::to_string(bal) + " at t = " +
                              std::to_string(state.time) + " s exceeds the abort level");

        bool recorded = false;
        if ((w + 1) % frame_every == 0 || w + 1 == n_windows) {
            record(frame_idx++, state.time);
            recorded = true;
        }
        if (state.time >= cfg.driven_time &&
            state.ledger.kinetic < cfg.kinetic_exit_fraction * res.peak_kinetic) {
            if (!recorded)
                record(frame_idx++, state.time);
            break;
        }
    }
    res.end_time = state.time;

    std::vector<double> elem_eps(mesh.elements.size(), 0.0);
    for (std::size_t e = 0; e < mesh.elements.size(); ++e)
        for (int g = 0; g < state.n_gp; ++g)
            elem_eps[e] = std::max(elem_eps[e], state.point(static_cast<int>(e), g).eps_p);
    res.holes = detect_holes(mesh, state.pos, state.elem_alive, elem_eps, res.punches, {});

    res.state = std::move(state);
    return res;
}

namespace {

ordered_json config_echo(const SimConfig& c) {
    ordered_json j;
    j["energy_kJ"] = c.energy_kj;
    j["circuit"] = {{"capacitance_uF", c.circuit.capacitance * 1e6},
                    {"inductance_uH", c.circuit.inductance * 1e6},
                    {"resistance_mOhm", c.circuit.resistance * 1e3},
                    {"charge_voltage_V", c.circuit.charge_voltage}};
    if (!c.waveform_csv.empty())
        j["waveform"] = {{"csv", c.waveform_csv}, {"energy_kJ", c.waveform_energy_kj}};
    j["coil"] = {{"radius_mm", c.coil.radius * 1e3},
                 {"turns", c.coil.turns},
                 {"pitch_mm", c.coil.pitch * 1e3},
                 {"z_center_mm", c.coil.z_center * 1e3},
                 {"segments_per_loop", c.coil.segments_per_loop}};
    j["material"] = c.material_deck;
    j["tube"] = {{"inner_radius_mm", c.tube.inner_radius * 1e3},
                 {"wall_mm", c.tube.wall * 1e3},
                 {"length_mm", c.tube.length * 1e3},
                 {"n_axial", c.tube.n_axial},
                 {"n_circ", c.tube.n_circ},
                 {"n_thickness", c.tube.n_thickness}};
    j["punches"] = {
        {"total", c.punches.total},
        {"kind", c.punches.kind},
        {"set_spacing_mm", c.punches.set_spacing * 1e3},
        {"standoff_mm", c.punches.standoff * 1e3},
        {"pointed",
         {{"half_angle_deg", c.punches.pointed.half_angle * 180.0 / std::numbers::pi},
          {"tip_radius_mm", c.punches.pointed.tip_radius * 1e3},
          {"shank_radius_mm", c.punches.pointed.shank_radius * 1e3},
          {"length_mm", c.punches.pointed.length * 1e3}}},
        {"concave",
         {{"cutter_radius_mm", c.punches.concave.cutter_radius * 1e3},
          {"edge_fillet_mm", c.punches.concave.edge_fillet * 1e3},
          {"concavity_depth_mm", c.punches.concave.concavity_depth * 1e3},
          {"length_mm", c.punches.concave.length * 1e3}}}};
    j["die_bore_mm"] = c.die_bore * 1e3;
    j["eta"] = c.eta;
    j["coupling_dt_us"] = c.coupling_dt * 1e6;
    j["total_time_us"] = c.total_time * 1e6;
    j["driven_time_us"] = c.driven_time * 1e6;
    j["frames"] = c.frames;
    j["coupling_iterations"] = c.coupling_iterations;
    j["coupling_tolerance"] = c.coupling_tolerance;
    j["frozen_geometry"] = c.frozen_geometry;
    j["contact"] = {{"stiffness_factor", c.contact.stiffness_factor},
                    {"mu_static", c.contact.friction.mu_static},
                    {"mu_dynamic", c.contact.friction.mu_dynamic},
                    {"v_reg", c.contact.friction.v_reg},
                    {"dt_safety", c.contact.dt_safety}};
    j["stepping"] = {{"reduced_integration", c.stepping.reduced_integration},
                     {"hourglass_coeff", c.stepping.hourglass_coeff},
                     {"cfl_safety", c.stepping.cfl_safety}};
    j["threads"] = c.threads;
    j["balance_abort"] = c.balance_abort;
    j["kinetic_exit_fraction"] = c.kinetic_exit_fraction;
    return j;
}

} // namespace

void write_result_json(const SimResult& res, const std::string& path) {
    ordered_json j;
    j["config"] = config_echo(res.config);
    j["material"] = res.material.name;
    j["energy_kJ"] = res.energy_kj;
    j["eta"] = res.config.eta;

    ordered_json holes = ordered_json::array();
    for (const HoleRecord& h : res.holes)
        holes.push_back({{"punch", h.punch},
                         {"status", to_string(h.status)},
                         {"diameter_mm", h.diameter * 1e3},
                         {"opening_area_mm2", h.opening_area * 1e6},
                         {"deleted_elements", h.deleted_elements},
                         {"slug_separated", h.slug_separated},
                         {"max_eps_p", h.max_eps_p}});
    j["holes"] = std::move(holes);

    ordered_json probes = ordered_json::array();
    for (const ProbeSite& site : res.probes) {
        ordered_json s;
        s["name"] = site.name;
        s["punch"] = site.punch;
        s["elements"] = site.elements;
        std::vector<double> t, f, v, vm, ep;
        for (const ProbePoint& p : site.series) {
            t.push_back(p.time);
            f.push_back(p.force);
            v.push_back(p.velocity);
            vm.push_back(p.von_mises);
            ep.push_back(p.eps_p);
        }
        s["time_s"] = t;
        s["force_N"] = f;
        s["velocity_m_s"] = v;
        s["von_mises_Pa"] = vm;
        s["eps_p"] = ep;
        probes.push_back(std::move(s));
    }
    j["probes"] = std::move(probes);

    {
        ordered_json l;
        std::vector<double> t, ke, ie, co, fr, hg, de, ew, bal;
        for (const LedgerSample& s : res.ledger_history) {
            t.push_back(s.time);
            ke.push_back(s.ledger.kinetic);
            ie.push_back(s.ledger.internal_energy);
            co.push_back(s.ledger.contact);
            fr.push_back(s.ledger.friction);
            hg.push_back(s.ledger.hourglass);
            de.push_back(s.ledger.deleted);
            ew.push_back(s.ledger.external_work);
            bal.push_back(s.balance);
        }
        l["time_s"] = t;
        l["kinetic_J"] = ke;
        l["internal_J"] = ie;
        l["contact_J"] = co;
        l["friction_J"] = fr;
        l["hourglass_J"] = hg;
        l["deleted_J"] = de;
        l["external_work_J"] = ew;
        l["balance_error"] = bal;
        j["ledger"] = std::move(l);
    }

    j["window_loads"] = {{"time_s", res.load_time}, {"total_force_N", res.load_total}};

    int deleted_total = 0;
    for (std::uint8_t a : res.state.elem_alive)
        if (!a)
            ++deleted_total;
    j["metrics"] = {{"max_balance_error", res.max_balance_error},
                    {"peak_kinetic_J", res.peak_kinetic},
                    {"max_penetration_m", res.max_penetration},
                    {"min_element_edge_m", res.min_element_edge},
                    {"contact_stiffness_N_m", res.contact_stiffness},
                    {"total_substeps", res.total_substeps},
                    {"end_time_s", res.end_time},
                    {"deleted_elements", deleted_total}};

    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open " + path + " for writing");
    out << j.dump(1, '\t') << '\n';
    if (!out)
        throw IoError("short write to " + path);
}

RunSummary load_summary_json(const std::string& path) {
    const json j = parse_json_file(path);
    RunSummary s;
    try {
        s.energy_kj = j.at("energy_kJ").get<double>();
        s.eta = j.at("eta").get<double>();
        const json& pj = j.at("config").at("punches");
        s.punch_type = pj.at("kind").get<std::string>();
        s.layout = pj.at("total").get<int>();
        for (const json& hj : j.at("holes")) {
            HoleRecord h;
            h.punch = hj.at("punch").get<int>();
            const std::string st = hj.at("status").get<std::string>();
            if (st == "perforated")
                h.status = HoleStatus::Perforated;
            else if (st == "petaled_partial")
                h.status = HoleStatus::PetaledPartial;
            else if (st == "indented")
                h.status = HoleStatus::Indented;
            else if (st == "intact")
                h.status = HoleStatus::Intact;
            else
                throw ConfigError("result " + path + ": unknown hole status '" + st + "'");
            h.diameter = hj.at("diameter_mm").get<double>() * 1e-3;
            h.opening_area = hj.at("opening_area_mm2").get<double>() * 1e-6;
            h.deleted_elements = hj.at("deleted_elements").get<int>();
            h.slug_separated = hj.at("slug_separated").get<bool>();
            h.max_eps_p = hj.at("max_eps_p").get<double>();
            s.holes.push_back(std::move(h));
        }
    } catch (const json::exception& e) {
        throw ConfigError("result " + path + ": " + e.what());
    }
    return s;
}

} // namespace emfp
