#include "emfp/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "emfp/parallel.hpp"

namespace emfp {

namespace {

double quad_area(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    Vec3 n = cross(a, b) + cross(b, c) + cross(c, d) + cross(d, a);
    return 0.5 * norm(n);
}

// local node indices of the six hex faces (outward for a right-handed element)
constexpr int kHexFace[6][4] = {
    {0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4}, {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7},
};

struct GaussPoint {
    double grad[8][3]; // shape gradients w.r.t. current coordinates
    double volume;     // detJ * weight
};

// gradients and weighted Jacobians at n_gp quadrature points of one element
int element_quadrature(const std::array<int, 8>& conn, const std::vector<Vec3>& coords,
                       bool reduced, GaussPoint* gp) {
    const int n = reduced ? 1 : 8;
    const double w = reduced ? 8.0 : 1.0;
    for (int g = 0; g < n; ++g) {
        const double xi = reduced ? 0.0 : kHexCorner[g][0] * kHexGauss;
        const double eta = reduced ? 0.0 : kHexCorner[g][1] * kHexGauss;
        const double zeta = reduced ? 0.0 : kHexCorner[g][2] * kHexGauss;
        double dN[8][3];
        hex_shape_gradients(xi, eta, zeta, dN);
        const Mat3 J = hex_jacobian(conn, coords, xi, eta, zeta);
        const Mat3 Jinv = J.inverse();
        for (int a = 0; a < 8; ++a)
            for (int i = 0; i < 3; ++i)
                gp[g].grad[a][i] = dN[a][0] * Jinv(0, i) + dN[a][1] * Jinv(1, i) +
                                   dN[a][2] * Jinv(2, i);
        gp[g].volume = J.det() * w;
    }
    return n;
}

// Flanagan-Belytschko hourglass control for the one-point element, applied as
// an exponential decay of the four hourglass modal velocities. The closed-form
// decay stays stable for any rate * dt, where an explicit viscous force flips
// sign once its rate exceeds 1/dt. Deltas are weighted by inverse nodal mass,
// which makes each element pass shed kinetic energy whatever the mass split:
// d(KE) = alpha |qdot|^2 (1 + alpha s_inv / 2) <= 0. Constrained x/y
// components count as infinite mass and stay untouched.
void hourglass_velocity_delta(const std::array<int, 8>& conn, const std::vector<Vec3>& coords,
                              const std::vector<Vec3>& vel, const std::vector<double>& mass,
                              const std::vector<std::uint8_t>& fixed_xy, const GaussPoint& center,
                              double coeff, double density, double wave_speed, double dt,
                              Vec3 out[8]) {
    double gamma[4][8];
    for (int m = 0; m < 4; ++m) {
        double base[8];
        for (int a = 0; a < 8; ++a) {
            const double xi = kHexCorner[a][0], eta = kHexCorner[a][1], zeta = kHexCorner[a][2];
            base[a] = m == 0 ? xi * eta : m == 1 ? eta * zeta : m == 2 ? xi * zeta : xi * eta * zeta;
        }
        // orthogonalize against the linear field so rigid motion and uniform
        // straining stay untouched
        Vec3 bx{0, 0, 0};
        for (int a = 0; a < 8; ++a)
            bx += base[a] * coords[static_cast<std::size_t>(conn[static_cast<std::size_t>(a)])];
        for (int a = 0; a < 8; ++a)
            gamma[m][a] = base[a] - (center.grad[a][0] * bx.x + center.grad[a][1] * bx.y +
                                     center.grad[a][2] * bx.z);
    }
    const double c = 0.25 * coeff * density * wave_speed * std::cbrt(center.volume * center.volume);
    for (int a = 0; a < 8; ++a)
        out[a] = {0, 0, 0};
    for (int m = 0; m < 4; ++m) {
        Vec3 qdot{0, 0, 0};
        Vec3 s_inv{0, 0, 0};
        for (int a = 0; a < 8; ++a) {
            const auto i = static_cast<std::size_t>(conn[static_cast<std::size_t>(a)]);
            qdot += gamma[m][a] * vel[i];
            const double w = gamma[m][a] * gamma[m][a] / mass[i];
            s_inv.z += w;
            if (!fixed_xy[i]) {
                s_inv.x += w;
                s_inv.y += w;
            }
        }
        // same small-dt limit as the viscous force -c * gamma * qdot
        const Vec3 alpha{s_inv.x > 0 ? std::expm1(-c * s_inv.x * dt) / s_inv.x : 0.0,
                         s_inv.y > 0 ? std::expm1(-c * s_inv.y * dt) / s_inv.y : 0.0,
                         s_inv.z > 0 ? std::expm1(-c * s_inv.z * dt) / s_inv.z : 0.0};
        for (int a = 0; a < 8; ++a) {
            const auto i = static_cast<std::size_t>(conn[static_cast<std::size_t>(a)]);
            const double gm = gamma[m][a] / mass[i];
            out[a].z += gm * alpha.z * qdot.z;
            if (!fixed_xy[i]) {
                out[a].x += gm * alpha.x * qdot.x;
                out[a].y += gm * alpha.y * qdot.y;
            }
        }
    }
}

} // namespace

double EnergyLedger::balance_error() const {
    const double in = external_work + initial_energy;
    const double scale = std::max({peak_external_work, initial_energy, 1e-300});
    return std::abs(in - stored()) / scale;
}

std::vector<double> lumped_mass(const TubeMesh& mesh, double density) {
    if (density <= 0)
        throw ConfigError("lumped_mass: density must be positive");
    std::vector<double> m(mesh.nodes.size(), 0.0);
    for (const auto& conn : mesh.elements) {
        const double me = density * hex_volume(conn, mesh.nodes) / 8.0;
        for (int a : conn)
            m[static_cast<std::size_t>(a)] += me;
    }
    return m;
}

DynState init_state(const TubeMesh& mesh, const JCMaterial& mat, const DynOptions& opt) {
    DynState s;
    s.pos = mesh.nodes;
    s.vel.assign(mesh.nodes.size(), Vec3{0, 0, 0});
    s.acc.assign(mesh.nodes.size(), Vec3{0, 0, 0});
    s.mass = lumped_mass(mesh, mat.density);
    s.n_gp = opt.reduced_integration ? 1 : 8;
    PointState ref;
    ref.temperature = mat.t_ref;
    s.points.assign(mesh.elements.size() * static_cast<std::size_t>(s.n_gp), ref);
    s.elem_alive.assign(mesh.elements.size(), 1);
    s.elem_energy.assign(mesh.elements.size(), 0.0);
    s.fixed_xy.assign(mesh.nodes.size(), 0);
    if (opt.constrain_end_rings)
        for (int n : mesh.end_ring_nodes)
            s.fixed_xy[static_cast<std::size_t>(n)] = 1;
    return s;
}

void internal_forces(const TubeMesh& mesh, const DynState& state, const DynOptions& opt,
                     std::vector<Vec3>& forces) {
    const std::size_t ne = mesh.elements.size();
    forces.assign(state.pos.size(), Vec3{0, 0, 0});
    std::vector<std::array<Vec3, 8>> buf(ne);
    parallel_for(ne, opt.n_threads, [&](std::size_t e) {
        auto& fe = buf[e];
        fe.fill(Vec3{0, 0, 0});
        if (!state.elem_alive[e])
            return;
        const auto& conn = mesh.elements[e];
        GaussPoint gp[8];
        const int ng = element_quadrature(conn, state.pos, opt.reduced_integration, gp);
        for (int g = 0; g < ng; ++g) {
            if (state.point(static_cast<int>(e), g).deleted)
                continue;
            const Sym3& s = state.point(static_cast<int>(e), g).stress;
            for (int a = 0; a < 8; ++a) {
                const double* d = gp[g].grad[a];
                fe[static_cast<std::size_t>(a)] +=
                    gp[g].volume * Vec3{s.xx * d[0] + s.xy * d[1] + s.zx * d[2],
                                        s.xy * d[0] + s.yy * d[1] + s.yz * d[2],
                                        s.zx * d[0] + s.yz * d[1] + s.zz * d[2]};
            }
        }
    });
    for (std::size_t e = 0; e < ne; ++e)
        for (int a = 0; a < 8; ++a)
            forces[static_cast<std::size_t>(mesh.elements[e][static_cast<std::size_t>(a)])] +=
                buf[e][static_cast<std::size_t>(a)];
}

double stable_timestep(const TubeMesh& mesh, const std::vector<Vec3>& coords,
                       const std::vector<std::uint8_t>& elem_alive, const JCMaterial& mat,
                       double safety) {
    if (safety <= 0 || safety > 1)
        throw ConfigError("stable_timestep: safety must lie in (0, 1]");
    const double c = mat.wave_speed();
    // the V / A characteristic length with the dilatational speed misses the
    // volumetric breathing mode of a compact element, which runs faster than
    // 2 c / h by sqrt((1+nu)/(1-nu)); fold that in. Tight for a cube, spare
    // margin for flattened elements whose thin direction decouples.
    const double breathing = std::sqrt((1.0 - mat.poisson) / (1.0 + mat.poisson));
    double dt = std::numeric_limits<double>::max();
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        if (!elem_alive.empty() && !elem_alive[e])
            continue;
        const auto& conn = mesh.elements[e];
        const double v = hex_volume(conn, coords);
        if (v <= 0)
            continue; // inverted element: deletion handles it, not the clock
        double amax = 0;
        for (const auto& face : kHexFace)
            amax = std::max(
                amax, quad_area(coords[static_cast<std::size_t>(conn[static_cast<std::size_t>(face[0])])],
                                coords[static_cast<std::size_t>(conn[static_cast<std::size_t>(face[1])])],
                                coords[static_cast<std::size_t>(conn[static_cast<std::size_t>(face[2])])],
                                coords[static_cast<std::size_t>(conn[static_cast<std::size_t>(face[3])])]));
        dt = std::min(dt, v / (amax * c));
    }
    return safety * breathing * dt;
}

void step(const TubeMesh& mesh, const JCMaterial& mat, DynState& state, double dt,
          const AppliedForces& loads, const DynOptions& opt) {
    const std::size_t nn = state.pos.size();
    const std::size_t ne = mesh.elements.size();

    std::vector<Vec3> f_int;
    internal_forces(mesh, state, opt, f_int);

    auto at = [](const std::vector<Vec3>* v, std::size_t i) {
        return v && !v->empty() ? (*v)[i] : Vec3{0, 0, 0};
    };

    // velocity half of the central-difference update; the midpoint velocity
    // is kept because force work through dt * v_mid equals the kinetic energy
    // change of this update exactly, closing the ledger to roundoff
    std::vector<Vec3> vel_mid(nn);
    parallel_for(nn, opt.n_threads, [&](std::size_t i) {
        Vec3 f = at(loads.external, i) + at(loads.contact_normal, i) +
                 at(loads.contact_tangent, i) - f_int[i];
        Vec3 a = (1.0 / state.mass[i]) * f;
        if (state.fixed_xy[i]) {
            a.x = 0;
            a.y = 0;
        }
        state.acc[i] = a;
        Vec3 v = state.vel[i] + dt * a;
        if (state.fixed_xy[i]) {
            v.x = 0;
            v.y = 0;
        }
        vel_mid[i] = 0.5 * (state.vel[i] + v);
        state.vel[i] = v;
    });

    // hourglass damping pass between the velocity and position updates,
    // booked as the exact kinetic energy it removes. Elements apply their
    // decay one after another: every single pass sheds energy, so stacking
    // them stays safe at any node valence, where merging simultaneous deltas
    // can overshoot a shared node into growth.
    double w_hg = 0;
    if (opt.reduced_integration && opt.hourglass_coeff > 0) {
        for (std::size_t e = 0; e < ne; ++e) {
            if (!state.elem_alive[e])
                continue;
            GaussPoint center;
            element_quadrature(mesh.elements[e], state.pos, true, &center);
            Vec3 out[8];
            hourglass_velocity_delta(mesh.elements[e], state.pos, state.vel, state.mass,
                                     state.fixed_xy, center, opt.hourglass_coeff, mat.density,
                                     mat.wave_speed(), dt, out);
            for (int a = 0; a < 8; ++a) {
                const auto i =
                    static_cast<std::size_t>(mesh.elements[e][static_cast<std::size_t>(a)]);
                const Vec3 v0 = state.vel[i];
                const Vec3 v1 = v0 + out[static_cast<std::size_t>(a)];
                w_hg += 0.5 * state.mass[i] * (dot(v0, v0) - dot(v1, v1));
                state.vel[i] = v1;
            }
        }
    }

    // position half; external-work bookkeeping through the midpoint velocity
    const std::vector<Vec3> pos_old = state.pos;
    double w_ext = 0, w_cn = 0, w_ct = 0;
    for (std::size_t i = 0; i < nn; ++i) {
        state.pos[i] += dt * state.vel[i];
        const Vec3 dx = dt * vel_mid[i];
        w_ext += dot(at(loads.external, i), dx);
        w_cn -= dot(at(loads.contact_normal, i), dx);
        w_ct -= dot(at(loads.contact_tangent, i), dx);
    }

    // constitutive update on the pre-step configuration. Strain increments
    // follow the actual node motion dt * v_new; the energy increment instead
    // pairs sigma_old with the midpoint motion so it mirrors the work of the
    // assembled internal forces term for term.
    std::vector<double> de_buf(ne, 0.0);
    parallel_for(ne, opt.n_threads, [&](std::size_t e) {
        if (!state.elem_alive[e])
            return;
        const auto& conn = mesh.elements[e];
        GaussPoint gp[8];
        const int ng = element_quadrature(conn, pos_old, opt.reduced_integration, gp);
        Vec3 du[8], du_mid[8];
        for (int a = 0; a < 8; ++a) {
            const auto nid = static_cast<std::size_t>(conn[static_cast<std::size_t>(a)]);
            du[a] = dt * state.vel[nid];
            du_mid[a] = dt * vel_mid[nid];
        }
        double de = 0;
        for (int g = 0; g < ng; ++g) {
            PointState& pt = state.point(static_cast<int>(e), g);
            if (pt.deleted)
                continue;
            Mat3 L{};
            Sym3 deps_mid{};
            for (int a = 0; a < 8; ++a)
                for (int i = 0; i < 3; ++i) {
                    L(0, i) += du[a].x * gp[g].grad[a][i];
                    L(1, i) += du[a].y * gp[g].grad[a][i];
                    L(2, i) += du[a].z * gp[g].grad[a][i];
                }
            for (int a = 0; a < 8; ++a) {
                const double* d = gp[g].grad[a];
                deps_mid.xx += du_mid[a].x * d[0];
                deps_mid.yy += du_mid[a].y * d[1];
                deps_mid.zz += du_mid[a].z * d[2];
                deps_mid.xy += 0.5 * (du_mid[a].x * d[1] + du_mid[a].y * d[0]);
                deps_mid.yz += 0.5 * (du_mid[a].y * d[2] + du_mid[a].z * d[1]);
                deps_mid.zx += 0.5 * (du_mid[a].z * d[0] + du_mid[a].x * d[2]);
            }
            const Sym3 deps = sym_part(L);
            const double wxy = 0.5 * (L(0, 1) - L(1, 0));
            const double wyz = 0.5 * (L(1, 2) - L(2, 1));
            const double wzx = 0.5 * (L(2, 0) - L(0, 2));
            de += ddot(pt.stress, deps_mid) * gp[g].volume;
            pt.stress += jaumann_increment(pt.stress, wxy, wyz, wzx);
            ReturnResult rr;
            try {
                rr = radial_return(mat, pt, deps, dt);
            } catch (const NewtonNoConvergence& ex) {
                throw NewtonNoConvergence("element " + std::to_string(e) + " constitutive update",
                                          ex.residual);
            }
            if (rr.deps_p > 0) {
                const double sx = triaxiality(pt.stress, mat);
                const double ef = fracture_strain(mat, sx, pt.eps_rate,
                                                  homologous_temperature(mat, pt.temperature));
                accumulate_damage(pt, rr.deps_p, ef);
                adiabatic_temperature_update(mat, pt, rr.plastic_work);
            }
        }
        de_buf[e] = de;
    });
    double du_int = 0;
    for (std::size_t e = 0; e < ne; ++e) {
        state.elem_energy[e] += de_buf[e];
        du_int += de_buf[e];
    }

    state.ledger.internal_energy += du_int;
    state.ledger.external_work += w_ext;
    state.ledger.contact += w_cn;
    state.ledger.friction += w_ct;
    state.ledger.hourglass += w_hg;
    state.ledger.peak_external_work =
        std::max(state.ledger.peak_external_work, state.ledger.external_work);
    state.ledger.kinetic = kinetic_energy(state);
    state.time += dt;
    ++state.step_count;

    double finite_probe = 0;
    for (std::size_t i = 0; i < nn; ++i)
        finite_probe += state.pos[i].x + state.pos[i].y + state.pos[i].z + state.vel[i].x +
                        state.vel[i].y + state.vel[i].z;
    if (!std::isfinite(finite_probe))
        throw UnstableRun("non-finite nodal state at step " + std::to_string(state.step_count) +
                          ", t = " + std::to_string(state.time));
}

int delete_elements(DynState& state) {
    int count = 0;
    for (std::size_t e = 0; e < state.elem_alive.size(); ++e) {
        if (!state.elem_alive[e])
            continue;
        bool all_failed = true;
        for (int g = 0; g < state.n_gp; ++g)
            if (!state.point(static_cast<int>(e), g).deleted) {
                all_failed = false;
                break;
            }
        if (!all_failed)
            continue;
        state.elem_alive[e] = 0;
        state.ledger.deleted += state.elem_energy[e];
        state.ledger.internal_energy -= state.elem_energy[e];
        ++count;
    }
    return count;
}

void facet_alive_from_elements(const TubeMesh& mesh, const std::vector<std::uint8_t>& elem_alive,
                               std::vector<std::uint8_t>& outer_alive,
                               std::vector<std::uint8_t>& inner_alive) {
    outer_alive.resize(mesh.outer_facets.size());
    for (std::size_t i = 0; i < mesh.outer_facets.size(); ++i)
        outer_alive[i] = elem_alive[static_cast<std::size_t>(mesh.outer_facets[i].element)];
    inner_alive.resize(mesh.inner_facets.size());
    for (std::size_t i = 0; i < mesh.inner_facets.size(); ++i)
        inner_alive[i] = elem_alive[static_cast<std::size_t>(mesh.inner_facets[i].element)];
}

double kinetic_energy(const DynState& state) {
    double ke = 0;
    for (std::size_t i = 0; i < state.vel.size(); ++i)
        ke += 0.5 * state.mass[i] * dot(state.vel[i], state.vel[i]);
    return ke;
}

} // namespace emfp
