#include "emfp/vtk_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "emfp/errors.hpp"

namespace emfp {

namespace {

std::string fmt(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void expect(std::istream& in, const std::string& want) {
    std::string tok;
    if (!(in >> tok) || tok != want)
        throw ParseError("vtk: expected '" + want + "', got '" + tok + "'", 0);
}

double read_double(std::istream& in) {
    std::string tok;
    if (!(in >> tok))
        throw ParseError("vtk: unexpected end of file", 0);
    double v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw ParseError("vtk: bad number '" + tok + "'", 0);
    return v;
}

} // namespace

void write_vtk(const VtkSnapshot& snap, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open " + path + " for writing");

    out << "# vtk DataFile Version 3.0\n" << snap.title << "\nASCII\n";
    out << "DATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << snap.points.size() << " double\n";
    for (const Vec3& p : snap.points)
        out << fmt(p.x) << ' ' << fmt(p.y) << ' ' << fmt(p.z) << '\n';

    out << "CELLS " << snap.cells.size() << ' ' << snap.cells.size() * 9 << '\n';
    for (const auto& c : snap.cells) {
        out << 8;
        for (int a : c)
            out << ' ' << a;
        out << '\n';
    }
    out << "CELL_TYPES " << snap.cells.size() << '\n';
    for (std::size_t i = 0; i < snap.cells.size(); ++i)
        out << 12 << '\n';

    if (!snap.point_vectors.empty()) {
        out << "POINT_DATA " << snap.points.size() << '\n';
        for (const auto& [name, vecs] : snap.point_vectors) {
            if (vecs.size() != snap.points.size())
                throw IoError("vtk: point field '" + name + "' size mismatch");
            out << "VECTORS " << name << " double\n";
            for (const Vec3& v : vecs)
                out << fmt(v.x) << ' ' << fmt(v.y) << ' ' << fmt(v.z) << '\n';
        }
    }
    if (!snap.cell_scalars.empty()) {
        out << "CELL_DATA " << snap.cells.size() << '\n';
        for (const auto& [name, vals] : snap.cell_scalars) {
            if (vals.size() != snap.cells.size())
                throw IoError("vtk: cell field '" + name + "' size mismatch");
            out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
            for (double v : vals)
                out << fmt(v) << '\n';
        }
    }
    if (!out)
        throw IoError("short write to " + path);
}

VtkSnapshot read_vtk(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path);

    VtkSnapshot snap;
    std::string line;
    std::getline(in, line); // version banner
    std::getline(in, snap.title);
    std::getline(in, line);
    if (line != "ASCII")
        throw ParseError("vtk: only ASCII files are supported", 3);
    expect(in, "DATASET");
    expect(in, "UNSTRUCTURED_GRID");

    expect(in, "POINTS");
    std::size_t np = 0;
    in >> np;
    std::string type;
    in >> type;
    snap.points.resize(np);
    for (Vec3& p : snap.points) {
        p.x = read_double(in);
        p.y = read_double(in);
        p.z = read_double(in);
    }

    expect(in, "CELLS");
    std::size_t nc = 0, total = 0;
    in >> nc >> total;
    snap.cells.resize(nc);
    for (auto& c : snap.cells) {
        int cnt = 0;
        in >> cnt;
        if (cnt != 8)
            throw ParseError("vtk: only hexahedral cells are supported", 0);
        for (int& a : c)
            in >> a;
    }
    expect(in, "CELL_TYPES");
    std::size_t nt = 0;
    in >> nt;
    for (std::size_t i = 0; i < nt; ++i) {
        int t = 0;
        in >> t;
        if (t != 12)
            throw ParseError("vtk: cell type " + std::to_string(t) + " is not a hexahedron", 0);
    }

    std::string tok;
    while (in >> tok) {
        if (tok == "POINT_DATA") {
            std::size_t n = 0;
            in >> n;
        } else if (tok == "CELL_DATA") {
            std::size_t n = 0;
            in >> n;
        } else if (tok == "VECTORS") {
            std::string name;
            in >> name >> type;
            std::vector<Vec3> vals(np);
            for (Vec3& v : vals) {
                v.x = read_double(in);
                v.y = read_double(in);
                v.z = read_double(in);
            }
            snap.point_vectors.emplace_back(name, std::move(vals));
        } else if (tok == "SCALARS") {
            std::string name, comp;
            in >> name >> type >> comp;
            expect(in, "LOOKUP_TABLE");
            in >> tok;
            std::vector<double> vals(nc);
            for (double& v : vals)
                v = read_double(in);
            snap.cell_scalars.emplace_back(name, std::move(vals));
        } else {
            throw ParseError("vtk: unexpected section '" + tok + "'", 0);
        }
    }
    return snap;
}

VtkSnapshot snapshot_state(const TubeMesh& mesh, const DynState& state) {
    VtkSnapshot snap;
    snap.points = state.pos;
    snap.cells = mesh.elements;

    std::vector<Vec3> disp(state.pos.size());
    for (std::size_t i = 0; i < state.pos.size(); ++i)
        disp[i] = state.pos[i] - mesh.nodes[i];
    snap.point_vectors.emplace_back("velocity", state.vel);
    snap.point_vectors.emplace_back("displacement", std::move(disp));

    const std::size_t ne = mesh.elements.size();
    std::vector<double> vm(ne, 0), eps(ne, 0), dmg(ne, 0), alive(ne, 0);
    for (std::size_t e = 0; e < ne; ++e) {
        alive[e] = state.elem_alive[e] ? 1.0 : 0.0;
        for (int g = 0; g < state.n_gp; ++g) {
            const PointState& p = state.point(static_cast<int>(e), g);
            eps[e] += p.eps_p / state.n_gp;
            dmg[e] = std::max(dmg[e], p.damage);
            if (!p.deleted)
                vm[e] += von_mises(p.stress) / state.n_gp;
        }
    }
    snap.cell_scalars.emplace_back("von_mises", std::move(vm));
    snap.cell_scalars.emplace_back("eps_p", std::move(eps));
    snap.cell_scalars.emplace_back("damage", std::move(dmg));
    snap.cell_scalars.emplace_back("alive", std::move(alive));
    return snap;
}

} // namespace emfp
