#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "emfp/driver.hpp"
#include "emfp/errors.hpp"
#include "emfp/postprocess.hpp"
#include "emfp/vtk_io.hpp"

namespace fs = std::filesystem;
using namespace emfp;

namespace {

// Shortest decimal form that round-trips; keeps every text output byte-stable
// across repeated runs.
std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

std::vector<double> parse_energies(const std::string& list) {
    std::vector<double> out;
    std::stringstream ss(list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty())
            continue;
        double v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size() || v <= 0)
            throw ConfigError("bad energy value '" + tok + "' in --energies");
        out.push_back(v);
    }
    if (out.empty())
        throw ConfigError("--energies is empty");
    return out;
}

void print_hole_table(const std::vector<HoleRecord>& holes, std::ostream& os) {
    os << "punch  status           diameter_mm  area_mm2  deleted  slug  max_eps_p\n";
    for (const HoleRecord& h : holes) {
        char line[160];
        std::snprintf(line, sizeof line, "%5d  %-15s  %11s  %8s  %7d  %4s  %s\n", h.punch,
                      to_string(h.status).c_str(),
                      h.status == HoleStatus::Perforated ? fmt(h.diameter * 1e3).c_str() : "-",
                      h.opening_area > 0 ? fmt(h.opening_area * 1e6).c_str() : "-",
                      h.deleted_elements, h.slug_separated ? "yes" : "no",
                      fmt(h.max_eps_p).c_str());
        os << line;
    }
}

void print_run_summary(const SimResult& res, double wall_s) {
    std::cout << "energy " << fmt(res.energy_kj) << " kJ, " << res.config.punches.kind << " x"
              << res.config.punches.total << ", eta " << fmt(res.config.eta) << "\n";
    int perforated = 0, petaled = 0, indented = 0;
    for (const HoleRecord& h : res.holes) {
        if (h.status == HoleStatus::Perforated)
            ++perforated;
        else if (h.status == HoleStatus::PetaledPartial)
            ++petaled;
        else if (h.status == HoleStatus::Indented)
            ++indented;
    }
    std::cout << "holes: " << perforated << " perforated, " << petaled << " petaled, " << indented
              << " indented of " << res.holes.size() << " sites\n";
    print_hole_table(res.holes, std::cout);
    std::cout << "peak kinetic " << fmt(res.peak_kinetic) << " J, max ledger error "
              << fmt(res.max_balance_error) << ", max penetration/edge "
              << fmt(res.max_penetration / res.min_element_edge) << "\n";
    std::cout << "substeps " << res.total_substeps << ", sim end " << fmt(res.end_time * 1e6)
              << " us, wall " << fmt(wall_s) << " s\n";
}

FrameCallback vtk_writer(const fs::path& dir) {
    return [dir](int frame, double time, const TubeMesh& mesh, const DynState& state) {
        VtkSnapshot snap = snapshot_state(mesh, state);
        snap.title = "tube state at t=" + fmt(time * 1e6) + " us";
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04d.vtk", frame);
        write_vtk(snap, (dir / name).string());
    };
}

int cmd_run(const std::string& config_path, const std::string& out_dir, int frames, int threads,
            double energy, double eta) {
    SimConfig cfg = load_config(config_path);
    if (threads > 0)
        cfg.threads = threads;
    if (energy > 0)
        cfg.energy_kj = energy;
    if (eta > 0)
        cfg.eta = eta;
    const bool want_vtk = frames > 0;
    if (frames > 0)
        cfg.frames = frames;
    cfg.validate();

    fs::create_directories(out_dir);
    const auto t0 = std::chrono::steady_clock::now();
    SimResult res = run_simulation(cfg, want_vtk ? vtk_writer(out_dir) : FrameCallback{});
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    write_result_json(res, (fs::path(out_dir) / "result.json").string());
    TrendReport rep = build_trend_report({res.summary()});
    write_metrics_csv(rep, (fs::path(out_dir) / "metrics.csv").string());
    print_run_summary(res, wall);
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& energies, const std::string& out_dir,
              int threads) {
    const std::vector<double> evals = parse_energies(energies);
    SimConfig base = load_config(config_path);
    if (threads > 0)
        base.threads = threads;

    std::vector<RunSummary> runs;
    for (double e : evals) {
        SimConfig cfg = base;
        cfg.energy_kj = e;
        cfg.validate();
        const fs::path dir = fs::path(out_dir) / ("e" + fmt(e) + "kJ");
        fs::create_directories(dir);
        std::cout << "--- " << fmt(e) << " kJ ---\n";
        const auto t0 = std::chrono::steady_clock::now();
        SimResult res = run_simulation(cfg);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_result_json(res, (dir / "result.json").string());
        print_run_summary(res, wall);
        runs.push_back(res.summary());
    }

    TrendReport rep = build_trend_report(runs);
    write_metrics_csv(rep, (fs::path(out_dir) / "metrics.csv").string());
    for (const std::string& f : rep.flags)
        std::cout << f << "\n";
    return 0;
}

int cmd_report(const std::string& in_dir, const std::string& out_csv) {
    std::vector<std::string> files;
    for (const fs::directory_entry& e : fs::recursive_directory_iterator(in_dir))
        if (e.is_regular_file() && e.path().filename() == "result.json")
            files.push_back(e.path().string());
    if (files.empty())
        throw IoError("no result.json files under " + in_dir);
    std::sort(files.begin(), files.end());

    std::vector<RunSummary> runs;
    for (const std::string& f : files)
        runs.push_back(load_summary_json(f));
    TrendReport rep = build_trend_report(runs);
    write_metrics_csv(rep, out_csv);
    std::cout << "report over " << runs.size() << " runs -> " << out_csv << "\n";
    for (const std::string& f : rep.flags)
        std::cout << f << "\n";
    return 0;
}

int cmd_holes(const std::string& result_path) {
    const RunSummary s = load_summary_json(result_path);
    std::cout << "energy " << fmt(s.energy_kj) << " kJ, " << s.punch_type << " x" << s.layout
              << ", eta " << fmt(s.eta) << "\n";
    print_hole_table(s.holes, std::cout);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Electromagnetic tube forming and multi-point perforation simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", energies = "4.8,5.7,6.5";
    std::string in_dir, out_csv = "report.csv", result_path;
    int frames = 0, threads = 0;
    double energy = 0, eta = 0;

    CLI::App* run = app.add_subcommand("run", "Run one simulation from a config file");
    run->add_option("--config", config_path, "JSON config file")->required();
    run->add_option("--out", out_dir, "output directory (default out)");
    run->add_option("--frames", frames, "override frame count and write VTK snapshots");
    run->add_option("--threads", threads, "override worker thread count");
    run->add_option("--energy", energy, "override discharge energy, kJ");
    run->add_option("--eta", eta, "override the pressure coupling efficiency");

    CLI::App* sweep = app.add_subcommand("sweep", "Run the config at several discharge energies");
    sweep->add_option("--config", config_path, "JSON config file")->required();
    sweep->add_option("--energies", energies, "comma-separated energies in kJ");
    sweep->add_option("--out", out_dir, "output directory (default out)");
    sweep->add_option("--threads", threads, "override worker thread count");

    CLI::App* report = app.add_subcommand("report", "Combine result.json files into a trend CSV");
    report->add_option("--in", in_dir, "directory scanned recursively for result.json")->required();
    report->add_option("--out", out_csv, "output CSV path (default report.csv)");

    CLI::App* holes = app.add_subcommand("holes", "Print the hole table of one result.json");
    holes->add_option("--result", result_path, "result.json from a previous run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed())
            return cmd_run(config_path, out_dir, frames, threads, energy, eta);
        if (sweep->parsed())
            return cmd_sweep(config_path, energies, out_dir, threads);
        if (report->parsed())
            return cmd_report(in_dir, out_csv);
        if (holes->parsed())
            return cmd_holes(result_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const UnstableRun& e) {
        std::cerr << "unstable run: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
