#include "emfp/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace emfp {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

void CircuitParams::validate() const {
    if (!(capacitance > 0.0)) throw ConfigError("circuit: capacitance must be > 0");
    if (!(inductance > 0.0)) throw ConfigError("circuit: inductance must be > 0");
    if (resistance < 0.0) throw ConfigError("circuit: resistance must be >= 0");
    if (charge_voltage < 0.0) throw ConfigError("circuit: charge voltage must be >= 0");
    if (breakdown) {
        const auto& b = *breakdown;
        if (inductance != b.equivalent_inductance + b.machine_inductance)
            throw ConfigError("circuit: L must equal L_eq + L_machine exactly");
        if (resistance != b.equivalent_resistance + b.machine_resistance)
            throw ConfigError("circuit: R must equal R_eq + R_machine exactly");
    }
}

void CurrentWaveform::validate() const {
    if (times.size() < 2) throw ConfigError("waveform: need at least 2 samples");
    if (times.size() != currents.size())
        throw ConfigError("waveform: time/current sample count mismatch");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw NonMonotonicTime("waveform: sample times must be strictly increasing");
}

double CurrentWaveform::eval(double t) const {
    if (times.empty()) return 0.0;
    if (t < times.front()) return 0.0;
    if (t >= times.back()) return hold_after_end ? currents.back() : 0.0;
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t i = static_cast<std::size_t>(it - times.begin());
    double t0 = times[i - 1], t1 = times[i];
    double w = (t - t0) / (t1 - t0);
    return currents[i - 1] + w * (currents[i] - currents[i - 1]);
}

double natural_frequency(const CircuitParams& p) {
    p.validate();
    return 1.0 / std::sqrt(p.inductance * p.capacitance);
}

double damping_ratio(const CircuitParams& p) {
    p.validate();
    return 0.5 * p.resistance * std::sqrt(p.capacitance / p.inductance);
}

DischargeEnergy discharge_energy(const CircuitParams& p) {
    p.validate();
    return {0.5 * p.capacitance * p.charge_voltage * p.charge_voltage};
}

double discharge_current(const CircuitParams& p, double t) {
    double zeta = damping_ratio(p);
    if (zeta >= 1.0)
        throw OverdampedCircuit("closed-form current requires damping ratio < 1, got " +
                                std::to_string(zeta));
    double wn = natural_frequency(p);
    double f = wn * std::sqrt(1.0 - zeta * zeta) / kTwoPi;
    return p.charge_voltage / std::sqrt(1.0 - zeta * zeta) *
           std::sqrt(p.capacitance / p.inductance) * std::exp(-zeta * wn * t) *
           std::sin(kTwoPi * f * t);
}

CurrentWaveform integrate_rlc(const CircuitParams& p, double t_end, double dt) {
    p.validate();
    if (!(dt > 0.0) || !(t_end > dt))
        throw ConfigError("integrate_rlc: need dt > 0 and t_end > dt");

    // Refine to >= 200 points per (damped) period.
    double wn = natural_frequency(p);
    double zeta = damping_ratio(p);
    double freq_scale = zeta < 1.0 ? wn * std::sqrt(1.0 - zeta * zeta) / kTwoPi : wn / kTwoPi;
    double dt_int = std::min(dt, 1.0 / (200.0 * freq_scale));
    int sub = std::max(1, static_cast<int>(std::ceil(dt / dt_int)));
    double h = dt / sub;

    double inv_L = 1.0 / p.inductance;
    auto accel = [&](double current, double didt) {
        return -(p.resistance * didt + current / p.capacitance) * inv_L;
    };

    std::size_t n_out = static_cast<std::size_t>(std::ceil(t_end / dt)) + 1;
    CurrentWaveform w;
    w.times.reserve(n_out);
    w.currents.reserve(n_out);

    double current = 0.0;
    double didt = p.charge_voltage * inv_L;
    w.times.push_back(0.0);
    w.currents.push_back(current);
    for (std::size_t i = 1; i < n_out; ++i) {
        for (int s = 0; s < sub; ++s) {
            double k1i = didt;
            double k1d = accel(current, didt);
            double k2i = didt + 0.5 * h * k1d;
            double k2d = accel(current + 0.5 * h * k1i, didt + 0.5 * h * k1d);
            double k3i = didt + 0.5 * h * k2d;
            double k3d = accel(current + 0.5 * h * k2i, didt + 0.5 * h * k2d);
            double k4i = didt + h * k3d;
            double k4d = accel(current + h * k3i, didt + h * k3d);
            current += h / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i);
            didt += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        }
        w.times.push_back(static_cast<double>(i) * dt);
        w.currents.push_back(current);
    }
    return w;
}

double SinusoidFit::eval(double t) const {
    return amplitude * std::exp(-decay_rate * t) * std::sin(kTwoPi * frequency * t + phase);
}

namespace {

struct FitGuess {
    double amplitude, decay, frequency, phase;
};

double estimate_decay(const std::vector<double>& t, const std::vector<double>& y) {
    // log of the half-window RMS ratio
    const std::size_t n = t.size();
    const std::size_t half = n / 2;
    double r1 = 0.0, r2 = 0.0, t1 = 0.0, t2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) { r1 += y[i] * y[i]; t1 += t[i]; }
    for (std::size_t i = half; i < n; ++i) { r2 += y[i] * y[i]; t2 += t[i]; }
    r1 = std::sqrt(r1 / static_cast<double>(half));
    r2 = std::sqrt(r2 / static_cast<double>(n - half));
    t1 /= static_cast<double>(half);
    t2 /= static_cast<double>(n - half);
    if (r1 > 0.0 && r2 > 0.0 && t2 > t1)
        return std::max(std::log(r1 / r2) / (t2 - t1), 0.0);
    return 0.0;
}

double periodogram_peak(const std::vector<double>& t, const std::vector<double>& y) {
    const std::size_t n = t.size();
    const double span = t.back() - t.front();
    double dt_min = span;
    for (std::size_t i = 1; i < n; ++i) dt_min = std::min(dt_min, t[i] - t[i - 1]);
    // log-spaced scan keeps fine resolution at the low-frequency end
    const double f_lo = 0.25 / std::max(span, 1e-300);
    const double f_hi = std::max(0.45 / std::max(dt_min, 1e-300), 2.0 * f_lo);
    const int grid = 1200;
    std::vector<double> fs(static_cast<std::size_t>(grid)), power(static_cast<std::size_t>(grid));
    const double ratio = std::log(f_hi / f_lo) / (grid - 1);
    int best_k = 0;
    for (int k = 0; k < grid; ++k) {
        const double f = f_lo * std::exp(ratio * k);
        double cs = 0.0, sn = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double arg = kTwoPi * f * t[i];
            cs += y[i] * std::cos(arg);
            sn += y[i] * std::sin(arg);
        }
        fs[static_cast<std::size_t>(k)] = f;
        power[static_cast<std::size_t>(k)] = cs * cs + sn * sn;
        if (power[static_cast<std::size_t>(k)] > power[static_cast<std::size_t>(best_k)])
            best_k = k;
    }
    double freq = fs[static_cast<std::size_t>(best_k)];
    if (best_k > 0 && best_k + 1 < grid) {
        // parabola through the peak and its (non-uniformly spaced) neighbors
        const double x1 = fs[static_cast<std::size_t>(best_k - 1)];
        const double y1 = power[static_cast<std::size_t>(best_k - 1)];
        const double x2 = freq, y2 = power[static_cast<std::size_t>(best_k)];
        const double x3 = fs[static_cast<std::size_t>(best_k + 1)];
        const double y3 = power[static_cast<std::size_t>(best_k + 1)];
        const double den = (x2 - x1) * (y2 - y3) - (x2 - x3) * (y2 - y1);
        if (std::abs(den) > 0.0) {
            const double num = (x2 - x1) * (x2 - x1) * (y2 - y3) -
                               (x2 - x3) * (x2 - x3) * (y2 - y1);
            const double xv = x2 - 0.5 * num / den;
            if (xv > x1 && xv < x3) freq = xv;
        }
    }
    return freq;
}

// Width of the dominant hump around the global |y| maximum; a half-period
// signal never shows a spectral line, but its hump width is half the period.
double hump_width_frequency(const std::vector<double>& t, const std::vector<double>& y) {
    std::size_t peak = 0;
    for (std::size_t i = 1; i < y.size(); ++i)
        if (std::abs(y[i]) > std::abs(y[peak])) peak = i;
    const double thresh = 0.05 * std::abs(y[peak]);
    std::size_t lo = peak, hi = peak;
    while (lo > 0 && std::abs(y[lo - 1]) > thresh && y[lo - 1] * y[peak] > 0) --lo;
    while (hi + 1 < y.size() && std::abs(y[hi + 1]) > thresh && y[hi + 1] * y[peak] > 0) ++hi;
    const double width = t[hi] - t[lo];
    return width > 0 ? 0.5 / width : 0.0;
}

// Zero crossings with a +-5% hysteresis band; immune to noise chatter.
double hysteresis_crossing_frequency(const std::vector<double>& t, const std::vector<double>& y) {
    double peak = 0.0;
    for (double v : y) peak = std::max(peak, std::abs(v));
    const double band = 0.05 * peak;
    int state = 0;
    std::vector<double> flips;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const int s = y[i] > band ? 1 : y[i] < -band ? -1 : 0;
        if (s != 0 && s != state) {
            if (state != 0) flips.push_back(t[i]);
            state = s;
        }
    }
    if (flips.size() < 2) return 0.0;
    return 0.5 * static_cast<double>(flips.size() - 1) / (flips.back() - flips.front());
}

// Best-fit a*sin + b*cos at fixed frequency and decay.
void linear_amp_phase(const std::vector<double>& t, const std::vector<double>& y, double decay,
                      double freq, double& amp, double& phase) {
    double saa = 0.0, sbb = 0.0, sab = 0.0, say = 0.0, sby = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double e = std::exp(-decay * t[i]);
        const double s = e * std::sin(kTwoPi * freq * t[i]);
        const double c = e * std::cos(kTwoPi * freq * t[i]);
        saa += s * s;
        sbb += c * c;
        sab += s * c;
        say += s * y[i];
        sby += c * y[i];
    }
    const double det = saa * sbb - sab * sab;
    amp = 0.0;
    phase = 0.0;
    if (std::abs(det) > 1e-300) {
        const double a = (say * sbb - sby * sab) / det;
        const double b = (sby * saa - say * sab) / det;
        amp = std::hypot(a, b);
        phase = std::atan2(b, a);
    }
}

std::vector<FitGuess> initial_guesses(const CurrentWaveform& w) {
    const auto& t = w.times;
    const auto& y = w.currents;
    const double decay = estimate_decay(t, y);
    std::vector<double> freqs{periodogram_peak(t, y), hump_width_frequency(t, y),
                              hysteresis_crossing_frequency(t, y)};
    std::vector<FitGuess> out;
    for (double f : freqs) {
        if (!(f > 0.0)) continue;
        bool dup = false;
        for (const FitGuess& g : out)
            if (std::abs(g.frequency - f) < 0.05 * f) dup = true;
        if (dup) continue;
        FitGuess g;
        g.decay = decay;
        g.frequency = f;
        linear_amp_phase(t, y, decay, f, g.amplitude, g.phase);
        out.push_back(g);
    }
    return out;
}

} // namespace

namespace {

// Levenberg-Marquardt on (A, lambda, f, phi) from one starting point;
// returns the final sum of squared residuals.
double refine_lm(const std::vector<double>& t, const std::vector<double>& y, double par[4]) {
    const std::size_t n = t.size();
    auto model = [](const double* p, double ti) {
        return p[0] * std::exp(-p[1] * ti) * std::sin(kTwoPi * p[2] * ti + p[3]);
    };
    double lm = 1e-3;
    double prev_ss = std::numeric_limits<double>::infinity();
    double last_ss = prev_ss;
    for (int iter = 0; iter < 200; ++iter) {
        double jtj[4][4] = {};
        double jtr[4] = {};
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double e = std::exp(-par[1] * t[i]);
            double arg = kTwoPi * par[2] * t[i] + par[3];
            double s = std::sin(arg), c = std::cos(arg);
            double r = y[i] - par[0] * e * s;
            double jac[4] = {e * s,
                             -par[0] * t[i] * e * s,
                             par[0] * e * c * kTwoPi * t[i],
                             par[0] * e * c};
            for (int a = 0; a < 4; ++a) {
                jtr[a] += jac[a] * r;
                for (int b = 0; b < 4; ++b) jtj[a][b] += jac[a] * jac[b];
            }
            ss += r * r;
        }
        last_ss = ss;
        if (std::abs(prev_ss - ss) <= 1e-14 * ss) break;
        prev_ss = ss;

        // Solve (JtJ + lm*diag) dp = Jtr by Gaussian elimination.
        double a[4][5];
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) a[r][c] = jtj[r][c];
            a[r][r] += lm * (jtj[r][r] > 0.0 ? jtj[r][r] : 1.0);
            a[r][4] = jtr[r];
        }
        bool singular = false;
        for (int col = 0; col < 4; ++col) {
            int piv = col;
            for (int r = col + 1; r < 4; ++r)
                if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
            if (std::abs(a[piv][col]) < 1e-300) { singular = true; break; }
            std::swap(a[piv], a[col]);
            for (int r = col + 1; r < 4; ++r) {
                double fac = a[r][col] / a[col][col];
                for (int c = col; c < 5; ++c) a[r][c] -= fac * a[col][c];
            }
        }
        if (singular) { lm *= 10.0; continue; }
        double dp[4];
        for (int r = 3; r >= 0; --r) {
            double v = a[r][4];
            for (int c = r + 1; c < 4; ++c) v -= a[r][c] * dp[c];
            dp[r] = v / a[r][r];
        }

        double trial[4] = {par[0] + dp[0], par[1] + dp[1], par[2] + dp[2], par[3] + dp[3]};
        double trial_ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double r = y[i] - model(trial, t[i]);
            trial_ss += r * r;
        }
        if (trial_ss < ss) {
            for (int k = 0; k < 4; ++k) par[k] = trial[k];
            lm = std::max(lm * 0.3, 1e-12);
        } else {
            lm *= 10.0;
        }
    }
    return last_ss;
}

} // namespace

SinusoidFit fit_damped_sinusoid(const CurrentWaveform& w, double max_residual) {
    w.validate();
    const auto& t = w.times;
    const auto& y = w.currents;
    std::size_t n = t.size();

    double rms = 0.0;
    for (double v : y) rms += v * v;
    rms = std::sqrt(rms / static_cast<double>(n));
    if (rms == 0.0) throw FitDiverged("fit_damped_sinusoid: zero signal");

    // Short records (down to a half-period) admit several plausible
    // frequency guesses; refine each and keep the best.
    std::vector<FitGuess> guesses = initial_guesses(w);
    if (guesses.empty()) guesses.push_back({rms * std::numbers::sqrt2, 0.0,
                                            1.0 / (t.back() - t.front()), 0.0});
    double best[4] = {};
    double best_ss = std::numeric_limits<double>::infinity();
    for (const FitGuess& g : guesses) {
        double par[4] = {g.amplitude != 0.0 ? g.amplitude : rms * std::numbers::sqrt2,
                         g.decay, g.frequency, g.phase};
        const double ss = refine_lm(t, y, par);
        if (ss < best_ss) {
            best_ss = ss;
            for (int k = 0; k < 4; ++k) best[k] = par[k];
        }
    }
    double* par = best;

    // Canonical form: positive amplitude and frequency, phase in (-pi, pi].
    if (par[2] < 0.0) { par[2] = -par[2]; par[3] = -par[3]; par[0] = -par[0]; }
    if (par[0] < 0.0) { par[0] = -par[0]; par[3] += std::numbers::pi; }
    par[3] = std::remainder(par[3], kTwoPi);

    SinusoidFit fit;
    fit.amplitude = par[0];
    fit.decay_rate = par[1];
    fit.frequency = par[2];
    fit.phase = par[3];
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = y[i] - fit.eval(t[i]);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / static_cast<double>(n)) / rms;
    if (!(fit.residual <= max_residual))
        throw FitDiverged("fit_damped_sinusoid: residual " + std::to_string(fit.residual) +
                          " exceeds " + std::to_string(max_residual));
    return fit;
}

CurrentWaveform load_waveform_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open waveform file " + path, 0);

    CurrentWaveform w;
    double t_scale = 1e-6, i_scale = 1e3; // default microseconds, kiloamps
    std::string line;
    int lineno = 0;
    bool header_checked = false;
    while (std::getline(in, line)) {
        ++lineno;
        // Trim whitespace and skip blanks/comments.
        auto first = line.find_first_not_of(" \t\r\n");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r\n");
        std::string body = line.substr(first, last - first + 1);
        if (body.empty() || body[0] == '#') continue;

        if (!header_checked) {
            header_checked = true;
            if (body.find_first_not_of("0123456789+-.eE, \t") != std::string::npos) {
                if (body == "time_us,current_kA") {
                    t_scale = 1e-6; i_scale = 1e3;
                } else if (body == "time_s,current_A") {
                    t_scale = 1.0; i_scale = 1.0;
                } else {
                    throw ParseError("unrecognized waveform header '" + body + "'", lineno);
                }
                continue;
            }
        }

        std::size_t comma = body.find(',');
        if (comma == std::string::npos)
            throw ParseError("expected two comma-separated columns", lineno);
        try {
            std::size_t used = 0;
            double tv = std::stod(body.substr(0, comma), &used);
            double iv = std::stod(body.substr(comma + 1), &used);
            w.times.push_back(tv * t_scale);
            w.currents.push_back(iv * i_scale);
        } catch (const std::exception&) {
            throw ParseError("malformed number in waveform row", lineno);
        }
    }
    w.validate();
    return w;
}

void save_waveform_csv(const CurrentWaveform& w, const std::string& path, WaveformUnits units) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path + " for writing", 0);
    double t_scale = units == WaveformUnits::MicrosecondsKiloamps ? 1e6 : 1.0;
    double i_scale = units == WaveformUnits::MicrosecondsKiloamps ? 1e-3 : 1.0;
    out << (units == WaveformUnits::MicrosecondsKiloamps ? "time_us,current_kA"
                                                         : "time_s,current_A")
        << "\n";
    char buf[64];
    for (std::size_t i = 0; i < w.times.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g", w.times[i] * t_scale,
                      w.currents[i] * i_scale);
        out << buf << "\n";
    }
}

} // namespace emfp
