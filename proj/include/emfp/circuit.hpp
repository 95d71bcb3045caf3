#pragma once

#include <optional>
#include <string>
#include <vector>

#include "emfp/errors.hpp"

namespace emfp {

/// Optional split of the lumped circuit into machine-internal and
/// coil+workpiece equivalent parts. Stored for bookkeeping only; the
/// discharge is always solved on the lumped L, R.
struct CircuitBreakdown {
    double machine_inductance = 0.0;    // H
    double machine_resistance = 0.0;    // Ohm
    double equivalent_inductance = 0.0; // H, coil + workpiece aggregate
    double equivalent_resistance = 0.0; // Ohm
    double coil_inductance = 0.0;       // H
    double coil_resistance = 0.0;       // Ohm
    double workpiece_inductance = 0.0;  // H
    double workpiece_resistance = 0.0;  // Ohm
};

/// Lumped RLC discharge circuit, constant over the pulse.
struct CircuitParams {
    double capacitance = 0.0;    // F
    double inductance = 0.0;     // H, total
    double resistance = 0.0;     // Ohm, total
    double charge_voltage = 0.0; // V
    std::optional<CircuitBreakdown> breakdown;

    void validate() const;
};

struct CurrentWaveform {
    std::vector<double> times;    // s, strictly increasing
    std::vector<double> currents; // A
    // Past the last sample: hold the final value, or return zero.
    bool hold_after_end = true;

    void validate() const;
    /// Linear interpolation; zero before the first sample.
    double eval(double t) const;
    double duration() const { return times.empty() ? 0.0 : times.back(); }
};

struct DischargeEnergy {
    double joules = 0.0;
};

struct SinusoidFit {
    double amplitude = 0.0;  // A
    double decay_rate = 0.0; // 1/s, equals zeta * omega_n
    double frequency = 0.0;  // Hz
    double phase = 0.0;      // rad
    double residual = 0.0;   // rms misfit / rms signal

    double eval(double t) const;
};

double natural_frequency(const CircuitParams& p);
double damping_ratio(const CircuitParams& p);
DischargeEnergy discharge_energy(const CircuitParams& p);

/// Closed-form damped sinusoid. Valid only underdamped; throws
/// OverdampedCircuit at damping ratio >= 1.
double discharge_current(const CircuitParams& p, double t);

/// RK4 integration of the series-RLC current ODE from I(0)=0,
/// dI/dt(0)=V0/L. The internal step is refined to at least 200 points
/// per period so this can serve as the reference for the closed form.
CurrentWaveform integrate_rlc(const CircuitParams& p, double t_end, double dt);

/// Least-squares fit of A*exp(-lambda*t)*sin(2*pi*f*t + phi).
/// Throws FitDiverged when the relative residual exceeds max_residual.
SinusoidFit fit_damped_sinusoid(const CurrentWaveform& w, double max_residual = 0.2);

enum class WaveformUnits { MicrosecondsKiloamps, SecondsAmps };

/// Two-column CSV, optional `time_us,current_kA` / `time_s,current_A`
/// header naming the units; default microseconds / kiloamps.
CurrentWaveform load_waveform_csv(const std::string& path);
void save_waveform_csv(const CurrentWaveform& w, const std::string& path,
                       WaveformUnits units = WaveformUnits::MicrosecondsKiloamps);

} // namespace emfp
