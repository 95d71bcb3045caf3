#pragma once

#include <stdexcept>
#include <string>

namespace emfp {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OverdampedCircuit : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FitDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    int line = 0;
    ParseError(const std::string& msg, int line_)
        : std::runtime_error(msg + " (line " + std::to_string(line_) + ")"), line(line_) {}
};

struct NonMonotonicTime : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularPoint : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidGeometry : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LayoutOverlap : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NewtonNoConvergence : std::runtime_error {
    double residual = 0.0;
    NewtonNoConvergence(const std::string& msg, double res)
        : std::runtime_error(msg + " (residual " + std::to_string(res) + ")"), residual(res) {}
};

struct UnstableRun : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace emfp
