#pragma once

// Exception types shared by every module.

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mtm {

/// Malformed or invalid netlist text. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class SingularMatrix : public std::runtime_error {
public:
    SingularMatrix(std::size_t column, double pivot)
        : std::runtime_error("singular matrix at column " + std::to_string(column) +
                             " (pivot " + std::to_string(pivot) + ")"),
          column_(column) {}

    std::size_t column() const noexcept { return column_; }

private:
    std::size_t column_;
};

/// A node whose only matrix contribution would be gmin.
class StructuralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoConvergence : public std::runtime_error {
public:
    NoConvergence(int iterations, double residual, double time = 0.0)
        : std::runtime_error("Newton-Raphson did not converge after " + std::to_string(iterations) +
                             " iterations (residual " + std::to_string(residual) + ", t=" +
                             std::to_string(time) + ")"),
          iterations_(iterations), residual_(residual), time_(time) {}

    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }
    double time() const noexcept { return time_; }

private:
    int iterations_;
    double residual_;
    double time_;
};

/// Requested step violates step <= l*sqrt(LC) for the shortest interfacial wire.
class StepTooLarge : public std::runtime_error {
public:
    StepTooLarge(double requested, double max_step)
        : std::runtime_error("time step " + std::to_string(requested) +
                             " s exceeds the shortest interfacial delay " +
                             std::to_string(max_step) + " s"),
          requested_(requested), max_step_(max_step) {}

    double requested() const noexcept { return requested_; }
    double max_step() const noexcept { return max_step_; }

private:
    double requested_;
    double max_step_;
};

/// Line delay is not an integer multiple of the time step.
class OffGridDelay : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Wire-format or ordering violation on a message stream.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure inside a distributed run, tagged with where it happened.
class RunError : public std::runtime_error {
public:
    RunError(const std::string& what, std::size_t window, std::size_t subcircuit, bool nonconvergence = false)
        : std::runtime_error("window " + std::to_string(window) + ", subcircuit " +
                             std::to_string(subcircuit) + ": " + what),
          window_(window), subcircuit_(subcircuit), nonconvergence_(nonconvergence) {}

    std::size_t window() const noexcept { return window_; }
    std::size_t subcircuit() const noexcept { return subcircuit_; }
    /// The worker's Newton iteration failed (as opposed to a transport or setup error).
    bool nonconvergence() const noexcept { return nonconvergence_; }

private:
    std::size_t window_;
    std::size_t subcircuit_;
    bool nonconvergence_;
};

} // namespace mtm
