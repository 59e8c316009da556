#pragma once

// Newton-Raphson on the linearized MNA system and the fixed-step transient
// driver. A TransientSolver owns one circuit's state and advances it one time
// point at a time; boundary ports get their equations from the caller.

#include "mtm/circuit.hpp"
#include "mtm/devices.hpp"
#include "mtm/errors.hpp"
#include "mtm/linalg.hpp"
#include "mtm/tline.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mtm {

struct NrTolerances {
    double reltol = 1e-6;
    double vntol = 1e-6;
    double abstol = 1e-12;
    int maxiter = 100;
    double junction_step = 0.5; ///< max change of a diode junction voltage per iteration
};

struct SolverOptions {
    NrTolerances nr;
    double gmin = 1e-12;
    IntegrationRule rule = IntegrationRule::trapezoidal;
    bool be_startup = true; ///< first step (t = dt) uses backward Euler
};

struct NewtonResult {
    std::vector<double> x;
    int iterations = 0;
};

/// Solves F(x) = 0 given `build(x)`, which returns the system linearized at x.
/// A linear problem stops after one solve. Converged when every update is within
/// vntol + reltol*|x| and the node-row residual at the new point is within abstol.
template <class Builder>
NewtonResult newton_solve(Builder&& build, std::vector<double> v0, const NrTolerances& tol, bool linear = false) {
    if (!(tol.reltol > 0.0 && tol.vntol > 0.0 && tol.abstol > 0.0 && tol.maxiter > 0))
        throw std::invalid_argument("Newton tolerances must be positive");
    for (double v : v0)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite initial guess");

    std::vector<double> x = std::move(v0);
    bool small_update = false;
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 0;; ++it) {
        const MnaSystem& sys = build(x);
        if (it > 0) {
            residual = sys.kcl_residual(x);
            if (small_update && !sys.limited && residual <= tol.abstol) return {std::move(x), it};
        }
        if (it == tol.maxiter) throw NoConvergence(it, residual);
        auto next = lu_solve(sys.a, sys.b);
        if (linear) return {std::move(next), 1};
        small_update = true;
        for (std::size_t k = 0; k < next.size(); ++k) {
            if (!std::isfinite(next[k])) throw NoConvergence(it + 1, std::numeric_limits<double>::infinity());
            if (std::abs(next[k] - x[k]) > tol.vntol + tol.reltol * std::abs(next[k])) small_update = false;
        }
        x = std::move(next);
    }
}

/// Value copy of everything a TransientSolver changes while stepping.
struct SolverSnapshot {
    long step = 0;
    std::vector<double> x;
    std::vector<DeviceState> states;
    std::vector<WaveformHistory> ports;
};

class TransientSolver {
public:
    TransientSolver(Circuit circuit, double dt, SolverOptions options = {})
        : circuit_(std::move(circuit)), dt_(dt), opt_(options) {
        if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
        const std::size_t n = circuit_.size();
        x_.assign(n, 0.0);
        states_.assign(circuit_.elements().size(), DeviceState{});
        junction_.assign(circuit_.elements().size(), 0.0);
        ports_.assign(circuit_.ports().size(), WaveformHistory{});
        equations_.assign(circuit_.ports().size(), PortEquation{});
        sys_.n = n;
        sys_.kcl_rows = circuit_.node_count();
        sys_.a = DenseMatrix(n);
        sys_.b.assign(n, 0.0);
        for (const auto& l : circuit_.lines()) {
            const double tau = l.params.delay();
            const long m = static_cast<long>(std::round(tau / dt));
            if (m < 1) throw StepTooLarge(dt, tau);
            models_.emplace_back(l.params, dt, m, !l.params.lossless());
        }
    }

    const Circuit& circuit() const noexcept { return circuit_; }
    double dt() const noexcept { return dt_; }
    long step() const noexcept { return step_; }
    double time() const noexcept { return static_cast<double>(step_) * dt_; }
    std::span<const double> solution() const noexcept { return x_; }
    const WaveformHistory& port_history(std::size_t port) const { return ports_.at(port); }
    const std::vector<LineModel>& line_models() const noexcept { return models_; }

    IntegrationRule rule_for(long n) const {
        return n == 1 && opt_.be_startup ? IntegrationRule::backward_euler : opt_.rule;
    }

    /// Advances to time point step()+1. `boundary` holds one equation per boundary port.
    /// Returns the number of linear solves used.
    int advance(std::span<const PortEquation> boundary = {}) {
        if (boundary.size() != circuit_.boundary_port_count())
            throw std::invalid_argument("expected " + std::to_string(circuit_.boundary_port_count()) +
                                        " boundary equations");
        const long n = step_ + 1;
        const StampContext ctx{static_cast<double>(n) * dt_, dt_, rule_for(n), false};

        const auto& lines = circuit_.lines();
        for (std::size_t k = 0; k < lines.size(); ++k) {
            const auto& l = lines[k];
            equations_[l.port1] = models_[k].equation(ports_[l.port1], ports_[l.port2], n);
            equations_[l.port2] = models_[k].equation(ports_[l.port2], ports_[l.port1], n);
        }
        std::copy(boundary.begin(), boundary.end(), equations_.begin() + static_cast<long>(circuit_.first_boundary_port()));

        NewtonResult r;
        try {
            r = circuit_.linear() ? solve_linear(ctx) : solve_nonlinear(ctx);
        } catch (const NoConvergence& e) {
            throw NoConvergence(e.iterations(), e.residual(), ctx.t);
        }
        x_ = std::move(r.x);
        for (std::size_t k = 0; k < states_.size(); ++k) {
            const auto& e = circuit_.elements()[k];
            if (e.reactive()) update_state(e, ctx, x_, states_[k]);
            if (e.kind == ElementKind::diode) junction_[k] = node_voltage(x_, e.nodes[0]) - node_voltage(x_, e.nodes[1]);
        }
        for (std::size_t k = 0; k < ports_.size(); ++k) {
            const auto& p = circuit_.ports()[k];
            ports_[k].push(node_voltage(x_, p.pos) - node_voltage(x_, p.neg), x_[static_cast<std::size_t>(p.branch)]);
        }
        step_ = n;
        return r.iterations;
    }

    SolverSnapshot snapshot() const { return {step_, x_, states_, ports_}; }

    void restore(const SolverSnapshot& s) {
        step_ = s.step;
        x_ = s.x;
        states_ = s.states;
        ports_ = s.ports;
        for (std::size_t k = 0; k < states_.size(); ++k) {
            const auto& e = circuit_.elements()[k];
            if (e.kind == ElementKind::diode) junction_[k] = node_voltage(x_, e.nodes[0]) - node_voltage(x_, e.nodes[1]);
        }
    }

private:
    AssemblyInputs inputs(const StampContext& ctx, std::span<const double> guess, std::span<const double> junction) const {
        return {ctx, states_, guess, equations_, junction, opt_.gmin};
    }

    NewtonResult solve_linear(const StampContext& ctx) {
        // The matrix depends only on the rule and the port (a, b) coefficients.
        bool reuse = lu_ && lu_rule_ == ctx.rule && lu_ports_.size() == equations_.size();
        for (std::size_t k = 0; reuse && k < equations_.size(); ++k)
            reuse = lu_ports_[k].a == equations_[k].a && lu_ports_[k].b == equations_[k].b;
        if (reuse) {
            assemble_into(circuit_, inputs(ctx, x_, {}), nullptr, sys_.b);
        } else {
            assemble_into(circuit_, inputs(ctx, x_, {}), &sys_.a, sys_.b);
            lu_.emplace(sys_.a);
            lu_rule_ = ctx.rule;
            lu_ports_ = equations_;
        }
        return {lu_->solve(sys_.b), 1};
    }

    NewtonResult solve_nonlinear(const StampContext& ctx) {
        std::vector<double> lin = junction_;
        const auto& els = circuit_.elements();
        bool first = true;
        auto build = [&](const std::vector<double>& x) -> const MnaSystem& {
            sys_.limited = false;
            if (!first) {
                for (std::size_t k = 0; k < els.size(); ++k) {
                    if (els[k].kind != ElementKind::diode) continue;
                    const double proposed = node_voltage(x, els[k].nodes[0]) - node_voltage(x, els[k].nodes[1]);
                    const double v = limit_junction(proposed, lin[k], opt_.nr.junction_step);
                    if (v != proposed) sys_.limited = true;
                    lin[k] = v;
                }
            }
            first = false;
            assemble_into(circuit_, inputs(ctx, x, lin), &sys_.a, sys_.b);
            return sys_;
        };
        return newton_solve(build, x_, opt_.nr, false);
    }

    Circuit circuit_;
    double dt_;
    SolverOptions opt_;
    long step_ = 0;
    std::vector<double> x_;
    std::vector<DeviceState> states_;
    std::vector<double> junction_;
    std::vector<WaveformHistory> ports_;
    std::vector<PortEquation> equations_;
    std::vector<LineModel> models_;
    MnaSystem sys_;
    std::optional<LuFactorization> lu_;
    IntegrationRule lu_rule_ = IntegrationRule::trapezoidal;
    std::vector<PortEquation> lu_ports_;
};

struct TransientResult {
    std::vector<double> time;
    std::vector<std::string> names;
    std::vector<std::vector<double>> traces; ///< traces[k][n] is names[k] at time[n]
    std::vector<int> nr_iterations;          ///< per time point; 0 at the initial point

    bool has(std::string_view name) const { return index_of(name).has_value(); }

    const std::vector<double>& trace(std::string_view name) const {
        const auto k = index_of(name);
        if (!k) throw std::out_of_range("no trace named " + std::string(name));
        return traces[*k];
    }

    std::optional<std::size_t> index_of(std::string_view name) const {
        for (std::size_t k = 0; k < names.size(); ++k)
            if (names[k] == name) return k;
        return std::nullopt;
    }

    /// Starts a result with one column per unknown of `c`.
    static TransientResult for_circuit(const Circuit& c) {
        TransientResult r;
        r.names = c.unknown_labels();
        r.traces.resize(r.names.size());
        return r;
    }

    void record(double t, std::span<const double> x, int iterations) {
        time.push_back(t);
        for (std::size_t k = 0; k < traces.size(); ++k) traces[k].push_back(x[k]);
        nr_iterations.push_back(iterations);
    }

    bool operator==(const TransientResult&) const = default;
};

/// Number of steps covering `span` at `dt`, tolerating rounding in span/dt.
inline long step_count(double span, double dt) {
    return static_cast<long>(std::ceil(span / dt - 1e-9));
}

/// Boundary port equation supplier: step index and the port's own history so far.
using BoundaryFn = std::function<PortEquation(long step, const WaveformHistory& own)>;

struct PortBinding {
    std::string port; ///< boundary port label
    BoundaryFn equation;
};

struct TimeSpan {
    double t0 = 0.0;
    double t1 = 0.0;
};

/// Advances `circuit` over [t0, t1] from `initial` (zero state when null).
inline TransientResult run_transient(const Circuit& circuit, TimeSpan span, double dt,
                                     const SolverSnapshot* initial = nullptr,
                                     std::span<const PortBinding> bindings = {}, SolverOptions options = {}) {
    const double steps_real = (span.t1 - span.t0) / dt;
    const long steps = static_cast<long>(std::round(steps_real));
    if (steps < 1 || std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * std::max(1.0, steps_real))
        throw std::invalid_argument("time span is not a positive multiple of the step");

    TransientSolver solver(circuit, dt, options);
    if (initial) solver.restore(*initial);
    const long first = step_count(span.t0, dt);
    if (solver.step() != first) throw std::invalid_argument("initial state does not match t0");

    std::vector<const BoundaryFn*> fns(circuit.boundary_port_count(), nullptr);
    for (const auto& b : bindings) {
        const auto idx = circuit.port_index(b.port);
        if (!idx || *idx < circuit.first_boundary_port()) throw std::invalid_argument("unknown boundary port " + b.port);
        fns[*idx - circuit.first_boundary_port()] = &b.equation;
    }
    for (const auto* f : fns)
        if (!f) throw std::invalid_argument("boundary port without a binding");

    auto result = TransientResult::for_circuit(circuit);
    result.record(static_cast<double>(first) * dt, solver.solution(), 0);
    std::vector<PortEquation> eqs(fns.size());
    for (long s = 1; s <= steps; ++s) {
        const long n = first + s;
        for (std::size_t k = 0; k < fns.size(); ++k)
            eqs[k] = (*fns[k])(n, solver.port_history(circuit.first_boundary_port() + k));
        const int it = solver.advance(eqs);
        result.record(static_cast<double>(n) * dt, solver.solution(), it);
    }
    return result;
}

/// Transient run of a closed circuit from zero state over [0, stop].
inline TransientResult run_transient(const Circuit& circuit, double dt, double stop, SolverOptions options = {}) {
    const long steps = step_count(stop, dt);
    return run_transient(circuit, {0.0, static_cast<double>(steps) * dt}, dt, nullptr, {}, options);
}

/// DC operating point: capacitors open, inductors shorted, lossless lines as
/// their steady-state delay relations, sources at t = 0.
inline std::vector<double> dc_operating_point(const Circuit& circuit, SolverOptions options = {}) {
    const StampContext ctx{0.0, 0.0, options.rule, true};
    MnaSystem sys;
    sys.n = circuit.size();
    sys.kcl_rows = circuit.node_count();
    sys.a = DenseMatrix(sys.n);
    sys.b.assign(sys.n, 0.0);
    std::vector<double> lin(circuit.elements().size(), 0.0);
    const auto& els = circuit.elements();
    bool first = true;
    auto build = [&](const std::vector<double>& x) -> const MnaSystem& {
        sys.limited = false;
        if (!first) {
            for (std::size_t k = 0; k < els.size(); ++k) {
                if (els[k].kind != ElementKind::diode) continue;
                const double proposed = node_voltage(x, els[k].nodes[0]) - node_voltage(x, els[k].nodes[1]);
                const double v = limit_junction(proposed, lin[k], options.nr.junction_step);
                if (v != proposed) sys.limited = true;
                lin[k] = v;
            }
        }
        first = false;
        assemble_into(circuit, {ctx, {}, x, {}, lin, options.gmin}, &sys.a, sys.b);
        return sys;
    };
    return newton_solve(build, std::vector<double>(sys.n, 0.0), options.nr, circuit.linear()).x;
}

} // namespace mtm
