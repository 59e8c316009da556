#pragma once

// Windowed distributed transient analysis over a torn circuit.
//
// One worker thread per subcircuit. In window w every worker advances its
// subcircuit over steps [wK+1, (w+1)K]; each boundary port obeys
//
//   a*u_p(t) + b*i_p(t) = rhs(peer samples at t - tau and earlier)
//
// and since K*dt <= tau the peer samples it needs were delivered in earlier
// windows. Workers then send their window of (u, i) samples to the peer and
// meet at a barrier before the next window. The waveform-relaxation baseline
// reuses the same loop but repeats each window until the exchanged waveforms
// stop changing.

#include "mtm/circuit.hpp"
#include "mtm/errors.hpp"
#include "mtm/partition.hpp"
#include "mtm/solver.hpp"
#include "mtm/tline.hpp"
#include "mtm/transport.hpp"
#include "mtm/wire_format.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mtm {

struct WrSettings {
    int max_iterations = 50;
    double tol = 1e-6;        ///< on max |du| + Z |di| over ports and samples
    long window_multiple = 1; ///< relaxation window in units of the plan's window
};

/// Called before a worker solves a window, with the peer history it will read.
/// Samples it appends are removed again after the window is solved.
using LookaheadHook =
    std::function<void(std::size_t subcircuit, std::size_t window, std::size_t wire, WaveformHistory& peer)>;

/// Called on every message after it is received and before it is used.
using DeliveryHook = std::function<void(PortWaveformMessage&)>;

struct MtmConfig {
    TransportKind transport = TransportKind::inproc;
    StepPlan plan;
    double stop = 0.0;
    SolverOptions solver;
    WrSettings wr;
    LookaheadHook peer_lookahead_hook;
    DeliveryHook delivery_hook;
};

/// Plan from a requested step; the window is the partition's shortest wire delay.
inline MtmConfig make_config(const Partition& part, double requested_step, double stop) {
    MtmConfig cfg;
    cfg.plan = plan_step(requested_step, part.tau_min);
    cfg.stop = stop;
    return cfg;
}

struct RunStats {
    long windows = 0;
    long k_distri = 0; ///< synchronized solve-and-exchange rounds
    long messages = 0;
    std::vector<long> window_iterations; ///< rounds per window
    std::vector<long> nr_iterations;     ///< linear solves per window, all workers and rounds
    double compute_seconds = 0.0;        ///< summed over workers
    double exchange_seconds = 0.0;       ///< summed over workers, including barrier waits
    double wall_seconds = 0.0;
};

struct MtmResult {
    std::vector<TransientResult> subcircuits;
    RunStats stats;

    /// All subcircuit traces on one time axis; names are unique across subcircuits.
    TransientResult stitched() const {
        TransientResult out;
        if (subcircuits.empty()) return out;
        out.time = subcircuits.front().time;
        out.nr_iterations.assign(out.time.size(), 0);
        for (const auto& r : subcircuits) {
            for (std::size_t k = 0; k < r.names.size(); ++k) {
                if (out.has(r.names[k])) continue;
                out.names.push_back(r.names[k]);
                out.traces.push_back(r.traces[k]);
            }
            for (std::size_t n = 0; n < r.nr_iterations.size() && n < out.nr_iterations.size(); ++n)
                out.nr_iterations[n] += r.nr_iterations[n];
        }
        return out;
    }
};

/// Golden reference: the whole circuit on one solver, lines as internal port pairs.
inline TransientResult run_monolithic(const Netlist& net, const MtmConfig& cfg) {
    return run_transient(Circuit::compile(net), cfg.plan.dt, cfg.stop, cfg.solver);
}

namespace detail {

enum class RunMode { mtm, relaxation };

struct WorkerPort {
    std::size_t wire = 0;
    int port = 1;          ///< line port this worker owns
    std::size_t boundary = 0; ///< circuit port index
    std::size_t out_stream = 0;
    std::size_t in_stream = 0;
    double z = 0.0;
    LineModel model;
    WaveformHistory peer;
    std::vector<PortSample> previous; ///< last relaxation iterate received
};

inline MtmResult run_windows(const Partition& part, const MtmConfig& cfg, bool lossy, RunMode mode) {
    const auto t_start = std::chrono::steady_clock::now();
    const double dt = cfg.plan.dt;
    if (!(dt > 0.0) || cfg.plan.k < 1) throw std::invalid_argument("invalid step plan");
    if (cfg.stop < cfg.plan.window * (1.0 - 1e-9)) throw std::invalid_argument("stop time shorter than one window");
    if (mode == RunMode::mtm) {
        for (const auto& d : validate_step(cfg.plan, part))
            if (d.severity == Diagnostic::Severity::error) throw std::invalid_argument(d.message);
    }
    if (mode == RunMode::relaxation && (cfg.wr.window_multiple < 1 || cfg.wr.max_iterations < 1))
        throw std::invalid_argument("invalid relaxation settings");

    const long kx = mode == RunMode::relaxation ? cfg.plan.k * cfg.wr.window_multiple : cfg.plan.k;
    const long total_steps = step_count(cfg.stop, dt);
    const long windows = (total_steps + kx - 1) / kx;
    const std::size_t subs = part.subcircuits.size();

    // Compile each subcircuit with its torn-wire ends as boundary ports.
    std::vector<Circuit> circuits;
    std::vector<std::vector<WorkerPort>> ports(subs);
    for (std::size_t s = 0; s < subs; ++s) {
        std::vector<BoundaryPortSpec> specs;
        for (std::size_t w = 0; w < part.wires.size(); ++w) {
            const auto& wire = part.wires[w];
            if (!lossy && !wire.params.lossless())
                throw std::invalid_argument("wire " + wire.name + " is lossy; use the lossy run");
            const auto steps = snap_delay(wire.delay(), dt).steps;
            if (steps < 1 || (mode == RunMode::mtm && steps < cfg.plan.k)) throw StepTooLarge(cfg.plan.window, wire.delay());
            for (int p : {1, 2}) {
                const auto& end = p == 1 ? wire.side_a : wire.side_b;
                if (end.subcircuit != s) continue;
                specs.push_back({wire.port_label(p), end.node, end.ref});
                ports[s].push_back({w, p, 0, 2 * w + static_cast<std::size_t>(p - 1),
                                    2 * w + static_cast<std::size_t>(2 - p), wire.params.impedance(),
                                    LineModel(wire.params, dt, steps, lossy), WaveformHistory{}, {}});
            }
        }
        circuits.push_back(Circuit::compile(part.subcircuits[s], specs));
        for (auto& wp : ports[s]) wp.boundary = *circuits.back().port_index(part.wires[wp.wire].port_label(wp.port));
    }

    auto transport = make_transport(cfg.transport, 2 * part.wires.size());
    MtmResult result;
    result.subcircuits.resize(subs);
    auto& stats = result.stats;

    std::atomic<bool> abort{false};
    std::mutex mu;
    std::exception_ptr error;
    std::vector<double> change(subs, 0.0);
    std::vector<long> solves(subs, 0);
    long rounds_in_window = 0;
    long nr_in_window = 0;
    bool converged = false;
    bool relaxation_failed = false;

    auto on_round = [&]() noexcept {
        ++stats.k_distri;
        ++rounds_in_window;
        stats.messages += static_cast<long>(2 * part.wires.size());
        double worst = 0.0;
        for (std::size_t s = 0; s < subs; ++s) {
            worst = std::max(worst, change[s]);
            nr_in_window += solves[s];
        }
        converged = mode == RunMode::mtm || worst <= cfg.wr.tol;
        if (converged) {
            ++stats.windows;
            stats.window_iterations.push_back(rounds_in_window);
            stats.nr_iterations.push_back(nr_in_window);
            rounds_in_window = 0;
            nr_in_window = 0;
        } else if (rounds_in_window >= cfg.wr.max_iterations) {
            relaxation_failed = true;
        }
    };
    std::barrier sync(static_cast<std::ptrdiff_t>(subs), on_round);

    auto worker = [&](std::size_t s) {
        using clock = std::chrono::steady_clock;
        double compute = 0.0, exchange_time = 0.0;
        long window = 0;
        try {
            TransientSolver solver(circuits[s], dt, cfg.solver);
            auto& out = result.subcircuits[s];
            out = TransientResult::for_circuit(circuits[s]);
            out.record(0.0, solver.solution(), 0);

            auto& mine = ports[s];
            std::vector<PortEquation> eqs(mine.size());
            std::vector<std::vector<double>> rows;
            std::vector<int> row_iterations;
            std::uint32_t round_id = 0;

            for (window = 0; window < windows; ++window) {
                const long first = window * kx + 1;
                const long last = (window + 1) * kx;
                SolverSnapshot start;
                if (mode == RunMode::relaxation) {
                    start = solver.snapshot();
                    // First guess for the peer inside the window: its last known value held.
                    for (auto& wp : mine) {
                        const long have = static_cast<long>(wp.peer.size()) - 1;
                        for (long n = have + 1; n <= last; ++n) wp.peer.push(wp.peer.u(have), wp.peer.i(have));
                    }
                }
                for (long round = 0;; ++round) {
                    const std::uint32_t message_id = round_id++;
                    if (abort.load()) throw Aborted();
                    if (round > 0) solver.restore(start);
                    rows.clear();
                    row_iterations.clear();
                    long used = 0;

                    const auto t0 = clock::now();
                    std::vector<std::size_t> kept(mine.size());
                    for (std::size_t k = 0; k < mine.size(); ++k) {
                        kept[k] = mine[k].peer.size();
                        if (cfg.peer_lookahead_hook)
                            cfg.peer_lookahead_hook(s, static_cast<std::size_t>(window), mine[k].wire, mine[k].peer);
                    }
                    for (long n = first; n <= last; ++n) {
                        for (std::size_t k = 0; k < mine.size(); ++k) {
                            auto& wp = mine[k];
                            try {
                                eqs[k] = wp.model.equation(solver.port_history(wp.boundary), wp.peer, n);
                            } catch (const std::out_of_range&) {
                                throw std::logic_error("boundary equation read an undelivered peer sample");
                            }
                        }
                        const int it = solver.advance(eqs);
                        used += it;
                        rows.emplace_back(solver.solution().begin(), solver.solution().end());
                        row_iterations.push_back(it);
                    }
                    for (std::size_t k = 0; k < mine.size(); ++k) mine[k].peer.truncate(kept[k]);
                    const auto t1 = clock::now();

                    for (const auto& wp : mine) {
                        PortWaveformMessage m;
                        m.window = message_id;
                        m.wire = static_cast<std::uint16_t>(wp.wire);
                        m.port = static_cast<std::uint8_t>(wp.port);
                        m.flags = mode == RunMode::relaxation ? PortWaveformMessage::kFlagRelaxation : 0;
                        const auto& own = solver.port_history(wp.boundary);
                        for (long n = first; n <= last; ++n) m.samples.push_back({own.u(n), own.i(n)});
                        transport->send(m);
                    }
                    double local_change = 0.0;
                    for (auto& wp : mine) {
                        auto m = transport->receive(wp.in_stream, &abort);
                        if (cfg.delivery_hook) cfg.delivery_hook(m);
                        if (m.samples.size() != static_cast<std::size_t>(kx))
                            throw ProtocolError("window carries " + std::to_string(m.samples.size()) +
                                                " samples, expected " + std::to_string(kx));
                        if (mode == RunMode::mtm) {
                            for (const auto& smp : m.samples) wp.peer.push(smp.u, smp.i);
                            continue;
                        }
                        wp.peer.truncate(static_cast<std::size_t>(first));
                        for (const auto& smp : m.samples) wp.peer.push(smp.u, smp.i);
                        if (round == 0) {
                            local_change = std::numeric_limits<double>::infinity();
                        } else {
                            for (std::size_t k = 0; k < m.samples.size(); ++k)
                                local_change = std::max(local_change,
                                                        std::abs(m.samples[k].u - wp.previous[k].u) +
                                                            wp.z * std::abs(m.samples[k].i - wp.previous[k].i));
                        }
                        wp.previous = std::move(m.samples);
                    }
                    change[s] = local_change;
                    solves[s] = used;
                    sync.arrive_and_wait();
                    const auto t3 = clock::now();
                    compute += std::chrono::duration<double>(t1 - t0).count();
                    exchange_time += std::chrono::duration<double>(t3 - t1).count();

                    if (abort.load()) throw Aborted();
                    if (relaxation_failed) {
                        sync.arrive_and_drop();
                        std::lock_guard lock(mu);
                        if (!error)
                            error = std::make_exception_ptr(RunError(
                                "waveform relaxation did not converge in " + std::to_string(cfg.wr.max_iterations) +
                                    " iterations",
                                static_cast<std::size_t>(window), s));
                        return;
                    }
                    if (converged) break;
                }
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    const long n = first + static_cast<long>(r);
                    if (n > total_steps) break;
                    out.record(static_cast<double>(n) * dt, rows[r], row_iterations[r]);
                }
            }
        } catch (const Aborted&) {
            sync.arrive_and_drop();
        } catch (const std::exception& e) {
            {
                std::lock_guard lock(mu);
                const bool nr = dynamic_cast<const NoConvergence*>(&e) != nullptr;
                if (!error)
                    error = std::make_exception_ptr(RunError(e.what(), static_cast<std::size_t>(window), s, nr));
            }
            abort.store(true);
            sync.arrive_and_drop();
        }
        std::lock_guard lock(mu);
        stats.compute_seconds += compute;
        stats.exchange_seconds += exchange_time;
    };

    {
        std::vector<std::jthread> threads;
        threads.reserve(subs);
        for (std::size_t s = 0; s < subs; ++s) threads.emplace_back(worker, s);
    }
    if (error) std::rethrow_exception(error);
    stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

} // namespace detail

/// Lossless wires: one solve and one exchange per window.
inline MtmResult run_mtm(const Netlist& net, const Partition& part, const MtmConfig& cfg) {
    (void)net;
    return detail::run_windows(part, cfg, false, detail::RunMode::mtm);
}

/// Same protocol with every wire on the discretized lossy relation.
inline MtmResult run_mtm_lossy(const Netlist& net, const Partition& part, const MtmConfig& cfg) {
    (void)net;
    return detail::run_windows(part, cfg, true, detail::RunMode::mtm);
}

/// Gauss-Jacobi waveform relaxation over windows of cfg.wr.window_multiple * W.
inline MtmResult run_wr_baseline(const Netlist& net, const Partition& part, const MtmConfig& cfg) {
    (void)net;
    bool lossy = false;
    for (const auto& w : part.wires) lossy = lossy || !w.params.lossless();
    return detail::run_windows(part, cfg, lossy, detail::RunMode::relaxation);
}

enum class CountMethod { mtm, wr, dnr };

/// Closed-form distributed-computation counts over [t1, t2]: windows of K steps
/// for MTM, k relaxation rounds per window for WR, 2k per step for distributed NR.
inline long predict_counts(CountMethod method, double t1, double t2, double step, long k_window, long k) {
    if (!(t2 > t1) || !(step > 0.0) || k_window < 1 || k < 1) throw std::invalid_argument("invalid count arguments");
    const double span = t2 - t1;
    const auto whole = [](double x) { return static_cast<long>(std::ceil(x - 1e-9)); };
    switch (method) {
        case CountMethod::mtm: return whole(span / (static_cast<double>(k_window) * step));
        case CountMethod::wr: return whole(span / (static_cast<double>(k_window) * step)) * k;
        case CountMethod::dnr: return whole(span / step) * 2 * k;
    }
    return 0;
}

} // namespace mtm
