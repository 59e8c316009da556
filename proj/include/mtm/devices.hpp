#pragma once

// Companion-model stamps for linear elements and linearized evaluations of
// the nonlinear devices (Shockley diode, level-1 MOSFET).
//
// MNA row convention: row k holds the currents leaving node k through the
// element; rhs holds currents injected into node k. Index -1 is ground and is
// dropped when a stamp is assembled.

#include "mtm/netlist.hpp"

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtm {

enum class IntegrationRule { backward_euler, trapezoidal };

/// History carried between time points by reactive elements. Zero at t = 0.
struct DeviceState {
    double v_prev = 0.0;
    double i_prev = 0.0;

    bool operator==(const DeviceState&) const = default;
};

struct MatrixEntry {
    int row;
    int col;
    double value;
};

struct RhsEntry {
    int row;
    double value;
};

struct Stamp {
    std::vector<MatrixEntry> matrix;
    std::vector<RhsEntry> rhs;
    int branch = -1; ///< extra unknown (branch current) owned by the element, if any

    void add(int r, int c, double v) { matrix.push_back({r, c, v}); }
    void inject(int r, double v) { rhs.push_back({r, v}); }

    /// Two-terminal conductance between a and b.
    void conductance(int a, int b, double g) {
        add(a, a, g);
        add(b, b, g);
        add(a, b, -g);
        add(b, a, -g);
    }

    /// Current `i` flowing from a through the element to b (leaves a, enters b).
    void current(int a, int b, double i) {
        inject(a, -i);
        inject(b, i);
    }
};

struct DiodeModel {
    double is = 1e-14;
    double vt = 0.025;
};

struct MosModel {
    bool pmos = false;
    double vto = 0.5;
    double kp = 2e-4;
    double lambda = 0.0;
};

/// Element with its terminals resolved to unknown indices.
struct BoundElement {
    ElementKind kind{};
    std::string name;
    std::array<int, 4> nodes{-1, -1, -1, -1};
    int branch = -1;
    double value = 0.0; ///< R, C, L or gm
    SourceWave wave;
    DiodeModel diode;
    MosModel mos;

    bool nonlinear() const { return kind == ElementKind::diode || kind == ElementKind::mosfet; }
    bool reactive() const { return kind == ElementKind::capacitor || kind == ElementKind::inductor; }
    bool needs_branch() const { return kind == ElementKind::vsource || kind == ElementKind::inductor; }
};

struct StampContext {
    double t = 0.0;
    double dt = 0.0;
    IntegrationRule rule = IntegrationRule::trapezoidal;
    bool dc = false; ///< operating point: capacitors open, inductors shorted
};

inline double node_voltage(std::span<const double> x, int idx) { return idx < 0 ? 0.0 : x[static_cast<std::size_t>(idx)]; }

/// Companion stamp of a linear element (R, C, L, V, I, VCCS).
inline Stamp stamp_linear(const BoundElement& e, const StampContext& ctx, const DeviceState& state) {
    if (!ctx.dc && !(ctx.dt > 0.0)) throw std::invalid_argument("stamp_linear needs dt > 0");
    Stamp s;
    const int a = e.nodes[0], b = e.nodes[1];
    switch (e.kind) {
        case ElementKind::resistor:
            s.conductance(a, b, 1.0 / e.value);
            break;
        case ElementKind::capacitor: {
            if (ctx.dc) break;
            if (ctx.rule == IntegrationRule::backward_euler) {
                const double geq = e.value / ctx.dt;
                s.conductance(a, b, geq);
                s.current(b, a, geq * state.v_prev);
            } else {
                const double geq = 2.0 * e.value / ctx.dt;
                s.conductance(a, b, geq);
                s.current(b, a, geq * state.v_prev + state.i_prev);
            }
            break;
        }
        case ElementKind::inductor: {
            s.branch = e.branch;
            s.add(a, e.branch, 1.0);
            s.add(b, e.branch, -1.0);
            s.add(e.branch, a, 1.0);
            s.add(e.branch, b, -1.0);
            if (ctx.dc) break;
            if (ctx.rule == IntegrationRule::backward_euler) {
                const double req = e.value / ctx.dt;
                s.add(e.branch, e.branch, -req);
                s.inject(e.branch, -req * state.i_prev);
            } else {
                const double req = 2.0 * e.value / ctx.dt;
                s.add(e.branch, e.branch, -req);
                s.inject(e.branch, -req * state.i_prev - state.v_prev);
            }
            break;
        }
        case ElementKind::vsource:
            s.branch = e.branch;
            s.add(a, e.branch, 1.0);
            s.add(b, e.branch, -1.0);
            s.add(e.branch, a, 1.0);
            s.add(e.branch, b, -1.0);
            s.inject(e.branch, e.wave.at(ctx.t));
            break;
        case ElementKind::isource:
            s.current(a, b, e.wave.at(ctx.t));
            break;
        case ElementKind::vccs: {
            const int cp = e.nodes[2], cn = e.nodes[3];
            s.add(a, cp, e.value);
            s.add(a, cn, -e.value);
            s.add(b, cp, -e.value);
            s.add(b, cn, e.value);
            break;
        }
        case ElementKind::diode:
        case ElementKind::mosfet:
            throw std::invalid_argument("stamp_linear called on nonlinear element " + e.name);
    }
    return s;
}

/// Updates the history of a reactive element after a time point is accepted.
inline void update_state(const BoundElement& e, const StampContext& ctx, std::span<const double> x,
                         DeviceState& state) {
    const double v = node_voltage(x, e.nodes[0]) - node_voltage(x, e.nodes[1]);
    if (e.kind == ElementKind::capacitor) {
        const double i = ctx.rule == IntegrationRule::backward_euler
                             ? e.value / ctx.dt * (v - state.v_prev)
                             : 2.0 * e.value / ctx.dt * (v - state.v_prev) - state.i_prev;
        state = {v, i};
    } else if (e.kind == ElementKind::inductor) {
        state = {v, x[static_cast<std::size_t>(e.branch)]};
    }
}

// --- nonlinear devices ------------------------------------------------------

struct DiodeEval {
    double current = 0.0;
    double conductance = 0.0;
    double equivalent_source = 0.0; ///< current - conductance * v
};

/// Above this multiple of Vt the exponential is continued linearly.
inline constexpr double kDiodeClampRatio = 40.0;

inline DiodeEval eval_nonlinear(const DiodeModel& m, double v) {
    const double vcrit = kDiodeClampRatio * m.vt;
    DiodeEval out;
    if (v <= vcrit) {
        const double ex = std::exp(v / m.vt);
        out.current = m.is * (ex - 1.0);
        out.conductance = m.is / m.vt * ex;
    } else {
        const double ex = std::exp(kDiodeClampRatio);
        out.conductance = m.is / m.vt * ex;
        out.current = m.is * (ex - 1.0) + out.conductance * (v - vcrit);
    }
    out.equivalent_source = out.current - out.conductance * v;
    return out;
}

struct MosEval {
    double id = 0.0;  ///< drain current, positive into the drain
    double gm = 0.0;  ///< d id / d vgs
    double gds = 0.0; ///< d id / d vds
    double equivalent_source = 0.0; ///< id - gm*vgs - gds*vds
};

namespace detail {

/// Square-law drain current for an n-channel device with vds >= 0.
inline MosEval square_law(const MosModel& m, double vgs, double vds, double vto) {
    MosEval r;
    const double vov = vgs - vto;
    if (vov <= 0.0) return r;
    const double clm = 1.0 + m.lambda * vds;
    if (vds < vov) {
        const double core = vov * vds - 0.5 * vds * vds;
        r.id = m.kp * core * clm;
        r.gm = m.kp * vds * clm;
        r.gds = m.kp * (vov - vds) * clm + m.kp * core * m.lambda;
    } else {
        const double core = 0.5 * vov * vov;
        r.id = m.kp * core * clm;
        r.gm = m.kp * vov * clm;
        r.gds = m.kp * core * m.lambda;
    }
    return r;
}

} // namespace detail

/// Level-1 MOSFET with source/drain symmetry; PMOS by polarity mirroring.
inline MosEval eval_nonlinear(const MosModel& m, double vgs, double vds) {
    const double p = m.pmos ? -1.0 : 1.0;
    const double vgs_n = p * vgs, vds_n = p * vds, vto_n = p * m.vto;
    MosEval r;
    if (vds_n >= 0.0) {
        const auto f = detail::square_law(m, vgs_n, vds_n, vto_n);
        r.id = p * f.id;
        r.gm = f.gm;
        r.gds = f.gds;
    } else {
        // Roles of drain and source swap: id = -f(vgd, -vds).
        const auto f = detail::square_law(m, vgs_n - vds_n, -vds_n, vto_n);
        r.id = -p * f.id;
        r.gm = -f.gm;
        r.gds = f.gm + f.gds;
    }
    r.equivalent_source = r.id - r.gm * vgs - r.gds * vds;
    return r;
}

/// Stamp of a diode linearized at junction voltage vd.
inline Stamp stamp_diode(const BoundElement& e, double vd) {
    const auto ev = eval_nonlinear(e.diode, vd);
    Stamp s;
    s.conductance(e.nodes[0], e.nodes[1], ev.conductance);
    s.current(e.nodes[0], e.nodes[1], ev.equivalent_source);
    return s;
}

/// Stamp of a MOSFET (d, g, s) linearized at (vgs, vds).
inline Stamp stamp_mosfet(const BoundElement& e, double vgs, double vds) {
    const auto ev = eval_nonlinear(e.mos, vgs, vds);
    const int d = e.nodes[0], g = e.nodes[1], src = e.nodes[2];
    Stamp s;
    s.add(d, g, ev.gm);
    s.add(d, src, -ev.gm - ev.gds);
    s.add(d, d, ev.gds);
    s.add(src, g, -ev.gm);
    s.add(src, src, ev.gm + ev.gds);
    s.add(src, d, -ev.gds);
    s.current(d, src, ev.equivalent_source);
    return s;
}

/// Moves `proposed` at most `cap` volts away from `previous`.
inline double limit_junction(double proposed, double previous, double cap) {
    if (proposed > previous + cap) return previous + cap;
    if (proposed < previous - cap) return previous - cap;
    return proposed;
}

} // namespace mtm
