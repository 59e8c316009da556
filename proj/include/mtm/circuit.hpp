#pragma once

// Compiled circuit (unknown ordering, bound elements, line ports) and MNA assembly.

#include "mtm/devices.hpp"
#include "mtm/errors.hpp"
#include "mtm/linalg.hpp"
#include "mtm/netlist.hpp"
#include "mtm/tline.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mtm {

/// Line terminal owned by a circuit: unknown `branch` is the current flowing
/// from the line into `pos`, and u = v(pos) - v(neg).
struct PortRef {
    std::string label; ///< "T1.1"
    int pos = -1;
    int neg = -1;
    int branch = -1;
};

/// Line with both ports inside one circuit.
struct InternalLine {
    std::string name;
    LineParams params;
    std::size_t port1 = 0;
    std::size_t port2 = 0;
};

/// Port whose equation is supplied from outside (a torn wire).
struct BoundaryPortSpec {
    std::string label;
    std::string pos;
    std::string neg;
};

class Circuit {
public:
    /// Resolves names to unknown indices: node voltages first (netlist order), then
    /// branch currents of V and L elements, then line/boundary port currents.
    static Circuit compile(const Netlist& net, std::span<const BoundaryPortSpec> boundary = {}) {
        Circuit c;
        auto node = [&](const std::string& name) -> int {
            if (name == kGround) return -1;
            auto it = c.node_index_.find(name);
            if (it != c.node_index_.end()) return it->second;
            const int idx = static_cast<int>(c.node_names_.size());
            c.node_index_.emplace(name, idx);
            c.node_names_.push_back(name);
            return idx;
        };
        for (const auto& n : net.nodes) node(n);
        for (const auto& b : boundary) {
            node(b.pos);
            node(b.neg);
        }

        std::vector<int> attach(c.node_names_.size(), 0);
        auto touch = [&](int idx) {
            if (idx >= 0) ++attach[static_cast<std::size_t>(idx)];
        };

        int next = static_cast<int>(c.node_names_.size());
        for (const auto& e : net.elements) {
            BoundElement b;
            b.kind = e.kind;
            b.name = e.name;
            for (std::size_t k = 0; k < e.terminals.size() && k < 4; ++k) b.nodes[k] = node(e.terminals[k]);
            switch (e.kind) {
                case ElementKind::resistor: b.value = e.param("R"); break;
                case ElementKind::capacitor: b.value = e.param("C"); break;
                case ElementKind::inductor: b.value = e.param("L"); break;
                case ElementKind::vccs: b.value = e.param("GM"); break;
                case ElementKind::vsource:
                case ElementKind::isource: b.wave = *e.wave; break;
                case ElementKind::diode: b.diode = {e.param("IS"), e.param("VT")}; break;
                case ElementKind::mosfet:
                    b.mos = {e.pmos, e.param("VTO"), e.param("KP"), e.param("LAMBDA")};
                    break;
            }
            if (b.kind != ElementKind::isource) {
                // Only the output pair of a VCCS conducts; the control pair senses.
                const std::size_t conducting = b.kind == ElementKind::vccs ? 2 : e.terminals.size();
                for (std::size_t k = 0; k < conducting && k < 4; ++k) touch(b.nodes[k]);
            }
            if (b.nonlinear()) c.linear_ = false;
            c.elements_.push_back(std::move(b));
        }
        for (auto& b : c.elements_) {
            if (b.needs_branch()) {
                b.branch = next++;
                c.branch_labels_.push_back("i(" + b.name + ")");
            }
        }
        auto add_port = [&](const std::string& label, const std::string& pos, const std::string& neg) {
            PortRef p{label, node(pos), node(neg), next++};
            touch(p.pos);
            touch(p.neg);
            c.branch_labels_.push_back("i(" + label + ")");
            c.ports_.push_back(std::move(p));
            return c.ports_.size() - 1;
        };
        for (const auto& t : net.tlines) {
            InternalLine l{t.name, t.params, 0, 0};
            l.port1 = add_port(t.name + ".1", t.p1, t.ref1);
            l.port2 = add_port(t.name + ".2", t.p2, t.ref2);
            c.lines_.push_back(std::move(l));
        }
        c.first_boundary_ = c.ports_.size();
        for (const auto& b : boundary) add_port(b.label, b.pos, b.neg);

        for (std::size_t k = 0; k < attach.size(); ++k)
            if (attach[k] == 0)
                throw StructuralError("node " + c.node_names_[k] + " has no conductive connection");
        c.size_ = static_cast<std::size_t>(next);
        return c;
    }

    std::size_t size() const noexcept { return size_; }
    std::size_t node_count() const noexcept { return node_names_.size(); }
    bool linear() const noexcept { return linear_; }

    const std::vector<BoundElement>& elements() const noexcept { return elements_; }
    const std::vector<PortRef>& ports() const noexcept { return ports_; }
    const std::vector<InternalLine>& lines() const noexcept { return lines_; }
    std::size_t first_boundary_port() const noexcept { return first_boundary_; }
    std::size_t boundary_port_count() const noexcept { return ports_.size() - first_boundary_; }
    const std::vector<std::string>& node_names() const noexcept { return node_names_; }

    std::optional<int> node_index(std::string_view name) const {
        auto it = node_index_.find(std::string(name));
        if (it == node_index_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<std::size_t> port_index(std::string_view label) const {
        for (std::size_t k = 0; k < ports_.size(); ++k)
            if (ports_[k].label == label) return k;
        return std::nullopt;
    }

    /// "v(node)" for node rows, "i(name)" for branch rows.
    std::vector<std::string> unknown_labels() const {
        std::vector<std::string> out;
        out.reserve(size_);
        for (const auto& n : node_names_) out.push_back("v(" + n + ")");
        out.insert(out.end(), branch_labels_.begin(), branch_labels_.end());
        return out;
    }

private:
    std::size_t size_ = 0;
    bool linear_ = true;
    std::vector<std::string> node_names_;
    std::unordered_map<std::string, int> node_index_;
    std::vector<BoundElement> elements_;
    std::vector<PortRef> ports_;
    std::vector<InternalLine> lines_;
    std::vector<std::string> branch_labels_;
    std::size_t first_boundary_ = 0;
};

struct MnaSystem {
    std::size_t n = 0;
    std::size_t kcl_rows = 0; ///< rows [0, kcl_rows) are node current balances
    DenseMatrix a;
    std::vector<double> b;
    std::vector<std::string> ordering;
    bool limited = false; ///< a junction voltage was clamped while linearizing

    /// Largest |A x - b| over the node rows.
    double kcl_residual(std::span<const double> x) const {
        double worst = 0.0;
        for (std::size_t r = 0; r < kcl_rows; ++r) {
            const auto row = a.row(r);
            double s = -b[r];
            for (std::size_t c = 0; c < n; ++c) s += row[c] * x[c];
            worst = std::max(worst, std::abs(s));
        }
        return worst;
    }
};

struct AssemblyInputs {
    StampContext ctx;
    std::span<const DeviceState> states;       ///< one per element
    std::span<const double> v_guess;           ///< linearization point
    std::span<const PortEquation> ports;       ///< one per circuit port (ignored for dc)
    std::span<const double> junction_override; ///< optional per-element diode voltage
    double gmin = 1e-12;
};

namespace detail {

inline void apply(const Stamp& s, DenseMatrix* a, std::vector<double>& b) {
    if (a) {
        for (const auto& m : s.matrix)
            if (m.row >= 0 && m.col >= 0) (*a)(static_cast<std::size_t>(m.row), static_cast<std::size_t>(m.col)) += m.value;
    }
    for (const auto& r : s.rhs)
        if (r.row >= 0) b[static_cast<std::size_t>(r.row)] += r.value;
}

} // namespace detail

/// Stamps every element and port. With `a == nullptr` only the right-hand side is built.
inline void assemble_into(const Circuit& c, const AssemblyInputs& in, DenseMatrix* a, std::vector<double>& b) {
    if (a) a->zero();
    std::fill(b.begin(), b.end(), 0.0);
    const auto& els = c.elements();
    for (std::size_t k = 0; k < els.size(); ++k) {
        const auto& e = els[k];
        if (e.kind == ElementKind::diode) {
            const double vd = !in.junction_override.empty()
                                  ? in.junction_override[k]
                                  : node_voltage(in.v_guess, e.nodes[0]) - node_voltage(in.v_guess, e.nodes[1]);
            detail::apply(stamp_diode(e, vd), a, b);
        } else if (e.kind == ElementKind::mosfet) {
            const double vd = node_voltage(in.v_guess, e.nodes[0]);
            const double vg = node_voltage(in.v_guess, e.nodes[1]);
            const double vs = node_voltage(in.v_guess, e.nodes[2]);
            detail::apply(stamp_mosfet(e, vg - vs, vd - vs), a, b);
        } else {
            static const DeviceState zero{};
            detail::apply(stamp_linear(e, in.ctx, in.states.empty() ? zero : in.states[k]), a, b);
        }
    }

    const auto& ports = c.ports();
    if (in.ctx.dc) {
        if (c.boundary_port_count() > 0) throw std::invalid_argument("operating point with boundary ports");
        for (const auto& l : c.lines()) {
            if (!l.params.lossless()) throw std::invalid_argument("operating point with lossy line " + l.name);
            // Steady state of the delay equations: u1 + Z i1 = u2 - Z i2 and u2 + Z i2 = u1 - Z i1.
            const double z = l.params.impedance();
            const auto& p1 = ports[l.port1];
            const auto& p2 = ports[l.port2];
            for (const auto* pp : {&p1, &p2}) {
                Stamp s;
                s.add(pp->pos, pp->branch, -1.0);
                s.add(pp->neg, pp->branch, 1.0);
                detail::apply(s, a, b);
            }
            for (const auto& [own, other] : {std::pair{&p1, &p2}, std::pair{&p2, &p1}}) {
                Stamp s;
                s.add(own->branch, own->pos, 1.0);
                s.add(own->branch, own->neg, -1.0);
                s.add(own->branch, own->branch, z);
                s.add(own->branch, other->pos, -1.0);
                s.add(own->branch, other->neg, 1.0);
                s.add(own->branch, other->branch, z);
                detail::apply(s, a, b);
            }
        }
    } else {
        for (std::size_t k = 0; k < ports.size(); ++k) {
            const auto& p = ports[k];
            const auto& eq = in.ports[k];
            Stamp s;
            s.add(p.pos, p.branch, -1.0);
            s.add(p.neg, p.branch, 1.0);
            s.add(p.branch, p.pos, eq.a);
            s.add(p.branch, p.neg, -eq.a);
            s.add(p.branch, p.branch, eq.b);
            s.inject(p.branch, eq.rhs);
            detail::apply(s, a, b);
        }
    }

    if (a)
        for (std::size_t r = 0; r < c.node_count(); ++r) (*a)(r, r) += in.gmin;
}

/// Linearized MNA system A x = b at `in.v_guess`.
inline MnaSystem assemble(const Circuit& c, const AssemblyInputs& in) {
    MnaSystem sys;
    sys.n = c.size();
    sys.kcl_rows = c.node_count();
    sys.a = DenseMatrix(sys.n);
    sys.b.assign(sys.n, 0.0);
    sys.ordering = c.unknown_labels();
    assemble_into(c, in, &sys.a, sys.b);
    return sys;
}

} // namespace mtm
