#pragma once

// Wire tearing along transmission lines and the step/window plan.

#include "mtm/errors.hpp"
#include "mtm/netlist.hpp"
#include "mtm/units.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mtm {

/// One end of a torn wire: the port nodes and the subcircuit they landed in.
struct WireEnd {
    std::string node;
    std::string ref;
    std::size_t subcircuit = 0;

    bool operator==(const WireEnd&) const = default;
};

struct InterfaceWire {
    std::string name;
    LineParams params;
    WireEnd side_a; ///< port 1 of the line
    WireEnd side_b; ///< port 2 of the line

    double delay() const { return params.delay(); }
    std::string port_label(int port) const { return name + "." + std::to_string(port); }
};

struct Partition {
    std::vector<Netlist> subcircuits;
    std::vector<InterfaceWire> wires;
    double tau_min = std::numeric_limits<double>::infinity(); ///< infinite when nothing was torn
    std::vector<Diagnostic> diagnostics;
};

namespace detail {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t a) {
        while (parent_[a] != a) a = parent_[a] = parent_[parent_[a]];
        return a;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

} // namespace detail

/// Splits `net` into the connected components left after removing the named
/// lines. A named line whose ends stay connected is kept inside its component
/// and reported as a diagnostic. Throws std::invalid_argument for unknown names.
inline Partition tear_by_wires(const Netlist& net, std::span<const std::string> wire_names) {
    std::vector<const TlineBinding*> torn;
    for (const auto& w : wire_names) {
        const auto* t = net.find_tline(w);
        if (!t) throw std::invalid_argument("unknown wire " + w);
        if (std::find(torn.begin(), torn.end(), t) == torn.end()) torn.push_back(t);
    }
    auto is_torn = [&](const TlineBinding& t) { return std::find(torn.begin(), torn.end(), &t) != torn.end(); };

    std::unordered_map<std::string, std::size_t> idx;
    for (const auto& n : net.nodes)
        if (n != kGround) idx.emplace(n, idx.size());
    detail::DisjointSets sets(idx.size());
    auto join = [&](const std::vector<const std::string*>& nodes) {
        std::size_t first = std::numeric_limits<std::size_t>::max();
        for (const auto* n : nodes) {
            if (*n == kGround) continue;
            const std::size_t k = idx.at(*n);
            if (first == std::numeric_limits<std::size_t>::max()) first = k;
            else sets.unite(first, k);
        }
    };
    for (const auto& e : net.elements) {
        std::vector<const std::string*> nodes;
        for (const auto& t : e.terminals) nodes.push_back(&t);
        join(nodes);
    }
    for (const auto& t : net.tlines) {
        if (is_torn(t)) {
            join({&t.p1, &t.ref1});
            join({&t.p2, &t.ref2});
        } else {
            join({&t.p1, &t.ref1, &t.p2, &t.ref2});
        }
    }

    // Wires whose two ends share a component cannot split anything.
    Partition part;
    std::vector<const TlineBinding*> cut;
    auto root_of = [&](const std::string& a, const std::string& ref) {
        const std::string& n = a == kGround ? ref : a;
        if (n == kGround) throw std::invalid_argument("line port tied to ground on both terminals");
        return sets.find(idx.at(n));
    };
    for (const auto* t : torn) {
        if (root_of(t->p1, t->ref1) == root_of(t->p2, t->ref2)) {
            part.diagnostics.push_back(
                {Diagnostic::Severity::warning, "wire " + t->name + " is internal to one component; not torn"});
            join({&t->p1, &t->ref1, &t->p2, &t->ref2});
        } else {
            cut.push_back(t);
        }
    }

    // Number components by first appearance: elements, then lines, then remaining nodes.
    std::unordered_map<std::size_t, std::size_t> component;
    auto component_of = [&](std::size_t root) {
        auto [it, inserted] = component.emplace(root, component.size());
        if (inserted) part.subcircuits.emplace_back();
        return it->second;
    };
    auto first_node = [&](const std::vector<std::string>& nodes) -> std::optional<std::size_t> {
        for (const auto& n : nodes)
            if (n != kGround) return component_of(sets.find(idx.at(n)));
        return std::nullopt;
    };

    for (const auto& e : net.elements) {
        auto c = first_node(e.terminals);
        if (!c) c = component_of(idx.empty() ? 0 : sets.find(0));
        part.subcircuits[*c].elements.push_back(e);
    }
    for (const auto& t : net.tlines) {
        if (std::find(cut.begin(), cut.end(), &t) != cut.end()) continue;
        const std::size_t c = *first_node({t.p1, t.ref1, t.p2, t.ref2});
        part.subcircuits[c].tlines.push_back(t);
    }
    for (const auto* t : cut) {
        InterfaceWire w;
        w.name = t->name;
        w.params = t->params;
        w.side_a = {t->p1, t->ref1, *first_node({t->p1, t->ref1})};
        w.side_b = {t->p2, t->ref2, *first_node({t->p2, t->ref2})};
        part.tau_min = std::min(part.tau_min, w.delay());
        part.wires.push_back(std::move(w));
    }
    if (part.subcircuits.empty()) part.subcircuits.emplace_back();

    for (auto& sub : part.subcircuits) {
        sub.nodes.push_back(std::string(kGround));
        sub.directives.tran = net.directives.tran;
    }
    for (const auto& n : net.nodes) {
        if (n == kGround) continue;
        part.subcircuits[component_of(sets.find(idx.at(n)))].touch_node(n);
    }
    return part;
}

/// Tears along the netlist's own `.partition` list.
inline Partition tear_by_wires(const Netlist& net) { return tear_by_wires(net, net.directives.partition_wires); }

/// Merges subcircuits back and re-inserts the torn lines.
inline Netlist reassemble(const Partition& part) {
    Netlist out;
    out.nodes.push_back(std::string(kGround));
    for (const auto& sub : part.subcircuits) {
        for (const auto& n : sub.nodes) out.touch_node(n);
        out.elements.insert(out.elements.end(), sub.elements.begin(), sub.elements.end());
        out.tlines.insert(out.tlines.end(), sub.tlines.begin(), sub.tlines.end());
        if (sub.directives.tran) out.directives.tran = sub.directives.tran;
    }
    for (const auto& w : part.wires) {
        out.tlines.push_back({w.name, w.side_a.node, w.side_a.ref, w.side_b.node, w.side_b.ref, w.params, 0});
        out.directives.partition_wires.push_back(w.name);
    }
    return out;
}

/// Line names ordered by decreasing delay: longer wires are better tearing candidates.
inline std::vector<std::string> rank_wires(const Netlist& net) {
    std::vector<const TlineBinding*> lines;
    for (const auto& t : net.tlines) lines.push_back(&t);
    std::stable_sort(lines.begin(), lines.end(),
                     [](const auto* a, const auto* b) { return a->params.delay() > b->params.delay(); });
    std::vector<std::string> out;
    for (const auto* t : lines) out.push_back(t->name);
    return out;
}

struct StepPlan {
    double dt = 0.0;
    double window = 0.0;
    long k = 1; ///< steps per window

    bool operator==(const StepPlan&) const = default;
};

/// dt <= requested with tau_min / dt integral, window = tau_min.
inline StepPlan plan_step(double requested_dt, double tau_min) {
    if (!(requested_dt > 0.0)) throw std::invalid_argument("requested step must be positive");
    if (std::isinf(tau_min)) return {requested_dt, requested_dt, 1};
    if (!(tau_min > 0.0)) throw std::invalid_argument("tau_min must be positive");
    if (requested_dt > tau_min * (1.0 + 1e-12)) throw StepTooLarge(requested_dt, tau_min);
    const long k = std::max(1L, static_cast<long>(std::ceil(tau_min / requested_dt - 1e-9)));
    return {tau_min / static_cast<double>(k), tau_min, k};
}

/// Whole-step delay of a wire on grid dt and the relative change from snapping to it.
struct SnappedDelay {
    long steps = 0;
    double relative_error = 0.0;
};

inline SnappedDelay snap_delay(double tau, double dt) {
    const double ratio = tau / dt;
    const long steps = static_cast<long>(std::round(ratio));
    return {steps, std::abs(static_cast<double>(steps) - ratio) / ratio};
}

/// Checks a plan against every interfacial wire; off-grid delays become warnings.
inline std::vector<Diagnostic> validate_step(const StepPlan& plan, const Partition& part) {
    std::vector<Diagnostic> out;
    for (const auto& w : part.wires) {
        const double tau = w.delay();
        if (plan.window > tau * (1.0 + 1e-12))
            out.push_back({Diagnostic::Severity::error, "window exceeds delay of wire " + w.name});
        const auto s = snap_delay(tau, plan.dt);
        if (s.relative_error > 1e-9)
            out.push_back({Diagnostic::Severity::warning,
                           "delay of wire " + w.name + " snapped to " + std::to_string(s.steps) +
                               " steps (relative change " + format_number(s.relative_error) + ")"});
    }
    return out;
}

/// Shortest line whose delay covers one of N steps of a signal at frequency f.
inline double min_wire_length(double f, double n, double l, double c) { return 1.0 / (n * f * std::sqrt(l * c)); }

} // namespace mtm
