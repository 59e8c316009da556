#pragma once

// SPICE-inspired netlist: parsing, unparsing and validation.
//
// Grammar (one statement per line, '*' starts a comment line, case-insensitive keywords):
//
//   Rname n+ n- value
//   Cname n+ n- value
//   Lname n+ n- value
//   Vname n+ n- [DC] value | PULSE(v1 v2 td tr tf pw per) | SIN(vo va freq [td [theta]]) | PWL(t1 v1 ...)
//   Iname n+ n- <same as V>
//   Gname out+ out- ctrl+ ctrl- gm
//   Dname anode cathode [IS=value] [VT=value]
//   Mname drain gate source [bulk] NMOS|PMOS [VTO=value] [KP=value] [LAMBDA=value]
//   Tname p1 ref1 p2 ref2 L=value C=value LEN=value [R=value] [G=value]
//   .tran step stop
//   .partition wire name[,name...]
//   .print v(node) i(line.port) i(vsource) ...
//   .end
//
// Ground is node "0". Numbers accept the suffixes f p n u m k meg g t.

#include "mtm/errors.hpp"
#include "mtm/line_params.hpp"
#include "mtm/units.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mtm {

inline constexpr std::string_view kGround = "0";

enum class ElementKind { resistor, capacitor, inductor, vsource, isource, vccs, diode, mosfet };

/// Time-dependent value of an independent source.
struct SourceWave {
    enum class Shape { dc, pulse, sin, pwl };

    Shape shape = Shape::dc;
    std::vector<double> args;

    double at(double t) const {
        switch (shape) {
            case Shape::dc:
                return args.empty() ? 0.0 : args[0];
            case Shape::pulse:
                return pulse_at(t);
            case Shape::sin: {
                const double vo = args[0], va = args[1], freq = args[2];
                const double td = args.size() > 3 ? args[3] : 0.0;
                const double theta = args.size() > 4 ? args[4] : 0.0;
                if (t < td) return vo;
                const double s = t - td;
                return vo + va * std::exp(-theta * s) * std::sin(2.0 * std::numbers::pi * freq * s);
            }
            case Shape::pwl: {
                if (t <= args[0]) return args[1];
                for (std::size_t k = 2; k + 1 < args.size(); k += 2) {
                    if (t <= args[k]) {
                        const double t0 = args[k - 2], v0 = args[k - 1];
                        return v0 + (args[k + 1] - v0) * (t - t0) / (args[k] - t0);
                    }
                }
                return args[args.size() - 1];
            }
        }
        return 0.0;
    }

    bool operator==(const SourceWave&) const = default;

private:
    double pulse_at(double t) const {
        const double v1 = args[0], v2 = args[1];
        const double td = args.size() > 2 ? args[2] : 0.0;
        const double tr = args.size() > 3 ? args[3] : 0.0;
        const double tf = args.size() > 4 ? args[4] : 0.0;
        const double pw = args.size() > 5 ? args[5] : std::numeric_limits<double>::infinity();
        const double per = args.size() > 6 ? args[6] : 0.0;
        double tt = t - td;
        if (tt < 0.0) return v1;
        if (per > 0.0) tt = std::fmod(tt, per);
        if (tt < tr) return v1 + (v2 - v1) * tt / tr;
        if (tt < tr + pw) return v2;
        if (tt < tr + pw + tf) return v2 + (v1 - v2) * (tt - tr - pw) / tf;
        return v1;
    }
};

struct Element {
    ElementKind kind{};
    std::string name;
    std::vector<std::string> terminals;
    std::map<std::string, double> params; ///< upper-case keys: R, C, L, GM, IS, VT, VTO, KP, LAMBDA
    std::optional<SourceWave> wave;       ///< V and I only
    bool pmos = false;                    ///< M only
    std::size_t line = 0;

    double param(const std::string& key) const { return params.at(key); }

    bool operator==(const Element& o) const {
        return kind == o.kind && name == o.name && terminals == o.terminals && params == o.params &&
               wave == o.wave && pmos == o.pmos;
    }
};

/// A transmission line instance. Port 1 is (p1, ref1), port 2 is (p2, ref2).
struct TlineBinding {
    std::string name;
    std::string p1, ref1, p2, ref2;
    LineParams params;
    std::size_t line = 0;

    bool operator==(const TlineBinding& o) const {
        return name == o.name && p1 == o.p1 && ref1 == o.ref1 && p2 == o.p2 && ref2 == o.ref2 &&
               params == o.params;
    }
};

struct PrintVar {
    enum class Kind { voltage, current };
    Kind kind = Kind::voltage;
    std::string target; ///< node name, "T1.1"-style line port, or a V/L element name

    std::string label() const { return (kind == Kind::voltage ? "v(" : "i(") + target + ")"; }
    bool operator==(const PrintVar&) const = default;
};

struct Directives {
    struct Tran {
        double step = 0.0;
        double stop = 0.0;
        bool operator==(const Tran&) const = default;
    };
    std::optional<Tran> tran;
    std::vector<std::string> partition_wires;
    std::vector<PrintVar> prints;

    bool operator==(const Directives&) const = default;
};

struct Netlist {
    std::vector<std::string> nodes; ///< first-appearance order, ground first
    std::vector<Element> elements;
    std::vector<TlineBinding> tlines;
    Directives directives;

    bool has_node(std::string_view n) const {
        return std::find(nodes.begin(), nodes.end(), n) != nodes.end();
    }

    const TlineBinding* find_tline(std::string_view name) const;
    const Element* find_element(std::string_view name) const;

    /// Registers a node if not yet present.
    void touch_node(const std::string& n) {
        if (!has_node(n)) nodes.push_back(n);
    }

    /// Structural identity: node sets (not their order), elements, lines and directives.
    bool operator==(const Netlist& o) const {
        return std::set<std::string>(nodes.begin(), nodes.end()) ==
                   std::set<std::string>(o.nodes.begin(), o.nodes.end()) &&
               elements == o.elements && tlines == o.tlines && directives == o.directives;
    }
};

inline std::string to_upper(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && to_upper(a) == to_upper(b);
}

inline const TlineBinding* Netlist::find_tline(std::string_view name) const {
    for (const auto& t : tlines)
        if (iequals(t.name, name)) return &t;
    return nullptr;
}

inline const Element* Netlist::find_element(std::string_view name) const {
    for (const auto& e : elements)
        if (iequals(e.name, name)) return &e;
    return nullptr;
}

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
}

/// Splits an element line, treating parentheses and commas as blanks and
/// gluing "KEY = VALUE" into a single token.
inline std::vector<std::string> element_tokens(std::string s) {
    for (char& c : s)
        if (c == '(' || c == ')' || c == ',') c = ' ';
    static const std::regex spaced_eq(R"(\s*=\s*)");
    s = std::regex_replace(s, spaced_eq, "=");
    return split_ws(s);
}

inline double number_or_throw(const std::string& tok, std::size_t line) {
    const auto v = parse_number(tok);
    if (!v) throw ParseError(line, "bad number '" + tok + "'");
    return *v;
}

inline std::map<std::string, double> keyword_params(const std::vector<std::string>& toks,
                                                    std::size_t first, std::size_t line) {
    std::map<std::string, double> out;
    for (std::size_t k = first; k < toks.size(); ++k) {
        const auto eq = toks[k].find('=');
        if (eq == std::string::npos || eq == 0)
            throw ParseError(line, "expected KEY=VALUE, got '" + toks[k] + "'");
        out[to_upper(toks[k].substr(0, eq))] = number_or_throw(toks[k].substr(eq + 1), line);
    }
    return out;
}

inline SourceWave parse_wave(const std::vector<std::string>& toks, std::size_t first, std::size_t line) {
    if (first >= toks.size()) throw ParseError(line, "source needs a value");
    const std::string head = to_upper(toks[first]);
    auto numbers_from = [&](std::size_t k) {
        std::vector<double> v;
        for (; k < toks.size(); ++k) v.push_back(number_or_throw(toks[k], line));
        return v;
    };
    SourceWave w;
    if (head == "DC") {
        w.shape = SourceWave::Shape::dc;
        w.args = numbers_from(first + 1);
        if (w.args.size() != 1) throw ParseError(line, "DC takes one value");
    } else if (head == "PULSE") {
        w.shape = SourceWave::Shape::pulse;
        w.args = numbers_from(first + 1);
        if (w.args.size() < 2 || w.args.size() > 7) throw ParseError(line, "PULSE takes 2..7 values");
        if ((w.args.size() > 3 && w.args[3] < 0) || (w.args.size() > 4 && w.args[4] < 0))
            throw ParseError(line, "PULSE edge times must be nonnegative");
    } else if (head == "SIN") {
        w.shape = SourceWave::Shape::sin;
        w.args = numbers_from(first + 1);
        if (w.args.size() < 3 || w.args.size() > 5) throw ParseError(line, "SIN takes 3..5 values");
    } else if (head == "PWL") {
        w.shape = SourceWave::Shape::pwl;
        w.args = numbers_from(first + 1);
        if (w.args.size() < 2 || w.args.size() % 2 != 0) throw ParseError(line, "PWL takes time/value pairs");
        for (std::size_t k = 2; k < w.args.size(); k += 2)
            if (w.args[k] <= w.args[k - 2]) throw ParseError(line, "PWL times must increase");
    } else {
        w.shape = SourceWave::Shape::dc;
        w.args = numbers_from(first);
        if (w.args.size() != 1) throw ParseError(line, "source takes one value");
    }
    return w;
}

inline void require_count(const std::vector<std::string>& toks, std::size_t n, std::size_t line,
                          const char* what) {
    if (toks.size() < n) throw ParseError(line, std::string("too few fields for ") + what);
}

inline double positive(double v, std::size_t line, const char* what) {
    if (!(v > 0.0)) throw ParseError(line, std::string("nonpositive ") + what);
    return v;
}

} // namespace detail

/// Parses netlist text into a validated-by-construction Netlist. Throws ParseError.
inline Netlist parse_netlist(std::string_view text) {
    Netlist net;
    net.nodes.emplace_back(kGround);
    std::set<std::string> names;
    std::vector<std::pair<std::size_t, PrintVar>> pending_prints;

    std::istringstream in{std::string(text)};
    std::size_t lineno = 0;
    for (std::string raw; std::getline(in, raw);) {
        ++lineno;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        const auto first = raw.find_first_not_of(" \t");
        if (first == std::string::npos || raw[first] == '*') continue;
        const std::string stmt = raw.substr(first);

        if (stmt[0] == '.') {
            const auto toks = detail::split_ws(stmt);
            const std::string kw = to_upper(toks[0]);
            if (kw == ".END") break;
            if (kw == ".TRAN") {
                if (toks.size() != 3) throw ParseError(lineno, ".tran needs <step> <stop>");
                const double step = detail::number_or_throw(toks[1], lineno);
                const double stop = detail::number_or_throw(toks[2], lineno);
                if (!(step > 0.0)) throw ParseError(lineno, ".tran step must be positive");
                if (!(stop > step)) throw ParseError(lineno, ".tran stop must exceed step");
                net.directives.tran = Directives::Tran{step, stop};
            } else if (kw == ".PARTITION") {
                if (toks.size() < 3 || to_upper(toks[1]) != "WIRE")
                    throw ParseError(lineno, ".partition wire <name>[,<name>...]");
                std::string rest;
                for (std::size_t k = 2; k < toks.size(); ++k) rest += toks[k] + ",";
                std::replace(rest.begin(), rest.end(), ',', ' ');
                for (auto& w : detail::split_ws(rest)) net.directives.partition_wires.push_back(w);
            } else if (kw == ".PRINT") {
                static const std::regex var(R"(([vViI])\(\s*([^)\s]+)\s*\))");
                const std::string body = stmt.substr(toks[0].size());
                std::string leftover = std::regex_replace(body, var, "");
                if (leftover.find_first_not_of(" \t,") != std::string::npos)
                    throw ParseError(lineno, "bad .print variable list");
                for (std::sregex_iterator it(body.begin(), body.end(), var), end; it != end; ++it) {
                    PrintVar pv;
                    pv.kind = (std::tolower((*it)[1].str()[0]) == 'v') ? PrintVar::Kind::voltage
                                                                         : PrintVar::Kind::current;
                    pv.target = (*it)[2].str();
                    pending_prints.emplace_back(lineno, pv);
                }
            } else {
                throw ParseError(lineno, "unknown directive " + toks[0]);
            }
            continue;
        }

        const auto toks = detail::element_tokens(stmt);
        const std::string& name = toks[0];
        if (!names.insert(to_upper(name)).second) throw ParseError(lineno, "duplicate name " + name);
        const char kind = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));

        if (kind == 'T') {
            detail::require_count(toks, 5, lineno, "transmission line");
            TlineBinding t;
            t.name = name;
            t.p1 = toks[1];
            t.ref1 = toks[2];
            t.p2 = toks[3];
            t.ref2 = toks[4];
            t.line = lineno;
            auto kv = detail::keyword_params(toks, 5, lineno);
            for (const char* key : {"L", "C", "LEN"})
                if (!kv.count(key)) throw ParseError(lineno, std::string("transmission line needs ") + key + "=");
            for (const auto& [k, v] : kv)
                if (k != "L" && k != "C" && k != "LEN" && k != "R" && k != "G")
                    throw ParseError(lineno, "unknown line parameter " + k);
            t.params.l = detail::positive(kv["L"], lineno, "line inductance");
            t.params.c = detail::positive(kv["C"], lineno, "line capacitance");
            t.params.length = detail::positive(kv["LEN"], lineno, "line length");
            t.params.r = kv.count("R") ? kv["R"] : 0.0;
            t.params.g = kv.count("G") ? kv["G"] : 0.0;
            if (t.params.r < 0.0 || t.params.g < 0.0) throw ParseError(lineno, "negative line loss");
            for (const auto* n : {&t.p1, &t.ref1, &t.p2, &t.ref2}) net.touch_node(*n);
            net.tlines.push_back(std::move(t));
            continue;
        }

        Element e;
        e.name = name;
        e.line = lineno;
        std::size_t nterm = 2;
        switch (kind) {
            case 'R': e.kind = ElementKind::resistor; break;
            case 'C': e.kind = ElementKind::capacitor; break;
            case 'L': e.kind = ElementKind::inductor; break;
            case 'V': e.kind = ElementKind::vsource; break;
            case 'I': e.kind = ElementKind::isource; break;
            case 'G': e.kind = ElementKind::vccs; nterm = 4; break;
            case 'D': e.kind = ElementKind::diode; break;
            case 'M': e.kind = ElementKind::mosfet; nterm = 3; break;
            default: throw ParseError(lineno, "unknown element kind '" + std::string(1, name[0]) + "'");
        }
        if (e.kind == ElementKind::mosfet && toks.size() > 4) {
            const std::string t4 = to_upper(toks[4]);
            if (t4 != "NMOS" && t4 != "PMOS") nterm = 4;
        }
        detail::require_count(toks, 1 + nterm + 1 - (e.kind == ElementKind::diode ? 1 : 0), lineno, "element");
        e.terminals.assign(toks.begin() + 1, toks.begin() + 1 + static_cast<long>(nterm));
        const std::size_t rest = 1 + nterm;

        switch (e.kind) {
            case ElementKind::resistor:
            case ElementKind::capacitor:
            case ElementKind::inductor: {
                if (toks.size() != rest + 1) throw ParseError(lineno, "expected a single value");
                static const char* keys[] = {"R", "C", "L"};
                static const char* what[] = {"resistor", "capacitor", "inductor"};
                const int idx = static_cast<int>(e.kind);
                e.params[keys[idx]] = detail::positive(detail::number_or_throw(toks[rest], lineno), lineno, what[idx]);
                break;
            }
            case ElementKind::vsource:
            case ElementKind::isource:
                e.wave = detail::parse_wave(toks, rest, lineno);
                break;
            case ElementKind::vccs:
                if (toks.size() != rest + 1) throw ParseError(lineno, "expected transconductance");
                e.params["GM"] = detail::number_or_throw(toks[rest], lineno);
                break;
            case ElementKind::diode: {
                auto kv = detail::keyword_params(toks, rest, lineno);
                e.params["IS"] = detail::positive(kv.count("IS") ? kv["IS"] : 1e-14, lineno, "diode IS");
                e.params["VT"] = detail::positive(kv.count("VT") ? kv["VT"] : 0.025, lineno, "diode VT");
                for (const auto& [k, v] : kv)
                    if (k != "IS" && k != "VT") throw ParseError(lineno, "unknown diode parameter " + k);
                break;
            }
            case ElementKind::mosfet: {
                if (toks.size() <= rest) throw ParseError(lineno, "MOSFET needs NMOS or PMOS");
                const std::string model = to_upper(toks[rest]);
                if (model != "NMOS" && model != "PMOS") throw ParseError(lineno, "MOSFET needs NMOS or PMOS");
                e.pmos = model == "PMOS";
                auto kv = detail::keyword_params(toks, rest + 1, lineno);
                e.params["VTO"] = kv.count("VTO") ? kv["VTO"] : (e.pmos ? -0.5 : 0.5);
                e.params["KP"] = detail::positive(kv.count("KP") ? kv["KP"] : 2e-4, lineno, "MOSFET KP");
                e.params["LAMBDA"] = kv.count("LAMBDA") ? kv["LAMBDA"] : 0.0;
                if (e.params["LAMBDA"] < 0.0) throw ParseError(lineno, "negative MOSFET LAMBDA");
                for (const auto& [k, v] : kv)
                    if (k != "VTO" && k != "KP" && k != "LAMBDA")
                        throw ParseError(lineno, "unknown MOSFET parameter " + k);
                break;
            }
        }
        for (const auto& n : e.terminals) net.touch_node(n);
        net.elements.push_back(std::move(e));
    }

    for (auto& [line, pv] : pending_prints) {
        if (pv.kind == PrintVar::Kind::voltage) {
            if (!net.has_node(pv.target)) throw ParseError(line, "undeclared node in .print: " + pv.target);
        } else {
            const auto dot = pv.target.find('.');
            if (dot != std::string::npos) {
                const auto* t = net.find_tline(pv.target.substr(0, dot));
                const std::string port = pv.target.substr(dot + 1);
                if (!t || (port != "1" && port != "2"))
                    throw ParseError(line, "unknown line port in .print: " + pv.target);
            } else {
                const auto* e = net.find_element(pv.target);
                if (!e || (e->kind != ElementKind::vsource && e->kind != ElementKind::inductor))
                    throw ParseError(line, "current probe needs a V or L element or a line port: " + pv.target);
            }
        }
        net.directives.prints.push_back(pv);
    }
    return net;
}

/// Renders a Netlist back to text accepted by parse_netlist.
inline std::string unparse(const Netlist& net) {
    std::ostringstream out;
    auto num = [](double v) { return format_number(v); };
    for (const auto& e : net.elements) {
        out << e.name;
        for (const auto& t : e.terminals) out << ' ' << t;
        switch (e.kind) {
            case ElementKind::resistor: out << ' ' << num(e.param("R")); break;
            case ElementKind::capacitor: out << ' ' << num(e.param("C")); break;
            case ElementKind::inductor: out << ' ' << num(e.param("L")); break;
            case ElementKind::vccs: out << ' ' << num(e.param("GM")); break;
            case ElementKind::vsource:
            case ElementKind::isource: {
                static const char* heads[] = {"DC", "PULSE", "SIN", "PWL"};
                const auto& w = *e.wave;
                out << ' ' << heads[static_cast<int>(w.shape)];
                if (w.shape != SourceWave::Shape::dc) out << '(';
                for (std::size_t k = 0; k < w.args.size(); ++k) out << (k ? " " : (w.shape == SourceWave::Shape::dc ? " " : "")) << num(w.args[k]);
                if (w.shape != SourceWave::Shape::dc) out << ')';
                break;
            }
            case ElementKind::diode:
                out << " IS=" << num(e.param("IS")) << " VT=" << num(e.param("VT"));
                break;
            case ElementKind::mosfet:
                out << (e.pmos ? " PMOS" : " NMOS") << " VTO=" << num(e.param("VTO"))
                    << " KP=" << num(e.param("KP")) << " LAMBDA=" << num(e.param("LAMBDA"));
                break;
        }
        out << '\n';
    }
    for (const auto& t : net.tlines) {
        out << t.name << ' ' << t.p1 << ' ' << t.ref1 << ' ' << t.p2 << ' ' << t.ref2
            << " L=" << num(t.params.l) << " C=" << num(t.params.c) << " LEN=" << num(t.params.length);
        if (t.params.r != 0.0) out << " R=" << num(t.params.r);
        if (t.params.g != 0.0) out << " G=" << num(t.params.g);
        out << '\n';
    }
    const auto& d = net.directives;
    if (d.tran) out << ".tran " << num(d.tran->step) << ' ' << num(d.tran->stop) << '\n';
    if (!d.partition_wires.empty()) {
        out << ".partition wire ";
        for (std::size_t k = 0; k < d.partition_wires.size(); ++k) out << (k ? "," : "") << d.partition_wires[k];
        out << '\n';
    }
    if (!d.prints.empty()) {
        out << ".print";
        for (const auto& p : d.prints) out << ' ' << p.label();
        out << '\n';
    }
    out << ".end\n";
    return out.str();
}

struct Diagnostic {
    enum class Severity { warning, error };
    Severity severity = Severity::warning;
    std::string message;
};

/// Structural checks that do not prevent parsing. An empty result means the netlist is clean.
inline std::vector<Diagnostic> validate(const Netlist& net) {
    std::vector<Diagnostic> out;
    std::unordered_map<std::string, int> attachments;
    std::set<std::string> sourced;
    for (const auto& e : net.elements) {
        for (const auto& n : e.terminals) {
            ++attachments[n];
            if (e.kind == ElementKind::vsource || e.kind == ElementKind::isource) sourced.insert(n);
        }
    }
    for (const auto& t : net.tlines)
        for (const auto* n : {&t.p1, &t.ref1, &t.p2, &t.ref2}) ++attachments[*n];

    for (const auto& n : net.nodes) {
        if (n == kGround || sourced.count(n)) continue;
        if (attachments[n] < 2)
            out.push_back({Diagnostic::Severity::warning,
                           "node " + n + " has a single attachment and no source (floating)"});
    }
    for (const auto& w : net.directives.partition_wires) {
        if (!net.find_tline(w))
            out.push_back({Diagnostic::Severity::error, ".partition names unknown transmission line " + w});
    }
    return out;
}

} // namespace mtm
