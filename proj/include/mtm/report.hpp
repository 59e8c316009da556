#pragma once

// CSV and SVG renderings of transient results and run statistics.

#include "mtm/mtm.hpp"
#include "mtm/netlist.hpp"
#include "mtm/solver.hpp"
#include "mtm/units.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace mtm {

/// Trace names to report: the `.print` list in order, or every node voltage.
inline std::vector<std::string> report_columns(const Netlist& net, const TransientResult& r) {
    std::vector<std::string> out;
    if (net.directives.prints.empty()) {
        for (const auto& n : r.names)
            if (n.starts_with("v(")) out.push_back(n);
        return out;
    }
    for (const auto& p : net.directives.prints) {
        const std::string want = p.label();
        auto it = std::find_if(r.names.begin(), r.names.end(), [&](const auto& n) { return iequals(n, want); });
        if (it == r.names.end()) throw std::invalid_argument("no result for " + want);
        out.push_back(*it);
    }
    return out;
}

inline void write_trace_csv(std::ostream& os, const TransientResult& r, const std::vector<std::string>& columns) {
    os << "# time in s; v(*) in V; i(*) in A\n";
    os << "time";
    for (const auto& c : columns) os << ',' << c;
    os << '\n';
    std::vector<const std::vector<double>*> cols;
    for (const auto& c : columns) cols.push_back(&r.trace(c));
    for (std::size_t n = 0; n < r.time.size(); ++n) {
        os << format_number(r.time[n]);
        for (const auto* c : cols) os << ',' << format_number((*c)[n]);
        os << '\n';
    }
}

/// Line plot with a fixed viewBox, autoscaled axes and one polyline per column.
inline void write_trace_svg(std::ostream& os, const TransientResult& r, const std::vector<std::string>& columns) {
    constexpr double width = 800, height = 400, margin = 40;
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    const double t0 = r.time.empty() ? 0.0 : r.time.front();
    const double t1 = r.time.empty() ? 1.0 : r.time.back();
    double lo = 0.0, hi = 0.0;
    for (const auto& c : columns)
        for (double v : r.trace(c)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (hi == lo) hi = lo + 1.0;
    const double tspan = t1 > t0 ? t1 - t0 : 1.0;
    auto px = [&](double t) { return margin + (t - t0) / tspan * (width - 2 * margin); };
    auto py = [&](double v) { return height - margin - (v - lo) / (hi - lo) * (height - 2 * margin); };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    os << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << width - 2 * margin << "\" height=\""
       << height - 2 * margin << "\" fill=\"none\" stroke=\"#888\"/>\n";
    os << "<text x=\"" << margin << "\" y=\"" << margin - 8 << "\" font-size=\"10\">" << format_number(hi)
       << "</text>\n";
    os << "<text x=\"" << margin << "\" y=\"" << height - margin + 14 << "\" font-size=\"10\">" << format_number(lo)
       << " (t=" << format_number(t0) << " s)</text>\n";
    os << "<text x=\"" << width - margin << "\" y=\"" << height - margin + 14
       << "\" font-size=\"10\" text-anchor=\"end\">t=" << format_number(t1) << " s</text>\n";
    for (std::size_t k = 0; k < columns.size(); ++k) {
        const auto& tr = r.trace(columns[k]);
        os << "<polyline fill=\"none\" stroke=\"" << palette[k % 6] << "\" data-name=\"" << columns[k]
           << "\" points=\"";
        for (std::size_t n = 0; n < tr.size(); ++n) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", n ? " " : "", px(r.time[n]), py(tr[n]));
            os << buf;
        }
        os << "\"/>\n";
    }
    os << "</svg>\n";
}

struct TraceDifference {
    std::string name;
    double max_abs = 0.0;
};

/// Max |a - b| per trace present in both results, over the common time points.
inline std::vector<TraceDifference> compare_traces(const TransientResult& a, const TransientResult& b,
                                                   bool voltages_only = true) {
    std::vector<TraceDifference> out;
    const std::size_t rows = std::min(a.time.size(), b.time.size());
    for (std::size_t k = 0; k < a.names.size(); ++k) {
        const auto& name = a.names[k];
        if (voltages_only && !name.starts_with("v(")) continue;
        if (!b.has(name)) continue;
        const auto& x = a.traces[k];
        const auto& y = b.trace(name);
        double worst = 0.0;
        for (std::size_t n = 0; n < rows; ++n) worst = std::max(worst, std::abs(x[n] - y[n]));
        out.push_back({name, worst});
    }
    return out;
}

inline double max_abs_value(const TransientResult& r, bool voltages_only = true) {
    double m = 0.0;
    for (std::size_t k = 0; k < r.names.size(); ++k) {
        if (voltages_only && !r.names[k].starts_with("v(")) continue;
        for (double v : r.traces[k]) m = std::max(m, std::abs(v));
    }
    return m;
}

inline void write_diff_csv(std::ostream& os, const std::vector<TraceDifference>& diffs) {
    os << "# max abs difference, MTM vs monolithic, in V\n";
    os << "trace,max_abs_diff\n";
    for (const auto& d : diffs) os << d.name << ',' << format_number(d.max_abs) << '\n';
}

struct StatsRow {
    std::string method;
    RunStats stats;
};

/// Counters only; wall-clock times are left out so the file is reproducible.
inline void write_stats_csv(std::ostream& os, const std::vector<StatsRow>& rows) {
    os << "method,windows,k_distri,messages,nr_iterations\n";
    for (const auto& r : rows) {
        long nr = 0;
        for (long v : r.stats.nr_iterations) nr += v;
        os << r.method << ',' << r.stats.windows << ',' << r.stats.k_distri << ',' << r.stats.messages << ',' << nr
           << '\n';
    }
}

} // namespace mtm
