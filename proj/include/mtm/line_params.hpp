#pragma once

#include <cmath>

namespace mtm {

/// Per-unit-length description of a uniform two-conductor line (SI units, per meter).
struct LineParams {
    double r = 0.0;      ///< ohm/m
    double l = 0.0;      ///< henry/m
    double g = 0.0;      ///< siemens/m
    double c = 0.0;      ///< farad/m
    double length = 0.0; ///< m

    double delay() const { return length * std::sqrt(l * c); }
    double impedance() const { return std::sqrt(l / c); }
    double alpha() const { return 0.5 * (r / l - g / c); }
    double beta() const { return 0.5 * (r / l + g / c); }
    bool lossless() const { return r == 0.0 && g == 0.0; }

    bool operator==(const LineParams&) const = default;
};

} // namespace mtm
