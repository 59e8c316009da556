#pragma once

// Transmission-line mathematics: delay and impedance, the lossless delay
// equations, the lossy kernels h/g/f with their discrete convolution, and the
// lumped RLGC ladder used as a reference model.
//
// Sign convention: a port current is the current flowing out of the line into
// the port's positive node. With that convention the delay equations read
//
//   u1(t) + Z i1(t) = u2(t - tau) - Z i2(t - tau)
//   u2(t) + Z i2(t) = u1(t - tau) - Z i1(t - tau)
//
// and sample index 0 is t = 0, where every voltage and current is zero.

#include "mtm/bessel.hpp"
#include "mtm/errors.hpp"
#include "mtm/line_params.hpp"
#include "mtm/netlist.hpp"
#include "mtm/units.hpp"

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mtm {

inline double char_impedance(double l, double c) { return std::sqrt(l / c); }

inline double prop_delay(double length, double l, double c) { return length * std::sqrt(l * c); }

/// Number of whole steps in `tau`. Throws OffGridDelay unless tau/dt is within 1e-9 of an integer.
inline long delay_steps(double tau, double dt) {
    const double ratio = tau / dt;
    const double whole = std::round(ratio);
    if (whole < 1.0 || std::abs(ratio - whole) > 1e-9 * std::max(1.0, whole))
        throw OffGridDelay("line delay " + format_number(tau) + " s is not a multiple of step " +
                           format_number(dt) + " s");
    return static_cast<long>(whole);
}

// --- lossy kernels ---------------------------------------------------------

struct LossyKernels {
    double h = 0.0;
    double g = 0.0;
    double f = 0.0;
};

/// h, g, f at t >= 0 for given alpha, beta and delay tau. The removable
/// singularity of g and f at t = 0 is replaced by its limit.
inline LossyKernels lossy_kernels(double alpha, double beta, double tau, double t) {
    LossyKernels k;
    if (alpha == 0.0) return k;

    // e^{-beta t} I_nu(z), computed as e^{|z| - beta t} * I_nu_e(z) to stay finite for long runs.
    auto damped_i0 = [&](double z) { return std::exp(std::abs(z) - beta * t) * bessel_i0e(z); };
    auto damped_i1 = [&](double z) { return std::exp(std::abs(z) - beta * t) * bessel_i1e(z); };

    k.h = alpha * (damped_i1(alpha * t) - damped_i0(alpha * t));
    if (t == 0.0) {
        k.f = 0.5 * alpha * alpha * tau;
        k.g = k.f - alpha;
        return k;
    }
    const double s = std::sqrt(t * t + 2.0 * tau * t);
    const double z = alpha * s;
    const double i1_over_s = damped_i1(z) / s;
    k.g = alpha * ((t + tau) * i1_over_s - damped_i0(z));
    k.f = alpha * tau * i1_over_s;
    return k;
}

inline LossyKernels lossy_kernels(const LineParams& p, double t) {
    return lossy_kernels(p.alpha(), p.beta(), p.delay(), t);
}

// --- convolution ------------------------------------------------------------

struct ConvolutionTerms {
    double c1 = 0.0; ///< multiplies the unknown x(t)
    double c2 = 0.0; ///< accumulated contribution of x(s), s < t
};

/// Trapezoid-rule value of sum_{i=0}^{k-2} integral_{i dt}^{(i+1) dt} x(s) y(k dt - s) ds,
/// with x and y given as samples on the dt grid (y[j] = y(j dt)). Uses x[0..k-1], y[1..k].
inline double convolution_history(std::span<const double> x, std::span<const double> y, long k, double dt) {
    if (k < 2) return 0.0;
    const auto xs = [&](long i) { return i < static_cast<long>(x.size()) ? x[static_cast<std::size_t>(i)] : 0.0; };
    double sum = 0.5 * (xs(0) * y[static_cast<std::size_t>(k)] + xs(k - 1) * y[1]);
    for (long i = 1; i <= k - 2; ++i) sum += xs(i) * y[static_cast<std::size_t>(k - i)];
    return sum * dt;
}

/// Splits x * y at t = (samples.size() - 1) dt into C1 x(t) + C2, where the
/// last sample is the unknown x(t) and C1 = y(0) dt.
inline ConvolutionTerms discretize_convolution(std::span<const double> samples,
                                               const std::function<double(double)>& kernel, double dt) {
    ConvolutionTerms out;
    if (samples.empty()) return out;
    const long k = static_cast<long>(samples.size()) - 1;
    std::vector<double> y(static_cast<std::size_t>(k) + 1);
    for (long j = 0; j <= k; ++j) y[static_cast<std::size_t>(j)] = kernel(static_cast<double>(j) * dt);
    out.c1 = y[0] * dt;
    out.c2 = convolution_history(samples, y, k, dt);
    return out;
}

// --- port histories ---------------------------------------------------------

/// Uniformly sampled (u, i) of one port; index 0 is t = 0, negative indices read as zero.
class WaveformHistory {
public:
    WaveformHistory() { clear(); }

    /// Explicit samples from t = 0 (test fixtures and replays).
    WaveformHistory(std::vector<double> u, std::vector<double> i) : u_(std::move(u)), i_(std::move(i)) {
        if (u_.size() != i_.size() || u_.empty()) throw std::invalid_argument("u and i need equal, nonzero length");
    }

    void clear() {
        u_.assign(1, 0.0);
        i_.assign(1, 0.0);
    }

    void push(double u, double i) {
        u_.push_back(u);
        i_.push_back(i);
    }

    /// Drops samples with index >= n (used to undo speculative extensions).
    void truncate(std::size_t n) {
        u_.resize(n);
        i_.resize(n);
    }

    std::size_t size() const noexcept { return u_.size(); }
    double u(long n) const { return n < 0 ? 0.0 : u_.at(static_cast<std::size_t>(n)); }
    double i(long n) const { return n < 0 ? 0.0 : i_.at(static_cast<std::size_t>(n)); }
    std::span<const double> u_samples() const { return u_; }
    std::span<const double> i_samples() const { return i_; }

    bool operator==(const WaveformHistory&) const = default;

private:
    std::vector<double> u_;
    std::vector<double> i_;
};

/// Both ports of one line on a common grid.
struct PortHistory {
    double dt = 0.0;
    WaveformHistory port1;
    WaveformHistory port2;
};

/// One port equation a*u + b*i = rhs, everything but u and i known.
struct PortEquation {
    double a = 1.0;
    double b = 0.0;
    double rhs = 0.0;
};

/// Right-hand sides e1, e2 of the lossless delay equations at step n.
struct LosslessRhs {
    double e1 = 0.0;
    double e2 = 0.0;
};

inline LosslessRhs lossless_port_rhs(const PortHistory& h, const LineParams& p, long n) {
    const long m = n - delay_steps(p.delay(), h.dt);
    const double z = p.impedance();
    return {h.port2.u(m) - z * h.port2.i(m), h.port1.u(m) - z * h.port1.i(m)};
}

/// Coefficients of the discrete lossy port relation for one port:
///   a*u(t) + b*i(t) + d = e*u_peer(t - tau) + g*i_peer(t - tau) + h
struct LossyPortCoefficients {
    double a = 1.0, b = 0.0, d = 0.0;
    double e = 1.0, g = 0.0, h = 0.0;
};

struct LossyLineCoefficients {
    LossyPortCoefficients port1; ///< A1, B1, D1 with E2, G2, H2
    LossyPortCoefficients port2; ///< A2, B2, D2 with E1, G1, H1
};

/// Per-endpoint model of a line on a fixed grid. Kernel samples are cached
/// and grown on demand, so an instance belongs to one worker.
class LineModel {
public:
    LineModel(const LineParams& params, double dt, long delay_steps, bool lossy)
        : params_(params), dt_(dt), delay_(delay_steps), lossy_(lossy), z_(params.impedance()) {
        if (delay_steps < 1) throw OffGridDelay("line delay shorter than one step");
        if (!lossy && !params.lossless())
            throw std::invalid_argument("lossless line model requested for a lossy line");
        tau_ = static_cast<double>(delay_) * dt_;
        attenuation_ = std::exp(-params_.beta() * tau_);
    }

    const LineParams& params() const noexcept { return params_; }
    double impedance() const noexcept { return z_; }
    long delay() const noexcept { return delay_; }
    double dt() const noexcept { return dt_; }
    bool lossy() const noexcept { return lossy_; }

    /// Full coefficient set for the endpoint whose own samples are `own` and
    /// whose far-end samples are `peer`, at step n.
    LossyPortCoefficients coefficients(const WaveformHistory& own, const WaveformHistory& peer, long n) {
        LossyPortCoefficients c;
        c.b = z_;
        c.g = -z_;
        if (!lossy_) return c;
        const long m = n - delay_;
        grow(static_cast<std::size_t>(std::max(n, 0L)) + 1);
        c.a = 1.0 + h_[0] * dt_;
        c.d = convolution_history(own.u_samples(), h_, n, dt_);
        c.e = attenuation_ * (1.0 + g_[0] * dt_);
        c.g = -z_ * attenuation_ * (1.0 + f_[0] * dt_);
        if (m >= 2) {
            c.h = attenuation_ * (convolution_history(peer.u_samples(), g_, m, dt_) -
                                  z_ * convolution_history(peer.i_samples(), f_, m, dt_));
        }
        return c;
    }

    PortEquation equation(const WaveformHistory& own, const WaveformHistory& peer, long n) {
        const long m = n - delay_;
        if (!lossy_) return {1.0, z_, peer.u(m) - z_ * peer.i(m)};
        const auto c = coefficients(own, peer, n);
        return {c.a, c.b, c.e * peer.u(m) + c.g * peer.i(m) + c.h - c.d};
    }

    /// Kernel samples y(j dt), j < count.
    void grow(std::size_t count) {
        while (h_.size() < count) {
            const auto k = lossy_kernels(params_.alpha(), params_.beta(), tau_,
                                         static_cast<double>(h_.size()) * dt_);
            h_.push_back(k.h);
            g_.push_back(k.g);
            f_.push_back(k.f);
        }
    }

private:
    LineParams params_;
    double dt_;
    long delay_;
    bool lossy_;
    double z_;
    double tau_ = 0.0;
    double attenuation_ = 1.0;
    std::vector<double> h_, g_, f_;
};

/// Coefficients of the discrete lossy relation for both ports at step n.
inline LossyLineCoefficients lossy_port_coefficients(const PortHistory& h, const LineParams& p, long n) {
    LineModel model(p, h.dt, delay_steps(p.delay(), h.dt), true);
    return {model.coefficients(h.port1, h.port2, n), model.coefficients(h.port2, h.port1, n)};
}

// --- lumped reference -------------------------------------------------------

/// Expands a line into `nseg` series R/L sections with shunt G/C, between
/// (p1, ref) and (p2, ref). Internal nodes and element names carry `prefix`.
inline std::vector<Element> lumped_rlgc_expand(const LineParams& p, int nseg, const std::string& p1,
                                               const std::string& p2, const std::string& ref,
                                               const std::string& prefix) {
    if (nseg < 1) throw std::invalid_argument("lumped expansion needs at least one segment");
    const double n = static_cast<double>(nseg);
    const double r_seg = p.r * p.length / n;
    const double l_seg = p.l * p.length / n;
    const double g_seg = p.g * p.length / n;
    const double c_seg = p.c * p.length / n;

    std::vector<Element> out;
    auto add = [&](ElementKind kind, const std::string& name, const std::string& a, const std::string& b,
                   const char* key, double value) {
        Element e;
        e.kind = kind;
        e.name = name;
        e.terminals = {a, b};
        e.params[key] = value;
        out.push_back(std::move(e));
    };

    std::string left = p1;
    for (int k = 1; k <= nseg; ++k) {
        const std::string tag = prefix + "_" + std::to_string(k);
        const std::string right = k == nseg ? p2 : prefix + "_n" + std::to_string(k);
        std::string mid = left;
        if (r_seg > 0.0) {
            mid = prefix + "_m" + std::to_string(k);
            add(ElementKind::resistor, "R" + tag, left, mid, "R", r_seg);
        }
        add(ElementKind::inductor, "L" + tag, mid, right, "L", l_seg);
        add(ElementKind::capacitor, "C" + tag, right, ref, "C", c_seg);
        if (g_seg > 0.0) add(ElementKind::resistor, "R" + tag + "g", right, ref, "R", 1.0 / g_seg);
        left = right;
    }
    return out;
}

} // namespace mtm
