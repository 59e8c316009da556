#pragma once

// Dense LU factorization with partial pivoting.
//
// Storage is dense row-major, but the elimination only visits nonzero
// multipliers and the nonzero tail of each pivot row, and the factors are
// compacted into row lists before solving. Narrow-banded MNA matrices (ladders,
// chains) therefore cost O(n * bandwidth^2) instead of O(n^3).

#include "mtm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace mtm {

/// Square dense matrix, row-major.
class DenseMatrix {
public:
    DenseMatrix() = default;
    explicit DenseMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

    std::size_t size() const noexcept { return n_; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * n_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * n_ + c]; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * n_, n_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * n_, n_}; }
    void zero() { std::fill(data_.begin(), data_.end(), 0.0); }

    std::vector<double> multiply(std::span<const double> x) const {
        std::vector<double> y(n_, 0.0);
        for (std::size_t r = 0; r < n_; ++r) {
            double s = 0.0;
            const double* a = data_.data() + r * n_;
            for (std::size_t c = 0; c < n_; ++c) s += a[c] * x[c];
            y[r] = s;
        }
        return y;
    }

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

class LuFactorization {
public:
    static constexpr double kPivotFloor = 1e-13;

    LuFactorization() = default;

    /// Factors `a` (consumed). Throws SingularMatrix when the best pivot is <= kPivotFloor.
    explicit LuFactorization(DenseMatrix a) { factor(std::move(a)); }

    std::size_t size() const noexcept { return n_; }

    void factor(DenseMatrix a) {
        n_ = a.size();
        perm_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) perm_[i] = i;

        std::vector<std::size_t> tail;
        tail.reserve(n_);
        for (std::size_t k = 0; k < n_; ++k) {
            std::size_t p = k;
            double best = std::abs(a(k, k));
            for (std::size_t i = k + 1; i < n_; ++i) {
                const double v = std::abs(a(i, k));
                if (v > best) {
                    best = v;
                    p = i;
                }
            }
            if (!(best > kPivotFloor)) throw SingularMatrix(k, best);
            if (p != k) {
                std::swap_ranges(a.row(k).begin(), a.row(k).end(), a.row(p).begin());
                std::swap(perm_[k], perm_[p]);
            }

            tail.clear();
            const auto pivot_row = a.row(k);
            for (std::size_t j = k + 1; j < n_; ++j)
                if (pivot_row[j] != 0.0) tail.push_back(j);

            const double pivot = pivot_row[k];
            for (std::size_t i = k + 1; i < n_; ++i) {
                double& lik = a(i, k);
                if (lik == 0.0) continue;
                lik /= pivot;
                const double m = lik;
                auto r = a.row(i);
                for (std::size_t j : tail) r[j] -= m * pivot_row[j];
            }
        }

        lower_.assign(n_, {});
        upper_.assign(n_, {});
        diag_.assign(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            const auto r = a.row(i);
            for (std::size_t j = 0; j < i; ++j)
                if (r[j] != 0.0) lower_[i].emplace_back(j, r[j]);
            diag_[i] = r[i];
            for (std::size_t j = i + 1; j < n_; ++j)
                if (r[j] != 0.0) upper_[i].emplace_back(j, r[j]);
        }
    }

    std::vector<double> solve(std::span<const double> b) const {
        std::vector<double> x(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            double s = b[perm_[i]];
            for (const auto& [j, v] : lower_[i]) s -= v * x[j];
            x[i] = s;
        }
        for (std::size_t ii = n_; ii-- > 0;) {
            double s = x[ii];
            for (const auto& [j, v] : upper_[ii]) s -= v * x[j];
            x[ii] = s / diag_[ii];
        }
        return x;
    }

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> perm_;
    std::vector<std::vector<std::pair<std::size_t, double>>> lower_;
    std::vector<std::vector<std::pair<std::size_t, double>>> upper_;
    std::vector<double> diag_;
};

inline std::vector<double> lu_solve(DenseMatrix a, std::span<const double> b) {
    return LuFactorization(std::move(a)).solve(b);
}

} // namespace mtm
