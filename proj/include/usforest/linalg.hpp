#pragma once

// Small dense symmetric-positive-definite helpers for the chi-square
// quadratic form.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace usforest {
namespace linalg {

// Lower Cholesky factor of a symmetric n x n matrix; returns false if the
// matrix is not numerically positive definite.
inline bool cholesky(const std::vector<double>& a, std::size_t n,
                     std::vector<double>& lower) {
    lower.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) {
                sum -= lower[i * n + k] * lower[j * n + k];
            }
            if (i == j) {
                if (!(sum > 0.0)) return false;
                lower[i * n + i] = std::sqrt(sum);
            } else {
                lower[i * n + j] = sum / lower[j * n + j];
            }
        }
    }
    return true;
}

// Solve L L^T x = b given the lower factor.
inline std::vector<double> cholesky_solve(const std::vector<double>& lower, std::size_t n,
                                          const std::vector<double>& b) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = b[i];
        for (std::size_t k = 0; k < i; ++k) sum -= lower[i * n + k] * y[k];
        y[i] = sum / lower[i * n + i];
    }
    std::vector<double> x(n);
    for (std::size_t ii = n; ii > 0; --ii) {
        const std::size_t i = ii - 1;
        double sum = y[i];
        for (std::size_t k = i + 1; k < n; ++k) sum -= lower[k * n + i] * x[k];
        x[i] = sum / lower[i * n + i];
    }
    return x;
}

inline double trace(const std::vector<double>& a, std::size_t n) {
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) t += a[i * n + i];
    return t;
}

}  // namespace linalg
}  // namespace usforest
