#pragma once

// Distribution numerics: standard normal inverse CDF and chi-square
// CDF/quantile via the regularized incomplete gamma function.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace usforest {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

// Acklam's rational approximation with one Halley refinement step.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("normal_quantile: p must be in (0, 1)");
    }
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley step against erfc-based CDF
    const double e = normal_cdf(x) - p;
    const double u = e / normal_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

namespace detail {

// Regularized lower incomplete gamma P(a, x); series for x < a+1, continued
// fraction otherwise.
inline double gamma_p(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_p: invalid arguments");
    if (x == 0.0) return 0.0;
    const double gln = std::lgamma(a);
    const double eps = std::numeric_limits<double>::epsilon();
    const int max_iter = 500;
    if (x < a + 1.0) {
        double term = 1.0 / a;
        double sum = term;
        double ap = a;
        for (int i = 0; i < max_iter; ++i) {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if (std::fabs(term) < std::fabs(sum) * eps) break;
        }
        return sum * std::exp(-x + a * std::log(x) - gln);
    }
    // Lentz continued fraction for Q(a, x)
    const double fpmin = std::numeric_limits<double>::min() / eps;
    double b = x + 1.0 - a;
    double c = 1.0 / fpmin;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= max_iter; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = b + an / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    const double q = std::exp(-x + a * std::log(x) - gln) * h;
    return 1.0 - q;
}

}  // namespace detail

inline double chisq_cdf(double x, std::size_t df) {
    if (df < 1) throw std::invalid_argument("chisq_cdf: df must be >= 1");
    if (x <= 0.0) return 0.0;
    return detail::gamma_p(static_cast<double>(df) / 2.0, x / 2.0);
}

inline double chisq_pdf(double x, std::size_t df) {
    const double a = static_cast<double>(df) / 2.0;
    if (x <= 0.0) return 0.0;
    return std::exp((a - 1.0) * std::log(x) - x / 2.0 - a * std::log(2.0) - std::lgamma(a));
}

// Inverse chi-square CDF: Wilson-Hilferty start, Newton refinement with
// bisection safeguard.
inline double chisq_quantile(double p, std::size_t df) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("chisq_quantile: p must be in (0, 1)");
    }
    if (df < 1) throw std::invalid_argument("chisq_quantile: df must be >= 1");
    const double v = static_cast<double>(df);
    const double z = normal_quantile(p);
    const double t = 1.0 - 2.0 / (9.0 * v) + z * std::sqrt(2.0 / (9.0 * v));
    double x = v * t * t * t;
    if (!(x > 0.0)) x = v * std::exp((std::log(p) + std::lgamma(v / 2.0)) / (v / 2.0));
    if (!(x > 0.0)) x = 1e-300;

    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 200; ++iter) {
        const double f = chisq_cdf(x, df) - p;
        if (f > 0.0) {
            hi = x;
        } else {
            lo = x;
        }
        if (std::fabs(f) < 1e-14 * std::max(p, 1.0 - p)) break;
        const double deriv = chisq_pdf(x, df);
        double next = deriv > 0.0 ? x - f / deriv : x;
        if (!(next > lo) || !(next < hi)) {
            next = std::isinf(hi) ? 2.0 * x : 0.5 * (lo + hi);
        }
        if (next == x) break;
        x = next;
    }
    return x;
}

}  // namespace usforest
