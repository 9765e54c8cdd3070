#pragma once

// Variance parameter estimators: zeta_1 from fixed-point group means, zeta_kk
// from all per-tree predictions, and their multivariate analogues for the
// difference-function test.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "usforest/ensemble.hpp"

namespace usforest {

struct VarianceEstimate {
    double zeta1 = 0.0;
    double zetakk = 0.0;
    std::size_t n = 0;
    std::size_t k = 0;
    std::size_t m = 0;
    std::size_t n_z = 0;   // 0 when not applicable
    std::size_t n_mc = 0;  // 0 when not applicable
    double alpha_hat = 0.0;  // n / m

    void validate() const {
        if (!(zeta1 >= 0.0) || !std::isfinite(zeta1) ||
            !(zetakk >= 0.0) || !std::isfinite(zetakk)) {
            throw std::invalid_argument("VarianceEstimate: zeta values must be finite and >= 0");
        }
        if (n == 0 || k == 0 || m == 0) {
            throw std::invalid_argument("VarianceEstimate: n, k, m must be positive");
        }
    }
};

struct CovarianceEstimate {
    std::size_t dim = 0;
    std::vector<double> sigma1;    // N x N, covariance of group-mean rows
    std::vector<double> sigmakk;   // N x N, covariance of all rows
    std::vector<double> combined;  // (k^2/n) sigma1 + (1/m) sigmakk
};

namespace detail {

// Sample variance with the n-1 denominator.
inline double sample_variance(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n < 2) throw std::invalid_argument("sample_variance: need at least 2 values");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double var = ss / static_cast<double>(n - 1);
    return var > 0.0 ? var : 0.0;
}

// Sample covariance of rows (count x dim, row-major), n-1 denominator.
inline std::vector<double> sample_covariance(const std::vector<double>& rows,
                                             std::size_t count, std::size_t dim) {
    if (count < 2) throw std::invalid_argument("sample_covariance: need at least 2 rows");
    if (rows.size() != count * dim) {
        throw std::invalid_argument("sample_covariance: shape mismatch");
    }
    std::vector<double> mean(dim, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t j = 0; j < dim; ++j) mean[j] += rows[i * dim + j];
    }
    for (double& v : mean) v /= static_cast<double>(count);
    std::vector<double> cov(dim * dim, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t a = 0; a < dim; ++a) {
            const double da = rows[i * dim + a] - mean[a];
            for (std::size_t b = a; b < dim; ++b) {
                cov[a * dim + b] += da * (rows[i * dim + b] - mean[b]);
            }
        }
    }
    for (std::size_t a = 0; a < dim; ++a) {
        for (std::size_t b = a; b < dim; ++b) {
            cov[a * dim + b] /= static_cast<double>(count - 1);
            cov[b * dim + a] = cov[a * dim + b];
        }
    }
    return cov;
}

}  // namespace detail

// Sample variance of the group means (fixed-point groups at one point).
inline double estimate_zeta1(const std::vector<std::vector<double>>& grouped_predictions) {
    if (grouped_predictions.size() < 2) {
        throw std::invalid_argument("estimate_zeta1: need at least 2 groups");
    }
    std::vector<double> means;
    means.reserve(grouped_predictions.size());
    for (const auto& group : grouped_predictions) {
        if (group.empty()) throw std::invalid_argument("estimate_zeta1: empty group");
        double s = 0.0;
        for (double v : group) s += v;
        means.push_back(s / static_cast<double>(group.size()));
    }
    return detail::sample_variance(means);
}

// Sample variance of all per-tree predictions at one point.
inline double estimate_zetakk(const std::vector<double>& predictions) {
    return detail::sample_variance(predictions);
}

// Both parameters from one internally-built ensemble (fixed-point plan).
inline VarianceEstimate estimate_internal(const EnsemblePrediction& pred,
                                          std::size_t point) {
    if (!pred.groups) {
        throw std::invalid_argument("estimate_internal: ensemble has no group structure");
    }
    VarianceEstimate est;
    est.zeta1 = estimate_zeta1(pred.grouped_at(point));
    std::vector<double> all(pred.m);
    for (std::size_t j = 0; j < pred.m; ++j) all[j] = pred.tree_pred(j, point);
    est.zetakk = estimate_zetakk(all);
    est.n = pred.n;
    est.k = pred.k;
    est.m = pred.m;
    est.n_z = pred.groups->n_z;
    est.n_mc = pred.groups->n_mc;
    est.alpha_hat = static_cast<double>(est.n) / static_cast<double>(est.m);
    return est;
}

// Variance of the averaged prediction: (k^2/n) zeta1 + (1/m) zetakk.
inline double ensemble_variance(const VarianceEstimate& est) {
    est.validate();
    const double k = static_cast<double>(est.k);
    return k * k / static_cast<double>(est.n) * est.zeta1 +
           est.zetakk / static_cast<double>(est.m);
}

inline std::vector<double> combine_sigma(const std::vector<double>& sigma1,
                                         const std::vector<double>& sigmakk,
                                         std::size_t dim, std::size_t n, std::size_t k,
                                         std::size_t m) {
    std::vector<double> out(dim * dim);
    const double w1 = static_cast<double>(k) * static_cast<double>(k) / static_cast<double>(n);
    const double wk = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < dim * dim; ++i) {
        out[i] = w1 * sigma1[i] + wk * sigmakk[i];
    }
    return out;
}

// Multivariate analogue over difference rows: all_diffs is m x dim row-major
// in group-major order (group g occupies rows [g*n_mc, (g+1)*n_mc)).
inline CovarianceEstimate estimate_sigma(const std::vector<double>& all_diffs,
                                         std::size_t dim, GroupShape shape,
                                         std::size_t n, std::size_t k) {
    const std::size_t m = shape.n_z * shape.n_mc;
    if (dim < 1) throw std::invalid_argument("estimate_sigma: dim must be >= 1");
    if (shape.n_z < 2) throw std::invalid_argument("estimate_sigma: need n_z >= 2");
    if (m < 2) throw std::invalid_argument("estimate_sigma: need m >= 2");
    if (all_diffs.size() != m * dim) {
        throw std::invalid_argument("estimate_sigma: shape mismatch");
    }
    std::vector<double> group_means(shape.n_z * dim, 0.0);
    for (std::size_t g = 0; g < shape.n_z; ++g) {
        for (std::size_t j = 0; j < shape.n_mc; ++j) {
            const double* row = all_diffs.data() + (g * shape.n_mc + j) * dim;
            for (std::size_t i = 0; i < dim; ++i) group_means[g * dim + i] += row[i];
        }
        for (std::size_t i = 0; i < dim; ++i) {
            group_means[g * dim + i] /= static_cast<double>(shape.n_mc);
        }
    }
    CovarianceEstimate out;
    out.dim = dim;
    out.sigma1 = detail::sample_covariance(group_means, shape.n_z, dim);
    out.sigmakk = detail::sample_covariance(all_diffs, m, dim);
    out.combined = combine_sigma(out.sigma1, out.sigmakk, dim, n, k, m);
    return out;
}

}  // namespace usforest
