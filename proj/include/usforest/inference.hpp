#pragma once

// Inference procedures: normal confidence intervals and mean test for the
// averaged prediction, and the chi-square difference test (plus the
// randomized-feature battery) for feature significance.

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "usforest/ensemble.hpp"
#include "usforest/linalg.hpp"
#include "usforest/stats.hpp"
#include "usforest/variance.hpp"

namespace usforest {

struct ConfidenceInterval {
    double theta_hat = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.0;
    double variance_used = 0.0;
};

enum class TestKind { MeanTest, ChiSqDifference };

struct TestResult {
    double statistic = 0.0;
    std::size_t df = 0;  // 0 for the normal mean test
    double critical_value = 0.0;
    double p_value = 1.0;
    bool reject = false;
    TestKind kind = TestKind::MeanTest;
    std::string label;
};

class SingularCovarianceError : public std::runtime_error {
public:
    explicit SingularCovarianceError(const std::string& msg) : std::runtime_error(msg) {}
};

inline ConfidenceInterval confidence_interval(double theta_hat,
                                              const VarianceEstimate& est,
                                              double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw std::invalid_argument("confidence_interval: level must be in (0, 1)");
    }
    const double variance = ensemble_variance(est);
    ConfidenceInterval ci;
    ci.theta_hat = theta_hat;
    ci.level = level;
    ci.variance_used = variance;
    if (variance == 0.0) {
        ci.lower = ci.upper = theta_hat;
        return ci;
    }
    const double half = normal_quantile(1.0 - (1.0 - level) / 2.0) * std::sqrt(variance);
    ci.lower = theta_hat - half;
    ci.upper = theta_hat + half;
    return ci;
}

inline ConfidenceInterval confidence_interval(const EnsemblePrediction& pred,
                                              std::size_t point,
                                              const VarianceEstimate& est,
                                              double level) {
    if (est.n != pred.n || est.k != pred.k) {
        throw std::invalid_argument("confidence_interval: estimate does not match ensemble");
    }
    return confidence_interval(pred.theta_hat[point], est, level);
}

inline TestResult mean_test(double theta_hat, double c, const VarianceEstimate& est,
                            double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("mean_test: alpha must be in (0, 1)");
    }
    const double variance = ensemble_variance(est);
    if (!(variance > 0.0)) {
        throw std::invalid_argument("mean_test: zero variance estimate");
    }
    TestResult res;
    res.kind = TestKind::MeanTest;
    res.label = "mean_test";
    res.statistic = (theta_hat - c) / std::sqrt(variance);
    res.df = 0;
    res.critical_value = normal_quantile(1.0 - alpha / 2.0);
    res.p_value = 2.0 * (1.0 - normal_cdf(std::fabs(res.statistic)));
    res.reject = std::fabs(res.statistic) > res.critical_value;
    return res;
}

// Parameters for the auxiliary fixed-point run that estimates Sigma_1 when the
// main ensemble uses a Uniform plan (external estimation).
struct ZetaEstimationPlan {
    std::size_t n_z = 50;
    std::size_t n_mc = 500;
};

namespace detail {

inline std::vector<double> difference_rows(const EnsemblePrediction& a,
                                           const EnsemblePrediction& b) {
    std::vector<double> diffs(a.per_tree.size());
    for (std::size_t i = 0; i < diffs.size(); ++i) {
        diffs[i] = a.per_tree[i] - b.per_tree[i];
    }
    return diffs;
}

inline std::vector<double> column_means(const std::vector<double>& rows, std::size_t count,
                                        std::size_t dim) {
    std::vector<double> mean(dim, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t j = 0; j < dim; ++j) mean[j] += rows[i * dim + j];
    }
    for (double& v : mean) v /= static_cast<double>(count);
    return mean;
}

// mu^T Sigma^{-1} mu with a single ridge retry on factorization failure.
inline double quadratic_form(const std::vector<double>& mu, std::vector<double> sigma,
                             std::size_t dim) {
    std::vector<double> lower;
    if (!linalg::cholesky(sigma, dim, lower)) {
        const double ridge = 1e-8 * linalg::trace(sigma, dim) / static_cast<double>(dim);
        for (std::size_t i = 0; i < dim; ++i) sigma[i * dim + i] += ridge;
        if (!linalg::cholesky(sigma, dim, lower)) {
            throw SingularCovarianceError(
                "difference-test covariance is numerically singular across the " +
                std::to_string(dim) + " test points, even after ridge regularization");
        }
    }
    const std::vector<double> solved = linalg::cholesky_solve(lower, dim, mu);
    double stat = 0.0;
    for (std::size_t i = 0; i < dim; ++i) stat += mu[i] * solved[i];
    return stat;
}

struct DifferenceSummary {
    std::vector<double> mu;
    std::vector<double> sigma;  // combined covariance of the averaged differences
    std::size_t m = 0;
    bool all_zero = false;
};

// Difference summary for a pair of builders sharing subsamples and omega
// streams.  FixedPoint plans estimate everything from one paired build;
// Uniform plans take mu and Sigma_kk from the uniform build and Sigma_1 from
// an auxiliary fixed-point paired build.
inline DifferenceSummary paired_difference_summary(
    const Dataset& data_a, const std::vector<std::size_t>* subset_a,
    const Dataset& data_b, const std::vector<std::size_t>* subset_b,
    const std::vector<PredictionPoint>& points, const EnsembleConfig& cfg,
    const ZetaEstimationPlan& zeta_plan) {
    const std::size_t dim = points.size();
    DifferenceSummary out;

    if (cfg.plan.is_fixed_point()) {
        auto [full, other] = build_paired(data_a, subset_a, data_b, subset_b, cfg, points);
        const std::vector<double> diffs = difference_rows(full, other);
        out.m = full.m;
        out.mu = column_means(diffs, full.m, dim);
        out.all_zero = std::all_of(diffs.begin(), diffs.end(),
                                   [](double v) { return v == 0.0; });
        if (out.all_zero) return out;
        const CovarianceEstimate cov =
            estimate_sigma(diffs, dim, *full.groups, full.n, full.k);
        out.sigma = cov.combined;
        return out;
    }

    auto [full, other] = build_paired(data_a, subset_a, data_b, subset_b, cfg, points);
    const std::vector<double> diffs = difference_rows(full, other);
    out.m = full.m;
    out.mu = column_means(diffs, full.m, dim);
    out.all_zero = std::all_of(diffs.begin(), diffs.end(),
                               [](double v) { return v == 0.0; });
    if (out.all_zero) return out;
    const std::vector<double> sigmakk = detail::sample_covariance(diffs, full.m, dim);

    EnsembleConfig zeta_cfg = cfg;
    zeta_cfg.plan.scheme = FixedPointScheme{zeta_plan.n_z, zeta_plan.n_mc, 1};
    zeta_cfg.plan.seed = mix64(cfg.plan.seed ^ 0x7a657461ULL);
    zeta_cfg.seed = mix64(cfg.seed ^ 0x7a657461ULL);
    auto [zfull, zother] =
        build_paired(data_a, subset_a, data_b, subset_b, zeta_cfg, points);
    const std::vector<double> zdiffs = difference_rows(zfull, zother);
    std::vector<double> group_means(zeta_plan.n_z * dim, 0.0);
    for (std::size_t g = 0; g < zeta_plan.n_z; ++g) {
        for (std::size_t j = 0; j < zeta_plan.n_mc; ++j) {
            const double* row = zdiffs.data() + (g * zeta_plan.n_mc + j) * dim;
            for (std::size_t i = 0; i < dim; ++i) group_means[g * dim + i] += row[i];
        }
        for (std::size_t i = 0; i < dim; ++i) {
            group_means[g * dim + i] /= static_cast<double>(zeta_plan.n_mc);
        }
    }
    const std::vector<double> sigma1 =
        detail::sample_covariance(group_means, zeta_plan.n_z, dim);
    out.sigma = combine_sigma(sigma1, sigmakk, dim, full.n, full.k, full.m);
    return out;
}

inline TestResult chisq_test_from_summary(const DifferenceSummary& summary,
                                          std::size_t dim, double alpha,
                                          const std::string& label) {
    TestResult res;
    res.kind = TestKind::ChiSqDifference;
    res.label = label;
    res.df = dim;
    res.critical_value = chisq_quantile(1.0 - alpha, dim);
    if (summary.all_zero) {
        res.statistic = 0.0;
        res.p_value = 1.0;
        res.reject = false;
        return res;
    }
    res.statistic = quadratic_form(summary.mu, summary.sigma, dim);
    res.p_value = 1.0 - chisq_cdf(res.statistic, dim);
    res.reject = res.statistic > res.critical_value;
    return res;
}

inline void check_significance_inputs(const std::vector<PredictionPoint>& points,
                                      const EnsembleConfig& cfg,
                                      const ZetaEstimationPlan& zeta_plan, double alpha) {
    if (points.empty()) throw std::invalid_argument("significance_test: no test points");
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("significance_test: alpha must be in (0, 1)");
    }
    const std::size_t n_z = cfg.plan.is_fixed_point()
                                ? std::get<FixedPointScheme>(cfg.plan.scheme).n_z
                                : zeta_plan.n_z;
    if (points.size() > n_z / 2) {
        std::cerr << "usforest: warning: " << points.size()
                  << " test points is large relative to n_z=" << n_z
                  << "; covariance estimate may be unstable\n";
    }
}

}  // namespace detail

// Chi-square test of the full-vs-reduced difference function over the test
// points.  reduced_features equal to the full feature set is allowed and
// yields a statistic of exactly 0.
inline TestResult significance_test(const Dataset& data,
                                    const std::vector<std::size_t>& reduced_features,
                                    const std::vector<PredictionPoint>& points,
                                    const EnsembleConfig& cfg, double alpha,
                                    const ZetaEstimationPlan& zeta_plan = {}) {
    if (reduced_features.empty() || reduced_features.size() > data.n_features) {
        throw std::invalid_argument("significance_test: invalid reduced feature set");
    }
    detail::check_significance_inputs(points, cfg, zeta_plan, alpha);
    const detail::DifferenceSummary summary = detail::paired_difference_summary(
        data, nullptr, data, &reduced_features, points, cfg, zeta_plan);
    return detail::chisq_test_from_summary(summary, points.size(), alpha,
                                           "full_vs_reduced");
}

enum class EstimationMethod { External, Internal };

struct EstimationSpec {
    EstimationMethod method = EstimationMethod::External;
    std::size_t n_z = 50;
    std::size_t n_mc = 500;
};

struct PredictReport {
    EnsemblePrediction pred;
    std::vector<VarianceEstimate> per_point;
};

// Ensemble prediction plus per-point variance estimates.  External: theta_hat
// and zeta_kk from the Uniform-plan ensemble, zeta_1 from an auxiliary
// fixed-point run.  Internal: one fixed-point ensemble supplies everything.
inline PredictReport predict_with_variance(const Dataset& data, const EnsembleConfig& cfg,
                                           const EstimationSpec& estimation,
                                           const std::vector<PredictionPoint>& points) {
    PredictReport out;
    if (estimation.method == EstimationMethod::Internal) {
        if (!cfg.plan.is_fixed_point()) {
            throw std::invalid_argument(
                "predict_with_variance: internal estimation needs a FixedPoint plan");
        }
        out.pred = build(data, cfg, points);
        for (std::size_t i = 0; i < points.size(); ++i) {
            out.per_point.push_back(estimate_internal(out.pred, i));
        }
        return out;
    }
    if (cfg.plan.is_fixed_point()) {
        throw std::invalid_argument(
            "predict_with_variance: external estimation needs a Uniform plan");
    }
    out.pred = build(data, cfg, points);

    EnsembleConfig zeta_cfg = cfg;
    zeta_cfg.plan.scheme = FixedPointScheme{estimation.n_z, estimation.n_mc, 1};
    zeta_cfg.plan.seed = mix64(cfg.plan.seed ^ 0x7a31ULL);
    zeta_cfg.seed = mix64(cfg.seed ^ 0x7a31ULL);
    const EnsemblePrediction zeta_pred = build(data, zeta_cfg, points);

    for (std::size_t i = 0; i < points.size(); ++i) {
        VarianceEstimate est;
        est.zeta1 = estimate_zeta1(zeta_pred.grouped_at(i));
        std::vector<double> col(out.pred.m);
        for (std::size_t j = 0; j < out.pred.m; ++j) col[j] = out.pred.tree_pred(j, i);
        est.zetakk = estimate_zetakk(col);
        est.n = out.pred.n;
        est.k = out.pred.k;
        est.m = out.pred.m;
        est.n_z = estimation.n_z;
        est.n_mc = estimation.n_mc;
        est.alpha_hat = static_cast<double>(est.n) / static_cast<double>(est.m);
        out.per_point.push_back(est);
    }
    return out;
}

struct BatteryResult {
    TestResult full_vs_reduced;
    TestResult full_vs_randomized;
    TestResult randomized_vs_reduced;
    TestResult randomized_vs_rerandomized;
};

// Four-way battery: each test substitutes randomized-feature datasets into the
// same paired-difference machinery.  The two randomizations use independent
// sub-seeds of `seed`.
inline BatteryResult randomization_battery(const Dataset& data,
                                           const std::vector<std::size_t>& reduced_features,
                                           const std::vector<PredictionPoint>& points,
                                           const EnsembleConfig& cfg, double alpha,
                                           std::uint64_t seed,
                                           const ZetaEstimationPlan& zeta_plan = {}) {
    if (reduced_features.empty() || reduced_features.size() >= data.n_features) {
        throw std::invalid_argument(
            "randomization_battery: reduced set must be a proper nonempty subset");
    }
    detail::check_significance_inputs(points, cfg, zeta_plan, alpha);

    std::vector<std::size_t> extra;
    {
        std::vector<bool> in_reduced(data.n_features, false);
        for (std::size_t f : reduced_features) in_reduced.at(f) = true;
        for (std::size_t f = 0; f < data.n_features; ++f) {
            if (!in_reduced[f]) extra.push_back(f);
        }
    }
    Dataset rand1 = data;
    Dataset rand2 = data;
    for (std::size_t f : extra) {
        rand1 = randomize_feature(rand1, data.feature_names[f], mix64(seed ^ 0x31ULL));
        rand2 = randomize_feature(rand2, data.feature_names[f], mix64(seed ^ 0x32ULL));
    }

    auto run = [&](const Dataset& a, const std::vector<std::size_t>* sa, const Dataset& b,
                   const std::vector<std::size_t>* sb, std::uint64_t tag,
                   const std::string& label) {
        EnsembleConfig test_cfg = cfg;
        test_cfg.plan.seed = mix64(cfg.plan.seed ^ tag);
        test_cfg.seed = mix64(cfg.seed ^ tag);
        const detail::DifferenceSummary summary =
            detail::paired_difference_summary(a, sa, b, sb, points, test_cfg, zeta_plan);
        return detail::chisq_test_from_summary(summary, points.size(), alpha, label);
    };

    BatteryResult out;
    out.full_vs_reduced =
        run(data, nullptr, data, &reduced_features, 0xb1ULL, "full_vs_reduced");
    out.full_vs_randomized =
        run(data, nullptr, rand1, nullptr, 0xb2ULL, "full_vs_randomized");
    out.randomized_vs_reduced =
        run(rand1, nullptr, data, &reduced_features, 0xb3ULL, "randomized_vs_reduced");
    out.randomized_vs_rerandomized =
        run(rand1, nullptr, rand2, nullptr, 0xb4ULL, "randomized_vs_rerandomized");
    return out;
}

}  // namespace usforest
