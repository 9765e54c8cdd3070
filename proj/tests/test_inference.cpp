#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "usforest/inference.hpp"

using namespace usforest;

namespace {

VarianceEstimate make_estimate(double zeta1, double zetakk, std::size_t n, std::size_t k,
                               std::size_t m) {
    VarianceEstimate est;
    est.zeta1 = zeta1;
    est.zetakk = zetakk;
    est.n = n;
    est.k = k;
    est.m = m;
    est.alpha_hat = static_cast<double>(n) / static_cast<double>(m);
    return est;
}

// Synthetic difference rows with the exact group/noise structure the
// chi-square statistic assumes: group effect variance sigma1, within-group
// noise variance sigmakk, and n = n_z * k^2 so the combined weights match the
// sampling distribution of the mean.
std::vector<double> null_difference_rows(std::size_t n_z, std::size_t n_mc, std::size_t dim,
                                         RngStream& rng) {
    std::vector<double> rows(n_z * n_mc * dim);
    for (std::size_t g = 0; g < n_z; ++g) {
        std::vector<double> effect(dim);
        for (auto& v : effect) v = rng.next_normal(0.0, 1.0);
        for (std::size_t j = 0; j < n_mc; ++j) {
            for (std::size_t i = 0; i < dim; ++i) {
                rows[(g * n_mc + j) * dim + i] = effect[i] + rng.next_normal(0.0, 2.0);
            }
        }
    }
    return rows;
}

double null_statistic(std::uint64_t seed, std::size_t dim) {
    const std::size_t n_z = 50, n_mc = 40, k = 4;
    const std::size_t n = n_z * k * k;  // aligns k^2/n with 1/n_z
    RngStream rng = RngStream::derive(seed, {0});
    const std::vector<double> rows = null_difference_rows(n_z, n_mc, dim, rng);
    const auto cov = estimate_sigma(rows, dim, GroupShape{n_z, n_mc}, n, k);
    const std::vector<double> mu =
        detail::column_means(rows, n_z * n_mc, dim);
    return detail::quadratic_form(mu, cov.combined, dim);
}

}  // namespace

TEST_CASE("confidence interval arithmetic") {
    const auto est = make_estimate(0.1, 10.0, 1000, 60, 1000);  // variance 0.37
    const ConfidenceInterval ci = confidence_interval(20.0, est, 0.95);
    CHECK(ci.lower == doctest::Approx(18.808).epsilon(5.5e-5));
    CHECK(ci.upper == doctest::Approx(21.192).epsilon(5e-5));
    CHECK(ci.theta_hat == 20.0);
    CHECK(ci.variance_used == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("zero variance degenerates the interval") {
    const auto est = make_estimate(0.0, 0.0, 100, 10, 50);
    const ConfidenceInterval ci = confidence_interval(4.2, est, 0.9);
    CHECK(ci.lower == 4.2);
    CHECK(ci.upper == 4.2);
    CHECK_THROWS_AS(confidence_interval(4.2, est, 1.5), std::invalid_argument);
}

TEST_CASE("interval width shrinks with m and scales as sqrt variance") {
    const auto est1 = make_estimate(0.1, 10.0, 1000, 60, 1000);
    auto est2 = est1;
    est2.m = 4000;
    const ConfidenceInterval a = confidence_interval(0.0, est1, 0.95);
    const ConfidenceInterval b = confidence_interval(0.0, est2, 0.95);
    CHECK(b.upper - b.lower < a.upper - a.lower);
    CHECK((a.upper - a.lower) / 2.0 ==
          doctest::Approx(normal_quantile(0.975) * std::sqrt(0.37)).epsilon(1e-12));
}

TEST_CASE("mean test basics") {
    const auto est = make_estimate(0.1, 10.0, 1000, 60, 1000);
    const TestResult zero = mean_test(5.0, 5.0, est, 0.05);
    CHECK(zero.statistic == 0.0);
    CHECK_FALSE(zero.reject);

    // sd = sqrt(0.37) = 0.6083; t = 1/0.6083 = 1.644 < 1.960
    const TestResult near = mean_test(20.0, 19.0, est, 0.05);
    CHECK(near.statistic == doctest::Approx(1.644).epsilon(1e-3));
    CHECK_FALSE(near.reject);

    const auto degenerate = make_estimate(0.0, 0.0, 100, 10, 50);
    CHECK_THROWS_AS(mean_test(1.0, 0.0, degenerate, 0.05), std::invalid_argument);
}

TEST_CASE("mean test agrees with confidence-interval membership") {
    RngStream rng = RngStream::derive(5, {0});
    for (int i = 0; i < 200; ++i) {
        const auto est = make_estimate(rng.next_double(), 10.0 * rng.next_double() + 0.1,
                                       500, 25, 400);
        const double theta = rng.next_normal(0.0, 5.0);
        const double c = theta + rng.next_normal(0.0, 2.0);
        const double alpha = 0.02 + 0.2 * rng.next_double();
        const TestResult t = mean_test(theta, c, est, alpha);
        const ConfidenceInterval ci = confidence_interval(theta, est, 1.0 - alpha);
        const bool outside = c < ci.lower || c > ci.upper;
        CHECK(t.reject == outside);
    }
}

TEST_CASE("quadratic form is invariant under point permutation") {
    const std::size_t dim = 4;
    RngStream rng = RngStream::derive(31, {0});
    std::vector<double> mu(dim);
    for (auto& v : mu) v = rng.next_normal();
    // random SPD matrix A = B B^T + I
    std::vector<double> b(dim * dim), sigma(dim * dim, 0.0);
    for (auto& v : b) v = rng.next_normal();
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            for (std::size_t k = 0; k < dim; ++k) sigma[i * dim + j] += b[i * dim + k] * b[j * dim + k];
        }
        sigma[i * dim + i] += 1.0;
    }
    const double stat = detail::quadratic_form(mu, sigma, dim);
    // cyclic permutation of coordinates
    std::vector<std::size_t> perm = {2, 0, 3, 1};
    std::vector<double> mu_p(dim), sigma_p(dim * dim);
    for (std::size_t i = 0; i < dim; ++i) {
        mu_p[i] = mu[perm[i]];
        for (std::size_t j = 0; j < dim; ++j) {
            sigma_p[i * dim + j] = sigma[perm[i] * dim + perm[j]];
        }
    }
    const double stat_p = detail::quadratic_form(mu_p, sigma_p, dim);
    CHECK(stat == doctest::Approx(stat_p).epsilon(1e-12));
}

TEST_CASE("quadratic form is exactly invariant under power-of-two rescaling") {
    const std::size_t dim = 3;
    std::vector<double> mu = {0.25, -1.5, 0.75};
    std::vector<double> sigma = {2.0, 0.5, 0.25, 0.5, 1.0, 0.125, 0.25, 0.125, 4.0};
    const double stat = detail::quadratic_form(mu, sigma, dim);
    std::vector<double> mu2 = mu, sigma2 = sigma;
    for (auto& v : mu2) v *= 4.0;
    for (auto& v : sigma2) v *= 16.0;
    CHECK(detail::quadratic_form(mu2, sigma2, dim) == stat);
}

TEST_CASE("null statistics follow the chi-square reference distribution") {
    const std::size_t dim = 5;
    const std::size_t reps = 100;
    std::vector<double> pvals(reps);
    double mean_stat = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        const double stat = null_statistic(1000 + r, dim);
        mean_stat += stat;
        pvals[r] = 1.0 - chisq_cdf(stat, dim);
    }
    mean_stat /= static_cast<double>(reps);
    // chi-square moment check: mean approx df
    CHECK(std::fabs(mean_stat - static_cast<double>(dim)) <
          3.0 * std::sqrt(2.0 * static_cast<double>(dim) / static_cast<double>(reps)) + 0.5);
    // Kolmogorov distance of p-values from uniform
    std::sort(pvals.begin(), pvals.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < reps; ++i) {
        const double u = static_cast<double>(i + 1) / static_cast<double>(reps);
        ks = std::max(ks, std::fabs(pvals[i] - u));
    }
    CHECK(ks < 0.15);
}

TEST_CASE("significance test with reduced = full feature set is exactly null") {
    GeneratorSpec gen{GeneratorKind::MARS, 150, 1.0, 0, 404};
    const Dataset d = generate(gen);
    EnsembleConfig cfg;
    cfg.k = 15;
    cfg.plan.scheme = FixedPointScheme{10, 10, 1};
    cfg.plan.n = 150;
    cfg.plan.k = 15;
    cfg.plan.seed = 1;
    cfg.seed = 2;
    const std::vector<PredictionPoint> pts = {{0.5, 0.5, 0.5, 0.5, 0.5},
                                              {0.3, 0.3, 0.3, 0.3, 0.3}};
    const TestResult res = significance_test(d, {0, 1, 2, 3, 4}, pts, cfg, 0.05);
    CHECK(res.statistic == 0.0);
    CHECK(res.p_value == 1.0);
    CHECK_FALSE(res.reject);
}

TEST_CASE("significance test detects a strong feature (internal mode)") {
    // MARS, reduced drops x4 whose coefficient is 10
    std::size_t rejections = 0;
    const std::size_t reps = 10;
    for (std::size_t r = 0; r < reps; ++r) {
        GeneratorSpec gen{GeneratorKind::MARS, 4000, 3.1622776601683795, 0, 900 + r};
        const Dataset d = generate(gen);
        EnsembleConfig cfg;
        cfg.k = 75;
        cfg.plan.scheme = FixedPointScheme{50, 40, 1};
        cfg.plan.n = 4000;
        cfg.plan.k = 75;
        cfg.plan.seed = 11 + r;
        cfg.seed = 13 + r;
        // test points stress the dropped coordinate toward its extremes
        std::vector<PredictionPoint> pts;
        RngStream prng = RngStream::derive(55 + r, {0});
        for (int i = 0; i < 5; ++i) {
            PredictionPoint p(5);
            for (auto& v : p) v = prng.next_uniform(0.25, 0.75);
            p[3] = i % 2 ? 0.9 : 0.1;
            pts.push_back(p);
        }
        const TestResult res = significance_test(d, {0, 1, 2, 4}, pts, cfg, 0.05);
        rejections += res.reject ? 1 : 0;
    }
    CHECK(static_cast<double>(rejections) / static_cast<double>(reps) >= 0.5);
}

TEST_CASE("battery decision pattern on synthetic data with a strong feature") {
    // response driven hard by x1; x2 is pure noise; reduced = {x1}
    RngStream rng = RngStream::derive(606, {0});
    const std::size_t n = 800;
    std::vector<double> x(n * 2), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i * 2] = rng.next_double();
        x[i * 2 + 1] = rng.next_double();
        y[i] = 20.0 * x[i * 2] + rng.next_normal();
    }
    const Dataset d(n, 2, x, y, {"x1", "x2"});
    EnsembleConfig cfg;
    cfg.k = 40;
    cfg.plan.scheme = FixedPointScheme{40, 50, 1};
    cfg.plan.n = n;
    cfg.plan.k = 40;
    cfg.plan.seed = 3;
    cfg.seed = 4;
    std::vector<PredictionPoint> pts;
    for (int i = 0; i < 5; ++i) {
        pts.push_back({0.1 + 0.2 * i, 0.1 + 0.2 * i});
    }
    // swap roles: reduced = {x2}, so the dropped feature x1 carries the signal
    const BatteryResult battery = randomization_battery(d, {1}, pts, cfg, 0.05, 777);
    CHECK(battery.full_vs_reduced.reject);
    CHECK(battery.full_vs_randomized.reject);
    CHECK_FALSE(battery.randomized_vs_rerandomized.reject);
    CHECK(battery.full_vs_reduced.df == 5);
    CHECK(battery.full_vs_reduced.label == "full_vs_reduced");
}

TEST_CASE("battery under a pure-noise response rarely rejects") {
    std::size_t rejections = 0;
    const std::size_t reps = 10;
    for (std::size_t r = 0; r < reps; ++r) {
        RngStream rng = RngStream::derive(7000 + r, {0});
        const std::size_t n = 300;
        std::vector<double> x(n * 2), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i * 2] = rng.next_double();
            x[i * 2 + 1] = rng.next_double();
            y[i] = rng.next_normal();
        }
        const Dataset d(n, 2, x, y, {"x1", "x2"});
        EnsembleConfig cfg;
        cfg.k = 20;
        cfg.plan.scheme = FixedPointScheme{30, 40, 1};
        cfg.plan.n = n;
        cfg.plan.k = 20;
        cfg.plan.seed = 5 + r;
        cfg.seed = 6 + r;
        const std::vector<PredictionPoint> pts = {{0.4, 0.4}, {0.6, 0.6}};
        const TestResult res = significance_test(d, {0}, pts, cfg, 0.05);
        rejections += res.reject ? 1 : 0;
    }
    CHECK(rejections <= 3);  // alpha = 0.05, 10 replicates, generous bound
}

TEST_CASE("significance test input validation") {
    GeneratorSpec gen{GeneratorKind::MARS, 100, 1.0, 0, 1};
    const Dataset d = generate(gen);
    EnsembleConfig cfg;
    cfg.k = 10;
    cfg.plan.scheme = FixedPointScheme{5, 5, 1};
    cfg.plan.n = 100;
    cfg.plan.k = 10;
    const std::vector<PredictionPoint> pts = {{0.5, 0.5, 0.5, 0.5, 0.5}};
    CHECK_THROWS_AS(significance_test(d, {}, pts, cfg, 0.05), std::invalid_argument);
    CHECK_THROWS_AS(significance_test(d, {0}, pts, cfg, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(significance_test(d, {0}, {}, cfg, 0.05), std::invalid_argument);
}
