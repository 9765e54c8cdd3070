#pragma once

// Desk-scale replication harness: prediction-distribution sampling, coverage
// studies for the confidence intervals, and empirical alpha levels for the
// significance test.  Emits machine-readable JSON.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "usforest/dataset.hpp"
#include "usforest/inference.hpp"

namespace usforest {

struct ExperimentSpec {
    GeneratorSpec generator;
    EnsembleConfig cfg;  // plan.n must match generator.n
    EstimationSpec estimation;
    std::size_t replicates = 1;
    std::vector<PredictionPoint> points;
    double level = 0.95;
    double alpha = 0.05;
    std::optional<double> reference_value;  // nullopt = estimate from reference runs
    std::size_t reference_runs = 100;
    std::vector<std::size_t> reduced;  // alpha study: features under the null
    std::uint64_t seed = 0;

    void validate() const {
        if (replicates < 1) throw std::invalid_argument("ExperimentSpec: replicates >= 1");
        if (points.empty()) throw std::invalid_argument("ExperimentSpec: points required");
        if (cfg.plan.n != generator.n) {
            throw std::invalid_argument("ExperimentSpec: plan.n != generator n");
        }
        if (!reference_value && reference_runs < 1) {
            throw std::invalid_argument("ExperimentSpec: reference_runs >= 1 required");
        }
    }
};

namespace detail {

inline GeneratorSpec replicate_generator(const GeneratorSpec& base, std::uint64_t seed,
                                         std::uint64_t tag, std::size_t rep) {
    GeneratorSpec g = base;
    g.seed = mix64(mix64(seed ^ tag) ^ (0x646174ULL + rep));
    return g;
}

inline EnsembleConfig replicate_config(const EnsembleConfig& base, std::uint64_t seed,
                                       std::uint64_t tag, std::size_t rep) {
    EnsembleConfig cfg = base;
    cfg.plan.seed = mix64(mix64(seed ^ tag) ^ (0x706c616eULL + rep));
    cfg.seed = mix64(mix64(seed ^ tag) ^ (0x656e73ULL + rep));
    return cfg;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

// Correlation between the sorted sample and standard normal plotting quantiles.
inline double qq_correlation(std::vector<double> sample) {
    std::sort(sample.begin(), sample.end());
    std::vector<double> theo(sample.size());
    const double n = static_cast<double>(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        theo[i] = normal_quantile((static_cast<double>(i) + 0.5) / n);
    }
    return pearson(sample, theo);
}

inline nlohmann::json spec_to_json(const ExperimentSpec& spec) {
    nlohmann::json j;
    j["generator"] = {
        {"kind", spec.generator.kind == GeneratorKind::SLR ? "slr" : "mars"},
        {"n", spec.generator.n},
        {"noise_sd", spec.generator.noise_sd},
        {"extra_noise_features", spec.generator.extra_noise_features},
    };
    j["ensemble"] = {
        {"k", spec.cfg.k},
        {"m", spec.cfg.plan.total_draws()},
        {"min_split", spec.cfg.tree_config.min_split},
        {"min_leaf", spec.cfg.tree_config.min_leaf},
        {"max_depth", spec.cfg.tree_config.max_depth},
        {"mtry", spec.cfg.tree_config.mtry},
    };
    j["estimation"] = {
        {"method", spec.estimation.method == EstimationMethod::External ? "external"
                                                                        : "internal"},
        {"n_z", spec.estimation.n_z},
        {"n_mc", spec.estimation.n_mc},
    };
    j["replicates"] = spec.replicates;
    j["points"] = spec.points;
    j["level"] = spec.level;
    j["alpha"] = spec.alpha;
    if (spec.reference_value) {
        j["reference_value"] = *spec.reference_value;
    } else {
        j["reference_value"] = "estimate";
        j["reference_runs"] = spec.reference_runs;
    }
    if (!spec.reduced.empty()) j["reduced"] = spec.reduced;
    return j;
}

}  // namespace detail

struct Histogram {
    std::vector<double> bin_left;
    std::vector<double> bin_right;
    std::vector<std::size_t> count;
};

inline Histogram make_histogram(std::vector<double> values, std::size_t bins = 20) {
    Histogram h;
    if (values.empty() || bins == 0) return h;
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    double lo = *lo_it, hi = *hi_it;
    if (lo == hi) hi = lo + 1.0;
    const double width = (hi - lo) / static_cast<double>(bins);
    h.bin_left.resize(bins);
    h.bin_right.resize(bins);
    h.count.assign(bins, 0);
    for (std::size_t b = 0; b < bins; ++b) {
        h.bin_left[b] = lo + width * static_cast<double>(b);
        h.bin_right[b] = lo + width * static_cast<double>(b + 1);
    }
    for (double v : values) {
        std::size_t b = static_cast<std::size_t>((v - lo) / width);
        if (b >= bins) b = bins - 1;
        h.count[b]++;
    }
    return h;
}

// Replicate predictions at points[0] with fitted normal parameters and a
// QQ-correlation check against that normal.
inline nlohmann::json run_distribution(const ExperimentSpec& spec) {
    spec.validate();
    if (spec.cfg.k >= spec.generator.n) {
        throw std::invalid_argument(
            "run_distribution: bootstrap-style k = n is unsupported; pick k well below n");
    }
    std::vector<double> predictions(spec.replicates);
    for (std::size_t rep = 0; rep < spec.replicates; ++rep) {
        const Dataset data =
            generate(detail::replicate_generator(spec.generator, spec.seed, 0xd1ULL, rep));
        const EnsembleConfig cfg =
            detail::replicate_config(spec.cfg, spec.seed, 0xd1ULL, rep);
        const EnsemblePrediction pred = build(data, cfg, {spec.points[0]});
        predictions[rep] = pred.theta_hat[0];
    }

    double mean = 0.0;
    for (double v : predictions) mean += v;
    mean /= static_cast<double>(predictions.size());
    double var = 0.0;
    for (double v : predictions) var += (v - mean) * (v - mean);
    var = predictions.size() > 1 ? var / static_cast<double>(predictions.size() - 1) : 0.0;

    nlohmann::json out;
    out["spec"] = detail::spec_to_json(spec);
    out["seed"] = spec.seed;
    out["operation"] = "distribution";
    out["per_replicate"] = predictions;
    nlohmann::json summary;
    summary["mean"] = mean;
    summary["variance"] = var;
    const bool degenerate = var < 1e-24;
    summary["qq_skipped"] = degenerate;
    summary["qq_correlation"] =
        degenerate ? 1.0 : detail::qq_correlation(predictions);
    out["summary"] = summary;
    return out;
}

// Coverage of level-`level` intervals against a reference mean prediction.
inline nlohmann::json run_coverage(const ExperimentSpec& spec) {
    spec.validate();
    const PredictionPoint point = spec.points[0];

    double reference;
    if (spec.reference_value) {
        reference = *spec.reference_value;
    } else {
        double sum = 0.0;
        for (std::size_t rep = 0; rep < spec.reference_runs; ++rep) {
            const Dataset data = generate(
                detail::replicate_generator(spec.generator, spec.seed, 0xc0ULL, rep));
            const EnsembleConfig cfg =
                detail::replicate_config(spec.cfg, spec.seed, 0xc0ULL, rep);
            // reference runs only need theta_hat, so a plain uniform build is
            // enough even when replicate intervals estimate internally
            EnsembleConfig ref_cfg = cfg;
            if (ref_cfg.plan.is_fixed_point()) {
                ref_cfg.plan.scheme = UniformScheme{ref_cfg.plan.total_draws()};
            }
            sum += build(data, ref_cfg, {point}).theta_hat[0];
        }
        reference = sum / static_cast<double>(spec.reference_runs);
    }

    nlohmann::json intervals = nlohmann::json::array();
    std::size_t covered = 0;
    for (std::size_t rep = 0; rep < spec.replicates; ++rep) {
        const Dataset data =
            generate(detail::replicate_generator(spec.generator, spec.seed, 0xc1ULL, rep));
        const EnsembleConfig cfg =
            detail::replicate_config(spec.cfg, spec.seed, 0xc1ULL, rep);
        const PredictReport report =
            predict_with_variance(data, cfg, spec.estimation, {point});
        const ConfidenceInterval ci =
            confidence_interval(report.pred, 0, report.per_point[0], spec.level);
        const bool contains = ci.lower <= reference && reference <= ci.upper;
        covered += contains ? 1 : 0;
        intervals.push_back({{"theta_hat", ci.theta_hat},
                             {"lower", ci.lower},
                             {"upper", ci.upper},
                             {"variance", ci.variance_used},
                             {"covers", contains}});
    }

    const double coverage =
        static_cast<double>(covered) / static_cast<double>(spec.replicates);
    nlohmann::json out;
    out["spec"] = detail::spec_to_json(spec);
    out["seed"] = spec.seed;
    out["operation"] = "coverage";
    out["per_replicate"] = intervals;
    out["summary"] = {
        {"reference_value", reference},
        {"coverage", coverage},
        {"binomial_se",
         std::sqrt(coverage * (1.0 - coverage) / static_cast<double>(spec.replicates))},
    };
    return out;
}

// Replicated significance test under the null; reports the empirical
// rejection rate and the statistic sample.
inline nlohmann::json run_alpha(const ExperimentSpec& spec) {
    spec.validate();
    if (spec.generator.extra_noise_features < 1) {
        throw std::invalid_argument(
            "run_alpha: generator must include at least one pure-noise feature");
    }
    std::vector<std::size_t> reduced = spec.reduced;
    if (reduced.empty()) {
        // default null: all features except the appended noise columns
        const std::size_t base_d = spec.generator.kind == GeneratorKind::SLR ? 1 : 5;
        for (std::size_t f = 0; f < base_d; ++f) reduced.push_back(f);
    }

    ZetaEstimationPlan zeta_plan{spec.estimation.n_z, spec.estimation.n_mc};
    std::vector<double> statistics(spec.replicates);
    std::size_t rejections = 0;
    for (std::size_t rep = 0; rep < spec.replicates; ++rep) {
        const Dataset data =
            generate(detail::replicate_generator(spec.generator, spec.seed, 0xa1ULL, rep));
        const EnsembleConfig cfg =
            detail::replicate_config(spec.cfg, spec.seed, 0xa1ULL, rep);
        const TestResult res =
            significance_test(data, reduced, spec.points, cfg, spec.alpha, zeta_plan);
        statistics[rep] = res.statistic;
        rejections += res.reject ? 1 : 0;
    }

    nlohmann::json out;
    out["spec"] = detail::spec_to_json(spec);
    out["seed"] = spec.seed;
    out["operation"] = "alpha";
    out["per_replicate"] = statistics;
    out["summary"] = {
        {"rejection_rate",
         static_cast<double>(rejections) / static_cast<double>(spec.replicates)},
        {"rejections", rejections},
        {"df", spec.points.size()},
        {"critical_value", chisq_quantile(1.0 - spec.alpha, spec.points.size())},
    };
    return out;
}

}  // namespace usforest
