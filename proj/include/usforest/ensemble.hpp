#pragma once

// Subsampled tree ensembles: build m trees on subsample index sets, average
// predictions, and keep the per-tree prediction matrix that variance
// estimation consumes.  Fixed-point plans retain their group structure.

#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "usforest/dataset.hpp"
#include "usforest/parallel.hpp"
#include "usforest/subsampling.hpp"
#include "usforest/tree.hpp"

namespace usforest {

struct EnsembleConfig {
    std::size_t k = 0;
    SubsamplePlan plan;
    TreeConfig tree_config;
    std::uint64_t seed = 0;

    void validate(const Dataset& data) const {
        if (k != plan.k) throw std::invalid_argument("EnsembleConfig: k != plan.k");
        if (plan.n != data.n_rows) {
            throw std::invalid_argument("EnsembleConfig: plan.n != dataset rows");
        }
        plan.validate();
        tree_config.validate(data.n_features);
        if (static_cast<double>(k) > 3.0 * std::sqrt(static_cast<double>(data.n_rows))) {
            std::cerr << "usforest: warning: subsample size k=" << k
                      << " is large relative to sqrt(n); asymptotics may be poor\n";
        }
    }
};

struct GroupShape {
    std::size_t n_z = 0;
    std::size_t n_mc = 0;
};

struct EnsemblePrediction {
    std::vector<PredictionPoint> points;
    std::vector<double> theta_hat;  // per point, mean over trees
    std::vector<double> per_tree;   // row-major, m x N
    std::size_t m = 0;
    std::size_t n_points = 0;
    std::optional<GroupShape> groups;  // present iff built from a FixedPoint plan
    std::size_t n = 0;                 // training rows
    std::size_t k = 0;                 // subsample size

    double tree_pred(std::size_t tree, std::size_t point) const {
        return per_tree[tree * n_points + point];
    }

    // Per-tree predictions at one point, grouped n_z x n_mc.
    std::vector<std::vector<double>> grouped_at(std::size_t point) const {
        if (!groups) throw std::logic_error("EnsemblePrediction: no group structure");
        std::vector<std::vector<double>> out(groups->n_z);
        for (std::size_t g = 0; g < groups->n_z; ++g) {
            out[g].resize(groups->n_mc);
            for (std::size_t j = 0; j < groups->n_mc; ++j) {
                out[g][j] = tree_pred(g * groups->n_mc + j, point);
            }
        }
        return out;
    }
};

namespace detail {

inline Dataset take_rows(const Dataset& data, const IndexSet& idx) {
    std::vector<double> x(idx.size() * data.n_features);
    std::vector<double> y(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double* src = data.row(idx[i]);
        std::copy(src, src + data.n_features, x.data() + i * data.n_features);
        y[i] = data.response[idx[i]];
    }
    return Dataset(idx.size(), data.n_features, std::move(x), std::move(y),
                   data.feature_names);
}

inline std::vector<IndexSet> plan_index_sets(const SubsamplePlan& plan,
                                             std::optional<GroupShape>& shape) {
    if (plan.is_fixed_point()) {
        const auto& fp = std::get<FixedPointScheme>(plan.scheme);
        shape = GroupShape{fp.n_z, fp.n_mc};
        std::vector<IndexSet> sets;
        sets.reserve(fp.n_z * fp.n_mc);
        for (auto& group : draw_fixed_point(plan)) {
            for (auto& set : group.sets) sets.push_back(std::move(set));
        }
        return sets;
    }
    shape = std::nullopt;
    return draw_uniform(plan);
}

inline std::uint64_t tree_omega_seed(std::uint64_t ensemble_seed, std::size_t tree_index) {
    return mix64(mix64(ensemble_seed + kGolden) ^ (0x6f6d656761ULL + tree_index));
}

}  // namespace detail

// One tree per index set; per_tree[j][i] = prediction of tree j at points[i].
inline EnsemblePrediction build_with_index_sets(
    const Dataset& data, const EnsembleConfig& cfg,
    const std::vector<PredictionPoint>& points, const std::vector<IndexSet>& sets,
    std::optional<GroupShape> shape = std::nullopt,
    const std::vector<std::size_t>* feature_subset = nullptr) {
    if (points.empty()) throw std::invalid_argument("build: points must be nonempty");
    for (const auto& p : points) {
        if (p.size() != data.n_features) {
            throw std::invalid_argument("build: point dimension mismatch");
        }
    }
    EnsemblePrediction out;
    out.points = points;
    out.m = sets.size();
    out.n_points = points.size();
    out.groups = shape;
    out.n = data.n_rows;
    out.k = cfg.k;
    out.per_tree.assign(out.m * out.n_points, 0.0);

    parallel_for(0, out.m, [&](std::size_t j) {
        const Dataset sample = detail::take_rows(data, sets[j]);
        const TreeModel tree = fit_tree(sample, cfg.tree_config,
                                        detail::tree_omega_seed(cfg.seed, j),
                                        feature_subset);
        for (std::size_t i = 0; i < out.n_points; ++i) {
            out.per_tree[j * out.n_points + i] = tree.predict(points[i]);
        }
    });

    out.theta_hat.assign(out.n_points, 0.0);
    for (std::size_t j = 0; j < out.m; ++j) {
        for (std::size_t i = 0; i < out.n_points; ++i) {
            out.theta_hat[i] += out.per_tree[j * out.n_points + i];
        }
    }
    for (double& v : out.theta_hat) v /= static_cast<double>(out.m);
    return out;
}

inline EnsemblePrediction build(const Dataset& data, const EnsembleConfig& cfg,
                                const std::vector<PredictionPoint>& points) {
    cfg.validate(data);
    std::optional<GroupShape> shape;
    const std::vector<IndexSet> sets = detail::plan_index_sets(cfg.plan, shape);
    return build_with_index_sets(data, cfg, points, sets, shape);
}

// Two ensembles over byte-identical index sets and per-tree omega seeds; each
// side may use its own dataset and candidate-feature restriction.  The
// feature-significance machinery rides entirely on this.
inline std::pair<EnsemblePrediction, EnsemblePrediction> build_paired(
    const Dataset& data_a, const std::vector<std::size_t>* subset_a,
    const Dataset& data_b, const std::vector<std::size_t>* subset_b,
    const EnsembleConfig& cfg, const std::vector<PredictionPoint>& points) {
    cfg.validate(data_a);
    if (data_b.n_rows != data_a.n_rows || data_b.n_features != data_a.n_features) {
        throw std::invalid_argument("build_paired: dataset shapes differ");
    }
    std::optional<GroupShape> shape;
    const std::vector<IndexSet> sets = detail::plan_index_sets(cfg.plan, shape);
    EnsemblePrediction a = build_with_index_sets(data_a, cfg, points, sets, shape, subset_a);
    EnsemblePrediction b = build_with_index_sets(data_b, cfg, points, sets, shape, subset_b);
    return {std::move(a), std::move(b)};
}

// Full ensemble and reduced-feature ensemble on shared subsamples.
inline std::pair<EnsemblePrediction, EnsemblePrediction> predict_full_and_reduced(
    const Dataset& data, const EnsembleConfig& cfg,
    const std::vector<std::size_t>& reduced_features,
    const std::vector<PredictionPoint>& points) {
    if (reduced_features.empty() || reduced_features.size() >= data.n_features) {
        throw std::invalid_argument(
            "predict_full_and_reduced: reduced set must be a proper nonempty subset");
    }
    return build_paired(data, nullptr, data, &reduced_features, cfg, points);
}

}  // namespace usforest
