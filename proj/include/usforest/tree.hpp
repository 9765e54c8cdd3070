#pragma once

// CART-style regression tree with optional per-node candidate-feature
// randomization.  Split search and leaf means iterate rows in a canonical
// (value, response) order, so the fitted tree is bit-identical under any
// permutation of the training rows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "usforest/dataset.hpp"
#include "usforest/rng.hpp"

namespace usforest {

struct TreeConfig {
    std::size_t min_split = 3;  // smallest node eligible for splitting
    std::size_t min_leaf = 1;   // smallest allowed child
    std::size_t max_depth = 0;  // 0 = unlimited
    std::size_t mtry = 0;       // features tried per node; 0 = all

    void validate(std::size_t d) const {
        if (min_split < 2) throw std::invalid_argument("TreeConfig: min_split must be >= 2");
        if (min_leaf < 1) throw std::invalid_argument("TreeConfig: min_leaf must be >= 1");
        if (mtry > d) throw std::invalid_argument("TreeConfig: mtry exceeds feature count");
    }
};

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    double value = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    bool is_leaf() const { return feature < 0; }
};

struct TreeModel {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::size_t dims = 0;
    double response_min = 0.0;
    double response_max = 0.0;

    double predict(const PredictionPoint& point) const {
        if (point.size() != dims) {
            throw std::invalid_argument("TreeModel::predict: dimension mismatch");
        }
        std::int32_t idx = 0;
        while (!nodes[idx].is_leaf()) {
            const TreeNode& nd = nodes[idx];
            idx = point[nd.feature] <= nd.threshold ? nd.left : nd.right;
        }
        return nodes[idx].value;
    }
};

namespace detail {

class TreeBuilder {
public:
    TreeBuilder(const Dataset& sample, const TreeConfig& cfg, std::uint64_t omega_seed,
                const std::vector<std::size_t>* feature_subset)
        : data_(sample), cfg_(cfg), omega_seed_(omega_seed) {
        if (feature_subset) {
            if (feature_subset->empty()) {
                throw std::invalid_argument("fit_tree: empty feature subset");
            }
            allowed_ = *feature_subset;
            std::sort(allowed_.begin(), allowed_.end());
            for (std::size_t f : allowed_) {
                if (f >= data_.n_features) {
                    throw std::invalid_argument("fit_tree: feature subset out of range");
                }
            }
        } else {
            allowed_.resize(data_.n_features);
            for (std::size_t j = 0; j < data_.n_features; ++j) allowed_[j] = j;
        }
    }

    TreeModel build() {
        TreeModel model;
        model.dims = data_.n_features;
        model.response_min = *std::min_element(data_.response.begin(), data_.response.end());
        model.response_max = *std::max_element(data_.response.begin(), data_.response.end());
        rows_.resize(data_.n_rows);
        for (std::uint32_t i = 0; i < data_.n_rows; ++i) rows_[i] = i;
        scratch_.resize(data_.n_rows);
        model_ = &model;
        grow(0, data_.n_rows, 0, mix64(omega_seed_ + kGolden));
        return model;
    }

private:
    // Candidate features for one node, ascending.
    std::vector<std::size_t> node_features(std::uint64_t node_key) {
        const std::size_t avail = allowed_.size();
        std::size_t mtry = cfg_.mtry == 0 ? avail : std::min(cfg_.mtry, avail);
        if (mtry >= avail) return allowed_;
        RngStream rng(node_key);
        std::vector<std::uint32_t> pick =
            rng.sample_without_replacement(static_cast<std::uint32_t>(avail),
                                           static_cast<std::uint32_t>(mtry));
        std::vector<std::size_t> out(mtry);
        for (std::size_t i = 0; i < mtry; ++i) out[i] = allowed_[pick[i]];
        std::sort(out.begin(), out.end());
        return out;
    }

    // Mean of routed responses, clamped into the node's response range.
    double leaf_value(std::size_t lo, std::size_t hi) {
        std::vector<double> ys(rows_.begin() + lo, rows_.begin() + hi);
        for (std::size_t i = 0; i < ys.size(); ++i) {
            ys[i] = data_.response[rows_[lo + i]];
        }
        std::sort(ys.begin(), ys.end());
        double sum = 0.0;
        for (double v : ys) sum += v;
        const double mean = sum / static_cast<double>(ys.size());
        return std::clamp(mean, ys.front(), ys.back());
    }

    struct Split {
        bool found = false;
        std::size_t feature = 0;
        double threshold = 0.0;
        double score = -std::numeric_limits<double>::infinity();
    };

    // Best (feature, threshold) by squared-error reduction; ties resolve to
    // the lowest feature index, then smallest threshold.
    Split best_split(std::size_t lo, std::size_t hi, std::uint64_t node_key) {
        const std::size_t count = hi - lo;
        Split best;
        double total = 0.0;
        {
            std::vector<double> ys(count);
            for (std::size_t i = 0; i < count; ++i) ys[i] = data_.response[rows_[lo + i]];
            std::sort(ys.begin(), ys.end());
            if (ys.front() == ys.back()) return best;  // constant response
            for (double v : ys) total += v;
        }
        const double base = total * total / static_cast<double>(count);

        for (std::size_t f : node_features(node_key)) {
            std::uint32_t* idx = scratch_.data();
            std::copy(rows_.begin() + lo, rows_.begin() + hi, idx);
            std::sort(idx, idx + count, [&](std::uint32_t a, std::uint32_t b) {
                const double xa = data_.x(a, f), xb = data_.x(b, f);
                if (xa != xb) return xa < xb;
                return data_.response[a] < data_.response[b];
            });

            double left_sum = 0.0;
            std::size_t i = 0;
            while (i < count) {
                const double v = data_.x(idx[i], f);
                // advance over the tied group
                while (i < count && data_.x(idx[i], f) == v) {
                    left_sum += data_.response[idx[i]];
                    ++i;
                }
                if (i == count) break;
                const std::size_t n_left = i;
                const std::size_t n_right = count - i;
                if (n_left < cfg_.min_leaf || n_right < cfg_.min_leaf) continue;
                const double right_sum = total - left_sum;
                const double score =
                    left_sum * left_sum / static_cast<double>(n_left) +
                    right_sum * right_sum / static_cast<double>(n_right) - base;
                if (score <= 0.0 || score <= best.score) continue;
                const double next = data_.x(idx[i], f);
                double thr = v + (next - v) / 2.0;
                if (!(thr < next)) thr = v;
                best.found = true;
                best.feature = f;
                best.threshold = thr;
                best.score = score;
            }
        }
        return best;
    }

    std::int32_t grow(std::size_t lo, std::size_t hi, std::size_t depth,
                      std::uint64_t node_key) {
        const std::size_t count = hi - lo;
        const std::int32_t self = static_cast<std::int32_t>(model_->nodes.size());
        model_->nodes.emplace_back();

        const bool depth_capped = cfg_.max_depth != 0 && depth >= cfg_.max_depth;
        Split split;
        if (count >= cfg_.min_split && !depth_capped) {
            split = best_split(lo, hi, node_key);
        }
        if (!split.found) {
            model_->nodes[self].value = leaf_value(lo, hi);
            return self;
        }

        const auto mid_it = std::partition(
            rows_.begin() + lo, rows_.begin() + hi, [&](std::uint32_t r) {
                return data_.x(r, split.feature) <= split.threshold;
            });
        const std::size_t mid = static_cast<std::size_t>(mid_it - rows_.begin());

        const std::int32_t left =
            grow(lo, mid, depth + 1, mix64(node_key ^ 0x4c45465421ULL));
        const std::int32_t right =
            grow(mid, hi, depth + 1, mix64(node_key ^ 0x5249474854ULL));
        TreeNode& nd = model_->nodes[self];
        nd.feature = static_cast<std::int32_t>(split.feature);
        nd.threshold = split.threshold;
        nd.left = left;
        nd.right = right;
        return self;
    }

    const Dataset& data_;
    const TreeConfig& cfg_;
    std::uint64_t omega_seed_;
    std::vector<std::size_t> allowed_;
    std::vector<std::uint32_t> rows_;
    std::vector<std::uint32_t> scratch_;
    TreeModel* model_ = nullptr;
};

}  // namespace detail

// feature_subset, when given, restricts candidate split features (reduced
// builders share the omega stream with their full counterpart).
inline TreeModel fit_tree(const Dataset& sample, const TreeConfig& cfg,
                          std::uint64_t omega_seed,
                          const std::vector<std::size_t>* feature_subset = nullptr) {
    if (sample.n_rows == 0) throw std::invalid_argument("fit_tree: empty sample");
    cfg.validate(sample.n_features);
    detail::TreeBuilder builder(sample, cfg, omega_seed, feature_subset);
    return builder.build();
}

}  // namespace usforest
