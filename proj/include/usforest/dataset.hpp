#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "usforest/rng.hpp"

namespace usforest {

using PredictionPoint = std::vector<double>;

// Immutable after construction; safe to share read-only across workers.
struct Dataset {
    std::size_t n_rows = 0;
    std::size_t n_features = 0;
    std::vector<double> features;  // row-major, n_rows x n_features
    std::vector<double> response;  // length n_rows
    std::vector<std::string> feature_names;
    std::size_t dropped_rows = 0;  // rows discarded at ingestion

    Dataset() = default;

    Dataset(std::size_t rows, std::size_t cols, std::vector<double> x,
            std::vector<double> y, std::vector<std::string> names)
        : n_rows(rows), n_features(cols), features(std::move(x)),
          response(std::move(y)), feature_names(std::move(names)) {
        validate();
    }

    double x(std::size_t row, std::size_t col) const {
        return features[row * n_features + col];
    }

    const double* row(std::size_t r) const { return features.data() + r * n_features; }

    std::size_t feature_index(const std::string& name) const {
        for (std::size_t j = 0; j < feature_names.size(); ++j) {
            if (feature_names[j] == name) return j;
        }
        throw std::invalid_argument("unknown feature: " + name);
    }

    void validate() const {
        if (n_rows < 1 || n_features < 1) {
            throw std::invalid_argument("Dataset requires n >= 1 and d >= 1");
        }
        if (features.size() != n_rows * n_features || response.size() != n_rows) {
            throw std::invalid_argument("Dataset: shape mismatch");
        }
        if (feature_names.size() != n_features) {
            throw std::invalid_argument("Dataset: feature name count mismatch");
        }
        for (double v : features) {
            if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite feature");
        }
        for (double v : response) {
            if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite response");
        }
        std::unordered_set<std::string> seen;
        for (const auto& name : feature_names) {
            if (!seen.insert(name).second) {
                throw std::invalid_argument("Dataset: duplicate feature name " + name);
            }
        }
    }
};

enum class GeneratorKind { SLR, MARS };

struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::SLR;
    std::size_t n = 0;
    double noise_sd = 3.1622776601683795;  // sqrt(10)
    std::size_t extra_noise_features = 0;
    std::uint64_t seed = 0;
};

inline double slr_mean(double x1) { return 2.0 * x1; }

inline double mars_mean(const double* x) {
    return 10.0 * std::sin(M_PI * x[0] * x[1]) + 20.0 * (x[2] - 0.05) * (x[2] - 0.05) +
           10.0 * x[3] + 5.0 * x[4];
}

inline Dataset generate(const GeneratorSpec& spec) {
    if (spec.n < 1) throw std::invalid_argument("generate: n must be >= 1");
    if (spec.noise_sd < 0.0 || !std::isfinite(spec.noise_sd)) {
        throw std::invalid_argument("generate: noise_sd must be finite and >= 0");
    }
    const std::size_t base_d = spec.kind == GeneratorKind::SLR ? 1 : 5;
    const std::size_t d = base_d + spec.extra_noise_features;

    std::vector<double> x(spec.n * d);
    std::vector<double> y(spec.n);
    RngStream feat = RngStream::derive(spec.seed, {1});
    RngStream noise = RngStream::derive(spec.seed, {2});
    for (std::size_t i = 0; i < spec.n; ++i) {
        double* row = x.data() + i * d;
        if (spec.kind == GeneratorKind::SLR) {
            row[0] = feat.next_uniform(0.0, 20.0);
            y[i] = slr_mean(row[0]);
        } else {
            for (std::size_t j = 0; j < 5; ++j) row[j] = feat.next_double();
            y[i] = mars_mean(row);
        }
        for (std::size_t j = base_d; j < d; ++j) row[j] = feat.next_double();
        if (spec.noise_sd > 0.0) y[i] += noise.next_normal(0.0, spec.noise_sd);
    }

    std::vector<std::string> names(d);
    for (std::size_t j = 0; j < d; ++j) names[j] = "x" + std::to_string(j + 1);
    return Dataset(spec.n, d, std::move(x), std::move(y), std::move(names));
}

namespace detail {

inline bool parse_strict_double(const std::string& tok, double& out) {
    std::size_t start = tok.find_first_not_of(" \t\r");
    if (start == std::string::npos) return false;
    std::size_t stop = tok.find_last_not_of(" \t\r");
    const std::string trimmed = tok.substr(start, stop - start + 1);
    char* end = nullptr;
    out = std::strtod(trimmed.c_str(), &end);
    return end == trimmed.c_str() + trimmed.size() && trimmed.size() > 0 && std::isfinite(out);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

// Rows with any missing or non-numeric cell are dropped and counted.
inline Dataset load_csv(const std::string& path, const std::string& response_column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path);
    const std::vector<std::string> header = detail::split_csv_line(line);

    std::size_t resp_col = header.size();
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == response_column) resp_col = j;
    }
    if (resp_col == header.size()) {
        throw std::invalid_argument("load_csv: response column '" + response_column +
                                    "' not found in header");
    }

    std::vector<std::string> names;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j != resp_col) names.push_back(header[j]);
    }

    std::vector<double> x;
    std::vector<double> y;
    std::size_t dropped = 0;
    std::vector<double> row(header.size());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = detail::split_csv_line(line);
        bool ok = cells.size() == header.size();
        for (std::size_t j = 0; ok && j < cells.size(); ++j) {
            ok = detail::parse_strict_double(cells[j], row[j]);
        }
        if (!ok) {
            ++dropped;
            continue;
        }
        for (std::size_t j = 0; j < cells.size(); ++j) {
            if (j != resp_col) x.push_back(row[j]);
        }
        y.push_back(row[resp_col]);
    }
    if (y.empty()) throw std::runtime_error("load_csv: zero usable rows in " + path);

    const std::size_t n_rows = y.size();
    const std::size_t n_features = names.size();
    Dataset out(n_rows, n_features, std::move(x), std::move(y), std::move(names));
    out.dropped_rows = dropped;
    return out;
}

// Returns a copy with the named column replaced by a uniform random
// permutation of its values.
inline Dataset randomize_feature(const Dataset& data, const std::string& feature,
                                 std::uint64_t seed) {
    const std::size_t j = data.feature_index(feature);
    std::vector<double> column(data.n_rows);
    for (std::size_t i = 0; i < data.n_rows; ++i) column[i] = data.x(i, j);
    RngStream rng = RngStream::derive(seed, {0x7065726dULL, j});
    rng.shuffle(column);
    Dataset out = data;
    for (std::size_t i = 0; i < data.n_rows; ++i) {
        out.features[i * data.n_features + j] = column[i];
    }
    return out;
}

}  // namespace usforest
