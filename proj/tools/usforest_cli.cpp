// usforest command-line front end: data ingestion, ensemble prediction with
// confidence intervals, feature-significance testing, and config-driven
// experiments.  Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "usforest/inference.hpp"
#include "usforest/parallel.hpp"
#include "usforest/simharness.hpp"

namespace {

using ojson = nlohmann::ordered_json;

// Config-level mistakes distinguishable from runtime failures (exit 2 vs 1).
struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<double> parse_point(const std::string& text, std::size_t expect_dim) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        double v;
        if (!usforest::detail::parse_strict_double(tok, v)) {
            throw usage_error("invalid coordinate '" + tok + "' in point '" + text + "'");
        }
        out.push_back(v);
    }
    if (expect_dim > 0 && out.size() != expect_dim) {
        throw usage_error("point '" + text + "' has " + std::to_string(out.size()) +
                          " coordinates; data has " + std::to_string(expect_dim) +
                          " features");
    }
    return out;
}

std::vector<usforest::PredictionPoint> load_points_file(const std::string& path,
                                                        std::size_t dim) {
    std::ifstream in(path);
    if (!in) throw usage_error("cannot open points file " + path);
    std::vector<usforest::PredictionPoint> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        out.push_back(parse_point(line, dim));
    }
    if (out.empty()) throw usage_error("points file " + path + " contains no points");
    return out;
}

std::vector<usforest::PredictionPoint> sample_points(const usforest::Dataset& data,
                                                     std::size_t count,
                                                     std::uint64_t seed) {
    if (count < 1 || count > data.n_rows) {
        throw usage_error("--sample-points must be between 1 and the number of rows");
    }
    usforest::RngStream rng = usforest::RngStream::derive(seed, {0x706f696e74ULL});
    const auto rows = rng.sample_without_replacement(
        static_cast<std::uint32_t>(data.n_rows), static_cast<std::uint32_t>(count));
    std::vector<usforest::PredictionPoint> out;
    for (auto r : rows) {
        out.emplace_back(data.row(r), data.row(r) + data.n_features);
    }
    return out;
}

// Reduced-set tokens are feature names, or 0-based indices if all-numeric.
std::vector<std::size_t> parse_reduced(const std::string& text,
                                       const usforest::Dataset& data) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        const bool numeric =
            std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); });
        if (numeric) {
            const std::size_t idx = std::stoul(tok);
            if (idx >= data.n_features) {
                throw usage_error("feature index " + tok + " out of range");
            }
            out.push_back(idx);
        } else {
            try {
                out.push_back(data.feature_index(tok));
            } catch (const std::invalid_argument& e) {
                throw usage_error(e.what());
            }
        }
    }
    if (out.empty()) throw usage_error("--reduced must name at least one feature");
    return out;
}

void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << content;
        if (!out) throw std::runtime_error("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
    }
}

void emit(const ojson& report, const std::string& out_path, const std::string& summary) {
    if (out_path.empty()) {
        std::cout << report.dump(2) << "\n";
    } else {
        atomic_write(out_path, report.dump(2) + "\n");
        std::cout << summary << "\n";
    }
}

void write_histogram_csv(const std::string& path, const std::vector<double>& values) {
    const usforest::Histogram h = usforest::make_histogram(values);
    std::ostringstream out;
    out << "bin_left,bin_right,count\n";
    out.precision(17);
    for (std::size_t b = 0; b < h.count.size(); ++b) {
        out << h.bin_left[b] << "," << h.bin_right[b] << "," << h.count[b] << "\n";
    }
    atomic_write(path, out.str());
}

ojson test_result_json(const usforest::TestResult& res) {
    ojson j;
    j["label"] = res.label;
    j["statistic"] = res.statistic;
    j["df"] = res.df;
    j["critical_value"] = res.critical_value;
    j["p_value"] = res.p_value;
    j["reject"] = res.reject;
    return j;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
    std::string data_path;
    std::string response;
    std::vector<std::string> point_specs;
    std::size_t k = 0;
    std::size_t m = 0;
    std::size_t n_z = 50;
    std::size_t n_mc = 500;
    std::size_t mtry = 0;
    std::size_t min_split = 3;
    double level = 0.95;
    std::uint64_t seed = 0;
    bool internal = false;
    std::string out_path;
};

int cmd_predict(const PredictArgs& args) {
    const usforest::Dataset data = usforest::load_csv(args.data_path, args.response);
    if (args.point_specs.empty()) throw usage_error("at least one --point is required");
    if (!args.internal && args.m < 1) {
        throw usage_error("external estimation requires --m >= 1");
    }
    std::vector<usforest::PredictionPoint> points;
    for (const auto& spec : args.point_specs) {
        points.push_back(parse_point(spec, data.n_features));
    }

    usforest::EnsembleConfig cfg;
    cfg.k = args.k;
    cfg.plan.n = data.n_rows;
    cfg.plan.k = args.k;
    cfg.plan.seed = usforest::mix64(args.seed ^ 0x706c616eULL);
    cfg.seed = args.seed;
    if (args.internal) {
        cfg.plan.scheme = usforest::FixedPointScheme{args.n_z, args.n_mc, 1};
    } else {
        cfg.plan.scheme = usforest::UniformScheme{args.m};
    }
    cfg.tree_config.mtry = args.mtry;
    cfg.tree_config.min_split = args.min_split;

    usforest::EstimationSpec estimation;
    estimation.method = args.internal ? usforest::EstimationMethod::Internal
                                      : usforest::EstimationMethod::External;
    estimation.n_z = args.n_z;
    estimation.n_mc = args.n_mc;

    const usforest::PredictReport report =
        usforest::predict_with_variance(data, cfg, estimation, points);

    ojson out;
    out["command"] = "predict";
    out["config"] = {
        {"data", args.data_path},
        {"response", args.response},
        {"k", args.k},
        {"method", args.internal ? "internal" : "external"},
        {"m", cfg.plan.total_draws()},
        {"n_z", args.internal ? args.n_z : estimation.n_z},
        {"n_mc", args.internal ? args.n_mc : estimation.n_mc},
        {"mtry", args.mtry},
        {"min_split", args.min_split},
        {"level", args.level},
        {"seed", args.seed},
    };
    out["n_rows"] = data.n_rows;
    out["dropped_rows"] = data.dropped_rows;
    ojson per_point = ojson::array();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const usforest::VarianceEstimate& est = report.per_point[i];
        const usforest::ConfidenceInterval ci =
            usforest::confidence_interval(report.pred, i, est, args.level);
        per_point.push_back({
            {"point", points[i]},
            {"theta_hat", report.pred.theta_hat[i]},
            {"zeta1", est.zeta1},
            {"zetakk", est.zetakk},
            {"variance", ci.variance_used},
            {"lower", ci.lower},
            {"upper", ci.upper},
        });
    }
    out["per_point"] = per_point;

    std::ostringstream summary;
    summary << "predict: " << points.size() << " point(s), theta_hat[0] = "
            << report.pred.theta_hat[0];
    emit(out, args.out_path, summary.str());
    return 0;
}

// ---------------------------------------------------------------------------
// test

struct TestArgs {
    std::string data_path;
    std::string response;
    std::string reduced_spec;
    std::string points_file;
    std::size_t sample_count = 0;
    std::size_t k = 0;
    std::size_t n_z = 50;
    std::size_t n_mc = 500;
    std::size_t mtry = 0;
    std::size_t min_split = 3;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    bool battery = false;
    std::string out_path;
};

int cmd_test(const TestArgs& args) {
    if (!(args.alpha > 0.0 && args.alpha < 1.0)) {
        throw usage_error("--alpha must be in (0, 1)");
    }
    if (args.points_file.empty() == (args.sample_count == 0)) {
        throw usage_error("exactly one of --points-file and --sample-points is required");
    }
    const usforest::Dataset data = usforest::load_csv(args.data_path, args.response);
    const std::vector<std::size_t> reduced = parse_reduced(args.reduced_spec, data);
    const std::vector<usforest::PredictionPoint> points =
        args.points_file.empty() ? sample_points(data, args.sample_count, args.seed)
                                 : load_points_file(args.points_file, data.n_features);

    usforest::EnsembleConfig cfg;
    cfg.k = args.k;
    cfg.plan.n = data.n_rows;
    cfg.plan.k = args.k;
    cfg.plan.scheme = usforest::FixedPointScheme{args.n_z, args.n_mc, 1};
    cfg.plan.seed = usforest::mix64(args.seed ^ 0x706c616eULL);
    cfg.seed = args.seed;
    cfg.tree_config.mtry = args.mtry;
    cfg.tree_config.min_split = args.min_split;

    ojson out;
    out["command"] = "test";
    out["config"] = {
        {"data", args.data_path},
        {"response", args.response},
        {"reduced", reduced},
        {"n_points", points.size()},
        {"k", args.k},
        {"n_z", args.n_z},
        {"n_mc", args.n_mc},
        {"mtry", args.mtry},
        {"min_split", args.min_split},
        {"alpha", args.alpha},
        {"seed", args.seed},
        {"battery", args.battery},
    };
    out["n_rows"] = data.n_rows;
    out["dropped_rows"] = data.dropped_rows;

    std::ostringstream summary;
    if (args.battery) {
        const usforest::BatteryResult battery = usforest::randomization_battery(
            data, reduced, points, cfg, args.alpha, args.seed);
        out["results"] = ojson::array({
            test_result_json(battery.full_vs_reduced),
            test_result_json(battery.full_vs_randomized),
            test_result_json(battery.randomized_vs_reduced),
            test_result_json(battery.randomized_vs_rerandomized),
        });
        summary << "test battery: full_vs_reduced "
                << (battery.full_vs_reduced.reject ? "rejects" : "fails to reject");
    } else {
        const usforest::TestResult res =
            usforest::significance_test(data, reduced, points, cfg, args.alpha);
        out["results"] = ojson::array({test_result_json(res)});
        summary << "test: statistic " << res.statistic << " vs critical "
                << res.critical_value << " -> "
                << (res.reject ? "reject" : "fail to reject");
    }
    emit(out, args.out_path, summary.str());
    return 0;
}

// ---------------------------------------------------------------------------
// experiment

void reject_unknown_keys(const nlohmann::json& obj, const char* where,
                         const std::vector<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw usage_error(std::string("unknown key '") + key + "' in " + where);
        }
    }
}

usforest::ExperimentSpec parse_experiment(const nlohmann::json& doc, std::string& operation,
                                          std::string& output, std::string& histogram) {
    reject_unknown_keys(doc, "config",
                        {"operation", "seed", "generator", "ensemble", "estimation",
                         "replicates", "points", "level", "alpha", "reference_value",
                         "reference_runs", "reduced", "output", "histogram_csv"});
    usforest::ExperimentSpec spec;
    operation = doc.at("operation").get<std::string>();
    if (operation != "distribution" && operation != "coverage" && operation != "alpha") {
        throw usage_error("operation must be distribution, coverage, or alpha");
    }
    spec.seed = doc.value("seed", 0ULL);
    output = doc.value("output", std::string());
    histogram = doc.value("histogram_csv", std::string());

    const auto& gen = doc.at("generator");
    reject_unknown_keys(gen, "generator",
                        {"kind", "n", "noise_sd", "extra_noise_features"});
    const std::string kind = gen.at("kind").get<std::string>();
    if (kind == "slr") {
        spec.generator.kind = usforest::GeneratorKind::SLR;
    } else if (kind == "mars") {
        spec.generator.kind = usforest::GeneratorKind::MARS;
    } else {
        throw usage_error("generator.kind must be slr or mars");
    }
    spec.generator.n = gen.at("n").get<std::size_t>();
    spec.generator.noise_sd = gen.value("noise_sd", spec.generator.noise_sd);
    spec.generator.extra_noise_features = gen.value("extra_noise_features", 0ULL);

    const auto& ens = doc.at("ensemble");
    reject_unknown_keys(ens, "ensemble",
                        {"k", "scheme", "m", "n_z", "n_mc", "min_split", "min_leaf",
                         "max_depth", "mtry"});
    spec.cfg.k = ens.at("k").get<std::size_t>();
    spec.cfg.plan.k = spec.cfg.k;
    spec.cfg.plan.n = spec.generator.n;
    const std::string scheme = ens.value("scheme", std::string("uniform"));
    if (scheme == "uniform") {
        spec.cfg.plan.scheme = usforest::UniformScheme{ens.at("m").get<std::size_t>()};
    } else if (scheme == "fixed_point") {
        spec.cfg.plan.scheme = usforest::FixedPointScheme{
            ens.at("n_z").get<std::size_t>(), ens.at("n_mc").get<std::size_t>(), 1};
    } else {
        throw usage_error("ensemble.scheme must be uniform or fixed_point");
    }
    spec.cfg.tree_config.min_split = ens.value("min_split", 3ULL);
    spec.cfg.tree_config.min_leaf = ens.value("min_leaf", 1ULL);
    spec.cfg.tree_config.max_depth = ens.value("max_depth", 0ULL);
    spec.cfg.tree_config.mtry = ens.value("mtry", 0ULL);
    spec.cfg.plan.seed = usforest::mix64(spec.seed ^ 0x706c616eULL);
    spec.cfg.seed = spec.seed;

    if (doc.contains("estimation")) {
        const auto& est = doc.at("estimation");
        reject_unknown_keys(est, "estimation", {"method", "n_z", "n_mc"});
        const std::string method = est.value("method", std::string("external"));
        if (method == "external") {
            spec.estimation.method = usforest::EstimationMethod::External;
        } else if (method == "internal") {
            spec.estimation.method = usforest::EstimationMethod::Internal;
        } else {
            throw usage_error("estimation.method must be external or internal");
        }
        spec.estimation.n_z = est.value("n_z", spec.estimation.n_z);
        spec.estimation.n_mc = est.value("n_mc", spec.estimation.n_mc);
    }

    spec.replicates = doc.value("replicates", 1ULL);
    for (const auto& p : doc.at("points")) {
        spec.points.push_back(p.get<usforest::PredictionPoint>());
    }
    spec.level = doc.value("level", 0.95);
    spec.alpha = doc.value("alpha", 0.05);
    if (doc.contains("reference_value") && !doc["reference_value"].is_string()) {
        spec.reference_value = doc["reference_value"].get<double>();
    }
    spec.reference_runs = doc.value("reference_runs", 100ULL);
    if (doc.contains("reduced")) {
        spec.reduced = doc["reduced"].get<std::vector<std::size_t>>();
    }
    return spec;
}

int cmd_experiment(const std::string& config_path, const std::string& out_override) {
    std::ifstream in(config_path);
    if (!in) throw usage_error("cannot open config " + config_path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw usage_error(std::string("config parse error: ") + e.what());
    }

    std::string operation, output, histogram;
    usforest::ExperimentSpec spec;
    try {
        spec = parse_experiment(doc, operation, output, histogram);
        spec.validate();
    } catch (const nlohmann::json::exception& e) {
        throw usage_error(std::string("config error: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw usage_error(e.what());
    }
    if (!out_override.empty()) output = out_override;

    nlohmann::json results;
    std::vector<double> hist_values;
    if (operation == "distribution") {
        results = usforest::run_distribution(spec);
        hist_values = results["per_replicate"].get<std::vector<double>>();
    } else if (operation == "coverage") {
        results = usforest::run_coverage(spec);
        for (const auto& rep : results["per_replicate"]) {
            hist_values.push_back(rep["theta_hat"].get<double>());
        }
    } else {
        results = usforest::run_alpha(spec);
        hist_values = results["per_replicate"].get<std::vector<double>>();
    }

    if (!histogram.empty()) write_histogram_csv(histogram, hist_values);

    std::ostringstream summary;
    summary << "experiment " << operation << ": " << spec.replicates << " replicate(s)";
    if (output.empty()) {
        std::cout << results.dump(2) << "\n";
    } else {
        atomic_write(output, results.dump(2) + "\n");
        std::cout << summary.str() << " -> " << output << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subsampled tree ensembles with U-statistic confidence intervals"};
    app.require_subcommand(1);
    std::size_t threads = 0;
    app.add_option("--threads", threads, "worker thread count (0 = auto)");

    PredictArgs pa;
    CLI::App* predict = app.add_subcommand("predict", "ensemble prediction with CIs");
    predict->add_option("--data", pa.data_path, "training CSV")->required();
    predict->add_option("--response", pa.response, "response column name")->required();
    predict->add_option("--point", pa.point_specs, "comma-separated coordinates (repeatable)");
    predict->add_option("--k", pa.k, "subsample size")->required();
    predict->add_option("--m", pa.m, "subsample count (external)");
    predict->add_option("--nz", pa.n_z, "fixed-point group count");
    predict->add_option("--nmc", pa.n_mc, "subsamples per group");
    predict->add_option("--mtry", pa.mtry, "features tried per split (0 = all)");
    predict->add_option("--min-split", pa.min_split, "minimum node size to split");
    predict->add_option("--level", pa.level, "confidence level");
    predict->add_option("--seed", pa.seed, "master seed");
    predict->add_option("--out", pa.out_path, "output JSON path (default stdout)");
    const auto internal_flag =
        predict->add_flag("--internal", pa.internal, "internal variance estimation");
    predict->add_flag("--external", "external variance estimation (default)")
        ->excludes(internal_flag);

    TestArgs ta;
    CLI::App* test = app.add_subcommand("test", "chi-square feature significance test");
    test->add_option("--data", ta.data_path, "training CSV")->required();
    test->add_option("--response", ta.response, "response column name")->required();
    test->add_option("--reduced", ta.reduced_spec, "comma-separated reduced feature set")
        ->required();
    test->add_option("--points-file", ta.points_file, "CSV of test points");
    test->add_option("--sample-points", ta.sample_count, "draw N training rows as points");
    test->add_option("--k", ta.k, "subsample size")->required();
    test->add_option("--nz", ta.n_z, "fixed-point group count");
    test->add_option("--nmc", ta.n_mc, "subsamples per group");
    test->add_option("--mtry", ta.mtry, "features tried per split (0 = all)");
    test->add_option("--min-split", ta.min_split, "minimum node size to split");
    test->add_option("--alpha", ta.alpha, "test level");
    test->add_option("--seed", ta.seed, "master seed");
    test->add_flag("--battery", ta.battery, "run the four-way randomization battery");
    test->add_option("--out", ta.out_path, "output JSON path (default stdout)");

    std::string config_path, out_override;
    CLI::App* experiment = app.add_subcommand("experiment", "run a config-driven study");
    experiment->add_option("--config", config_path, "experiment config JSON")->required();
    experiment->add_option("--out", out_override, "override the output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usforest: " << e.what() << "\n";
        return 2;
    }

    if (threads > 0) usforest::set_threads(threads);

    try {
        if (predict->parsed()) return cmd_predict(pa);
        if (test->parsed()) return cmd_test(ta);
        return cmd_experiment(config_path, out_override);
    } catch (const usage_error& e) {
        std::cerr << "usforest: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usforest: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "usforest: " << e.what() << "\n";
        return 1;
    }
}
