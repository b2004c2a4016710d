// SPDX-License-Identifier: Apache-2.0
#include "predres/experiments.hpp"

#include "predres/gmm.hpp"
#include "predres/hot_hand.hpp"
#include "predres/hypothesis_normal.hpp"
#include "predres/linear_selection.hpp"
#include "predres/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace predres {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Experiment table

const std::vector<ExperimentInfo>& experiment_table()
{
    static const std::vector<ExperimentInfo> table{
        {"point-demo",
         "Point null against point alternative for a normal mean, with a sweep over the alternative",
         {{"n", "100"},
          {"sample_mean", "0.066"},
          {"data_seed", "1"},
          {"theta0", "0"},
          {"theta1", "0.1"},
          {"n_impute", "2500"},
          {"trials", "1000"},
          {"seed", "1"},
          {"sweep", "-0.3:0.3:0.01"}}},
        {"hyptest",
         "Two-sided normal-mean test: p-values, e-values and resampling P(H1) over many seeds",
         {{"sizes", "30,100,300,1000"},
          {"multiplier", "20"},
          {"trials", "1000"},
          {"seeds", "100"},
          {"first_seed", "1"},
          {"null_mean", "0"},
          {"alt_mean", "0.1"},
          {"theta0", "0"},
          {"delta", "0.1"},
          {"trace_n", "30"},
          {"trace_trials", "100"}}},
        {"density-sweep",
         "Two-component mixture with a sweep over the component standard deviation",
         {{"sigmas", "0.5:1.0:0.1"},
          {"n", "50"},
          {"n_impute", "200"},
          {"trials", "100"},
          {"max_components", "2"},
          {"variance", "equal"},
          {"data_seed", "1"},
          {"seed", "1"}}},
        {"density-3comp",
         "Posterior over the number of components for three-component mixture data",
         {{"n", "50"},
          {"n_impute", "600"},
          {"trials", "400"},
          {"max_components", "9"},
          {"variance", "both"},
          {"data_seed", "23"},
          {"seed", "1"}}},
        {"galaxies",
         "Posterior over the number of components for the galaxy velocities",
         {{"data_file", ""},
          {"n_impute", "1500"},
          {"trials", "100"},
          {"max_components", "9"},
          {"variance", "both"},
          {"seed", "1"}}},
        {"varsel",
         "Linear-model variable selection by forward stepwise search on block-resampled outcomes",
         {{"sizes", "100"},
          {"criteria", "bic"},
          {"covariates", "20"},
          {"n_true", "5"},
          {"blocks", "10"},
          {"trials", "100"},
          {"data_seed", "1"},
          {"seed", "1"},
          {"data_file", ""}}},
        {"hothand",
         "Binomial against beta-binomial game-level test, swept over the generating Beta(alpha, alpha)",
         {{"alphas", "0.5,1,1.5,2,2.5"},
          {"datasets", "100"},
          {"games", "20"},
          {"total_games", "200"},
          {"trials", "100"},
          {"first_seed", "1"},
          {"data_file", ""}}},
    };
    return table;
}

const ExperimentInfo& find_experiment(const std::string& name)
{
    for (const ExperimentInfo& info : experiment_table()) {
        if (info.name == name) {
            return info;
        }
    }
    std::string names;
    for (const ExperimentInfo& info : experiment_table()) {
        names += (names.empty() ? "" : ", ") + info.name;
    }
    throw std::invalid_argument("unknown experiment '" + name + "'; valid experiments: " + names);
}

// ---------------------------------------------------------------------------
// Parameter parsing

std::string trim(const std::string& text)
{
    const auto begin = text.find_first_not_of(" \t");
    if (begin == std::string::npos) {
        return "";
    }
    const auto end = text.find_last_not_of(" \t");
    return text.substr(begin, end - begin + 1);
}

double parse_real(const std::string& key, const std::string& text)
{
    const std::string value = trim(text);
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size() || !std::isfinite(out)) {
        throw std::invalid_argument("parameter '" + key + "': expected a number, got '" + text + "'");
    }
    return out;
}

std::uint64_t parse_count(const std::string& key, const std::string& text)
{
    const std::string value = trim(text);
    std::size_t used = 0;
    unsigned long long out = 0;
    try {
        if (!value.empty() && value.front() != '-') {
            out = std::stoull(value, &used);
        }
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size()) {
        throw std::invalid_argument("parameter '" + key + "': expected a nonnegative integer, got '" + text + "'");
    }
    return out;
}

// Rounds range points to 12 significant digits so 0.5 + 3 * 0.1 prints as 0.8.
double tidy(double value)
{
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.12g", value);
    return std::strtod(buffer, nullptr);
}

std::vector<double> parse_reals(const std::string& key, const std::string& text)
{
    std::vector<double> out;
    if (trim(text).empty()) {
        return out;
    }
    if (text.find(':') != std::string::npos) {
        std::vector<double> parts;
        std::istringstream in(text);
        std::string part;
        while (std::getline(in, part, ':')) {
            parts.push_back(parse_real(key, part));
        }
        if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
            throw std::invalid_argument("parameter '" + key + "': expected lo:hi:step with lo <= hi, step > 0");
        }
        const auto steps = static_cast<std::size_t>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
        for (std::size_t i = 0; i <= steps; ++i) {
            out.push_back(tidy(parts[0] + static_cast<double>(i) * parts[2]));
        }
        return out;
    }
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) {
        out.push_back(parse_real(key, part));
    }
    return out;
}

std::vector<std::size_t> parse_counts(const std::string& key, const std::string& text)
{
    std::vector<std::size_t> out;
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) {
        out.push_back(parse_count(key, part));
    }
    return out;
}

std::vector<std::string> parse_words(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) {
        out.push_back(trim(part));
    }
    return out;
}

class Params
{
  public:
    Params(const ExperimentInfo& info, const std::map<std::string, std::string>& overrides)
    {
        for (const auto& [key, value] : info.parameters) {
            values_[key] = value;
        }
        for (const auto& [key, value] : overrides) {
            values_[key] = value;
        }
    }

    const std::string& text(const std::string& key) const { return values_.at(key); }
    double real(const std::string& key) const { return parse_real(key, text(key)); }
    std::uint64_t count(const std::string& key) const { return parse_count(key, text(key)); }
    std::size_t positive(const std::string& key) const
    {
        const std::uint64_t value = count(key);
        if (value == 0) {
            throw std::invalid_argument("parameter '" + key + "' must be positive");
        }
        return value;
    }
    std::vector<double> reals(const std::string& key) const { return parse_reals(key, text(key)); }
    std::vector<std::size_t> counts(const std::string& key) const { return parse_counts(key, text(key)); }
    const std::map<std::string, std::string>& all() const { return values_; }

  private:
    std::map<std::string, std::string> values_;
};

std::string json_value_text(const json& value)
{
    if (value.is_string()) {
        return value.get<std::string>();
    }
    if (value.is_array()) {
        std::string out;
        for (const json& item : value) {
            out += (out.empty() ? "" : ",") + json_value_text(item);
        }
        return out;
    }
    if (value.is_number_float()) {
        return format_number(value.get<double>());
    }
    if (value.is_number() || value.is_boolean()) {
        return value.dump();
    }
    throw std::invalid_argument("parameter values must be numbers, strings, booleans or arrays");
}

// ---------------------------------------------------------------------------
// Output staging

class OutputDir
{
  public:
    explicit OutputDir(const std::string& output_dir)
    {
        final_ = fs::path(output_dir).lexically_normal();
        if (final_.filename().empty()) {
            final_ = final_.parent_path();
        }
        if (final_.empty()) {
            throw std::invalid_argument("output_dir must not be empty");
        }
        staging_ = final_.parent_path() / ("." + final_.filename().string() + ".partial");
        fs::remove_all(staging_);
        fs::create_directories(staging_);
    }

    OutputDir(const OutputDir&) = delete;
    OutputDir& operator=(const OutputDir&) = delete;

    ~OutputDir()
    {
        std::error_code ignored;
        fs::remove_all(staging_, ignored);
    }

    std::ofstream open(const std::string& name)
    {
        if (std::find(files_.begin(), files_.end(), name) == files_.end()) {
            files_.push_back(name);
        }
        std::ofstream out(staging_ / name, std::ios::binary);
        if (!out) {
            throw std::runtime_error("cannot write " + (staging_ / name).string());
        }
        out.exceptions(std::ios::failbit | std::ios::badbit);
        return out;
    }

    void write_json(const std::string& name, const json& value)
    {
        std::ofstream out = open(name);
        out << value.dump(2) << '\n';
    }

    RunReport commit()
    {
        fs::create_directories(final_);
        for (const std::string& name : files_) {
            fs::rename(staging_ / name, final_ / name);
        }
        fs::remove_all(staging_);
        return {final_.string(), files_};
    }

    const std::vector<std::string>& files() const { return files_; }

  private:
    fs::path final_;
    fs::path staging_;
    std::vector<std::string> files_;
};

// ---------------------------------------------------------------------------
// Shared writers

json posterior_json(const PosteriorModelProbabilities& posterior, const std::map<ModelId, std::string>& labels = {})
{
    auto name = [&](ModelId id) {
        const auto it = labels.find(id);
        return it == labels.end() ? std::to_string(id) : it->second;
    };
    json out;
    out["probabilities"] = json::object();
    out["counts"] = json::object();
    for (const auto& [id, p] : posterior.probabilities) {
        out["probabilities"][name(id)] = p;
    }
    for (const auto& [id, c] : posterior.counts) {
        out["counts"][name(id)] = c;
    }
    out["n_trials"] = posterior.n_trials;
    out["n_aborted"] = posterior.n_aborted;
    return out;
}

void write_traces(OutputDir& out, const std::string& stem, std::span<const TrialTrace> traces,
                  ConvergenceSvgOptions options)
{
    {
        std::ofstream csv = out.open(stem + ".csv");
        write_trace_csv(csv, traces);
    }
    std::ofstream svg = out.open((stem == "trace" ? std::string("convergence") : "convergence" + stem.substr(5)) +
                                 ".svg");
    emit_convergence_svg(traces, options, svg);
}

std::string label_number(double value)
{
    return format_number(value);
}

std::vector<MixtureCandidate> candidates_for(const Params& params)
{
    const std::string mode = params.text("variance");
    if (mode != "equal" && mode != "unequal" && mode != "both") {
        throw std::invalid_argument("parameter 'variance' must be equal, unequal or both");
    }
    return mixture_candidates(params.positive("max_components"), mode != "unequal", mode != "equal");
}

std::vector<double> read_values(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot read data file " + path);
    }
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) {
            values.push_back(parse_real("data_file", line));
        }
    }
    return values;
}

// ---------------------------------------------------------------------------
// Experiments

json run_point_demo(const Params& params, std::size_t workers, OutputDir& out)
{
    const std::size_t n = params.positive("n");
    std::vector<double> data = simulate_normal_data(params.count("data_seed"), 0, n, 0.0);
    const double shift = params.real("sample_mean") - NormalSample::from(data).mean();
    for (double& x : data) {
        x += shift;
    }
    const double theta0 = params.real("theta0");
    const double theta1 = params.real("theta1");
    ResamplingConfig config;
    config.n_observed = n;
    config.n_final = n + params.count("n_impute");
    config.n_trials = params.positive("trials");
    config.master_seed = params.count("seed");
    config.workers = workers;

    const ResamplingResult result = point_vs_point_resample(theta0, theta1, data, config);
    json posterior = posterior_json(result.posterior, {{kNullHypothesis, "H0"}, {kAlternativeHypothesis, "H1"}});
    posterior["sample_mean"] = NormalSample::from(data).mean();
    posterior["theta0"] = theta0;
    posterior["theta1"] = theta1;

    ConvergenceSvgOptions options;
    options.title = "Running mean, theta1 = " + label_number(theta1);
    options.marker_step = config.n_final - n;
    options.y_label = "running mean";
    write_traces(out, "trace", result.traces, options);

    std::vector<double> sweep = params.reals("sweep");
    if (sweep.empty()) {
        sweep.push_back(theta1);
    }
    const std::vector<PointSweepEntry> entries = point_vs_point_sweep(theta0, sweep, data, config);
    json sweep_json = json::array();
    std::vector<ScatterPoint> points;
    {
        std::ofstream csv = out.open("summary.csv");
        csv << "theta1,p_h1,baseline\n";
        for (const PointSweepEntry& entry : entries) {
            csv << format_number(entry.theta1) << ',' << format_number(entry.p_h1) << ','
                << (entry.baseline ? 1 : 0) << '\n';
            sweep_json.push_back({{"theta1", entry.theta1}, {"p_h1", entry.p_h1}, {"baseline", entry.baseline}});
            points.push_back({entry.theta1, entry.p_h1, entry.baseline});
        }
    }
    posterior["sweep"] = std::move(sweep_json);
    out.write_json("posterior.json", posterior);
    std::ofstream svg = out.open("sweep.svg");
    emit_scatter_svg(points, "P(H1) against theta1", "theta1", "P(H1)", false, svg);
    return config.master_seed;
}

json run_hyptest(const Params& params, std::size_t workers, OutputDir& out)
{
    TwoSidedStudyConfig config;
    config.sample_sizes = params.counts("sizes");
    if (config.sample_sizes.empty()) {
        throw std::invalid_argument("parameter 'sizes' must list at least one sample size");
    }
    config.multiplier = params.count("multiplier");
    config.n_trials = params.positive("trials");
    config.n_seeds = params.positive("seeds");
    config.first_seed = params.count("first_seed");
    config.null_mean = params.real("null_mean");
    config.alt_mean = params.real("alt_mean");
    config.theta0 = params.real("theta0");
    config.delta = params.real("delta");
    config.workers = workers;

    const TwoSidedStudy study = run_two_sided_study(config);
    {
        std::ofstream csv = out.open("summary.csv");
        csv << "truth,metric";
        for (std::size_t n : config.sample_sizes) {
            csv << ",n=" << n;
        }
        csv << '\n';
        for (const MetricRow& row : two_sided_metrics(study)) {
            csv << row.truth << ',' << row.metric;
            for (double v : row.values) {
                csv << ',' << format_number(v);
            }
            csv << '\n';
        }
    }
    json posterior;
    std::vector<Bar> bars;
    {
        std::ofstream csv = out.open("per_seed.csv");
        csv << "truth,seed,n,sample_mean,p_value,e_value,resampling_p_h1\n";
        for (std::size_t truth = 0; truth < 2; ++truth) {
            const std::string name = truth == 0 ? "H0" : "H1";
            const auto& block = truth == 0 ? study.null_results : study.alt_results;
            for (std::size_t s = 0; s < block.size(); ++s) {
                json per_seed = json::array();
                double total = 0.0;
                for (const TwoSidedTestResult& r : block[s]) {
                    csv << name << ',' << r.seed << ',' << r.n << ',' << format_number(r.sample_mean) << ','
                        << format_number(r.p_value) << ',' << format_number(r.e_value) << ','
                        << format_number(r.resampling_p_h1) << '\n';
                    per_seed.push_back(r.resampling_p_h1);
                    total += r.resampling_p_h1;
                }
                const double mean = total / static_cast<double>(block[s].size());
                const std::string n_label = std::to_string(config.sample_sizes[s]);
                posterior[name][n_label] = {{"mean_p_h1", mean}, {"per_seed_p_h1", std::move(per_seed)}};
                bars.push_back({name + " n=" + n_label, mean, truth == 1});
            }
        }
    }
    out.write_json("posterior.json", posterior);
    {
        std::ofstream svg = out.open("summary.svg");
        emit_bar_svg(bars, "Mean resampling P(H1)", 1.0, svg);
    }

    const std::size_t trace_n = params.positive("trace_n");
    const std::size_t trace_trials = params.count("trace_trials");
    for (std::size_t truth = 0; truth < 2; ++truth) {
        const double mean = truth == 0 ? config.null_mean : config.alt_mean;
        const std::vector<double> data = simulate_normal_data(config.first_seed, truth, trace_n, mean);
        std::vector<TrialTrace> traces;
        TwoSidedStudyConfig single = config;
        run_two_sided_test(config.first_seed, data, single, &traces);
        traces.resize(std::min(traces.size(), trace_trials));
        ConvergenceSvgOptions options;
        options.title = std::string("Running mean under ") + (truth == 0 ? "H0" : "H1") + ", n = " +
                        std::to_string(trace_n);
        options.marker_step = config.multiplier * trace_n;
        options.y_label = "running mean";
        write_traces(out, truth == 0 ? "trace_h0" : "trace_h1", traces, options);
    }
    return config.first_seed;
}

json density_common(const std::vector<double>& data, const Params& params, std::size_t workers, OutputDir& out,
                    const std::string& title)
{
    const std::vector<MixtureCandidate> candidates = candidates_for(params);
    ResamplingConfig config;
    config.n_observed = data.size();
    config.n_final = data.size() + params.count("n_impute");
    config.n_trials = params.positive("trials");
    config.master_seed = params.count("seed");
    config.workers = workers;
    const DensityPosterior result = density_resample(data, candidates, config);

    json posterior = posterior_json(result.run.posterior);
    posterior["modal_components"] = result.modal_components();
    posterior["n_observed"] = data.size();
    out.write_json("posterior.json", posterior);

    const std::size_t max_g = params.positive("max_components");
    std::vector<Bar> bars;
    {
        std::ofstream csv = out.open("summary.csv");
        csv << "G,probability,count\n";
        for (std::size_t g = 1; g <= max_g; ++g) {
            const auto count_it = result.run.posterior.counts.find(g);
            const std::size_t count = count_it == result.run.posterior.counts.end() ? 0 : count_it->second;
            csv << g << ',' << format_number(result.probability(g)) << ',' << count << '\n';
            bars.push_back({"G=" + std::to_string(g), result.probability(g), g == result.modal_components()});
        }
    }
    {
        std::ofstream svg = out.open("posterior.svg");
        emit_bar_svg(bars, title, 1.0, svg);
    }
    ConvergenceSvgOptions options;
    options.title = title;
    options.plot_summary = false;
    options.marker_step = config.n_final - config.n_observed;
    options.y_label = "selected components";
    write_traces(out, "trace", result.run.traces, options);
    return config.master_seed;
}

json run_density_sweep(const Params& params, std::size_t workers, OutputDir& out)
{
    const std::vector<double> sigmas = params.reals("sigmas");
    if (sigmas.empty()) {
        throw std::invalid_argument("parameter 'sigmas' must list at least one value");
    }
    const std::vector<MixtureCandidate> candidates = candidates_for(params);
    const std::size_t n = params.positive("n");
    const std::size_t max_g = params.positive("max_components");
    const std::uint64_t seed = params.count("seed");

    json posterior;
    std::vector<Bar> bars;
    std::ofstream csv = out.open("summary.csv");
    csv << "sigma,G,probability\n";
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        if (!(sigmas[i] > 0.0)) {
            throw std::invalid_argument("parameter 'sigmas' must be positive");
        }
        const std::vector<double> data = sample_two_component(params.count("data_seed"), n, sigmas[i]);
        ResamplingConfig config;
        config.n_observed = n;
        config.n_final = n + params.count("n_impute");
        config.n_trials = params.positive("trials");
        config.master_seed = derive_trial_stream(seed, i).next_u64();
        config.workers = workers;
        const DensityPosterior result = density_resample(data, candidates, config);

        const std::string label = label_number(sigmas[i]);
        json entry = posterior_json(result.run.posterior);
        entry["master_seed"] = config.master_seed;
        posterior[label] = std::move(entry);
        for (std::size_t g = 1; g <= max_g; ++g) {
            csv << label << ',' << g << ',' << format_number(result.probability(g)) << '\n';
        }
        bars.push_back({"sigma=" + label, result.probability(1), false});

        ConvergenceSvgOptions options;
        options.title = "Selected components, sigma = " + label;
        options.plot_summary = false;
        options.marker_step = config.n_final - n;
        options.y_label = "selected components";
        write_traces(out, "trace_sigma_" + label, result.run.traces, options);
    }
    csv.close();
    out.write_json("posterior.json", posterior);
    std::ofstream svg = out.open("summary.svg");
    emit_bar_svg(bars, "P(G = 1) by sigma", 1.0, svg);
    return seed;
}

json run_density_three(const Params& params, std::size_t workers, OutputDir& out)
{
    const std::vector<double> data = sample_three_component(params.count("data_seed"), params.positive("n"));
    return density_common(data, params, workers, out, "Posterior over components");
}

json run_galaxies(const Params& params, std::size_t workers, OutputDir& out)
{
    const std::string& path = params.text("data_file");
    const std::vector<double> data = path.empty() ? galaxies_velocities() : read_values(path);
    if (data.size() < 2) {
        throw std::invalid_argument("galaxies data needs at least two values");
    }
    return density_common(data, params, workers, out, "Galaxies: posterior over components");
}

json run_varsel(const Params& params, std::size_t workers, OutputDir& out)
{
    std::vector<SelectionRule> rules;
    std::vector<std::string> rule_names = parse_words(params.text("criteria"));
    for (const std::string& name : rule_names) {
        if (name == "bic") {
            rules.push_back(SelectionRule::Bic);
        } else if (name == "aic") {
            rules.push_back(SelectionRule::Aic);
        } else {
            throw std::invalid_argument("parameter 'criteria' accepts bic and aic, got '" + name + "'");
        }
    }
    if (rules.empty()) {
        throw std::invalid_argument("parameter 'criteria' must list at least one criterion");
    }

    const std::string& path = params.text("data_file");
    std::vector<RegressionData> datasets;
    std::size_t n_true = 0;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) {
            throw std::invalid_argument("cannot read data file " + path);
        }
        datasets.push_back(read_regression_csv(in));
    } else {
        n_true = params.count("n_true");
        for (std::size_t n : params.counts("sizes")) {
            datasets.push_back(sparse_linear_data(params.count("data_seed"), n, params.positive("covariates"), n_true));
        }
        if (datasets.empty()) {
            throw std::invalid_argument("parameter 'sizes' must list at least one sample size");
        }
    }

    VariableSelectionConfig config;
    config.n_blocks = params.count("blocks");
    config.n_trials = params.positive("trials");
    config.workers = workers;
    const std::uint64_t seed = params.count("seed");

    json posterior;
    std::ofstream summary = out.open("summary.csv");
    summary << "n,criterion,column,inclusion\n";
    std::ofstream sizes = out.open("model_size.csv");
    sizes << "n,criterion,mean_model_size\n";
    for (std::size_t d = 0; d < datasets.size(); ++d) {
        const RegressionData& data = datasets[d];
        const auto n = static_cast<std::size_t>(data.design.rows());
        for (std::size_t r = 0; r < rules.size(); ++r) {
            config.master_seed = derive_trial_stream(seed, d * rules.size() + r).next_u64();
            const InclusionFrequencies result = variable_selection_resample(data, config, rules[r]);
            const std::string tag = rule_names[r] + "_n" + std::to_string(n);

            json entry;
            std::vector<Bar> bars;
            for (std::size_t j = 1; j < result.inclusion.size(); ++j) {
                const std::string column = "x" + std::to_string(j);
                summary << n << ',' << rule_names[r] << ',' << column << ','
                        << format_number(result.inclusion[j]) << '\n';
                entry["inclusion"][column] = result.inclusion[j];
                bars.push_back({column, result.inclusion[j], j <= n_true});
            }
            sizes << n << ',' << rule_names[r] << ',' << format_number(result.mean_model_size) << '\n';
            entry["mean_model_size"] = result.mean_model_size;
            entry["models"] = posterior_json(result.run.posterior);
            posterior[rule_names[r]][std::to_string(n)] = std::move(entry);
            {
                std::ofstream svg = out.open("inclusion_" + tag + ".svg");
                emit_bar_svg(bars, "Inclusion frequency, " + rule_names[r] + ", n = " + std::to_string(n), 1.0, svg);
            }
            ConvergenceSvgOptions options;
            options.title = "Selected covariates, " + rule_names[r] + ", n = " + std::to_string(n);
            options.marker_step = n * config.n_blocks;
            options.x_label = "imputed blocks";
            options.y_label = "selected covariates";
            write_traces(out, "trace_" + tag, result.run.traces, options);
        }
    }
    summary.close();
    sizes.close();
    out.write_json("posterior.json", posterior);
    return seed;
}

json run_hothand(const Params& params, std::size_t workers, OutputDir& out)
{
    HotHandConfig resampling;
    resampling.n_total_games = params.positive("total_games");
    resampling.n_trials = params.positive("trials");
    resampling.workers = workers;
    const std::uint64_t first_seed = params.count("first_seed");
    const std::map<ModelId, std::string> labels{{kNullModel, "binomial"}, {kBetaBinomialModel, "beta-binomial"}};

    ConvergenceSvgOptions options;
    options.plot_summary = false;
    options.x_label = "imputed games";
    options.y_label = "selected model (0 binomial, 1 beta-binomial)";

    const std::string& path = params.text("data_file");
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) {
            throw std::invalid_argument("cannot read data file " + path);
        }
        const std::vector<GameRecord> games = read_games_csv(in);
        resampling.master_seed = first_seed;
        const ResamplingResult result = hot_hand_resample(games, resampling);
        const BetaBinFit fit = fit_ab(games);
        json posterior = posterior_json(result.posterior, labels);
        posterior["fit"] = {{"a_hat", fit.a_hat},
                            {"b_hat", fit.b_hat},
                            {"log_likelihood", fit.log_likelihood},
                            {"converged", fit.converged}};
        out.write_json("posterior.json", posterior);
        {
            std::ofstream csv = out.open("summary.csv");
            csv << "model,probability\n";
            for (const auto& [id, name] : labels) {
                csv << name << ',' << format_number(result.posterior.probability(id)) << '\n';
            }
        }
        options.title = "Selected model";
        options.marker_step = resampling.n_total_games - games.size();
        write_traces(out, "trace", result.traces, options);
        return first_seed;
    }

    HotHandSweepConfig sweep;
    sweep.alphas = params.reals("alphas");
    if (sweep.alphas.empty()) {
        throw std::invalid_argument("parameter 'alphas' must list at least one value");
    }
    sweep.n_datasets = params.positive("datasets");
    sweep.n_games = params.positive("games");
    sweep.first_seed = first_seed;
    sweep.resampling = resampling;
    const std::vector<HotHandSweepRow> rows = hot_hand_sweep(sweep);

    json posterior;
    std::vector<ScatterPoint> points;
    {
        std::ofstream csv = out.open("summary.csv");
        csv << "alpha,acceptance\n";
        std::ofstream per = out.open("per_dataset.csv");
        per << "alpha,seed,null_probability\n";
        for (const HotHandSweepRow& row : rows) {
            const std::string label = label_number(row.alpha);
            csv << label << ',' << format_number(row.acceptance) << '\n';
            for (std::size_t s = 0; s < row.null_probability.size(); ++s) {
                per << label << ',' << first_seed + s << ',' << format_number(row.null_probability[s]) << '\n';
            }
            posterior[label] = {{"acceptance", row.acceptance}, {"null_probability", row.null_probability}};
            points.push_back({row.alpha, row.acceptance, false});
        }
    }
    out.write_json("posterior.json", posterior);
    {
        std::ofstream svg = out.open("acceptance.svg");
        emit_scatter_svg(points, "Acceptance of the binomial model", "alpha", "acceptance", false, svg);
    }

    // Traces of the first dataset at alpha = 1 when swept, otherwise the first alpha.
    const auto one = std::find(sweep.alphas.begin(), sweep.alphas.end(), 1.0);
    const std::size_t index = one == sweep.alphas.end() ? 0 : static_cast<std::size_t>(one - sweep.alphas.begin());
    HotHandConfig single = resampling;
    single.master_seed = sweep_master_seed(first_seed, index);
    const std::vector<GameRecord> games = simulate_games(first_seed, sweep.alphas[index], sweep.n_games);
    const ResamplingResult traced = hot_hand_resample(games, single);
    options.title = "Selected model, alpha = " + label_number(sweep.alphas[index]);
    options.marker_step = resampling.n_total_games - games.size();
    write_traces(out, "trace", traced.traces, options);
    return first_seed;
}

using Runner = json (*)(const Params&, std::size_t, OutputDir&);

Runner runner_for(const std::string& name)
{
    static const std::map<std::string, Runner> runners{
        {"point-demo", run_point_demo}, {"hyptest", run_hyptest},   {"density-sweep", run_density_sweep},
        {"density-3comp", run_density_three}, {"galaxies", run_galaxies}, {"varsel", run_varsel},
        {"hothand", run_hothand},
    };
    return runners.at(name);
}

std::string utc_now()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buffer[32];
    std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buffer;
}

} // namespace

const std::vector<ExperimentInfo>& list_experiments()
{
    return experiment_table();
}

ExperimentConfig parse_experiment_config(const std::string& json_text)
{
    json document;
    try {
        document = json::parse(json_text);
    } catch (const json::parse_error& error) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + error.what());
    }
    if (!document.is_object()) {
        throw std::invalid_argument("config must be a JSON object");
    }
    ExperimentConfig config;
    for (const auto& [key, value] : document.items()) {
        if (key == "experiment") {
            config.experiment = json_value_text(value);
        } else if (key == "output_dir") {
            config.output_dir = json_value_text(value);
        } else if (key == "workers") {
            config.workers = parse_count("workers", json_value_text(value));
        } else if (key == "parameters") {
            if (!value.is_object()) {
                throw std::invalid_argument("'parameters' must be a JSON object");
            }
            for (const auto& [name, parameter] : value.items()) {
                config.parameters[name] = json_value_text(parameter);
            }
        } else {
            throw std::invalid_argument("unknown config key '" + key +
                                        "'; valid keys: experiment, output_dir, parameters, workers");
        }
    }
    return config;
}

void apply_override(ExperimentConfig& config, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw std::invalid_argument("override '" + assignment + "' is not of the form key=value");
    }
    const std::string key = trim(assignment.substr(0, eq));
    const std::string value = assignment.substr(eq + 1);
    if (key == "experiment") {
        config.experiment = value;
    } else if (key == "output_dir") {
        config.output_dir = value;
    } else if (key == "workers") {
        config.workers = parse_count("workers", value);
    } else {
        config.parameters[key] = value;
    }
}

void validate(const ExperimentConfig& config)
{
    const ExperimentInfo& info = find_experiment(config.experiment);
    for (const auto& [key, value] : config.parameters) {
        const bool known = std::any_of(info.parameters.begin(), info.parameters.end(),
                                       [&](const auto& entry) { return entry.first == key; });
        if (!known) {
            std::string keys;
            for (const auto& entry : info.parameters) {
                keys += (keys.empty() ? "" : ", ") + entry.first;
            }
            throw std::invalid_argument("unknown parameter '" + key + "' for experiment " + info.name +
                                        "; valid keys: " + keys);
        }
    }
    if (config.workers && *config.workers == 0) {
        throw std::invalid_argument("workers must be positive");
    }
}

std::size_t resolve_workers(const ExperimentConfig& config)
{
    if (config.workers) {
        return *config.workers;
    }
    if (const char* env = std::getenv("PREDRES_WORKERS"); env != nullptr && *env != '\0') {
        const std::uint64_t workers = parse_count("PREDRES_WORKERS", env);
        if (workers > 0) {
            return workers;
        }
    }
    return 1;
}

RunReport run_experiment(const ExperimentConfig& config)
{
    validate(config);
    const ExperimentInfo& info = find_experiment(config.experiment);
    const Params params(info, config.parameters);
    const std::size_t workers = resolve_workers(config);
    const std::string started = utc_now();
    const auto clock_start = std::chrono::steady_clock::now();

    OutputDir out(config.output_dir);
    const json seed = runner_for(info.name)(params, workers, out);

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    json manifest;
    manifest["config"] = {{"experiment", info.name},
                          {"parameters", params.all()},
                          {"output_dir", config.output_dir},
                          {"workers", workers}};
    manifest["seed"] = seed;
    manifest["versions"] = {{"predres", kVersion},
                            {"compiler", __VERSION__},
                            {"cplusplus", static_cast<long>(__cplusplus)},
                            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    std::vector<std::string> files = out.files();
    files.push_back("manifest.json");
    std::sort(files.begin(), files.end());
    manifest["files"] = files;
    manifest["timestamp"] = {{"started_utc", started}, {"wall_clock_seconds", elapsed}};
    out.write_json("manifest.json", manifest);
    return out.commit();
}

} // namespace predres
