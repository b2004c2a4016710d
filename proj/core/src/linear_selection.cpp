// SPDX-License-Identifier: Apache-2.0
#include "predres/linear_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace predres {

namespace {

// RSS at or below this fraction of the total sum of squares is a perfect fit.
constexpr double kPerfectFitTolerance = 1e-12;

std::string describe_columns(std::span<const std::size_t> columns)
{
    std::ostringstream out;
    out << '{';
    for (std::size_t i = 0; i < columns.size(); ++i) {
        out << (i ? "," : "") << columns[i];
    }
    out << '}';
    return out.str();
}

Eigen::MatrixXd active_gram(const StackedStats& stats, const SubsetModel& subset)
{
    const auto a = static_cast<Eigen::Index>(subset.active.size());
    Eigen::MatrixXd g(a, a);
    for (Eigen::Index i = 0; i < a; ++i) {
        for (Eigen::Index j = 0; j < a; ++j) {
            g(i, j) = stats.gram(static_cast<Eigen::Index>(subset.active[static_cast<std::size_t>(i)]),
                                 static_cast<Eigen::Index>(subset.active[static_cast<std::size_t>(j)]));
        }
    }
    return g;
}

Eigen::VectorXd active_cross(const StackedStats& stats, const SubsetModel& subset)
{
    Eigen::VectorXd c(static_cast<Eigen::Index>(subset.active.size()));
    for (std::size_t i = 0; i < subset.active.size(); ++i) {
        c(static_cast<Eigen::Index>(i)) = stats.cross(static_cast<Eigen::Index>(subset.active[i]));
    }
    return c;
}

Eigen::VectorXd active_mean(const Eigen::MatrixXd& design, const SubsetModel& subset, const Eigen::VectorXd& beta)
{
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(design.rows());
    for (std::size_t i = 0; i < subset.active.size(); ++i) {
        mean += beta(static_cast<Eigen::Index>(i)) * design.col(static_cast<Eigen::Index>(subset.active[i]));
    }
    return mean;
}

void validate_subset(const StackedStats& stats, const SubsetModel& subset)
{
    if (subset.active.empty() || subset.active.front() != 0) {
        throw std::invalid_argument("active set must contain the intercept column 0");
    }
    for (std::size_t i = 1; i < subset.active.size(); ++i) {
        if (subset.active[i] <= subset.active[i - 1]) {
            throw std::invalid_argument("active set must be sorted and unique");
        }
    }
    if (subset.active.back() >= static_cast<std::size_t>(stats.gram.cols())) {
        throw std::invalid_argument("active column out of range");
    }
}

struct BlockSampler
{
    std::shared_ptr<const Eigen::MatrixXd> design;
    Eigen::VectorXd mean;
    double sigma = 0.0;
};

Eigen::VectorXd draw_block(const Eigen::VectorXd& mean, double sigma, RngStream& stream)
{
    Eigen::VectorXd block = mean;
    if (sigma > 0.0) {
        for (Eigen::Index i = 0; i < block.size(); ++i) {
            block(i) += sigma * stream.standard_normal();
        }
    }
    return block;
}

double sigma_hat(const OlsFit& fit, const StackedStats& stats)
{
    if (fit.perfect_fit) {
        return 0.0;
    }
    return std::sqrt(fit.rss / static_cast<double>(stats.n_rows() * stats.n_blocks()));
}

} // namespace

ModelId SubsetModel::bitmask() const
{
    ModelId mask = 0;
    for (std::size_t column : active) {
        if (column >= 64) {
            throw std::out_of_range("bitmask supports at most 64 columns");
        }
        mask |= ModelId{1} << column;
    }
    return mask;
}

SubsetModel SubsetModel::with(std::size_t column) const
{
    SubsetModel out = *this;
    out.active.insert(std::upper_bound(out.active.begin(), out.active.end(), column), column);
    return out;
}

StackedStats StackedStats::from_block(const Eigen::MatrixXd& design, const Eigen::VectorXd& block)
{
    if (design.rows() != block.size()) {
        throw std::invalid_argument("outcome block length does not match the design");
    }
    StackedStats stats;
    stats.k = 0;
    stats.sum_Y = block;
    stats.sum_YtY = block.squaredNorm();
    stats.gram = design.transpose() * design;
    stats.cross = design.transpose() * block;
    return stats;
}

StackedStats StackedStats::from_data(const RegressionData& data)
{
    if (data.outcome_blocks.empty()) {
        throw std::invalid_argument("regression data has no outcome block");
    }
    StackedStats stats = from_block(data.design, data.outcome_blocks.front());
    for (std::size_t l = 1; l < data.outcome_blocks.size(); ++l) {
        stats.add_block(data.design, data.outcome_blocks[l]);
    }
    return stats;
}

void StackedStats::add_block(const Eigen::MatrixXd& design, const Eigen::VectorXd& block)
{
    if (block.size() != sum_Y.size()) {
        throw std::invalid_argument("outcome block length does not match the design");
    }
    ++k;
    sum_Y += block;
    sum_YtY += block.squaredNorm();
    cross += design.transpose() * block;
}

OlsFit stacked_ols(const StackedStats& stats, const SubsetModel& subset)
{
    validate_subset(stats, subset);
    const Eigen::MatrixXd g = active_gram(stats, subset);
    const Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success || !(llt.rcond() >= kMinReciprocalCondition)) {
        throw std::domain_error("design columns " + describe_columns(subset.active) +
                                " are rank deficient or badly conditioned");
    }
    const Eigen::VectorXd c = active_cross(stats, subset);
    const double blocks = static_cast<double>(stats.n_blocks());
    OlsFit fit;
    fit.beta = llt.solve(c) / blocks;
    // Sum over blocks of |Y_l - X_A beta|^2 = sum Y'Y - c' G^{-1} c / (k+1).
    fit.rss = stats.sum_YtY - c.dot(fit.beta);
    if (fit.rss <= kPerfectFitTolerance * stats.sum_YtY) {
        fit.rss = 0.0;
        fit.perfect_fit = true;
    }
    return fit;
}

double stacked_criterion(const OlsFit& fit, const SubsetModel& subset, std::size_t n_total, SelectionRule rule)
{
    if (fit.perfect_fit) {
        return -std::numeric_limits<double>::infinity();
    }
    const auto m = static_cast<double>(n_total);
    const auto d = static_cast<double>(subset.dimension());
    const double penalty = rule == SelectionRule::Bic ? std::log(m) : 2.0;
    return m * std::log(fit.rss / m) + d * penalty;
}

StackedBic stacked_bic(const StackedStats& stats, const SubsetModel& subset, std::size_t n)
{
    if (n != stats.n_rows()) {
        throw std::invalid_argument("block length does not match the statistics");
    }
    const OlsFit fit = stacked_ols(stats, subset);
    return {stacked_criterion(fit, subset, n * stats.n_blocks(), SelectionRule::Bic), fit.perfect_fit};
}

SubsetModel forward_stepwise(const StackedStats& stats, std::span<const std::size_t> candidate_columns,
                             SelectionRule rule, std::size_t n)
{
    if (candidate_columns.empty()) {
        throw std::invalid_argument("forward_stepwise needs at least one candidate column");
    }
    const std::size_t n_total = n * stats.n_blocks();
    SubsetModel current = SubsetModel::intercept_only();
    double current_value = stacked_criterion(stacked_ols(stats, current), current, n_total, rule);

    std::vector<std::size_t> remaining(candidate_columns.begin(), candidate_columns.end());
    std::sort(remaining.begin(), remaining.end());
    remaining.erase(std::unique(remaining.begin(), remaining.end()), remaining.end());
    remaining.erase(std::remove(remaining.begin(), remaining.end(), std::size_t{0}), remaining.end());

    while (!remaining.empty()) {
        std::size_t best_position = remaining.size();
        double best_value = current_value;
        for (std::size_t i = 0; i < remaining.size(); ++i) {
            const SubsetModel trial = current.with(remaining[i]);
            OlsFit fit;
            try {
                fit = stacked_ols(stats, trial);
            } catch (const std::domain_error&) {
                continue;
            }
            const double value = stacked_criterion(fit, trial, n_total, rule);
            if (value < best_value) {
                best_value = value;
                best_position = i;
            }
        }
        if (best_position == remaining.size()) {
            break;
        }
        current = current.with(remaining[best_position]);
        current_value = best_value;
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best_position));
    }
    return current;
}

Eigen::VectorXd sample_outcome_block(const Eigen::MatrixXd& design, const StackedStats& stats,
                                     const SubsetModel& subset, RngStream& stream)
{
    const OlsFit fit = stacked_ols(stats, subset);
    return draw_block(active_mean(design, subset, fit.beta), sigma_hat(fit, stats), stream);
}

ResamplingProblem<StackedRegression, Eigen::VectorXd> variable_selection_problem(std::size_t n_columns,
                                                                                 SelectionRule rule)
{
    if (n_columns < 2) {
        throw std::invalid_argument("variable selection needs at least one covariate");
    }
    std::vector<std::size_t> candidates(n_columns - 1);
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        candidates[j] = j + 1;
    }

    ResamplingProblem<StackedRegression, Eigen::VectorXd> problem;
    problem.models.push_back({
        .label = rule == SelectionRule::Bic ? "stepwise-BIC" : "stepwise-AIC",
        .fit =
            [candidates, rule](const StackedRegression& data) {
                const std::size_t n = data.stats.n_rows();
                const SubsetModel subset = forward_stepwise(data.stats, candidates, rule, n);
                const OlsFit fit = stacked_ols(data.stats, subset);
                const auto m = static_cast<double>(data.size());
                FittedModel fitted;
                fitted.model_id = subset.bitmask();
                fitted.dimension = subset.dimension();
                fitted.max_log_likelihood = fit.perfect_fit ? std::numeric_limits<double>::infinity()
                                                            : -0.5 * m * std::log(fit.rss / m);
                fitted.parameter_norm = fit.beta.norm();
                fitted.sampler_state =
                    BlockSampler{data.design, active_mean(*data.design, subset, fit.beta), sigma_hat(fit, data.stats)};
                return fitted;
            },
        .sample_next =
            [](const FittedModel& fitted, RngStream& stream) {
                const auto& sampler = std::any_cast<const BlockSampler&>(fitted.sampler_state);
                return draw_block(sampler.mean, sampler.sigma, stream);
            },
    });
    problem.criterion = rule == SelectionRule::Bic ? Criterion::bic() : Criterion::aic();
    problem.append = [](StackedRegression& data, Eigen::VectorXd&& block) {
        data.stats.add_block(*data.design, block);
    };
    problem.summary = [](const StackedRegression&, const FittedModel& fitted) {
        return static_cast<double>(fitted.dimension - 2);
    };
    return problem;
}

InclusionFrequencies variable_selection_resample(const RegressionData& data, const VariableSelectionConfig& config,
                                                 SelectionRule rule)
{
    if (data.outcome_blocks.size() != 1) {
        throw std::invalid_argument("variable selection starts from exactly one observed block");
    }
    const auto n = static_cast<std::size_t>(data.design.rows());
    const auto p = static_cast<std::size_t>(data.design.cols());
    if (p > 64) {
        throw std::invalid_argument("variable selection supports at most 64 design columns");
    }
    StackedRegression observed{std::make_shared<const Eigen::MatrixXd>(data.design), StackedStats::from_data(data)};

    ResamplingConfig resampling;
    resampling.n_observed = n;
    resampling.n_final = n * (config.n_blocks + 1);
    resampling.n_trials = config.n_trials;
    resampling.master_seed = config.master_seed;
    resampling.trace_thinning = 1;
    resampling.workers = config.workers;

    InclusionFrequencies out;
    out.run = run_resampling(variable_selection_problem(p, rule), observed, resampling);
    const PosteriorModelProbabilities& posterior = out.run.posterior;
    std::vector<std::size_t> included(p, 0);
    std::size_t total_size = 0;
    for (const auto& [mask, count] : posterior.counts) {
        for (std::size_t j = 0; j < p; ++j) {
            if ((mask >> j) & 1u) {
                included[j] += count;
                total_size += j > 0 ? count : 0;
            }
        }
    }
    const auto completed = static_cast<double>(posterior.n_trials);
    out.inclusion.assign(p, 0.0);
    if (posterior.n_trials > 0) {
        for (std::size_t j = 0; j < p; ++j) {
            out.inclusion[j] = static_cast<double>(included[j]) / completed;
        }
        out.mean_model_size = static_cast<double>(total_size) / completed;
    }
    return out;
}

RegressionData sparse_linear_data(std::uint64_t seed, std::size_t n, std::size_t n_covariates, std::size_t n_true)
{
    if (n_true > n_covariates) {
        throw std::invalid_argument("more true covariates than covariates");
    }
    RngStream stream = derive_trial_stream(seed, 0x7661727365);
    const auto rows = static_cast<Eigen::Index>(n);
    RegressionData data;
    data.design.resize(rows, static_cast<Eigen::Index>(n_covariates + 1));
    data.design.col(0).setOnes();
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 1; j <= static_cast<Eigen::Index>(n_covariates); ++j) {
            data.design(i, j) = stream.standard_normal();
        }
    }
    Eigen::VectorXd y(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        y(i) = data.design.row(i).segment(1, static_cast<Eigen::Index>(n_true)).sum() + stream.standard_normal();
    }
    data.outcome_blocks.push_back(std::move(y));
    return data;
}

RegressionData orthonormal_data(std::uint64_t seed, std::size_t n, std::size_t n_covariates,
                                std::span<const std::size_t> true_columns, std::span<const double> coefficients,
                                double noise_sd)
{
    if (n <= n_covariates + 1) {
        throw std::invalid_argument("orthonormal design needs more rows than columns");
    }
    if (true_columns.size() != coefficients.size()) {
        throw std::invalid_argument("one coefficient per true column");
    }
    RngStream stream = derive_trial_stream(seed, 0x6F7274686F);
    const auto rows = static_cast<Eigen::Index>(n);
    const auto cols = static_cast<Eigen::Index>(n_covariates);
    Eigen::MatrixXd raw(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            raw(i, j) = stream.standard_normal();
        }
    }
    raw.rowwise() -= raw.colwise().mean();
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);

    RegressionData data;
    data.design.resize(rows, cols + 1);
    data.design.col(0).setOnes();
    data.design.rightCols(cols) = q;
    Eigen::VectorXd y(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        y(i) = noise_sd * stream.standard_normal();
    }
    for (std::size_t t = 0; t < true_columns.size(); ++t) {
        if (true_columns[t] == 0 || true_columns[t] > n_covariates) {
            throw std::invalid_argument("true column out of range");
        }
        y += coefficients[t] * data.design.col(static_cast<Eigen::Index>(true_columns[t]));
    }
    data.outcome_blocks.push_back(std::move(y));
    return data;
}

RegressionData read_regression_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) {
        throw std::invalid_argument("regression CSV is empty");
    }
    const auto width = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    if (width < 2) {
        throw std::invalid_argument("regression CSV needs at least one covariate and an outcome");
    }
    std::vector<std::vector<double>> rows;
    std::size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<double> row;
        std::istringstream fields(line);
        std::string field;
        while (std::getline(fields, field, ',')) {
            std::size_t used = 0;
            double value = 0.0;
            try {
                value = std::stod(field, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0) {
                throw std::invalid_argument("line " + std::to_string(line_number) + ": not a number: " + field);
            }
            row.push_back(value);
        }
        if (row.size() != width) {
            throw std::invalid_argument("line " + std::to_string(line_number) + ": expected " +
                                        std::to_string(width) + " fields");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw std::invalid_argument("regression CSV has no data rows");
    }
    RegressionData data;
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(width);
    data.design.resize(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        data.design(i, 0) = 1.0;
        for (Eigen::Index j = 1; j < p; ++j) {
            data.design(i, j) = row[static_cast<std::size_t>(j - 1)];
        }
        y(i) = row.back();
    }
    data.outcome_blocks.push_back(std::move(y));
    return data;
}

} // namespace predres
