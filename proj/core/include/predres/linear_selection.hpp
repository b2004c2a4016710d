// SPDX-License-Identifier: Apache-2.0
//
// Variable selection for the linear model by predictive resampling.
//
// The covariate rows are copied once per imputed outcome block, so the
// stacked design never needs to be formed: its Gram matrix is (k+1) X'X and
// every fit works from the running sums in StackedStats.
#pragma once

#include "predres/engine.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <istream>
#include <memory>
#include <span>
#include <vector>

namespace predres {

struct RegressionData
{
    /// n x p, column 0 is the constant 1.
    Eigen::MatrixXd design;
    /// Observed outcome block first, then any imputed blocks.
    std::vector<Eigen::VectorXd> outcome_blocks;
};

struct SubsetModel
{
    /// Sorted column indices; always contains 0 (the intercept).
    std::vector<std::size_t> active;

    /// Coefficients plus the noise variance.
    std::size_t dimension() const { return active.size() + 1; }
    /// Bit j is set when column j is active (p <= 64).
    ModelId bitmask() const;

    static SubsetModel intercept_only() { return {{0}}; }
    /// `active` with `column` inserted in order.
    SubsetModel with(std::size_t column) const;
};

struct StackedStats
{
    /// Number of blocks minus one.
    std::size_t k = 0;
    Eigen::VectorXd sum_Y;
    double sum_YtY = 0.0;
    Eigen::MatrixXd gram;
    Eigen::VectorXd cross;

    /// Statistics of the observed block alone.
    static StackedStats from_block(const Eigen::MatrixXd& design, const Eigen::VectorXd& block);
    static StackedStats from_data(const RegressionData& data);
    void add_block(const Eigen::MatrixXd& design, const Eigen::VectorXd& block);

    std::size_t n_rows() const { return static_cast<std::size_t>(sum_Y.size()); }
    std::size_t n_blocks() const { return k + 1; }
};

/// Reciprocal condition number below which an active Gram submatrix is
/// treated as singular.
inline constexpr double kMinReciprocalCondition = 1e-12;

struct OlsFit
{
    Eigen::VectorXd beta;
    /// Residual sum of squares over all k+1 blocks.
    double rss = 0.0;
    /// RSS is zero up to rounding.
    bool perfect_fit = false;
};

/// beta = (X_A'X_A)^{-1} X_A' sum_Y / (k+1) by Cholesky. Throws
/// std::domain_error naming the active columns when the Gram submatrix is
/// singular or badly conditioned.
OlsFit stacked_ols(const StackedStats& stats, const SubsetModel& subset);

struct StackedBic
{
    /// M log(RSS/M) + d log M with M = n(k+1); -inf for a perfect fit.
    double value = 0.0;
    bool perfect_fit = false;
};

StackedBic stacked_bic(const StackedStats& stats, const SubsetModel& subset, std::size_t n);

enum class SelectionRule
{
    Bic,
    Aic,
};

/// Lower is better; -inf for a perfect fit.
double stacked_criterion(const OlsFit& fit, const SubsetModel& subset, std::size_t n_total, SelectionRule rule);

/// Greedy forward search from the intercept-only model. Each round adds the
/// candidate with the lowest criterion, ties to the lowest column, and the
/// search stops when no addition strictly improves. Candidates whose Gram
/// submatrix fails the condition check are skipped.
SubsetModel forward_stepwise(const StackedStats& stats, std::span<const std::size_t> candidate_columns,
                             SelectionRule rule, std::size_t n);

/// X_A beta + sigma eps with sigma^2 = RSS / (n(k+1)).
Eigen::VectorXd sample_outcome_block(const Eigen::MatrixXd& design, const StackedStats& stats,
                                     const SubsetModel& subset, RngStream& stream);

/// Working data of one trial: the shared design and the running sums.
struct StackedRegression
{
    std::shared_ptr<const Eigen::MatrixXd> design;
    StackedStats stats;

    /// Total stacked rows n(k+1).
    std::size_t size() const { return stats.n_rows() * stats.n_blocks(); }
};

/// One candidate that runs forward stepwise on every fit; the model id is
/// the active-column bitmask.
ResamplingProblem<StackedRegression, Eigen::VectorXd> variable_selection_problem(std::size_t n_columns,
                                                                                 SelectionRule rule);

struct VariableSelectionConfig
{
    std::size_t n_blocks = 10;
    std::size_t n_trials = 100;
    std::uint64_t master_seed = 0;
    std::size_t workers = 1;
};

struct InclusionFrequencies
{
    /// Per design column (index 0 is the intercept, always 1).
    std::vector<double> inclusion;
    /// Mean number of selected covariates, intercept excluded.
    double mean_model_size = 0.0;
    ResamplingResult run;
};

/// Requires exactly one observed block.
InclusionFrequencies variable_selection_resample(const RegressionData& data, const VariableSelectionConfig& config,
                                                 SelectionRule rule);

/// Intercept plus `n_covariates` standard normal columns; the outcome is the
/// sum of the first `n_true` covariates plus standard normal noise.
RegressionData sparse_linear_data(std::uint64_t seed, std::size_t n, std::size_t n_covariates = 20,
                                  std::size_t n_true = 5);

/// Intercept plus `n_covariates` orthonormal columns orthogonal to it. The
/// outcome is sum over `true_columns` of coefficient * column plus N(0,
/// noise_sd^2). Requires n > n_covariates + 1.
RegressionData orthonormal_data(std::uint64_t seed, std::size_t n, std::size_t n_covariates,
                                std::span<const std::size_t> true_columns, std::span<const double> coefficients,
                                double noise_sd);

/// CSV with a header row; every column but the last is a covariate and the
/// last is the outcome. An intercept column is prepended.
RegressionData read_regression_csv(std::istream& in);

} // namespace predres
