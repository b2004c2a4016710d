#include "predres/linear_selection.hpp"

#include "stacked_oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

using namespace predres;

namespace {

RegressionData random_instance(RngStream& stream, Eigen::Index n, Eigen::Index p, std::size_t blocks)
{
    RegressionData data;
    data.design.resize(n, p);
    data.design.col(0).setOnes();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 1; j < p; ++j) {
            data.design(i, j) = stream.standard_normal();
        }
    }
    for (std::size_t l = 0; l < blocks; ++l) {
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            y(i) = stream.standard_normal() + 0.5 * data.design(i, p - 1);
        }
        data.outcome_blocks.push_back(y);
    }
    return data;
}

std::vector<std::size_t> all_columns(std::size_t p)
{
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < p; ++j) {
        out.push_back(j);
    }
    return out;
}

std::vector<std::size_t> covariates(std::size_t p)
{
    std::vector<std::size_t> out;
    for (std::size_t j = 1; j < p; ++j) {
        out.push_back(j);
    }
    return out;
}

} // namespace

TEST_CASE("SubsetModel")
{
    const SubsetModel base = SubsetModel::intercept_only();
    CHECK(base.dimension() == 2);
    CHECK(base.bitmask() == 1);
    const SubsetModel grown = base.with(5).with(2);
    CHECK(grown.active == std::vector<std::size_t>{0, 2, 5});
    CHECK(grown.dimension() == 4);
    CHECK(grown.bitmask() == 0b100101);
}

TEST_CASE("intercept-only single block")
{
    RegressionData data;
    data.design = Eigen::MatrixXd::Ones(3, 1);
    data.outcome_blocks.push_back(Eigen::Vector3d(1, 2, 3));
    const OlsFit fit = stacked_ols(StackedStats::from_data(data), SubsetModel::intercept_only());
    CHECK(std::abs(fit.beta(0) - 2.0) < 1e-14);
    CHECK(std::abs(fit.rss - 2.0) < 1e-12);
    CHECK_FALSE(fit.perfect_fit);
}

TEST_CASE("replicated blocks keep beta and scale RSS")
{
    RngStream stream(1);
    const RegressionData one = random_instance(stream, 8, 4, 1);
    const SubsetModel full{all_columns(4)};
    const OlsFit base = stacked_ols(StackedStats::from_data(one), full);
    for (std::size_t copies = 2; copies <= 5; ++copies) {
        RegressionData many = one;
        for (std::size_t c = 1; c < copies; ++c) {
            many.outcome_blocks.push_back(one.outcome_blocks[0]);
        }
        const OlsFit fit = stacked_ols(StackedStats::from_data(many), full);
        CHECK((fit.beta - base.beta).norm() < 1e-12 * (1.0 + base.beta.norm()));
        CHECK(std::abs(fit.rss - double(copies) * base.rss) < 1e-9 * fit.rss);
    }
}

TEST_CASE("sufficient statistics match the explicit stacked regression")
{
    RngStream stream(2);
    SUBCASE("5 x 3 design, two blocks")
    {
        const RegressionData data = random_instance(stream, 5, 3, 2);
        const OlsFit fit = stacked_ols(StackedStats::from_data(data), SubsetModel{all_columns(3)});
        const oracle::Fit expected = oracle::ols(data, all_columns(3));
        CHECK((fit.beta - expected.beta).norm() < 1e-9);
        CHECK(std::abs(fit.rss - expected.rss) < 1e-9);
    }
    SUBCASE("random small instances")
    {
        for (int trial = 0; trial < 300; ++trial) {
            const auto p = static_cast<Eigen::Index>(2 + stream.uniform_index(3));
            const auto n = static_cast<Eigen::Index>(p + 1 + stream.uniform_index(6 - p));
            const std::size_t blocks = 1 + stream.uniform_index(4);
            const RegressionData data = random_instance(stream, n, p, blocks);
            const StackedStats stats = StackedStats::from_data(data);
            for (std::size_t mask = 0; mask < (std::size_t{1} << (p - 1)); ++mask) {
                std::vector<std::size_t> active{0};
                for (Eigen::Index j = 1; j < p; ++j) {
                    if ((mask >> (j - 1)) & 1u) {
                        active.push_back(std::size_t(j));
                    }
                }
                const OlsFit fit = stacked_ols(stats, SubsetModel{active});
                const oracle::Fit expected = oracle::ols(data, active);
                CHECK((fit.beta - expected.beta).norm() <= 1e-8 * (1.0 + expected.beta.norm()));
                CHECK(std::abs(fit.rss - expected.rss) <= 1e-8 * (1.0 + expected.rss));
                const StackedBic bic = stacked_bic(stats, SubsetModel{active}, std::size_t(n));
                const double expected_bic = oracle::criterion(data, active, std::log(double(n * Eigen::Index(blocks))));
                CHECK(std::abs(bic.value - expected_bic) <= 1e-8 * (1.0 + std::abs(expected_bic)));
            }
        }
    }
}

TEST_CASE("hat matrix of two stacked copies is half the block replication")
{
    RngStream stream(3);
    const RegressionData data = random_instance(stream, 6, 3, 1);
    const Eigen::MatrixXd& x = data.design;
    const Eigen::MatrixXd h = x * (x.transpose() * x).inverse() * x.transpose();
    Eigen::MatrixXd x2(12, 3);
    x2 << x, x;
    const Eigen::MatrixXd h2 = x2 * (x2.transpose() * x2).inverse() * x2.transpose();
    Eigen::MatrixXd replicated(12, 12);
    replicated << h, h, h, h;
    CHECK((h2 - 0.5 * replicated).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("incremental statistics match recomputation")
{
    RngStream stream(4);
    RegressionData data = random_instance(stream, 7, 4, 1);
    StackedStats running = StackedStats::from_data(data);
    for (int l = 0; l < 6; ++l) {
        Eigen::VectorXd y(7);
        for (Eigen::Index i = 0; i < 7; ++i) {
            y(i) = 3.0 * stream.standard_normal();
        }
        running.add_block(data.design, y);
        data.outcome_blocks.push_back(y);
        const StackedStats fresh = StackedStats::from_data(data);
        CHECK(running.k == fresh.k);
        CHECK(running.n_blocks() == data.outcome_blocks.size());
        CHECK((running.sum_Y - fresh.sum_Y).norm() <= 1e-9 * fresh.sum_Y.norm());
        CHECK(std::abs(running.sum_YtY - fresh.sum_YtY) <= 1e-9 * fresh.sum_YtY);
        CHECK((running.cross - fresh.cross).norm() <= 1e-9 * fresh.cross.norm());
        CHECK((running.gram - fresh.gram).norm() == 0.0);
    }
}

TEST_CASE("adding a column never increases RSS")
{
    RngStream stream(5);
    for (int trial = 0; trial < 50; ++trial) {
        const RegressionData data = random_instance(stream, 30, 6, 1 + stream.uniform_index(3));
        const StackedStats stats = StackedStats::from_data(data);
        SubsetModel subset = SubsetModel::intercept_only();
        double previous = stacked_ols(stats, subset).rss;
        for (std::size_t j = 1; j < 6; ++j) {
            subset = subset.with(j);
            const double rss = stacked_ols(stats, subset).rss;
            CHECK(rss <= previous * (1 + 1e-12));
            previous = rss;
        }
    }
}

TEST_CASE("rank deficiency names the columns")
{
    RegressionData data;
    data.design.resize(5, 3);
    data.design.col(0).setOnes();
    data.design.col(1) << 1, 2, 3, 4, 5;
    data.design.col(2) = 2.0 * data.design.col(1);
    data.outcome_blocks.push_back(Eigen::VectorXd::LinSpaced(5, 0, 1));
    const StackedStats stats = StackedStats::from_data(data);
    try {
        stacked_ols(stats, SubsetModel{{0, 1, 2}});
        FAIL("expected a rank error");
    } catch (const std::domain_error& error) {
        CHECK(std::string(error.what()).find("{0,1,2}") != std::string::npos);
    }
    const std::vector<std::size_t> cols{1, 2};
    const SubsetModel chosen = forward_stepwise(stats, cols, SelectionRule::Bic, 5);
    CHECK(chosen.active.size() <= 2);
}

TEST_CASE("perfect fits")
{
    RegressionData data;
    data.design.resize(6, 2);
    data.design.col(0).setOnes();
    data.design.col(1) << 1, 2, 3, 4, 5, 6;
    data.outcome_blocks.push_back(3.0 * data.design.col(1));
    const StackedStats stats = StackedStats::from_data(data);
    const StackedBic bic = stacked_bic(stats, SubsetModel{{0, 1}}, 6);
    CHECK(bic.perfect_fit);
    CHECK(bic.value == -std::numeric_limits<double>::infinity());
    CHECK_FALSE(stacked_bic(stats, SubsetModel::intercept_only(), 6).perfect_fit);

    RngStream a(9);
    RngStream b(10);
    const Eigen::VectorXd block_a = sample_outcome_block(data.design, stats, SubsetModel{{0, 1}}, a);
    const Eigen::VectorXd block_b = sample_outcome_block(data.design, stats, SubsetModel{{0, 1}}, b);
    CHECK((block_a - 3.0 * data.design.col(1)).norm() < 1e-10);
    CHECK(block_a == block_b);
}

TEST_CASE("sample_outcome_block")
{
    RngStream stream(6);
    const RegressionData data = random_instance(stream, 10, 3, 2);
    const StackedStats stats = StackedStats::from_data(data);
    const SubsetModel subset{all_columns(3)};
    const OlsFit fit = stacked_ols(stats, subset);
    const Eigen::VectorXd mean = data.design * fit.beta;
    const double sigma = std::sqrt(fit.rss / (10.0 * 2.0));

    RngStream s1(11);
    RngStream s2(11);
    CHECK(sample_outcome_block(data.design, stats, subset, s1) == sample_outcome_block(data.design, stats, subset, s2));

    Eigen::VectorXd total = Eigen::VectorXd::Zero(10);
    constexpr int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        total += sample_outcome_block(data.design, stats, subset, s1);
    }
    CHECK(((total / draws) - mean).cwiseAbs().maxCoeff() < 4 * sigma / 100);
}

TEST_CASE("forward stepwise on an orthonormal design")
{
    const std::vector<std::size_t> truth{3};
    const std::vector<double> coef{2.0};
    const RegressionData data = orthonormal_data(1, 40, 5, truth, coef, 1e-3);
    const StackedStats stats = StackedStats::from_data(data);
    const SubsetModel chosen = forward_stepwise(stats, covariates(6), SelectionRule::Bic, 40);
    CHECK(chosen.active == std::vector<std::size_t>{0, 3});
    CHECK((data.design.rightCols(5).transpose() * data.design.rightCols(5) - Eigen::MatrixXd::Identity(5, 5))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    CHECK(data.design.rightCols(5).colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forward stepwise agrees with exhaustive search on orthonormal designs")
{
    RngStream stream(7);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t p = 2 + stream.uniform_index(5);
        const std::size_t n = p + 5 + stream.uniform_index(30);
        std::vector<std::size_t> truth;
        std::vector<double> coef;
        for (std::size_t j = 1; j < p; ++j) {
            if (stream.uniform() < 0.5) {
                truth.push_back(j);
                coef.push_back(4.0 * (stream.uniform() - 0.5));
            }
        }
        const RegressionData data = orthonormal_data(100 + trial, n, p - 1, truth, coef, 0.3);
        const StackedStats stats = StackedStats::from_data(data);
        for (SelectionRule rule : {SelectionRule::Bic, SelectionRule::Aic}) {
            const double penalty = rule == SelectionRule::Bic ? std::log(double(n)) : 2.0;
            const SubsetModel chosen = forward_stepwise(stats, covariates(p), rule, n);
            CHECK(chosen.active == oracle::best_subset(data, penalty));
        }
    }
}

TEST_CASE("stepwise stops only when no single addition improves")
{
    RngStream stream(8);
    for (int trial = 0; trial < 30; ++trial) {
        const RegressionData data = random_instance(stream, 25, 7, 1);
        const StackedStats stats = StackedStats::from_data(data);
        const SubsetModel chosen = forward_stepwise(stats, covariates(7), SelectionRule::Bic, 25);
        const double value = stacked_criterion(stacked_ols(stats, chosen), chosen, 25, SelectionRule::Bic);
        const SubsetModel null_model = SubsetModel::intercept_only();
        CHECK(value <= stacked_criterion(stacked_ols(stats, null_model), null_model, 25, SelectionRule::Bic));
        for (std::size_t j = 1; j < 7; ++j) {
            if (std::find(chosen.active.begin(), chosen.active.end(), j) != chosen.active.end()) {
                continue;
            }
            const SubsetModel bigger = chosen.with(j);
            CHECK(stacked_criterion(stacked_ols(stats, bigger), bigger, 25, SelectionRule::Bic) >= value);
        }
    }
}

TEST_CASE("pure noise outcomes usually select the intercept alone")
{
    // Each noise column enters with probability P(chi2_1 > log 200) = 0.021,
    // so the null model is chosen for about 0.979^20 = 0.65 of the seeds.
    int empty = 0;
    constexpr int seeds = 200;
    for (int s = 1; s <= seeds; ++s) {
        const RegressionData data = sparse_linear_data(s, 200, 20, 0);
        const SubsetModel chosen =
            forward_stepwise(StackedStats::from_data(data), covariates(21), SelectionRule::Bic, 200);
        empty += chosen.active.size() == 1;
    }
    CHECK(double(empty) / seeds >= 0.55);
    CHECK(double(empty) / seeds <= 0.75);
}

TEST_CASE("variable selection resampling")
{
    const RegressionData data = sparse_linear_data(3, 40, 6, 2);
    SUBCASE("a single trial gives 0/1 frequencies")
    {
        const InclusionFrequencies freq =
            variable_selection_resample(data, {.n_blocks = 3, .n_trials = 1, .master_seed = 1}, SelectionRule::Bic);
        CHECK(freq.inclusion[0] == 1.0);
        for (double f : freq.inclusion) {
            CHECK((f == 0.0 || f == 1.0));
        }
    }
    SUBCASE("frequencies are consistent with the final models and worker count")
    {
        VariableSelectionConfig config{.n_blocks = 4, .n_trials = 20, .master_seed = 5};
        const InclusionFrequencies a = variable_selection_resample(data, config, SelectionRule::Aic);
        config.workers = 3;
        const InclusionFrequencies b = variable_selection_resample(data, config, SelectionRule::Aic);
        CHECK(a.inclusion == b.inclusion);
        CHECK(a.mean_model_size == b.mean_model_size);
        double size = 0.0;
        for (std::size_t j = 1; j < a.inclusion.size(); ++j) {
            size += a.inclusion[j];
        }
        CHECK(std::abs(size - a.mean_model_size) < 1e-12);
        for (double f : a.inclusion) {
            CHECK(f * 20.0 == std::round(f * 20.0));
        }
        CHECK(a.inclusion[0] == 1.0);
        for (const TrialTrace& t : a.run.traces) {
            CHECK(t.selected_path.size() == 5);
            CHECK(t.steps.back() == 4);
            CHECK((t.final_model & 1u) == 1u);
        }
    }
    SUBCASE("only one observed block is accepted")
    {
        RegressionData two = data;
        two.outcome_blocks.push_back(data.outcome_blocks[0]);
        CHECK_THROWS_AS(variable_selection_resample(two, {}, SelectionRule::Bic), std::invalid_argument);
    }
}

TEST_CASE("fewer rows than columns saturates the observed fit")
{
    // Greedy search reaches a perfect fit, the imputed blocks carry no noise and every trial agrees.
    const RegressionData data = sparse_linear_data(1, 10);
    const InclusionFrequencies freq =
        variable_selection_resample(data, {.n_blocks = 10, .n_trials = 20, .master_seed = 1}, SelectionRule::Bic);
    CHECK(freq.mean_model_size == 9.0);
    for (double f : freq.inclusion) {
        CHECK((f == 0.0 || f == 1.0));
    }
}

TEST_CASE("true columns are found more often as n grows")
{
    std::vector<double> found;
    for (std::size_t n : {10, 20, 50, 100}) {
        const InclusionFrequencies freq = variable_selection_resample(
            sparse_linear_data(1, n), {.n_blocks = 10, .n_trials = 100, .master_seed = 1}, SelectionRule::Bic);
        double total = 0.0;
        for (std::size_t j = 1; j <= 5; ++j) {
            total += freq.inclusion[j];
        }
        found.push_back(total);
    }
    std::size_t inversions = 0;
    for (std::size_t i = 1; i < found.size(); ++i) {
        if (found[i] < found[i - 1]) {
            ++inversions;
            CHECK(found[i - 1] - found[i] <= 0.3);
        }
    }
    CHECK(inversions <= 1);
    CHECK(found.back() == 5.0);
}

TEST_CASE("regression CSV")
{
    std::istringstream in("x1,x2,y\n1,2,3\n4,5,6\r\n\n7,8,10\n");
    const RegressionData data = read_regression_csv(in);
    CHECK(data.design.rows() == 3);
    CHECK(data.design.cols() == 3);
    CHECK(data.design(0, 0) == 1.0);
    CHECK(data.design(2, 2) == 8.0);
    CHECK(data.outcome_blocks[0](2) == 10.0);

    std::istringstream bad("x,y\n1,2\n3\n");
    CHECK_THROWS_WITH_AS(read_regression_csv(bad), doctest::Contains("line 3"), std::invalid_argument);
    std::istringstream text("x,y\n1,abc\n");
    CHECK_THROWS_AS(read_regression_csv(text), std::invalid_argument);
}
