#include <cmath>

#include <gtest/gtest.h>

#include "dbn/dbn_state.hpp"
#include "dbn/errors.hpp"

namespace dbn {
namespace {

TEST(AlphaSchedule, PowerValues) {
    const auto harmonic = AlphaSchedule::power(1.0);
    EXPECT_EQ(alpha_at(harmonic, 1), 1.0);
    EXPECT_EQ(alpha_at(harmonic, 4), 0.25);
    EXPECT_DOUBLE_EQ(alpha_at(AlphaSchedule::power(2.5), 4), 1.0 / 32.0);
    EXPECT_EQ(alpha_at(AlphaSchedule::power(0.0), 9), 1.0);
    EXPECT_THROW(alpha_at(harmonic, 0), ParameterError);
}

TEST(AlphaSchedule, ConstantAndTable) {
    EXPECT_EQ(alpha_at(AlphaSchedule::constant(0.3), 17), 0.3);
    const auto table = AlphaSchedule::custom({1.0, 0.5, 0.2});
    EXPECT_EQ(alpha_at(table, 1), 1.0);
    EXPECT_EQ(alpha_at(table, 3), 0.2);
    EXPECT_EQ(alpha_at(table, 100), 0.2);
    EXPECT_THROW(AlphaSchedule::constant(1.5), ParameterError);
    EXPECT_THROW(AlphaSchedule::constant(-0.1), ParameterError);
    EXPECT_THROW(AlphaSchedule::power(-1.0), ParameterError);
    EXPECT_THROW(AlphaSchedule::custom({}), ParameterError);
    EXPECT_THROW(AlphaSchedule::custom({0.5, 2.0}), ParameterError);
}

TEST(AlphaSchedule, ParseAndLabelRoundTrip) {
    for (const char* text : {"0.25", "1/m", "1/m^2", "1/m^2.5", "0", "1"}) {
        EXPECT_EQ(parse_alpha(text).label(), text);
        EXPECT_EQ(parse_alpha(parse_alpha(text).label()), parse_alpha(text));
    }
    EXPECT_EQ(parse_alpha("table:1;0.5"), AlphaSchedule::custom({1.0, 0.5}));
    EXPECT_EQ(parse_alpha("table:1;0.5").label(), "table[2]");
    EXPECT_THROW(parse_alpha("fast"), ParameterError);
    EXPECT_THROW(parse_alpha("1/m^"), ParameterError);
    EXPECT_THROW(parse_alpha("2"), ParameterError);
}

NetworkArch small_arch(std::vector<std::size_t> sizes) {
    return {std::move(sizes), Activation::relu(), OutputHead::linear_logits};
}

Dataset random_batch(std::size_t n, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d{Matrix(n, dim, sample_uniform(rng, -1.0, 1.0, n * dim)), {}};
    for (std::size_t i = 0; i < n; ++i) d.targets.emplace_back(std::size_t{0});
    return d;
}

TEST(BatchStatistics, FirstLayerMatchesTwoPassOracle) {
    const auto arch = small_arch({3, 5, 2});
    Rng rng(1);
    const Theta theta = init_theta(arch, rng);
    const Dataset batch = random_batch(40, 3, 2);
    const BatchStats stats = batch_statistics(batch, theta, arch, HyperParams{});
    for (std::size_t j = 0; j < 5; ++j) {
        std::vector<double> z;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            double pre = 0.0;
            for (std::size_t c = 0; c < 3; ++c) pre += theta.weights[0](j, c) * batch.inputs(i, c);
            z.push_back(std::max(pre, 0.0));
        }
        double mean = 0.0;
        for (double v : z) mean += v;
        mean /= static_cast<double>(z.size());
        double var = 0.0;
        for (double v : z) var += (v - mean) * (v - mean);
        var /= static_cast<double>(z.size());
        EXPECT_NEAR(stats.mu[0][j], mean, 1e-13);
        EXPECT_NEAR(stats.sigma[0][j], std::sqrt(var), 1e-13);
    }
}

TEST(BatchStatistics, ConstantBatchHasZeroSigma) {
    const auto arch = small_arch({2, 3, 2});
    Rng rng(3);
    const Theta theta = init_theta(arch, rng);
    const Dataset batch = repeat(random_batch(1, 2, 4), 6);
    const BatchStats stats = batch_statistics(batch, theta, arch, HyperParams{});
    for (double s : stats.sigma[0]) EXPECT_EQ(s, 0.0);
}

TEST(BatchStatistics, DeeperLayersSeeFreshlyNormalizedInputs) {
    const auto arch = small_arch({3, 4, 4, 2});
    Rng rng(5);
    Theta theta = init_theta(arch, rng);
    const Dataset batch = random_batch(25, 3, 6);
    const HyperParams hp;
    const BatchStats stats = batch_statistics(batch, theta, arch, hp);
    // Forward with λ set to the first layer's batch stats reproduces the
    // second layer's statistics.
    Lambda lambda = init_lambda(arch);
    lambda.mu[0] = stats.mu[0];
    lambda.sigma[0] = stats.sigma[0];
    Vector mean(4, 0.0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto act = forward(batch.input(i), theta, lambda, arch, hp);
        for (std::size_t j = 0; j < 4; ++j) mean[j] += act.hidden_z[1][j] / 25.0;
    }
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(stats.mu[1][j], mean[j], 1e-12);
}

TEST(BatchStatistics, RejectsEmptyBatch) {
    const auto arch = small_arch({2, 3, 2});
    Rng rng(3);
    EXPECT_THROW(batch_statistics(Dataset{Matrix(0, 2), {}}, init_theta(arch, rng), arch, HyperParams{}),
                 ParameterError);
}

Lambda random_lambda(Rng& rng) {
    return Lambda{{sample_uniform(rng, -2.0, 2.0, 4), sample_uniform(rng, -2.0, 2.0, 3)},
                  {sample_uniform(rng, 0.1, 3.0, 4), sample_uniform(rng, 0.1, 3.0, 3)}};
}

TEST(DbnUpdate, EndpointsAreExact) {
    Rng rng(7);
    const Lambda lambda = random_lambda(rng);
    const Lambda fresh = random_lambda(rng);
    const BatchStats stats{fresh.mu, fresh.sigma};
    const Lambda all_new = dbn_update(lambda, stats, 1.0);
    EXPECT_EQ(all_new.mu, fresh.mu);
    EXPECT_EQ(all_new.sigma, fresh.sigma);
    const Lambda frozen = dbn_update(lambda, stats, 0.0);
    EXPECT_EQ(frozen.mu, lambda.mu);
    EXPECT_EQ(frozen.sigma, lambda.sigma);
}

TEST(DbnUpdate, StaysInsideConvexHullOnRandomInstances) {
    Rng rng(8);
    for (int trial = 0; trial < 2000; ++trial) {
        const Lambda lambda = random_lambda(rng);
        const Lambda fresh = random_lambda(rng);
        const double alpha = rng.next_double();
        const Lambda next = dbn_update(lambda, BatchStats{fresh.mu, fresh.sigma}, alpha);
        for (std::size_t l = 0; l < 2; ++l) {
            for (std::size_t j = 0; j < lambda.mu[l].size(); ++j) {
                ASSERT_GE(next.mu[l][j], std::min(lambda.mu[l][j], fresh.mu[l][j]));
                ASSERT_LE(next.mu[l][j], std::max(lambda.mu[l][j], fresh.mu[l][j]));
                ASSERT_GE(next.sigma[l][j], std::min(lambda.sigma[l][j], fresh.sigma[l][j]));
                ASSERT_LE(next.sigma[l][j], std::max(lambda.sigma[l][j], fresh.sigma[l][j]));
                ASSERT_NEAR(next.mu[l][j], alpha * fresh.mu[l][j] + (1.0 - alpha) * lambda.mu[l][j], 1e-14);
            }
        }
    }
}

TEST(DbnUpdate, RejectsAlphaOutsideUnitInterval) {
    Rng rng(9);
    const Lambda lambda = random_lambda(rng);
    const BatchStats stats{lambda.mu, lambda.sigma};
    EXPECT_THROW(dbn_update(lambda, stats, 1.01), ParameterError);
    EXPECT_THROW(dbn_update(lambda, stats, -0.01), ParameterError);
    EXPECT_THROW(dbn_update(lambda, stats, std::nan("")), ParameterError);
}

TEST(DbnUpdate, RejectsShapeMismatch) {
    Rng rng(10);
    const Lambda lambda = random_lambda(rng);
    BatchStats stats{lambda.mu, lambda.sigma};
    stats.sigma.pop_back();
    EXPECT_THROW(dbn_update(lambda, stats, 0.5), DimensionError);
}

TEST(LambdaDistance, InfinityNorm) {
    const Lambda a{{{0.0, 1.0}}, {{1.0, 1.0}}};
    const Lambda b{{{0.5, 1.0}}, {{1.0, -1.0}}};
    EXPECT_EQ(lambda_distance(a, b), 2.0);
    EXPECT_EQ(lambda_distance(a, a), 0.0);
}

}  // namespace
}  // namespace dbn
