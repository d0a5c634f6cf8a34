#include <array>
#include <cmath>

#include <gtest/gtest.h>

#include "dbn/errors.hpp"
#include "dbn/optimizer.hpp"

namespace dbn {
namespace {

TEST(EtaSchedule, ValuesAndParsing) {
    EXPECT_EQ(eta_at(EtaSchedule::power(0.5, 1.0), 4), 0.125);
    EXPECT_EQ(eta_at(EtaSchedule::constant(0.01), 99), 0.01);
    EXPECT_THROW(eta_at(EtaSchedule::power(0.5, 1.0), 0), ParameterError);
    EXPECT_EQ(parse_eta("0.5/m"), EtaSchedule::power(0.5, 1.0));
    EXPECT_EQ(parse_eta("0.5/m^1.5"), EtaSchedule::power(0.5, 1.5));
    EXPECT_EQ(parse_eta("0.01"), EtaSchedule::constant(0.01));
    EXPECT_THROW(parse_eta("-1"), ParameterError);
    EXPECT_THROW(parse_eta("0.5/n"), ParameterError);
}

TEST(EtaSchedule, StepsizeConditionWarnings) {
    EXPECT_TRUE(stepsize_warnings(EtaSchedule::power(1.0, 1.0)).empty());
    EXPECT_TRUE(stepsize_warnings(EtaSchedule::power(1.0, 0.75)).empty());
    EXPECT_EQ(stepsize_warnings(EtaSchedule::power(1.0, 0.5)).size(), 1u);
    EXPECT_EQ(stepsize_warnings(EtaSchedule::power(1.0, 2.0)).size(), 1u);
    EXPECT_EQ(stepsize_warnings(EtaSchedule::constant(0.1)).size(), 1u);
}

Theta tiny_theta() {
    Theta t;
    t.weights.emplace_back(1, 2, std::vector<double>{1.0, -2.0});
    t.gamma.push_back({1.0});
    t.beta.push_back({0.0});
    return t;
}

TEST(SgdStep, SubtractsScaledGradient) {
    Theta grad = tiny_theta();
    const Theta next = sgd_step(tiny_theta(), grad, 0.5);
    EXPECT_EQ(next.weights[0](0, 0), 0.5);
    EXPECT_EQ(next.weights[0](0, 1), -1.0);
    EXPECT_EQ(next.gamma[0][0], 0.5);
    grad.beta[0][0] = std::nan("");
    EXPECT_THROW(sgd_step(tiny_theta(), grad, 0.5), NumericError);
}

TEST(AdaGrad, FirstStepHasMagnitudeBaseEta) {
    const Theta theta = tiny_theta();
    Theta grad = tiny_theta();
    grad.weights[0](0, 0) = 3.0;
    grad.weights[0](0, 1) = -0.001;
    grad.gamma[0][0] = 0.0;
    grad.beta[0][0] = 0.0;
    const auto state = AdaGradState::for_theta(theta, 0.1, 0.0);
    const auto result = adagrad_step(state, theta, grad);
    EXPECT_DOUBLE_EQ(result.theta.weights[0](0, 0), 1.0 - 0.1);
    EXPECT_DOUBLE_EQ(result.theta.weights[0](0, 1), -2.0 + 0.1);
    EXPECT_EQ(result.theta.gamma[0][0], 1.0);
    EXPECT_EQ(result.state.accumulator.weights[0](0, 0), 9.0);
    EXPECT_EQ(result.state.accumulator.gamma[0][0], 0.0);
}

TEST(AdaGrad, AccumulatesSquaredGradients) {
    const Theta theta = tiny_theta();
    Theta grad = zeros_like(theta);
    grad.weights[0](0, 0) = 3.0;
    auto state = AdaGradState::for_theta(theta, 1.0, 0.0);
    auto r1 = adagrad_step(state, theta, grad);
    grad.weights[0](0, 0) = 4.0;
    auto r2 = adagrad_step(r1.state, r1.theta, grad);
    EXPECT_EQ(r2.state.accumulator.weights[0](0, 0), 25.0);
    EXPECT_DOUBLE_EQ(r2.theta.weights[0](0, 0), 1.0 - 1.0 - 4.0 / 5.0);
    EXPECT_THROW(AdaGradState::for_theta(theta, 0.0), ParameterError);
}

// Hand-derived DBN iteration for a 2-2-2 identity network with squared
// error and sum reduction.
struct ScalarNet {
    double w1[2][2];
    double w2[2][2];
    double gamma[2];
    double beta[2];
    double mu[2];
    double sigma[2];
};

void oracle_iteration(ScalarNet& net, const std::array<std::array<double, 2>, 3>& xs,
                      const std::array<std::array<double, 2>, 3>& ts, double eta, double alpha, double eps_b,
                      double l2) {
    double gw1[2][2] = {};
    double gw2[2][2] = {};
    double gg[2] = {};
    double gb[2] = {};
    for (std::size_t n = 0; n < xs.size(); ++n) {
        double z[2];
        double y[2];
        for (int j = 0; j < 2; ++j) {
            z[j] = net.w1[j][0] * xs[n][0] + net.w1[j][1] * xs[n][1];
            y[j] = net.gamma[j] * (z[j] - net.mu[j]) / (net.sigma[j] + eps_b) + net.beta[j];
        }
        double e[2];
        for (int k = 0; k < 2; ++k) e[k] = net.w2[k][0] * y[0] + net.w2[k][1] * y[1] - ts[n][k];
        for (int j = 0; j < 2; ++j) {
            const double dy = e[0] * net.w2[0][j] + e[1] * net.w2[1][j];
            for (int k = 0; k < 2; ++k) gw2[k][j] += e[k] * y[j] + l2 * net.w2[k][j];
            gb[j] += dy;
            gg[j] += dy * (z[j] - net.mu[j]) / (net.sigma[j] + eps_b);
            const double dz = dy * net.gamma[j] / (net.sigma[j] + eps_b);
            for (int i = 0; i < 2; ++i) gw1[j][i] += dz * xs[n][i] + l2 * net.w1[j][i];
        }
    }
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            net.w1[a][b] -= eta * gw1[a][b];
            net.w2[a][b] -= eta * gw2[a][b];
        }
        net.gamma[a] -= eta * gg[a];
        net.beta[a] -= eta * gb[a];
    }
    for (int j = 0; j < 2; ++j) {
        double z[3];
        double mean = 0.0;
        for (std::size_t n = 0; n < 3; ++n) {
            z[n] = net.w1[j][0] * xs[n][0] + net.w1[j][1] * xs[n][1];
            mean += z[n] / 3.0;
        }
        double var = 0.0;
        for (double v : z) var += (v - mean) * (v - mean) / 3.0;
        net.mu[j] = alpha * mean + (1.0 - alpha) * net.mu[j];
        net.sigma[j] = alpha * std::sqrt(var) + (1.0 - alpha) * net.sigma[j];
    }
}

TEST(TrainIteration, MatchesHandDerivedTrace) {
    const NetworkArch arch{{2, 2, 2}, Activation::identity(), OutputHead::activated};
    const HyperParams hp;
    const std::array<std::array<double, 2>, 3> xs{{{0.5, -1.0}, {1.5, 0.25}, {-0.75, 0.8}}};
    const std::array<std::array<double, 2>, 3> ts{{{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}}};

    ScalarNet net{{{0.3, -0.2}, {0.1, 0.4}}, {{0.5, -0.6}, {0.2, 0.7}}, {1.1, 0.9}, {0.1, -0.1}, {0.2, -0.3},
                  {0.8, 1.2}};
    TrainState state;
    state.arch = arch;
    state.theta.weights = {Matrix(2, 2, {0.3, -0.2, 0.1, 0.4}), Matrix(2, 2, {0.5, -0.6, 0.2, 0.7})};
    state.theta.gamma = {{1.1, 0.9}};
    state.theta.beta = {{0.1, -0.1}};
    state.lambda = Lambda{{{0.2, -0.3}}, {{0.8, 1.2}}};
    state.optimizer = SgdRule{EtaSchedule::power(0.1, 1.0)};
    state.alpha = AlphaSchedule::power(1.0);

    Dataset batch{Matrix(3, 2, {0.5, -1.0, 1.5, 0.25, -0.75, 0.8}), {}};
    for (const auto& t : ts) batch.targets.emplace_back(Vector{t[0], t[1]});

    for (std::uint64_t m = 1; m <= 4; ++m) {
        oracle_iteration(net, xs, ts, 0.1 / static_cast<double>(m), 1.0 / static_cast<double>(m + 1), hp.eps_b,
                         hp.l2_coeff);
        state = train_iteration(state, batch, hp);
        ASSERT_EQ(state.m, m + 1);
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) {
                EXPECT_NEAR(state.theta.weights[0](a, b), net.w1[a][b], 1e-12);
                EXPECT_NEAR(state.theta.weights[1](a, b), net.w2[a][b], 1e-12);
            }
            EXPECT_NEAR(state.theta.gamma[0][a], net.gamma[a], 1e-12);
            EXPECT_NEAR(state.theta.beta[0][a], net.beta[a], 1e-12);
            EXPECT_NEAR(state.lambda.mu[0][a], net.mu[a], 1e-12);
            EXPECT_NEAR(state.lambda.sigma[0][a], net.sigma[a], 1e-12);
        }
    }
}

TrainState blob_state(std::uint64_t seed, OptimizerState opt) {
    const NetworkArch arch{{2, 4, 2}, Activation::relu(), OutputHead::linear_logits};
    Rng rng(seed);
    TrainState s;
    s.arch = arch;
    s.theta = init_theta(arch, rng);
    s.lambda = init_lambda(arch);
    s.optimizer = std::move(opt);
    s.alpha = AlphaSchedule::power(1.0);
    return s;
}

Dataset blob_batch(std::uint64_t seed) {
    Rng rng(seed);
    Dataset d{Matrix(12, 2, sample_uniform(rng, -1.0, 1.0, 24)), {}};
    for (std::size_t i = 0; i < 12; ++i) d.targets.emplace_back(std::size_t{d.inputs(i, 0) > 0.0 ? 1u : 0u});
    return d;
}

TEST(TrainIteration, HooksSeeGradientPointThenUpdatedTheta) {
    TrainState state = blob_state(1, SgdRule{EtaSchedule::power(0.5, 1.0)});
    const Dataset batch = blob_batch(2);
    std::vector<std::string> order;
    Theta at_gradient;
    Lambda lambda_at_gradient;
    Theta at_statistics;
    IterationHooks hooks;
    hooks.before_gradient = [&](const Theta& t, const Lambda& l) {
        order.push_back("gradient");
        at_gradient = t;
        lambda_at_gradient = l;
    };
    hooks.before_statistics = [&](const Theta& t) {
        order.push_back("statistics");
        at_statistics = t;
    };
    const TrainState next = train_iteration(state, batch, HyperParams{}, hooks);
    EXPECT_EQ(order, (std::vector<std::string>{"gradient", "statistics"}));
    EXPECT_EQ(at_gradient, state.theta);
    EXPECT_EQ(lambda_at_gradient.mu, state.lambda.mu);
    EXPECT_EQ(at_statistics, next.theta);
    EXPECT_FALSE(at_statistics == state.theta);
}

TEST(TrainIteration, StatisticsComeFromUpdatedTheta) {
    TrainState state = blob_state(3, SgdRule{EtaSchedule::power(0.5, 1.0)});
    const Dataset batch = blob_batch(4);
    const HyperParams hp;
    const TrainState next = train_iteration(state, batch, hp);
    // α^(2) = 1/2.
    const BatchStats stats = batch_statistics(batch, next.theta, state.arch, hp);
    const Lambda expected = dbn_update(state.lambda, stats, 0.5);
    EXPECT_EQ(next.lambda.mu, expected.mu);
    EXPECT_EQ(next.lambda.sigma, expected.sigma);
}

TEST(TrainIteration, AlphaOneUsesFreshStatisticsOnly) {
    TrainState state = blob_state(5, SgdRule{EtaSchedule::power(0.5, 1.0)});
    state.alpha = AlphaSchedule::constant(1.0);
    const Dataset batch = blob_batch(6);
    const TrainState next = train_iteration(state, batch, HyperParams{});
    const BatchStats stats = batch_statistics(batch, next.theta, state.arch, HyperParams{});
    EXPECT_EQ(next.lambda.mu, stats.mu);
    EXPECT_EQ(next.lambda.sigma, stats.sigma);
}

TEST(TrainIteration, AlphaZeroFreezesLambda) {
    TrainState state = blob_state(5, AdaGradState{});
    state.optimizer = AdaGradState::for_theta(state.theta);
    state.alpha = AlphaSchedule::constant(0.0);
    const Dataset batch = blob_batch(6);
    for (int i = 0; i < 5; ++i) state = train_iteration(state, batch, HyperParams{});
    EXPECT_EQ(state.lambda.mu, init_lambda(state.arch).mu);
    EXPECT_EQ(state.lambda.sigma, init_lambda(state.arch).sigma);
}

TEST(TrainIteration, MeanReductionDividesTheStep) {
    TrainState sum_state = blob_state(7, SgdRule{EtaSchedule::constant(0.01)});
    TrainState mean_state = sum_state;
    mean_state.reduction = GradientReduction::mean;
    mean_state.optimizer = SgdRule{EtaSchedule::constant(0.12)};
    const Dataset batch = blob_batch(8);
    const auto a = train_iteration(sum_state, batch, HyperParams{});
    const auto b = train_iteration(mean_state, batch, HyperParams{});
    const auto x = a.theta.blocks();
    const auto y = b.theta.blocks();
    for (std::size_t k = 0; k < x.size(); ++k)
        for (std::size_t i = 0; i < x[k].size(); ++i) EXPECT_NEAR(x[k][i], y[k][i], 1e-14);
}

TEST(TrainIteration, DeterministicForSameSeed) {
    auto run = [] {
        TrainState s = blob_state(9, SgdRule{});
        s.optimizer = AdaGradState::for_theta(s.theta, 0.05);
        const Dataset batch = blob_batch(10);
        for (int i = 0; i < 20; ++i) s = train_iteration(s, batch, HyperParams{});
        return s;
    };
    const TrainState a = run();
    const TrainState b = run();
    EXPECT_EQ(a.theta, b.theta);
    EXPECT_EQ(a.lambda.mu, b.lambda.mu);
    EXPECT_EQ(a.lambda.sigma, b.lambda.sigma);
}

TEST(TrainIteration, DecreasesObjectiveWithSmallSteps) {
    TrainState s = blob_state(11, SgdRule{EtaSchedule::constant(0.01)});
    s.alpha = AlphaSchedule::constant(0.0);
    const Dataset batch = blob_batch(12);
    const HyperParams hp;
    double previous = batch_objective(batch, s.theta, s.lambda, s.arch, hp).value;
    for (int i = 0; i < 50; ++i) {
        s = train_iteration(s, batch, hp);
        const double current = batch_objective(batch, s.theta, s.lambda, s.arch, hp).value;
        ASSERT_LT(current, previous) << "iteration " << i;
        previous = current;
    }
}

TEST(TrainIteration, NumericFailureNamesIteration) {
    TrainState s = blob_state(13, SgdRule{EtaSchedule::constant(1e300)});
    s.m = 7;
    try {
        for (int i = 0; i < 5; ++i) s = train_iteration(s, blob_batch(14), HyperParams{});
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("iteration "), std::string::npos) << e.what();
    }
}

TEST(TrainIteration, EmptyBatchThrows) {
    TrainState s = blob_state(15, SgdRule{});
    EXPECT_THROW(train_iteration(s, Dataset{Matrix(0, 2), {}}, HyperParams{}), ParameterError);
}

}  // namespace
}  // namespace dbn
