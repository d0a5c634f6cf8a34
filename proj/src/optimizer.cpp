#include "dbn/optimizer.hpp"

#include <cmath>
#include <cstdio>

#include "dbn/errors.hpp"

namespace dbn {

namespace {

double parse_number(const std::string& text, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ParameterError("cannot parse " + what + " '" + text + "'");
    }
    if (used != text.size() || !std::isfinite(v)) throw ParameterError("cannot parse " + what + " '" + text + "'");
    return v;
}

std::string shortest(double x) {
    char buf[64];
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

void require_finite_grad(const ThetaGrad& grad) {
    if (!grad.all_finite()) throw NumericError("non-finite gradient");
}

}  // namespace

EtaSchedule EtaSchedule::constant(double c) {
    if (!(c > 0.0) || !std::isfinite(c)) throw ParameterError("stepsize must be positive");
    return {Kind::constant, c, 0.0};
}

EtaSchedule EtaSchedule::power(double c, double k) {
    if (!(c > 0.0) || !std::isfinite(c)) throw ParameterError("stepsize base must be positive");
    if (!(k >= 0.0) || !std::isfinite(k)) throw ParameterError("stepsize exponent must be finite and nonnegative");
    return {Kind::power, c, k};
}

std::string EtaSchedule::label() const {
    if (kind == Kind::constant) return shortest(base);
    return shortest(base) + (exponent == 1.0 ? "/m" : "/m^" + shortest(exponent));
}

EtaSchedule parse_eta(const std::string& text) {
    const auto slash = text.find("/m");
    if (slash == std::string::npos) return EtaSchedule::constant(parse_number(text, "stepsize"));
    const double c = parse_number(text.substr(0, slash), "stepsize base");
    const std::string tail = text.substr(slash + 2);
    if (tail.empty()) return EtaSchedule::power(c, 1.0);
    if (tail.front() != '^') throw ParameterError("cannot parse stepsize '" + text + "'");
    return EtaSchedule::power(c, parse_number(tail.substr(1), "stepsize exponent"));
}

double eta_at(const EtaSchedule& schedule, std::uint64_t m) {
    if (m == 0) throw ParameterError("eta_at: iterations are 1-based");
    if (schedule.kind == EtaSchedule::Kind::constant) return schedule.base;
    return schedule.base / std::pow(static_cast<double>(m), schedule.exponent);
}

std::vector<std::string> stepsize_warnings(const EtaSchedule& schedule) {
    const double k = schedule.kind == EtaSchedule::Kind::constant ? 0.0 : schedule.exponent;
    std::vector<std::string> out;
    if (k <= 0.5) out.push_back("stepsize " + schedule.label() + " violates sum(eta^2) < inf (needs k > 0.5)");
    if (k > 1.0) out.push_back("stepsize " + schedule.label() + " violates sum(eta) = inf (needs k <= 1)");
    return out;
}

Theta sgd_step(const Theta& theta, const ThetaGrad& grad, double eta) {
    require_finite_grad(grad);
    Theta next = theta;
    axpy(next, grad, -eta);
    return next;
}

AdaGradState AdaGradState::for_theta(const Theta& theta, double base_eta, double eps) {
    if (!(base_eta > 0.0)) throw ParameterError("AdaGrad base stepsize must be positive");
    if (!(eps >= 0.0)) throw ParameterError("AdaGrad eps must be nonnegative");
    return {zeros_like(theta), base_eta, eps};
}

AdaGradResult adagrad_step(const AdaGradState& state, const Theta& theta, const ThetaGrad& grad) {
    require_finite_grad(grad);
    AdaGradResult out{theta, state};
    auto params = out.theta.blocks();
    auto acc = out.state.accumulator.blocks();
    const auto g = grad.blocks();
    if (params.size() != g.size() || acc.size() != g.size()) throw DimensionError("adagrad_step: layouts differ");
    for (std::size_t b = 0; b < g.size(); ++b) {
        if (params[b].size() != g[b].size() || acc[b].size() != g[b].size()) {
            throw DimensionError("adagrad_step: block " + theta.block_name(b) + " differs");
        }
        for (std::size_t i = 0; i < g[b].size(); ++i) {
            if (g[b][i] == 0.0) continue;
            acc[b][i] += g[b][i] * g[b][i];
            params[b][i] -= state.base_eta * g[b][i] / (std::sqrt(acc[b][i]) + state.eps);
        }
    }
    return out;
}

TrainState train_iteration(const TrainState& state, const Dataset& batch, const HyperParams& hp,
                           const IterationHooks& hooks) {
    if (batch.empty()) throw ParameterError("train_iteration: empty batch");
    try {
        TrainState next = state;

        if (hooks.before_gradient) hooks.before_gradient(state.theta, state.lambda);
        ThetaGrad grad = batch_objective(batch, state.theta, state.lambda, state.arch, hp).gradient;
        if (state.reduction == GradientReduction::mean) {
            for (auto block : grad.blocks())
                for (double& g : block) g /= static_cast<double>(batch.size());
        }

        if (auto* sgd = std::get_if<SgdRule>(&next.optimizer)) {
            next.theta = sgd_step(state.theta, grad, eta_at(sgd->eta, state.m));
        } else {
            auto result = adagrad_step(std::get<AdaGradState>(state.optimizer), state.theta, grad);
            next.theta = std::move(result.theta);
            next.optimizer = std::move(result.state);
        }
        if (!next.theta.all_finite()) throw NumericError("non-finite parameters after the gradient step");

        if (hooks.before_statistics) hooks.before_statistics(next.theta);
        const BatchStats stats = batch_statistics(batch, next.theta, state.arch, hp);
        next.lambda = dbn_update(state.lambda, stats, alpha_at(state.alpha, state.m + 1));
        next.m = state.m + 1;
        return next;
    } catch (const NumericError& e) {
        throw NumericError("iteration " + std::to_string(state.m) + ": " + e.what());
    }
}

}  // namespace dbn
