#include "dbn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dbn/errors.hpp"

namespace dbn {

namespace {

// The objective split into its data term and its l2 term. Differencing the
// two separately keeps small regularizer-only derivatives above roundoff.
struct ProbeLoss {
    double data = 0.0;
    double penalty = 0.0;
};

ProbeLoss probe_loss(std::span<const double> x, const Target& target, const Theta& theta, const Lambda& lambda,
                     const NetworkArch& arch, const HyperParams& hp) {
    const HyperParams data_only{hp.eps_b, 0.0};
    const Activations act = forward(x, theta, lambda, arch, hp);
    return {loss(act.output, target, theta, data_only), 0.5 * hp.l2_coeff * weight_norm_squared(theta)};
}

std::string component_name(const Theta& theta, std::size_t block, std::size_t index) {
    if (block < theta.weights.size()) {
        const std::size_t cols = theta.weights[block].cols();
        return theta.block_name(block) + "[" + std::to_string(index / cols) + "," + std::to_string(index % cols) + "]";
    }
    return theta.block_name(block) + "[" + std::to_string(index) + "]";
}

}  // namespace

bool near_kink(std::span<const double> x, const Theta& theta, const Lambda& lambda, const NetworkArch& arch,
               const HyperParams& hp, double margin) {
    if (arch.activation.smooth()) return false;
    const Activations act = forward(x, theta, lambda, arch, hp);
    for (const auto& pre : act.hidden_pre)
        for (double v : pre)
            if (std::abs(v) < margin) return true;
    if (arch.head == OutputHead::activated) {
        for (double v : act.output_pre)
            if (std::abs(v) < margin) return true;
    }
    return false;
}

GradientCheckResult gradient_check(const Theta& theta, const Lambda& lambda, const NetworkArch& arch,
                                   const HyperParams& hp, std::span<const double> x, const Target& target,
                                   double step, double kink_margin) {
    if (!(step > 0.0)) throw ParameterError("gradient_check: step must be positive");
    const ThetaGrad analytic = backward(x, target, theta, lambda, arch, hp);

    GradientCheckResult result;
    result.near_kink = near_kink(x, theta, lambda, arch, hp, kink_margin);
    Theta probe = theta;
    auto blocks = probe.blocks();
    const auto grads = analytic.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (std::size_t i = 0; i < blocks[b].size(); ++i) {
            const double saved = blocks[b][i];
            ProbeLoss up;
            ProbeLoss down;
            try {
                blocks[b][i] = saved + step;
                up = probe_loss(x, target, probe, lambda, arch, hp);
                blocks[b][i] = saved - step;
                down = probe_loss(x, target, probe, lambda, arch, hp);
            } catch (const NumericError& e) {
                throw NumericError("gradient_check: probing " + component_name(theta, b, i) + ": " + e.what());
            }
            blocks[b][i] = saved;
            const double fd = ((up.data - down.data) + (up.penalty - down.penalty)) / (2.0 * step);
            if (!std::isfinite(fd)) {
                throw NumericError("gradient_check: non-finite loss while probing " + component_name(theta, b, i));
            }
            const double bp = grads[b][i];
            const double denom = std::max({std::abs(fd), std::abs(bp), 1e-12});
            const double err = std::abs(fd - bp) / denom;
            if (result.worst_component.empty() || err > result.max_relative_error) {
                result.max_relative_error = err;
                result.worst_component = component_name(theta, b, i);
            }
            ++result.components;
        }
    }
    return result;
}

GradientProblem make_gradient_problem(std::uint64_t seed, const NetworkArch& arch, double kink_margin) {
    Rng root(seed);
    Rng rng = root.split(1);
    GradientProblem p{arch, init_theta(arch, rng), init_lambda(arch), HyperParams{}, {}, std::size_t{0}};
    for (std::size_t l = 0; l < arch.hidden_layers(); ++l) {
        const std::size_t d = arch.hidden_size(l);
        p.theta.gamma[l] = sample_uniform(rng, 0.5, 1.5, d);
        p.theta.beta[l] = sample_uniform(rng, -0.5, 0.5, d);
        p.lambda.mu[l] = sample_uniform(rng, -0.5, 0.5, d);
        p.lambda.sigma[l] = sample_uniform(rng, 0.5, 1.5, d);
    }
    if (arch.head == OutputHead::linear_logits) {
        p.target = static_cast<std::size_t>(rng.next_below(arch.output_size()));
    } else {
        p.target = sample_uniform(rng, -1.0, 1.0, arch.output_size());
    }
    Rng input_rng = root.split(2);
    for (int attempt = 0;; ++attempt) {
        p.x = sample_uniform(input_rng, -1.0, 1.0, arch.input_size());
        if (!near_kink(p.x, p.theta, p.lambda, arch, p.hp, kink_margin)) break;
        if (attempt == 1000) throw NumericError("make_gradient_problem: could not avoid activation kinks");
    }
    return p;
}

GradientCheckResult gradient_check(const GradientProblem& problem, double step) {
    return gradient_check(problem.theta, problem.lambda, problem.arch, problem.hp, problem.x, problem.target, step);
}

LambdaHistory::LambdaHistory(std::size_t capacity, std::size_t stride) : capacity_(capacity), stride_(stride) {
    if (capacity < 2) throw ParameterError("LambdaHistory: capacity must be at least 2");
    if (stride == 0) throw ParameterError("LambdaHistory: stride must be positive");
}

void LambdaHistory::record(std::uint64_t m, const Lambda& lambda) {
    if (any_ && m <= last_m_) throw ParameterError("LambdaHistory: iterations must be strictly increasing");
    any_ = true;
    last_m_ = m;
    if (calls_++ % stride_ != 0) return;
    if (snapshots_.size() == capacity_) snapshots_.pop_front();
    snapshots_.push_back({m, lambda});
}

double lambda_gap(const LambdaHistory& history, std::uint64_t m) {
    const auto& snaps = history.snapshots();
    const auto first = std::ranges::find_if(snaps, [m](const auto& s) { return s.m >= m; });
    if (std::distance(first, snaps.end()) < 2) {
        throw ParameterError("lambda_gap: fewer than two snapshots at or after iteration " + std::to_string(m));
    }
    // The largest pairwise ∞-distance is the widest per-component range.
    std::vector<double> lo;
    std::vector<double> hi;
    for (auto it = first; it != snaps.end(); ++it) {
        std::size_t c = 0;
        for (const auto* part : {&it->lambda.mu, &it->lambda.sigma}) {
            for (const auto& layer : *part) {
                for (double v : layer) {
                    if (it == first) {
                        lo.push_back(v);
                        hi.push_back(v);
                    } else {
                        if (c >= lo.size()) throw DimensionError("lambda_gap: snapshot layouts differ");
                        lo[c] = std::min(lo[c], v);
                        hi[c] = std::max(hi[c], v);
                    }
                    ++c;
                }
            }
        }
        if (c != lo.size()) throw DimensionError("lambda_gap: snapshot layouts differ");
    }
    double gap = 0.0;
    for (std::size_t c = 0; c < lo.size(); ++c) gap = std::max(gap, hi[c] - lo[c]);
    return gap;
}

double gradient_norm(const Theta& theta, const Lambda& lambda, const Dataset& data, const NetworkArch& arch,
                     const HyperParams& hp) {
    return l2_norm(batch_objective(data, theta, lambda, arch, hp).gradient);
}

void ConvergenceTrace::add(const Entry& e) {
    if (!std::isfinite(e.gradient_norm) || !std::isfinite(e.objective) || !std::isfinite(e.lambda_gap)) {
        throw NumericError("convergence trace entry at iteration " + std::to_string(e.m) + " is not finite");
    }
    entries.push_back(e);
}

}  // namespace dbn
