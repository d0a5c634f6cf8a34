#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "dbn/dataset.hpp"
#include "dbn/dbn_state.hpp"
#include "dbn/model.hpp"

namespace dbn {

/// Gradient stepsize η^(m) = c / m^k, or a constant c.
struct EtaSchedule {
    enum class Kind { constant, power };

    Kind kind = Kind::power;
    double base = 1.0;      // c
    double exponent = 1.0;  // k, power only

    static EtaSchedule constant(double c);
    static EtaSchedule power(double c, double k);

    std::string label() const;

    friend bool operator==(const EtaSchedule&, const EtaSchedule&) = default;
};

/// Parses "0.01", "0.5/m", "0.5/m^1.5".
EtaSchedule parse_eta(const std::string& text);

double eta_at(const EtaSchedule& schedule, std::uint64_t m);

/// Violations of Σ η = ∞ and Σ η² < ∞. Empty when both hold; an advisory,
/// training still proceeds.
std::vector<std::string> stepsize_warnings(const EtaSchedule& schedule);

Theta sgd_step(const Theta& theta, const ThetaGrad& grad, double eta);

struct AdaGradState {
    ThetaGrad accumulator;  // running Σ g², same layout as Theta
    double base_eta = 0.01;
    double eps = 1e-8;

    static AdaGradState for_theta(const Theta& theta, double base_eta = 0.01, double eps = 1e-8);
};

struct AdaGradResult {
    Theta theta;
    AdaGradState state;
};

AdaGradResult adagrad_step(const AdaGradState& state, const Theta& theta, const ThetaGrad& grad);

/// Plain gradient descent with a stepsize schedule.
struct SgdRule {
    EtaSchedule eta;
};

using OptimizerState = std::variant<SgdRule, AdaGradState>;

enum class TrainMode { full_gradient, minibatch };

/// How per-record gradients are combined before the θ step.
enum class GradientReduction { sum, mean };

struct TrainState {
    NetworkArch arch;
    Theta theta;
    Lambda lambda;
    std::uint64_t m = 1;
    OptimizerState optimizer;
    AlphaSchedule alpha;
    TrainMode mode = TrainMode::full_gradient;
    GradientReduction reduction = GradientReduction::sum;
};

/// Observers for the two halves of an iteration.
struct IterationHooks {
    /// Called with the (θ, λ) the gradient is evaluated at.
    std::function<void(const Theta&, const Lambda&)> before_gradient;
    /// Called with the θ the batch statistics are computed from.
    std::function<void(const Theta&)> before_statistics;
};

/// One DBN iteration on `batch`: θ step at (θ^(m), λ^(m)), statistics at
/// θ^(m+1), λ^(m+1) = α^(m+1)·stats + (1 - α^(m+1))·λ^(m), then m += 1.
TrainState train_iteration(const TrainState& state, const Dataset& batch, const HyperParams& hp,
                           const IterationHooks& hooks = {});

}  // namespace dbn
