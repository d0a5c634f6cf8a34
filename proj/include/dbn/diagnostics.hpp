#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "dbn/dataset.hpp"
#include "dbn/model.hpp"

namespace dbn {

struct GradientCheckResult {
    double max_relative_error = 0.0;
    std::string worst_component;  // e.g. "W2[1,0]"
    std::size_t components = 0;
    /// Some relu pre-activation sat within the kink margin; the probe point
    /// should be resampled before trusting the result.
    bool near_kink = false;
};

/// True when a non-smooth activation sees a pre-activation with |x| < margin.
bool near_kink(std::span<const double> x, const Theta& theta, const Lambda& lambda, const NetworkArch& arch,
               const HyperParams& hp, double margin = 1e-6);

/// Central differences with λ fixed against backward(). Relative error per
/// component is |fd - bp| / max(|fd|, |bp|, 1e-12).
GradientCheckResult gradient_check(const Theta& theta, const Lambda& lambda, const NetworkArch& arch,
                                   const HyperParams& hp, std::span<const double> x, const Target& target,
                                   double step, double kink_margin = 1e-6);

/// A randomized point at which to check gradients.
struct GradientProblem {
    NetworkArch arch;
    Theta theta;
    Lambda lambda;
    HyperParams hp;
    Vector x;
    Target target;
};

/// Glorot weights, gamma in [0.5, 1.5], beta and mu in [-0.5, 0.5], sigma in
/// [0.5, 1.5], input in [-1, 1]. Class targets for the linear-logits head,
/// vector targets in [-1, 1] for the activated head. The input is redrawn
/// while it sits near a relu kink.
GradientProblem make_gradient_problem(std::uint64_t seed, const NetworkArch& arch, double kink_margin = 1e-6);

GradientCheckResult gradient_check(const GradientProblem& problem, double step);

/// Bounded, thinned record of λ snapshots. Every `stride`-th call to record()
/// is kept; the oldest snapshot is dropped once `capacity` is reached.
class LambdaHistory {
public:
    struct Snapshot {
        std::uint64_t m;
        Lambda lambda;
    };

    explicit LambdaHistory(std::size_t capacity = 1 << 16, std::size_t stride = 1);

    void record(std::uint64_t m, const Lambda& lambda);

    const std::deque<Snapshot>& snapshots() const noexcept { return snapshots_; }
    std::size_t size() const noexcept { return snapshots_.size(); }
    std::size_t stride() const noexcept { return stride_; }

private:
    std::size_t capacity_;
    std::size_t stride_;
    std::uint64_t calls_ = 0;
    std::uint64_t last_m_ = 0;
    bool any_ = false;
    std::deque<Snapshot> snapshots_;
};

/// max over retained p, q >= m of ‖λ^(p) - λ^(q)‖∞. With thinning this is a
/// lower bound of the sup over all iterations.
double lambda_gap(const LambdaHistory& history, std::uint64_t m);

/// ‖Σ_i ∇f_i‖₂ over the dataset.
double gradient_norm(const Theta& theta, const Lambda& lambda, const Dataset& data, const NetworkArch& arch,
                     const HyperParams& hp);

struct ConvergenceTrace {
    struct Entry {
        std::uint64_t m;
        double gradient_norm;
        double objective;
        double lambda_gap;
    };

    std::vector<Entry> entries;

    /// Throws NumericError for non-finite values.
    void add(const Entry& e);
};

}  // namespace dbn
