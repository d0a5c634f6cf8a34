#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dbn/dataset.hpp"
#include "dbn/model.hpp"

namespace dbn {

/// Moving-average weight α^(m), m >= 1.
struct AlphaSchedule {
    enum class Kind { constant, power, table };

    Kind kind = Kind::constant;
    double value = 1.0;          // constant: α; power: exponent h in 1/m^h
    std::vector<double> table;   // table: α^(m) = table[m-1], last entry repeats

    static AlphaSchedule constant(double alpha);
    static AlphaSchedule power(double h);
    static AlphaSchedule custom(std::vector<double> values);

    /// Compact label: "0.25", "1/m", "1/m^2.5", "table[3]".
    std::string label() const;

    friend bool operator==(const AlphaSchedule&, const AlphaSchedule&) = default;
};

/// Parses "0.25", "1/m", "1/m^2", "table:1;0.5;0.25".
AlphaSchedule parse_alpha(const std::string& text);

/// Throws ParameterError for m = 0.
double alpha_at(const AlphaSchedule& schedule, std::uint64_t m);

/// Per-hidden-layer mean and population standard deviation of z = a(W·u).
struct BatchStats {
    std::vector<Vector> mu;
    std::vector<Vector> sigma;
};

/// Statistics of every hidden layer's post-activation values over the batch.
/// Layers past the first see their input normalized by the preceding layer's
/// fresh batch statistics.
BatchStats batch_statistics(const Dataset& batch, const Theta& theta, const NetworkArch& arch, const HyperParams& hp);

/// alpha · stats + (1 - alpha) · lambda, componentwise.
Lambda dbn_update(const Lambda& lambda, const BatchStats& stats, double alpha);

/// ‖a - b‖∞ over every mu and sigma entry.
double lambda_distance(const Lambda& a, const Lambda& b);

}  // namespace dbn
