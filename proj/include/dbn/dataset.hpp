#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "dbn/tensor.hpp"

namespace dbn {

/// A class index selects the softmax cross-entropy loss, a vector selects
/// squared error.
using Target = std::variant<std::size_t, Vector>;

/// Row i of `inputs` is the record whose response is `targets[i]`.
struct Dataset {
    Matrix inputs;
    std::vector<Target> targets;

    std::size_t size() const noexcept { return targets.size(); }
    bool empty() const noexcept { return targets.empty(); }
    std::size_t dim() const noexcept { return inputs.cols(); }
    std::span<const double> input(std::size_t i) const { return inputs.row(i); }
};

/// Copies the listed records, in the listed order.
Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

/// Concatenation of `data` with itself `times` times.
Dataset repeat(const Dataset& data, std::size_t times);

/// Class label of record i; throws ParameterError for vector targets.
std::size_t label_of(const Dataset& data, std::size_t i);

}  // namespace dbn
