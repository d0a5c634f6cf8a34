#include "dbn/dataset.hpp"

#include <algorithm>

#include "dbn/errors.hpp"

namespace dbn {

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
    Dataset out{Matrix(indices.size(), data.dim()), {}};
    out.targets.reserve(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t i = indices[r];
        if (i >= data.size()) throw ParameterError("subset: record index out of range");
        std::ranges::copy(data.input(i), out.inputs.row(r).begin());
        out.targets.push_back(data.targets[i]);
    }
    return out;
}

Dataset repeat(const Dataset& data, std::size_t times) {
    std::vector<std::size_t> idx;
    idx.reserve(data.size() * times);
    for (std::size_t t = 0; t < times; ++t)
        for (std::size_t i = 0; i < data.size(); ++i) idx.push_back(i);
    return subset(data, idx);
}

std::size_t label_of(const Dataset& data, std::size_t i) {
    const auto* label = std::get_if<std::size_t>(&data.targets.at(i));
    if (label == nullptr) throw ParameterError("record has a vector target, not a class label");
    return *label;
}

}  // namespace dbn
