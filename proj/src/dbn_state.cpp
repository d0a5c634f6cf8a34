#include "dbn/dbn_state.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dbn/errors.hpp"

namespace dbn {

namespace {

std::string format_number(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    // Prefer the shortest representation that round-trips.
    for (int precision = 1; precision <= 17; ++precision) {
        char shorter[64];
        std::snprintf(shorter, sizeof shorter, "%.*g", precision, x);
        if (std::strtod(shorter, nullptr) == x) return shorter;
    }
    return buf;
}

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

}  // namespace

AlphaSchedule AlphaSchedule::constant(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("constant alpha must lie in [0, 1]");
    return {Kind::constant, alpha, {}};
}

AlphaSchedule AlphaSchedule::power(double h) {
    if (!(h >= 0.0) || !std::isfinite(h)) throw ParameterError("alpha exponent must be finite and nonnegative");
    return {Kind::power, h, {}};
}

AlphaSchedule AlphaSchedule::custom(std::vector<double> values) {
    if (values.empty()) throw ParameterError("alpha table must not be empty");
    for (double v : values) {
        if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("alpha table entries must lie in [0, 1]");
    }
    return {Kind::table, 0.0, std::move(values)};
}

std::string AlphaSchedule::label() const {
    switch (kind) {
        case Kind::constant: return format_number(value);
        case Kind::power: return value == 1.0 ? "1/m" : "1/m^" + format_number(value);
        case Kind::table: return "table[" + std::to_string(table.size()) + "]";
    }
    return "?";
}

AlphaSchedule parse_alpha(const std::string& text) {
    if (text == "1/m") return AlphaSchedule::power(1.0);
    if (text.rfind("1/m^", 0) == 0) return AlphaSchedule::power(parse_number(text.substr(4), "alpha exponent"));
    if (text.rfind("table:", 0) == 0) {
        std::vector<double> values;
        std::string rest = text.substr(6);
        std::size_t start = 0;
        while (start <= rest.size()) {
            const std::size_t end = std::min(rest.find(';', start), rest.size());
            values.push_back(parse_number(rest.substr(start, end - start), "alpha table entry"));
            start = end + 1;
        }
        return AlphaSchedule::custom(std::move(values));
    }
    return AlphaSchedule::constant(parse_number(text, "alpha"));
}

double alpha_at(const AlphaSchedule& schedule, std::uint64_t m) {
    if (m == 0) throw ParameterError("alpha_at: iterations are 1-based");
    switch (schedule.kind) {
        case AlphaSchedule::Kind::constant: return schedule.value;
        case AlphaSchedule::Kind::power: return std::pow(static_cast<double>(m), -schedule.value);
        case AlphaSchedule::Kind::table: return schedule.table[std::min<std::size_t>(m, schedule.table.size()) - 1];
    }
    return 0.0;
}

BatchStats batch_statistics(const Dataset& batch, const Theta& theta, const NetworkArch& arch, const HyperParams& hp) {
    if (batch.empty()) throw ParameterError("batch_statistics: empty batch");
    arch.validate();
    if (batch.dim() != arch.input_size()) throw DimensionError("batch records do not match the input layer");
    const auto n = static_cast<double>(batch.size());

    BatchStats stats;
    std::vector<Vector> inputs;
    inputs.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto x = batch.input(i);
        inputs.emplace_back(x.begin(), x.end());
    }

    for (std::size_t l = 0; l < arch.hidden_layers(); ++l) {
        const std::size_t d = arch.hidden_size(l);
        std::vector<Vector> z;
        z.reserve(inputs.size());
        for (const auto& u : inputs) {
            Vector v = matvec(theta.weights[l], u);
            for (double& e : v) e = arch.activation(e);
            z.push_back(std::move(v));
        }
        Vector mu(d, 0.0);
        for (const auto& v : z)
            for (std::size_t j = 0; j < d; ++j) mu[j] += v[j];
        for (double& e : mu) e /= n;
        Vector sigma(d, 0.0);
        for (const auto& v : z)
            for (std::size_t j = 0; j < d; ++j) sigma[j] += (v[j] - mu[j]) * (v[j] - mu[j]);
        for (double& e : sigma) e = std::sqrt(e / n);

        for (auto& v : z) {
            for (std::size_t j = 0; j < d; ++j)
                v[j] = theta.gamma[l][j] * (v[j] - mu[j]) / (sigma[j] + hp.eps_b) + theta.beta[l][j];
        }
        inputs = std::move(z);
        stats.mu.push_back(std::move(mu));
        stats.sigma.push_back(std::move(sigma));
    }
    return stats;
}

Lambda dbn_update(const Lambda& lambda, const BatchStats& stats, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("dbn_update: alpha must lie in [0, 1]");
    if (lambda.mu.size() != stats.mu.size() || lambda.sigma.size() != stats.sigma.size()) {
        throw DimensionError("dbn_update: statistics do not match lambda");
    }
    Lambda next = lambda;
    auto blend = [alpha](std::vector<Vector>& dst, const std::vector<Vector>& src) {
        for (std::size_t l = 0; l < dst.size(); ++l) {
            if (dst[l].size() != src[l].size()) throw DimensionError("dbn_update: layer width mismatch");
            for (std::size_t j = 0; j < dst[l].size(); ++j) {
                // Exact endpoints: alpha = 1 copies the statistics, alpha = 0 keeps lambda.
                if (alpha == 1.0) {
                    dst[l][j] = src[l][j];
                } else if (alpha != 0.0) {
                    const double lo = std::min(src[l][j], dst[l][j]);
                    const double hi = std::max(src[l][j], dst[l][j]);
                    dst[l][j] = std::clamp(alpha * src[l][j] + (1.0 - alpha) * dst[l][j], lo, hi);
                }
            }
        }
    };
    blend(next.mu, stats.mu);
    blend(next.sigma, stats.sigma);
    return next;
}

double lambda_distance(const Lambda& a, const Lambda& b) {
    if (a.mu.size() != b.mu.size() || a.sigma.size() != b.sigma.size()) {
        throw DimensionError("lambda_distance: layouts differ");
    }
    double gap = 0.0;
    auto scan = [&gap](const std::vector<Vector>& x, const std::vector<Vector>& y) {
        for (std::size_t l = 0; l < x.size(); ++l) {
            if (x[l].size() != y[l].size()) throw DimensionError("lambda_distance: layer width mismatch");
            for (std::size_t j = 0; j < x[l].size(); ++j) gap = std::max(gap, std::abs(x[l][j] - y[l][j]));
        }
    };
    scan(a.mu, b.mu);
    scan(a.sigma, b.sigma);
    return gap;
}

}  // namespace dbn
