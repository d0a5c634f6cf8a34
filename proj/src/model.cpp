#include "dbn/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dbn/errors.hpp"

namespace dbn {

namespace {

void require_finite(std::span<const double> v, const std::string& where) {
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericError("non-finite value in " + where);
    }
}

std::string layer_name(std::size_t l) { return "layer " + std::to_string(l + 1); }

}  // namespace

double Activation::operator()(double x) const {
    switch (type) {
        case ActivationType::relu: return x > 0.0 ? x : 0.0;
        case ActivationType::leaky_relu: return x > 0.0 ? x : slope * x;
        case ActivationType::identity: return x;
    }
    return x;
}

double Activation::derivative(double x) const {
    switch (type) {
        case ActivationType::relu: return x > 0.0 ? 1.0 : 0.0;
        case ActivationType::leaky_relu: return x > 0.0 ? 1.0 : slope;
        case ActivationType::identity: return 1.0;
    }
    return 1.0;
}

double Activation::lipschitz_k() const {
    return type == ActivationType::leaky_relu ? std::max(1.0, std::abs(slope)) : 1.0;
}

std::string Activation::name() const {
    switch (type) {
        case ActivationType::relu: return "relu";
        case ActivationType::leaky_relu: {
            char buf[64];
            std::snprintf(buf, sizeof buf, "leaky_relu:%.17g", slope);
            return buf;
        }
        case ActivationType::identity: return "identity";
    }
    return "?";
}

Activation parse_activation(const std::string& text) {
    if (text == "relu") return Activation::relu();
    if (text == "identity") return Activation::identity();
    if (text == "leaky_relu") return Activation::leaky_relu(0.01);
    if (text.rfind("leaky_relu:", 0) == 0) {
        try {
            std::size_t used = 0;
            const std::string tail = text.substr(11);
            const double slope = std::stod(tail, &used);
            if (used == tail.size() && std::isfinite(slope)) return Activation::leaky_relu(slope);
        } catch (const std::exception&) {
        }
    }
    throw ParameterError("unknown activation '" + text + "'");
}

void NetworkArch::validate() const {
    if (layer_sizes.size() < 3) throw ParameterError("network needs an input, at least one hidden and an output layer");
    for (std::size_t s : layer_sizes) {
        if (s == 0) throw ParameterError("layer sizes must be positive");
    }
}

std::vector<std::span<double>> Theta::blocks() {
    std::vector<std::span<double>> out;
    for (auto& w : weights) out.push_back(w.data());
    for (auto& g : gamma) out.emplace_back(g);
    for (auto& b : beta) out.emplace_back(b);
    return out;
}

std::vector<std::span<const double>> Theta::blocks() const {
    std::vector<std::span<const double>> out;
    for (const auto& w : weights) out.push_back(w.data());
    for (const auto& g : gamma) out.emplace_back(g);
    for (const auto& b : beta) out.emplace_back(b);
    return out;
}

std::string Theta::block_name(std::size_t block) const {
    if (block < weights.size()) return "W" + std::to_string(block + 1);
    block -= weights.size();
    if (block < gamma.size()) return "gamma" + std::to_string(block + 1);
    block -= gamma.size();
    return "beta" + std::to_string(block + 1);
}

std::size_t Theta::parameter_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks()) n += b.size();
    return n;
}

bool Theta::all_finite() const {
    for (const auto& b : blocks())
        for (double x : b)
            if (!std::isfinite(x)) return false;
    return true;
}

Theta init_theta(const NetworkArch& arch, Rng& rng) {
    arch.validate();
    Theta theta;
    for (std::size_t l = 0; l + 1 < arch.layer_sizes.size(); ++l) {
        const std::size_t fan_in = arch.layer_sizes[l];
        const std::size_t fan_out = arch.layer_sizes[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        theta.weights.emplace_back(fan_out, fan_in, sample_uniform(rng, -bound, bound, fan_in * fan_out));
    }
    for (std::size_t l = 0; l < arch.hidden_layers(); ++l) {
        theta.gamma.emplace_back(arch.hidden_size(l), 1.0);
        theta.beta.emplace_back(arch.hidden_size(l), 0.0);
    }
    return theta;
}

Lambda init_lambda(const NetworkArch& arch) {
    arch.validate();
    Lambda lambda;
    for (std::size_t l = 0; l < arch.hidden_layers(); ++l) {
        lambda.mu.emplace_back(arch.hidden_size(l), 0.0);
        lambda.sigma.emplace_back(arch.hidden_size(l), 1.0);
    }
    return lambda;
}

ThetaGrad zeros_like(const Theta& theta) {
    ThetaGrad g = theta;
    for (auto b : g.blocks()) std::ranges::fill(b, 0.0);
    return g;
}

void check_shapes(const Theta& theta, const Lambda& lambda, const NetworkArch& arch) {
    arch.validate();
    const std::size_t layers = arch.layer_sizes.size() - 1;
    const std::size_t hidden = arch.hidden_layers();
    if (theta.weights.size() != layers || theta.gamma.size() != hidden || theta.beta.size() != hidden ||
        lambda.mu.size() != hidden || lambda.sigma.size() != hidden) {
        throw DimensionError("parameter layer count does not match architecture");
    }
    for (std::size_t l = 0; l < layers; ++l) {
        if (theta.weights[l].rows() != arch.layer_sizes[l + 1] || theta.weights[l].cols() != arch.layer_sizes[l]) {
            throw DimensionError("weight matrix " + std::to_string(l + 1) + " has the wrong shape");
        }
    }
    for (std::size_t l = 0; l < hidden; ++l) {
        const std::size_t d = arch.hidden_size(l);
        if (theta.gamma[l].size() != d || theta.beta[l].size() != d || lambda.mu[l].size() != d ||
            lambda.sigma[l].size() != d) {
            throw DimensionError("normalization parameters of " + layer_name(l) + " have the wrong length");
        }
    }
}

Activations forward(std::span<const double> x, const Theta& theta, const Lambda& lambda, const NetworkArch& arch,
                    const HyperParams& hp) {
    check_shapes(theta, lambda, arch);
    if (!(hp.eps_b > 0.0)) throw ParameterError("eps_b must be positive");
    if (x.size() != arch.input_size()) throw DimensionError("input length does not match the input layer");

    Activations act;
    Vector u(x.begin(), x.end());
    for (std::size_t l = 0; l < arch.hidden_layers(); ++l) {
        Vector pre = matvec(theta.weights[l], u);
        Vector z(pre.size());
        Vector y(pre.size());
        for (std::size_t j = 0; j < pre.size(); ++j) {
            z[j] = arch.activation(pre[j]);
            y[j] = theta.gamma[l][j] * (z[j] - lambda.mu[l][j]) / (lambda.sigma[l][j] + hp.eps_b) + theta.beta[l][j];
        }
        require_finite(y, layer_name(l));
        act.layer_inputs.push_back(std::move(u));
        act.hidden_pre.push_back(std::move(pre));
        act.hidden_z.push_back(std::move(z));
        u = y;
        act.hidden_y.push_back(std::move(y));
    }
    act.output_pre = matvec(theta.weights.back(), u);
    act.layer_inputs.push_back(std::move(u));
    act.output = act.output_pre;
    if (arch.head == OutputHead::activated) {
        for (double& o : act.output) o = arch.activation(o);
    }
    require_finite(act.output, "output layer");
    return act;
}

double weight_norm_squared(const Theta& theta) {
    double s = 0.0;
    for (const auto& w : theta.weights)
        for (double x : w.data()) s += x * x;
    return s;
}

double loss(std::span<const double> outputs, const Target& target, const Theta& theta, const HyperParams& hp) {
    double data_loss = 0.0;
    if (const auto* label = std::get_if<std::size_t>(&target)) {
        if (*label >= outputs.size()) throw ParameterError("target class index out of range");
        const double peak = *std::ranges::max_element(outputs);
        double sum = 0.0;
        for (double o : outputs) sum += std::exp(o - peak);
        data_loss = std::log(sum) + peak - outputs[*label];
    } else {
        const auto& t = std::get<Vector>(target);
        if (t.size() != outputs.size()) throw DimensionError("target length does not match output layer");
        for (std::size_t i = 0; i < t.size(); ++i) data_loss += 0.5 * (outputs[i] - t[i]) * (outputs[i] - t[i]);
    }
    return data_loss + hp.l2_coeff * 0.5 * weight_norm_squared(theta);
}

Vector loss_gradient(std::span<const double> outputs, const Target& target) {
    Vector g(outputs.begin(), outputs.end());
    if (const auto* label = std::get_if<std::size_t>(&target)) {
        if (*label >= outputs.size()) throw ParameterError("target class index out of range");
        const double peak = *std::ranges::max_element(outputs);
        double sum = 0.0;
        for (double& o : g) {
            o = std::exp(o - peak);
            sum += o;
        }
        for (double& o : g) o /= sum;
        g[*label] -= 1.0;
    } else {
        const auto& t = std::get<Vector>(target);
        if (t.size() != outputs.size()) throw DimensionError("target length does not match output layer");
        for (std::size_t i = 0; i < t.size(); ++i) g[i] -= t[i];
    }
    return g;
}

LossAndGradient loss_and_gradient(std::span<const double> x, const Target& target, const Theta& theta,
                                  const Lambda& lambda, const NetworkArch& arch, const HyperParams& hp) {
    const Activations act = forward(x, theta, lambda, arch, hp);
    LossAndGradient out{loss(act.output, target, theta, hp), zeros_like(theta)};
    ThetaGrad& grad = out.gradient;

    Vector delta = loss_gradient(act.output, target);
    if (arch.head == OutputHead::activated) {
        for (std::size_t k = 0; k < delta.size(); ++k) delta[k] *= arch.activation.derivative(act.output_pre[k]);
    }
    const std::size_t last = theta.weights.size() - 1;
    add_outer(grad.weights[last], delta, act.layer_inputs[last]);
    Vector upstream = matvec_transposed(theta.weights[last], delta);

    for (std::size_t l = arch.hidden_layers(); l-- > 0;) {
        const auto& z = act.hidden_z[l];
        Vector d_pre(z.size());
        for (std::size_t j = 0; j < z.size(); ++j) {
            const double inv_scale = 1.0 / (lambda.sigma[l][j] + hp.eps_b);
            grad.beta[l][j] = upstream[j];
            grad.gamma[l][j] = upstream[j] * (z[j] - lambda.mu[l][j]) * inv_scale;
            d_pre[j] = upstream[j] * theta.gamma[l][j] * inv_scale * arch.activation.derivative(act.hidden_pre[l][j]);
        }
        add_outer(grad.weights[l], d_pre, act.layer_inputs[l]);
        if (l > 0) upstream = matvec_transposed(theta.weights[l], d_pre);
    }

    if (hp.l2_coeff != 0.0) {
        for (std::size_t l = 0; l < theta.weights.size(); ++l) {
            auto g = grad.weights[l].data();
            const auto w = theta.weights[l].data();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += hp.l2_coeff * w[i];
        }
    }
    if (!grad.all_finite()) throw NumericError("non-finite gradient");
    return out;
}

ThetaGrad backward(std::span<const double> x, const Target& target, const Theta& theta, const Lambda& lambda,
                   const NetworkArch& arch, const HyperParams& hp) {
    return loss_and_gradient(x, target, theta, lambda, arch, hp).gradient;
}

namespace {

// Midpoint-split tree over [begin, end): fixed order, and a dataset
// concatenated with itself sums to exactly twice the original.
LossAndGradient tree_sum(const Dataset& data, std::size_t begin, std::size_t end, const Theta& theta,
                         const Lambda& lambda, const NetworkArch& arch, const HyperParams& hp) {
    if (end - begin == 1) return loss_and_gradient(data.input(begin), data.targets[begin], theta, lambda, arch, hp);
    const std::size_t mid = begin + (end - begin) / 2;
    LossAndGradient left = tree_sum(data, begin, mid, theta, lambda, arch, hp);
    const LossAndGradient right = tree_sum(data, mid, end, theta, lambda, arch, hp);
    left.value += right.value;
    axpy(left.gradient, right.gradient, 1.0);
    return left;
}

}  // namespace

LossAndGradient batch_objective(const Dataset& data, const Theta& theta, const Lambda& lambda, const NetworkArch& arch,
                                const HyperParams& hp) {
    if (data.empty()) throw ParameterError("batch_objective: empty dataset");
    return tree_sum(data, 0, data.size(), theta, lambda, arch, hp);
}

void axpy(Theta& theta, const Theta& other, double scale) {
    auto dst = theta.blocks();
    const auto src = other.blocks();
    if (dst.size() != src.size()) throw DimensionError("theta layouts differ");
    for (std::size_t b = 0; b < dst.size(); ++b) {
        if (dst[b].size() != src[b].size()) throw DimensionError("theta block " + theta.block_name(b) + " differs");
        for (std::size_t i = 0; i < dst[b].size(); ++i) dst[b][i] += scale * src[b][i];
    }
}

double l2_norm(const Theta& theta) {
    double s = 0.0;
    for (const auto& b : theta.blocks())
        for (double x : b) s += x * x;
    return std::sqrt(s);
}

}  // namespace dbn
