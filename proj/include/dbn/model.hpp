#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dbn/dataset.hpp"
#include "dbn/tensor.hpp"

namespace dbn {

enum class ActivationType { relu, leaky_relu, identity };

/// Elementwise activation a(·) with a(0) = 0 and |a(x)| <= k|x|.
struct Activation {
    ActivationType type = ActivationType::relu;
    double slope = 0.0;  // negative-side slope, leaky_relu only

    static Activation relu() { return {ActivationType::relu, 0.0}; }
    static Activation leaky_relu(double slope) { return {ActivationType::leaky_relu, slope}; }
    static Activation identity() { return {ActivationType::identity, 0.0}; }

    double operator()(double x) const;
    /// One-sided derivative; 0 at the relu kink.
    double derivative(double x) const;
    /// Lipschitz constant k.
    double lipschitz_k() const;
    /// True when the activation has no kink.
    bool smooth() const { return type == ActivationType::identity; }
    std::string name() const;

    friend bool operator==(const Activation&, const Activation&) = default;
};

/// Parses "relu", "identity", "leaky_relu" or "leaky_relu:<slope>".
Activation parse_activation(const std::string& text);

enum class OutputHead {
    linear_logits,  // raw W_L·u, fed to softmax
    activated,      // a(W_L·u)
};

/// Layer sizes are {input, hidden..., output}. Every hidden layer is followed
/// by batch normalization; the output layer is not.
struct NetworkArch {
    std::vector<std::size_t> layer_sizes;
    Activation activation = Activation::relu();
    OutputHead head = OutputHead::linear_logits;

    std::size_t input_size() const { return layer_sizes.front(); }
    std::size_t output_size() const { return layer_sizes.back(); }
    std::size_t hidden_layers() const { return layer_sizes.size() - 2; }
    std::size_t hidden_size(std::size_t l) const { return layer_sizes[l + 1]; }

    /// Throws ParameterError unless there is at least one hidden layer and
    /// every size is positive.
    void validate() const;
};

/// Gradient-trained parameters: weights[l] maps layer l to l+1; gamma[l] and
/// beta[l] belong to hidden layer l.
struct Theta {
    std::vector<Matrix> weights;
    std::vector<Vector> gamma;
    std::vector<Vector> beta;

    /// Flat views over every parameter block: weights, then gammas, then betas.
    std::vector<std::span<double>> blocks();
    std::vector<std::span<const double>> blocks() const;
    /// "W1", "gamma1", "beta1", ... matching blocks().
    std::string block_name(std::size_t block) const;
    std::size_t parameter_count() const;
    bool all_finite() const;

    friend bool operator==(const Theta&, const Theta&) = default;
};

/// Same layout as Theta.
using ThetaGrad = Theta;

/// Batch-normalization statistics, updated only by moving averages.
struct Lambda {
    std::vector<Vector> mu;
    std::vector<Vector> sigma;

    friend bool operator==(const Lambda&, const Lambda&) = default;
};

struct HyperParams {
    double eps_b = 1e-5;
    double l2_coeff = 1e-4;
};

/// Uniform Glorot weights, gamma = 1, beta = 0.
Theta init_theta(const NetworkArch& arch, Rng& rng);
/// mu = 0, sigma = 1.
Lambda init_lambda(const NetworkArch& arch);
ThetaGrad zeros_like(const Theta& theta);

/// Intermediate values of one forward pass.
struct Activations {
    std::vector<Vector> layer_inputs;  // input to weights[l]
    std::vector<Vector> hidden_pre;    // W_l·u
    std::vector<Vector> hidden_z;      // a(W_l·u), the normalized quantity
    std::vector<Vector> hidden_y;      // gamma·(z - mu)/(sigma + eps_b) + beta
    Vector output_pre;
    Vector output;
};

void check_shapes(const Theta& theta, const Lambda& lambda, const NetworkArch& arch);

Activations forward(std::span<const double> x, const Theta& theta, const Lambda& lambda, const NetworkArch& arch,
                    const HyperParams& hp);

/// Data loss plus l2_coeff · ½·Σ‖W_l‖²_F. Softmax cross-entropy for a class
/// target, ½‖outputs - target‖² for a vector target.
double loss(std::span<const double> outputs, const Target& target, const Theta& theta, const HyperParams& hp);

/// ∂(data loss)/∂outputs.
Vector loss_gradient(std::span<const double> outputs, const Target& target);

struct LossAndGradient {
    double value = 0.0;
    ThetaGrad gradient;
};

/// Gradient with respect to theta only; mu and sigma are held constant.
ThetaGrad backward(std::span<const double> x, const Target& target, const Theta& theta, const Lambda& lambda,
                   const NetworkArch& arch, const HyperParams& hp);

LossAndGradient loss_and_gradient(std::span<const double> x, const Target& target, const Theta& theta,
                                  const Lambda& lambda, const NetworkArch& arch, const HyperParams& hp);

/// Σ_i f_i and Σ_i ∇f_i in dataset order.
LossAndGradient batch_objective(const Dataset& data, const Theta& theta, const Lambda& lambda, const NetworkArch& arch,
                                const HyperParams& hp);

/// Squared Frobenius norm over all weight matrices.
double weight_norm_squared(const Theta& theta);

/// theta += scale · other, block by block.
void axpy(Theta& theta, const Theta& other, double scale);
double l2_norm(const Theta& theta);

}  // namespace dbn
