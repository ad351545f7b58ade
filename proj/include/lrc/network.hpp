#pragma once

// MLP over a single flat parameter vector. Layer matrices are views
// into that vector, so the parameter ball, Lipschitz probing, and SGD
// all operate on one Euclidean vector. Checkpoints are a flat binary
// container (fixed header, config integers, 64-bit parameters).

#include <cstddef>
#include <string>
#include <vector>

#include "lrc/rng.hpp"
#include "lrc/tape.hpp"
#include "lrc/tensor.hpp"

namespace lrc {

struct MlpConfig {
    std::size_t input_dim{1};
    std::vector<std::size_t> hidden;
    std::size_t classes{2};

    void validate() const;

    // (fan_in, fan_out) per affine layer, input to output order.
    std::vector<std::pair<std::size_t, std::size_t>> layer_dims() const;

    // Total parameter count: sum over layers of fan_in*fan_out + fan_out.
    std::size_t param_count() const;

    bool operator==(const MlpConfig&) const = default;
};

struct Network {
    MlpConfig config;
    Tensor w;  // flat parameters, length config.param_count()
};

// Offsets from a center parameter vector, each with Euclidean norm <= radius.
// offsets[0] is always the zero vector so the center itself is a candidate.
struct BallSample {
    Tensor center;
    double radius{0.0};
    std::vector<Tensor> offsets;
};

// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
Network init_network(const MlpConfig& config, Prng& p);

// Uniform samples in the closed ball of the given radius: Gaussian
// direction normalized to unit norm, scaled by radius * u^(1/dim).
BallSample sample_ball(const Tensor& center, double radius, std::size_t count, Prng& p);

double l2_norm(const Tensor& v);

void save_checkpoint(const std::string& path, const Network& net);
Network load_checkpoint(const std::string& path);

// Differentiable forward pass: carves each layer's matrix and bias out
// of the flat parameter node, then alternates affine and relu.
template <typename T>
int forward(TapeT<T>& tape, const MlpConfig& config, int w_node, int x_node) {
    const TensorT<T>& x = tape.value(x_node);
    if (x.rank() != 2 || x.cols() != config.input_dim) {
        throw std::invalid_argument("forward: input shape " + shape_str(x.shape) + " does not match d=" +
                                    std::to_string(config.input_dim));
    }
    const auto dims = config.layer_dims();
    int h = x_node;
    std::size_t offset = 0;
    for (std::size_t l = 0; l < dims.size(); ++l) {
        const auto [fan_in, fan_out] = dims[l];
        int W = tape.slice_reshape(w_node, offset, {fan_in, fan_out});
        offset += fan_in * fan_out;
        int b = tape.slice_reshape(w_node, offset, {fan_out});
        offset += fan_out;
        h = tape.add_bias(tape.matmul(h, W), b);
        if (l + 1 < dims.size()) h = tape.relu(h);
    }
    return h;
}

// Forward pass without gradients, for evaluation. Shares the tape
// implementation so both paths compute identical values.
template <typename T>
TensorT<T> forward_values(const MlpConfig& config, const TensorT<T>& w, const TensorT<T>& x) {
    TapeT<T> tape;
    int w_node = tape.leaf(w);
    int x_node = tape.leaf(x);
    return tape.value(forward(tape, config, w_node, x_node));
}

template <typename T>
TensorT<T> cast_tensor(const Tensor& v) {
    std::vector<T> data(v.data.begin(), v.data.end());
    return TensorT<T>(v.shape, std::move(data));
}

}  // namespace lrc
