#pragma once

#include <cstdint>
#include <vector>

#include "sar/ops.hpp"
#include "sar/optim.hpp"
#include "sar/tensor.hpp"

namespace sar {

struct AffineLayer {
    Tensor2D W; // in x out
    Tensor2D b; // 1 x out
};

// Feature extractor f: affine+ReLU through the hidden widths, then a plain
// affine projection to the feature dimension.
struct Mlp {
    std::vector<AffineLayer> layers;
    Tensor2D forward(Tape& tape, const Tensor2D& x) const;
};

// Main model: feature extractor plus the C-way linear classifier. The
// classifier tensors are shared handles; the auxiliary stream scores
// embedded anchors through the very same parameters.
struct ClassifierModel {
    Mlp f_phi;
    AffineLayer g_theta;

    std::size_t input_dim() const { return f_phi.layers.front().W.rows(); }
    std::size_t feature_dim() const { return g_theta.W.rows(); }
    std::size_t classes() const { return g_theta.W.cols(); }

    Tensor2D features(Tape& tape, const Tensor2D& x) const { return f_phi.forward(tape, x); }
    Tensor2D logits(Tape& tape, const Tensor2D& features) const {
        return affine(tape, features, g_theta.W, g_theta.b);
    }

    std::vector<Param> feature_params() const; // phi
    std::vector<Param> classifier_params() const; // theta
    std::vector<Param> main_params() const; // phi + theta
};

// Uniform fan-in init, W ~ U(-1/sqrt(in), 1/sqrt(in)), zero biases.
ClassifierModel init_model(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                           std::size_t feature_dim, std::size_t classes, std::uint64_t seed);

} // namespace sar
