#include "sar/model.hpp"

#include <cmath>

#include "sar/errors.hpp"
#include "sar/rng.hpp"

namespace sar {

namespace {

constexpr std::uint64_t kModelInitStream = 10;

AffineLayer init_layer(std::size_t in, std::size_t out, Rng& rng) {
    AffineLayer layer{Tensor2D(in, out, true), Tensor2D(1, out, true)};
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& v : layer.W.values()) v = rng.uniform(-bound, bound);
    return layer;
}

} // namespace

Tensor2D Mlp::forward(Tape& tape, const Tensor2D& x) const {
    if (layers.empty()) throw StateError("Mlp::forward on uninitialized model");
    Tensor2D h = x;
    for (std::size_t i = 0; i + 1 < layers.size(); ++i)
        h = relu(tape, affine(tape, h, layers[i].W, layers[i].b));
    return affine(tape, h, layers.back().W, layers.back().b);
}

std::vector<Param> ClassifierModel::feature_params() const {
    std::vector<Param> out;
    for (std::size_t i = 0; i < f_phi.layers.size(); ++i) {
        out.push_back({"f_phi.w" + std::to_string(i), f_phi.layers[i].W});
        out.push_back({"f_phi.b" + std::to_string(i), f_phi.layers[i].b});
    }
    return out;
}

std::vector<Param> ClassifierModel::classifier_params() const {
    return {{"g_theta.w", g_theta.W}, {"g_theta.b", g_theta.b}};
}

std::vector<Param> ClassifierModel::main_params() const {
    auto out = feature_params();
    for (auto& p : classifier_params()) out.push_back(p);
    return out;
}

ClassifierModel init_model(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                           std::size_t feature_dim, std::size_t classes, std::uint64_t seed) {
    if (input_dim == 0 || feature_dim == 0 || classes == 0)
        throw InputError("init_model: dimensions must be positive");

    Rng rng(derive_seed(seed, kModelInitStream));
    ClassifierModel model;
    std::size_t in = input_dim;
    for (std::size_t width : hidden) {
        if (width == 0) throw InputError("init_model: zero hidden width");
        model.f_phi.layers.push_back(init_layer(in, width, rng));
        in = width;
    }
    model.f_phi.layers.push_back(init_layer(in, feature_dim, rng));
    model.g_theta = init_layer(feature_dim, classes, rng);
    return model;
}

} // namespace sar
