#include "sar/optim.hpp"

#include <cmath>
#include <cstring>

#include "sar/errors.hpp"

namespace sar {

void sgd_step(std::vector<Param>& params, OptimizerState& state, double lr) {
    for (auto& p : params) {
        const auto& grad = p.tensor.grad();
        auto& values = p.tensor.values();
        if (grad.size() != values.size())
            throw ShapeError("sgd_step: gradient missing for parameter " + p.name);
        for (double g : grad)
            if (!std::isfinite(g))
                throw NumericError("sgd_step: non-finite gradient for parameter " + p.name);

        auto& v = state.velocity[p.name];
        if (v.size() != values.size()) v.assign(values.size(), 0.0);
        for (std::size_t i = 0; i < values.size(); ++i) {
            v[i] = state.momentum * v[i] + (grad[i] + state.weight_decay * values[i]);
            values[i] -= lr * v[i];
        }
    }
    ++state.step;
}

double poly_lr(long step, long total, double base_lr, double power) {
    if (total <= 0) throw InputError("poly_lr: total steps must be positive");
    if (step < 0 || step > total)
        throw InputError("poly_lr: step " + std::to_string(step) + " outside [0, " +
                         std::to_string(total) + "]");
    return base_lr * std::pow(1.0 - static_cast<double>(step) / static_cast<double>(total), power);
}

std::uint64_t params_checksum(const std::vector<Param>& params) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* bytes, std::size_t n) {
        const unsigned char* p = static_cast<const unsigned char*>(bytes);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    for (const auto& p : params)
        mix(p.tensor.values().data(), p.tensor.values().size() * sizeof(double));
    return h;
}

} // namespace sar
