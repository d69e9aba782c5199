#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sar/tensor.hpp"

namespace sar {

struct Param {
    std::string name;
    Tensor2D tensor;
};

// SGD with momentum and decoupled-from-nothing classic weight decay:
//   v <- momentum * v + (grad + weight_decay * param)
//   param <- param - lr * v
// Velocities are kept per parameter name; step counts optimizer updates.
struct OptimizerState {
    double base_lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    long step = 0;
    std::map<std::string, std::vector<double>> velocity;
};

// One optimizer update over a parameter set. Reads each tensor's grad field,
// throws NumericError naming the parameter if a gradient is non-finite.
void sgd_step(std::vector<Param>& params, OptimizerState& state, double lr);

// base_lr * (1 - step/total)^power
double poly_lr(long step, long total, double base_lr, double power);

// FNV-1a over the raw bits of all parameter values, in parameter order.
std::uint64_t params_checksum(const std::vector<Param>& params);

} // namespace sar
