#pragma once

#include <functional>
#include <vector>

#include "sar/tensor.hpp"

namespace sar {

// Central-difference gradient check. The caller runs forward + backward once
// so that each parameter's grad field holds the analytic gradient, then
// passes a value-only loss function. Every coordinate is perturbed by +-eps
// and the numeric gradient (f(t+eps) - f(t-eps)) / (2 eps) is compared
// against the analytic one. Returns
//   max over coordinates of |analytic - numeric| / max(1e-12, |numeric|).
// Throws NumericError if the loss evaluates non-finite.
double finite_diff_check(const std::function<double()>& loss_fn,
                         const std::vector<Tensor2D>& params, double eps);

} // namespace sar
