#include "sar/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "sar/errors.hpp"

namespace sar {

double finite_diff_check(const std::function<double()>& loss_fn,
                         const std::vector<Tensor2D>& params, double eps) {
    double worst = 0.0;
    for (const Tensor2D& p : params) {
        // handle semantics: mutating this copy mutates the tensor the
        // loss function closes over
        Tensor2D t = p;
        const std::vector<double> analytic = t.grad();
        if (analytic.size() != t.size())
            throw StateError("finite_diff_check: parameter has no analytic gradient");
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double saved = t.values()[i];
            t.values()[i] = saved + eps;
            const double f_plus = loss_fn();
            t.values()[i] = saved - eps;
            const double f_minus = loss_fn();
            t.values()[i] = saved;
            if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
                throw NumericError("finite_diff_check: non-finite loss during perturbation");
            const double numeric = (f_plus - f_minus) / (2.0 * eps);
            const double rel = std::abs(analytic[i] - numeric) / std::max(1e-12, std::abs(numeric));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

} // namespace sar
