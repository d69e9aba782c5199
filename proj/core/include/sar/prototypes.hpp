#pragma once

#include <cstdint>
#include <vector>

#include "sar/ops.hpp"
#include "sar/tensor.hpp"

namespace sar {

// Per-class feature centroids estimated from training batches, the
// EM-style class representation that semantic anchors replace. Optionally
// smoothed across batches by a momentum bank.
struct PrototypeState {
    Tensor2D P; // C x D
    std::vector<long> counts;
    double bank_momentum = 0.0;
    std::vector<std::uint8_t> present;

    PrototypeState() = default;
    PrototypeState(std::size_t classes, std::size_t dim, double momentum = 0.0)
        : P(classes, dim, false), counts(classes, 0), bank_momentum(momentum),
          present(classes, 0) {}

    std::size_t classes() const { return P.rows(); }
};

// Mean feature row per class over the batch; empty classes stay absent.
// Detached: the result never carries gradients.
PrototypeState compute_prototypes(const Tensor2D& features, const std::vector<int>& labels,
                                  std::size_t classes);

// MSE between each feature row and its class prototype over present
// classes. Prototypes are constants in the gradient.
MseResult intra_p2p_loss(Tape& tape, const Tensor2D& features, const std::vector<int>& labels,
                         const PrototypeState& state);

// bank <- m * bank + (1-m) * batch for classes present in the batch;
// previously absent classes adopt the batch prototype outright.
void bank_update(PrototypeState& bank, const PrototypeState& batch);

} // namespace sar
