#include "sar/prototypes.hpp"

#include "sar/errors.hpp"

namespace sar {

PrototypeState compute_prototypes(const Tensor2D& features, const std::vector<int>& labels,
                                  std::size_t classes) {
    const std::size_t n = features.rows(), d = features.cols();
    if (labels.size() != n) throw ShapeError("compute_prototypes: label count mismatch");

    PrototypeState state(classes, d);
    for (std::size_t r = 0; r < n; ++r) {
        const int lab = labels[r];
        if (lab < 0 || static_cast<std::size_t>(lab) >= classes)
            throw InputError("compute_prototypes: label " + std::to_string(lab) +
                             " outside [0, " + std::to_string(classes) + ")");
        const std::size_t c = static_cast<std::size_t>(lab);
        for (std::size_t k = 0; k < d; ++k) state.P.at(c, k) += features.at(r, k);
        ++state.counts[c];
    }
    for (std::size_t c = 0; c < classes; ++c) {
        if (state.counts[c] == 0) continue;
        state.present[c] = 1;
        for (std::size_t k = 0; k < d; ++k)
            state.P.at(c, k) /= static_cast<double>(state.counts[c]);
    }
    return state;
}

MseResult intra_p2p_loss(Tape& tape, const Tensor2D& features, const std::vector<int>& labels,
                         const PrototypeState& state) {
    const std::size_t n = features.rows(), d = features.cols();
    if (labels.size() != n) throw ShapeError("intra_p2p_loss: label count mismatch");
    if (d != state.P.cols())
        throw ShapeError("intra_p2p_loss: feature dim " + std::to_string(d) +
                         " vs prototype dim " + std::to_string(state.P.cols()));

    Tensor2D targets(n, d, false);
    std::vector<std::uint8_t> mask(n, 0);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t c = static_cast<std::size_t>(labels[r]);
        if (c >= state.classes() || !state.present[c]) continue;
        mask[r] = 1;
        for (std::size_t k = 0; k < d; ++k) targets.at(r, k) = state.P.at(c, k);
    }
    return mse(tape, features, targets, mask);
}

void bank_update(PrototypeState& bank, const PrototypeState& batch) {
    if (bank.classes() != batch.classes() || bank.P.cols() != batch.P.cols())
        throw ShapeError("bank_update: bank is " + bank.P.shape_str() + " but batch is " +
                         batch.P.shape_str());
    const std::size_t d = bank.P.cols();
    const double m = bank.bank_momentum;
    for (std::size_t c = 0; c < bank.classes(); ++c) {
        if (!batch.present[c]) continue;
        if (bank.present[c]) {
            for (std::size_t k = 0; k < d; ++k)
                bank.P.at(c, k) = m * bank.P.at(c, k) + (1.0 - m) * batch.P.at(c, k);
        } else {
            for (std::size_t k = 0; k < d; ++k) bank.P.at(c, k) = batch.P.at(c, k);
            bank.present[c] = 1;
        }
        bank.counts[c] += batch.counts[c];
    }
}

} // namespace sar
