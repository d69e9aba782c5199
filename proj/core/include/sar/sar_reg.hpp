#pragma once

#include <cstdint>
#include <vector>

#include "sar/anchors.hpp"
#include "sar/ops.hpp"
#include "sar/optim.hpp"
#include "sar/rng.hpp"
#include "sar/tensor.hpp"

namespace sar {

struct SarConfig {
    double lambda1 = 1.0; // auxiliary cross-entropy weight
    double lambda2 = 0.1; // feature-to-anchor pull weight
    double tau = 0.9;     // high-confidence filter for the reweighting
    double delta = 0.8;   // gate for using/updating a semantic anchor
    double alpha = 0.999; // EMA decay of the semantic anchors
};

// Trainable projection of the fixed anchors into the semantic space:
// two affine+ReLU layers followed by an affine output layer, D -> D.
class EmbeddingHead {
public:
    EmbeddingHead() = default;
    EmbeddingHead(std::size_t dim, std::size_t hidden, Rng& rng);

    Tensor2D forward(Tape& tape, const Tensor2D& anchors) const;

    std::vector<Param> params() const;
    std::uint64_t checksum() const { return params_checksum(params()); }
    std::size_t dim() const { return dim_; }

private:
    std::size_t dim_ = 0;
    Tensor2D w1_, b1_, w2_, b2_, w3_, b3_;
};

// EMA of the embedded anchors plus per-class bookkeeping. A class becomes
// initialized at its first gated step and active whenever the latest gate
// passed; only active classes act as pull targets.
struct SemanticAnchorState {
    Tensor2D a_hat; // C x D
    double alpha = 0.999;
    std::vector<std::uint8_t> active;
    std::vector<std::uint8_t> initialized;
    long step = 0;

    SemanticAnchorState() = default;
    SemanticAnchorState(std::size_t classes, std::size_t dim, double alpha_)
        : a_hat(classes, dim, false),
          alpha(alpha_),
          active(classes, 0),
          initialized(classes, 0) {}

    std::size_t classes() const { return a_hat.rows(); }
};

// conf[c] = softmax(aux_logits[c,:])[c], read off detached values.
std::vector<double> anchor_confidences(const Tensor2D& aux_logits);

// Weights of the auxiliary cross-entropy: confidences above tau are
// suppressed to exactly 0, the rest get log(conf) renormalized over the
// surviving entries so they are positive and sum to 1. Confidences are
// clamped to [1e-12, 1-1e-12] before the logs.
std::vector<double> compute_reweights(const std::vector<double>& conf, double tau);

// -sum_c w[c] * log(conf[c]) on plain values (logging / verification path)
double aux_ce_value(const std::vector<double>& conf, const std::vector<double>& w);

// Same quantity as a taped node, fed by log_softmax_diag output. The
// weights are constants: no gradient flows through them.
Tensor2D aux_ce_loss(Tape& tape, const Tensor2D& log_conf, const std::vector<double>& w);

// Update rule for the semantic anchors: classes with conf > delta take
// their first snapshot or the EMA step and turn active; the rest stay put
// and turn inactive. `embedded` is consumed as detached values.
void ema_update(SemanticAnchorState& state, const Tensor2D& embedded,
                const std::vector<double>& conf, double delta);

// MSE pull of features toward their class's semantic anchor, restricted to
// samples whose class is active. Gradient reaches only the features; the
// anchors are constants here.
MseResult p2a_loss(Tape& tape, const Tensor2D& features, const std::vector<int>& labels,
                   const SemanticAnchorState& state);

// ce + lambda1 * aux + lambda2 * p2a; zero-weighted terms are skipped so
// they influence neither the value nor a single bit of the gradients.
Tensor2D sar_total_loss(Tape& tape, const Tensor2D& ce, const Tensor2D& aux, const Tensor2D& p2a,
                        const SarConfig& cfg);

} // namespace sar
