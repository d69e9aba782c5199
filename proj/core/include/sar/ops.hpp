#pragma once

#include <cstdint>
#include <vector>

#include "sar/tensor.hpp"

namespace sar {

// Differentiable building blocks. Each op computes its forward value and,
// when any input requires a gradient, records the matching backward rule on
// the tape. Ops with no differentiable input return detached values and
// leave the tape untouched.

// y = x W + b, b broadcast over rows. x: NxI, W: IxO, b: 1xO.
Tensor2D affine(Tape& tape, const Tensor2D& x, const Tensor2D& W, const Tensor2D& b);

// elementwise max(x, 0); subgradient at 0 is 0
Tensor2D relu(Tape& tape, const Tensor2D& x);

struct SoftmaxCeResult {
    Tensor2D loss;   // 1x1; mean over rows of -log softmax(logits)[label]
    Tensor2D probs;  // NxC row-stochastic probabilities, detached
};
SoftmaxCeResult softmax_ce(Tape& tape, const Tensor2D& logits, const std::vector<int>& labels);

struct MseResult {
    Tensor2D loss;      // 1x1; mean of squared differences over unmasked rows
    bool empty = false; // true when no row was unmasked (loss is exactly 0)
};
MseResult mse(Tape& tape, const Tensor2D& a, const Tensor2D& b);
MseResult mse(Tape& tape, const Tensor2D& a, const Tensor2D& b,
              const std::vector<std::uint8_t>& row_mask);

// out[c] = log softmax(logits[c,:])[c] for square logits, as a Cx1 tensor.
// Overflow-safe; the diagonal softmax probabilities are exp(out).
Tensor2D log_softmax_diag(Tape& tape, const Tensor2D& logits);

// scalar -sum_c w[c] * x[c] for a Cx1 tensor; w is a constant
Tensor2D weighted_neg_sum(Tape& tape, const Tensor2D& x, const std::vector<double>& w);

// scalar sum of all entries
Tensor2D sum_all(Tape& tape, const Tensor2D& x);

// scalar sum_i coeffs[i] * terms[i] over 1x1 terms
Tensor2D weighted_sum(Tape& tape, const std::vector<Tensor2D>& terms,
                      const std::vector<double>& coeffs);

} // namespace sar
