#pragma once

#include <cstdint>
#include <string>

#include "sar/tensor.hpp"

namespace sar {

// Where the fixed pre-defined class anchors come from:
//   ND  - entries i.i.d. standard normal
//   OM  - mutually orthonormal rows (random orthogonal frame)
//   MES - simplex equiangular tight frame: equal-norm rows with identical
//         pairwise cosines -1/(C-1), the maximally separated arrangement
enum class AnchorSource { ND, OM, MES };

std::string to_string(AnchorSource source);
AnchorSource anchor_source_from_string(const std::string& s);

// One row per class; generated once, then never mutated.
struct AnchorSet {
    Tensor2D A; // C x D, requires_grad = false
    AnchorSource source = AnchorSource::ND;
    std::uint64_t seed = 0;
    bool frozen = true;

    std::size_t num_classes() const { return A.rows(); }
    std::size_t dim() const { return A.cols(); }
};

// OM and MES need D >= C (C orthonormal rows / a C-simplex embedding);
// violating that throws CapabilityError. Same arguments always reproduce
// the same bits.
AnchorSet generate_anchors(AnchorSource source, std::size_t C, std::size_t D, std::uint64_t seed);

// Symmetric C x C cosine-similarity matrix with unit diagonal.
// Throws NumericError naming the row if a row has zero norm.
Tensor2D pairwise_cosine(const AnchorSet& set);

} // namespace sar
