#include "sar/anchors.hpp"

#include <cmath>

#include "sar/errors.hpp"
#include "sar/rng.hpp"

namespace sar {

namespace {

constexpr std::uint64_t kMesEmbedStream = 0xA17C4053ull;

// Gaussian rows orthonormalized by modified Gram-Schmidt with one
// re-orthogonalization pass; fine at these sizes, no QR library needed.
Tensor2D random_orthonormal_rows(std::size_t count, std::size_t dim, Rng& rng) {
    Tensor2D q(count, dim, false);
    for (std::size_t i = 0; i < count; ++i) {
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 100)
                throw CapabilityError("orthonormalization failed to find an independent row");
            std::vector<double> v(dim);
            for (auto& x : v) x = rng.normal();
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t j = 0; j < i; ++j) {
                    double dot = 0.0;
                    for (std::size_t k = 0; k < dim; ++k) dot += v[k] * q.at(j, k);
                    for (std::size_t k = 0; k < dim; ++k) v[k] -= dot * q.at(j, k);
                }
            }
            double norm = 0.0;
            for (double x : v) norm += x * x;
            norm = std::sqrt(norm);
            if (norm <= 1e-10) continue;
            for (std::size_t k = 0; k < dim; ++k) q.at(i, k) = v[k] / norm;
            break;
        }
    }
    return q;
}

} // namespace

std::string to_string(AnchorSource source) {
    switch (source) {
    case AnchorSource::ND: return "nd";
    case AnchorSource::OM: return "om";
    case AnchorSource::MES: return "mes";
    }
    return "nd";
}

AnchorSource anchor_source_from_string(const std::string& s) {
    if (s == "nd" || s == "ND") return AnchorSource::ND;
    if (s == "om" || s == "OM") return AnchorSource::OM;
    if (s == "mes" || s == "MES") return AnchorSource::MES;
    throw InputError("unknown anchor source '" + s + "' (expected nd, om or mes)");
}

AnchorSet generate_anchors(AnchorSource source, std::size_t C, std::size_t D,
                           std::uint64_t seed) {
    if (C < 2) throw InputError("generate_anchors: need at least 2 classes");
    if (D == 0) throw InputError("generate_anchors: dimension must be positive");
    if ((source == AnchorSource::OM || source == AnchorSource::MES) && D < C)
        throw CapabilityError(to_string(source) + " anchors need D >= C (" + std::to_string(C) +
                              " rows requested in dimension " + std::to_string(D) + ")");

    AnchorSet set;
    set.source = source;
    set.seed = seed;
    Rng rng(seed);

    switch (source) {
    case AnchorSource::ND: {
        set.A = Tensor2D(C, D, false);
        for (auto& v : set.A.values()) v = rng.normal();
        break;
    }
    case AnchorSource::OM: {
        set.A = random_orthonormal_rows(C, D, rng);
        break;
    }
    case AnchorSource::MES: {
        // simplex ETF in R^C: sqrt(C/(C-1)) * (I - (1/C) 11^T), unit rows,
        // all pairwise cosines -1/(C-1)
        Tensor2D simplex(C, C, false);
        const double scale = std::sqrt(static_cast<double>(C) / static_cast<double>(C - 1));
        const double off = 1.0 / static_cast<double>(C);
        for (std::size_t i = 0; i < C; ++i)
            for (std::size_t j = 0; j < C; ++j)
                simplex.at(i, j) = scale * ((i == j ? 1.0 : 0.0) - off);

        // embed into R^D through an orthonormal C->D map; cosines are
        // preserved exactly. Seeded on its own stream.
        Rng embed_rng(derive_seed(seed, kMesEmbedStream));
        Tensor2D q = random_orthonormal_rows(C, D, embed_rng);
        set.A = Tensor2D(C, D, false);
        for (std::size_t i = 0; i < C; ++i)
            for (std::size_t k = 0; k < D; ++k) {
                double acc = 0.0;
                for (std::size_t j = 0; j < C; ++j) acc += simplex.at(i, j) * q.at(j, k);
                set.A.at(i, k) = acc;
            }
        break;
    }
    }
    return set;
}

Tensor2D pairwise_cosine(const AnchorSet& set) {
    const std::size_t c = set.num_classes(), d = set.dim();
    std::vector<double> norms(c);
    for (std::size_t i = 0; i < c; ++i) {
        double n = 0.0;
        for (std::size_t k = 0; k < d; ++k) n += set.A.at(i, k) * set.A.at(i, k);
        norms[i] = std::sqrt(n);
        if (norms[i] <= 0.0)
            throw NumericError("pairwise_cosine: zero-norm anchor row " + std::to_string(i));
    }
    Tensor2D out(c, c, false);
    for (std::size_t i = 0; i < c; ++i) {
        out.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < c; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += set.A.at(i, k) * set.A.at(j, k);
            const double cos = dot / (norms[i] * norms[j]);
            out.at(i, j) = cos;
            out.at(j, i) = cos;
        }
    }
    return out;
}

} // namespace sar
