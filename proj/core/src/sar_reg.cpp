#include "sar/sar_reg.hpp"

#include <algorithm>
#include <cmath>

#include "sar/errors.hpp"

namespace sar {

namespace {

constexpr double kConfClamp = 1e-12;

Tensor2D init_affine_weight(std::size_t in, std::size_t out, Rng& rng) {
    Tensor2D w(in, out, true);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& v : w.values()) v = rng.uniform(-bound, bound);
    return w;
}

} // namespace

EmbeddingHead::EmbeddingHead(std::size_t dim, std::size_t hidden, Rng& rng) : dim_(dim) {
    const std::size_t h = hidden == 0 ? dim : hidden;
    w1_ = init_affine_weight(dim, h, rng);
    b1_ = Tensor2D(1, h, true);
    w2_ = init_affine_weight(h, h, rng);
    b2_ = Tensor2D(1, h, true);
    w3_ = init_affine_weight(h, dim, rng);
    b3_ = Tensor2D(1, dim, true);
}

Tensor2D EmbeddingHead::forward(Tape& tape, const Tensor2D& anchors) const {
    if (anchors.cols() != dim_)
        throw ShapeError("EmbeddingHead: anchors are " + anchors.shape_str() +
                         " but the head expects dimension " + std::to_string(dim_));
    Tensor2D h = relu(tape, affine(tape, anchors, w1_, b1_));
    h = relu(tape, affine(tape, h, w2_, b2_));
    return affine(tape, h, w3_, b3_);
}

std::vector<Param> EmbeddingHead::params() const {
    return {{"head.w1", w1_}, {"head.b1", b1_}, {"head.w2", w2_},
            {"head.b2", b2_}, {"head.w3", w3_}, {"head.b3", b3_}};
}

std::vector<double> anchor_confidences(const Tensor2D& aux_logits) {
    const std::size_t c = aux_logits.rows();
    if (aux_logits.cols() != c)
        throw ShapeError("anchor_confidences: logits must be square, got " +
                         aux_logits.shape_str());
    std::vector<double> conf(c);
    for (std::size_t r = 0; r < c; ++r) {
        double m = aux_logits.at(r, 0);
        for (std::size_t j = 1; j < c; ++j) m = std::max(m, aux_logits.at(r, j));
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += std::exp(aux_logits.at(r, j) - m);
        conf[r] = std::exp(aux_logits.at(r, r) - m) / s;
    }
    return conf;
}

std::vector<double> compute_reweights(const std::vector<double>& conf, double tau) {
    std::vector<double> w(conf.size(), 0.0);
    std::vector<std::uint8_t> keep(conf.size(), 0);
    double log_sum = 0.0;
    bool any = false;
    for (std::size_t c = 0; c < conf.size(); ++c) {
        if (conf[c] > tau) continue;
        const double clamped = std::clamp(conf[c], kConfClamp, 1.0 - kConfClamp);
        keep[c] = 1;
        w[c] = std::log(clamped);
        log_sum += w[c];
        any = true;
    }
    if (!any) return w; // every class already confident: all weights zero
    for (std::size_t c = 0; c < conf.size(); ++c)
        w[c] = keep[c] ? w[c] / log_sum : 0.0;
    return w;
}

double aux_ce_value(const std::vector<double>& conf, const std::vector<double>& w) {
    if (conf.size() != w.size())
        throw ShapeError("aux_ce_value: " + std::to_string(conf.size()) + " confidences vs " +
                         std::to_string(w.size()) + " weights");
    double loss = 0.0;
    for (std::size_t c = 0; c < conf.size(); ++c) {
        if (w[c] == 0.0) continue;
        const double clamped = std::clamp(conf[c], kConfClamp, 1.0 - kConfClamp);
        loss -= w[c] * std::log(clamped);
    }
    return loss;
}

Tensor2D aux_ce_loss(Tape& tape, const Tensor2D& log_conf, const std::vector<double>& w) {
    return weighted_neg_sum(tape, log_conf, w);
}

void ema_update(SemanticAnchorState& state, const Tensor2D& embedded,
                const std::vector<double>& conf, double delta) {
    const std::size_t c = state.classes(), d = state.a_hat.cols();
    if (embedded.rows() != c || embedded.cols() != d)
        throw ShapeError("ema_update: embedded anchors are " + embedded.shape_str() +
                         " but state holds " + state.a_hat.shape_str());
    if (conf.size() != c)
        throw ShapeError("ema_update: confidence count mismatch");

    for (std::size_t i = 0; i < c; ++i) {
        if (conf[i] > delta) {
            if (!state.initialized[i]) {
                for (std::size_t k = 0; k < d; ++k) state.a_hat.at(i, k) = embedded.at(i, k);
                state.initialized[i] = 1;
            } else {
                for (std::size_t k = 0; k < d; ++k)
                    state.a_hat.at(i, k) =
                        state.alpha * state.a_hat.at(i, k) +
                        (1.0 - state.alpha) * embedded.at(i, k);
            }
            state.active[i] = 1;
        } else {
            state.active[i] = 0;
        }
    }
    ++state.step;
}

MseResult p2a_loss(Tape& tape, const Tensor2D& features, const std::vector<int>& labels,
                   const SemanticAnchorState& state) {
    const std::size_t n = features.rows(), d = features.cols();
    if (labels.size() != n) throw ShapeError("p2a_loss: label count mismatch");
    if (d != state.a_hat.cols())
        throw ShapeError("p2a_loss: feature dim " + std::to_string(d) +
                         " vs anchor dim " + std::to_string(state.a_hat.cols()));

    Tensor2D targets(n, d, false);
    std::vector<std::uint8_t> mask(n, 0);
    for (std::size_t r = 0; r < n; ++r) {
        const int lab = labels[r];
        if (lab < 0 || static_cast<std::size_t>(lab) >= state.classes())
            throw InputError("p2a_loss: label " + std::to_string(lab) + " out of range");
        if (!state.active[static_cast<std::size_t>(lab)]) continue;
        mask[r] = 1;
        for (std::size_t k = 0; k < d; ++k)
            targets.at(r, k) = state.a_hat.at(static_cast<std::size_t>(lab), k);
    }
    return mse(tape, features, targets, mask);
}

Tensor2D sar_total_loss(Tape& tape, const Tensor2D& ce, const Tensor2D& aux, const Tensor2D& p2a,
                        const SarConfig& cfg) {
    std::vector<Tensor2D> terms{ce};
    std::vector<double> coeffs{1.0};
    if (cfg.lambda1 != 0.0) {
        terms.push_back(aux);
        coeffs.push_back(cfg.lambda1);
    }
    if (cfg.lambda2 != 0.0) {
        terms.push_back(p2a);
        coeffs.push_back(cfg.lambda2);
    }
    return weighted_sum(tape, terms, coeffs);
}

} // namespace sar
