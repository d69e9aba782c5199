#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sar/gradcheck.hpp"
#include "sar/sar_reg.hpp"

using namespace sar;

TEST_CASE("embed_anchors shape, differentiability and frozen input") {
    Rng rng(5);
    EmbeddingHead head(4, 0, rng);
    auto set = generate_anchors(AnchorSource::ND, 3, 4, 7);

    Tape tape;
    Tensor2D out = head.forward(tape, set.A);
    CHECK(out.rows() == 3);
    CHECK(out.cols() == 4);

    Tensor2D loss = sum_all(tape, out);
    tape.backward(loss);

    // anchors are not trainable: no gradient buffer is ever attached
    CHECK(!set.A.requires_grad());
    CHECK(set.A.grad().empty());

    auto params = head.params();
    auto loss_fn = [&]() {
        Tape t;
        return sum_all(t, head.forward(t, set.A)).scalar();
    };
    std::vector<Tensor2D> tensors;
    for (auto& p : params) tensors.push_back(p.tensor);
    CHECK(finite_diff_check(loss_fn, tensors, 1e-5) <= 1e-4);
}

TEST_CASE("anchor_confidences") {
    SUBCASE("saturated one-hot logits give confidence ~1") {
        Tensor2D logits(3, 3);
        for (std::size_t i = 0; i < 3; ++i) logits.at(i, i) = 1000.0;
        auto conf = anchor_confidences(logits);
        for (double c : conf) CHECK(c == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("zero classifier gives uniform 1/C") {
        Tensor2D logits(4, 4);
        auto conf = anchor_confidences(logits);
        for (double c : conf) CHECK(c == doctest::Approx(0.25).epsilon(1e-12));
    }

    SUBCASE("hand-set 2x2 logits") {
        Tensor2D logits = Tensor2D::from_values(2, 2, {2.0, 0.0, 0.0, 1.0});
        auto conf = anchor_confidences(logits);
        CHECK(conf[0] == doctest::Approx(std::exp(2.0) / (std::exp(2.0) + 1.0)).epsilon(1e-12));
        CHECK(conf[1] == doctest::Approx(std::exp(1.0) / (1.0 + std::exp(1.0))).epsilon(1e-12));
        CHECK(conf[0] == doctest::Approx(0.8808).epsilon(1e-4));
        CHECK(conf[1] == doctest::Approx(0.7311).epsilon(1e-4));
    }
}

TEST_CASE("compute_reweights") {
    SUBCASE("worked example") {
        auto w = compute_reweights({0.95, 0.5, 0.2}, 0.9);
        CHECK(w[0] == 0.0);
        CHECK(w[1] == doctest::Approx(std::log(0.5) / (std::log(0.5) + std::log(0.2))));
        CHECK(w[2] == doctest::Approx(std::log(0.2) / (std::log(0.5) + std::log(0.2))));
        CHECK(w[1] == doctest::Approx(0.3010).epsilon(1e-3));
        CHECK(w[2] == doctest::Approx(0.6990).epsilon(1e-3));
    }

    SUBCASE("all confident: every weight zero") {
        auto w = compute_reweights({0.95, 0.99, 0.91}, 0.9);
        for (double v : w) CHECK(v == 0.0);
    }

    SUBCASE("a single surviving entry gets weight 1") {
        auto w = compute_reweights({0.95, 0.4, 0.99}, 0.9);
        CHECK(w[0] == 0.0);
        CHECK(w[1] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(w[2] == 0.0);
    }

    SUBCASE("confidences at 0 or 1 are clamped before logs") {
        auto w = compute_reweights({0.0, 0.5}, 0.9);
        CHECK(std::isfinite(w[0]));
        CHECK(std::isfinite(w[1]));
        CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(w[0] > w[1]); // smaller confidence, larger weight
    }

    SUBCASE("properties: filtered exactly zero, survivors positive, sum to one, "
            "strictly decreasing in confidence") {
        Rng rng(77);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t c = 2 + rng.index(9);
            std::vector<double> conf(c);
            for (auto& v : conf) v = 0.001 + 0.998 * rng.uniform();
            const double tau = 0.3 + 0.65 * rng.uniform();
            auto w = compute_reweights(conf, tau);

            double sum = 0.0;
            bool any = false;
            for (std::size_t i = 0; i < c; ++i) {
                if (conf[i] > tau) {
                    CHECK(w[i] == 0.0);
                } else {
                    CHECK(w[i] > 0.0);
                    sum += w[i];
                    any = true;
                }
                for (std::size_t j = 0; j < c; ++j)
                    if (conf[i] <= tau && conf[j] <= tau && conf[i] < conf[j] - 1e-12)
                        CHECK(w[i] > w[j]); // strictly decreasing in confidence
            }
            if (any) CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("aux_ce_loss value and gradient semantics") {
    SUBCASE("all-zero weights: zero loss, zero gradients") {
        Rng rng(3);
        EmbeddingHead head(3, 0, rng);
        auto set = generate_anchors(AnchorSource::ND, 3, 3, 1);
        Tape tape;
        Tensor2D emb = head.forward(tape, set.A);
        Tensor2D w_cls(3, 3, true), b_cls(1, 3, true);
        Tensor2D log_conf = log_softmax_diag(tape, affine(tape, emb, w_cls, b_cls));
        Tensor2D loss = aux_ce_loss(tape, log_conf, {0.0, 0.0, 0.0});
        CHECK(loss.scalar() == 0.0);
        tape.backward(loss);
        for (const auto& p : head.params())
            for (double g : p.tensor.grad()) CHECK(g == 0.0);
    }

    SUBCASE("single class with weight 1 and confidence 1/2") {
        CHECK(aux_ce_value({0.5}, {1.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }

    SUBCASE("clamped full confidence with zero weight stays zero") {
        CHECK(aux_ce_value({1.0 - 1e-12}, {0.0}) == 0.0);
    }

    SUBCASE("taped value agrees with the plain-arithmetic path") {
        Rng rng(11);
        Tensor2D logits(4, 4, true);
        for (auto& v : logits.values()) v = rng.uniform(-2.0, 2.0);
        Tape tape;
        Tensor2D log_conf = log_softmax_diag(tape, logits);
        auto conf = anchor_confidences(logits);
        auto w = compute_reweights(conf, 0.9);
        Tensor2D loss = aux_ce_loss(tape, log_conf, w);
        CHECK(loss.scalar() == doctest::Approx(aux_ce_value(conf, w)).epsilon(1e-12));

        tape.backward(loss);
        auto loss_fn = [&]() {
            Tape t;
            return aux_ce_loss(t, log_softmax_diag(t, logits), w).scalar();
        };
        CHECK(finite_diff_check(loss_fn, {logits}, 1e-5) <= 1e-4);
    }
}

TEST_CASE("ema_update") {
    SUBCASE("alpha=1 leaves initialized anchors unchanged") {
        SemanticAnchorState state(2, 3, 1.0);
        Tensor2D h0 = Tensor2D::from_values(2, 3, {1, 2, 3, 4, 5, 6});
        ema_update(state, h0, {0.9, 0.9}, 0.8); // first snapshot
        Tensor2D h1 = Tensor2D::from_values(2, 3, {9, 9, 9, 9, 9, 9});
        ema_update(state, h1, {0.9, 0.9}, 0.8);
        for (std::size_t i = 0; i < 6; ++i) CHECK(state.a_hat.values()[i] == h0.values()[i]);
    }

    SUBCASE("constant target: a_hat_t = alpha^t a_0 + (1-alpha^t) h") {
        const double alpha = 0.9;
        SemanticAnchorState state(1, 2, alpha);
        Tensor2D a0 = Tensor2D::from_values(1, 2, {4.0, -2.0});
        ema_update(state, a0, {0.95}, 0.8); // initialization snapshot
        Tensor2D h = Tensor2D::from_values(1, 2, {1.0, 1.0});
        const int steps = 17;
        for (int t = 0; t < steps; ++t) ema_update(state, h, {0.95}, 0.8);
        const double at = std::pow(alpha, steps);
        CHECK(state.a_hat.at(0, 0) ==
              doctest::Approx(at * 4.0 + (1.0 - at) * 1.0).epsilon(1e-12));
        CHECK(state.a_hat.at(0, 1) ==
              doctest::Approx(at * -2.0 + (1.0 - at) * 1.0).epsilon(1e-12));
        CHECK(state.step == steps + 1);
    }

    SUBCASE("confidence exactly delta fails the strict gate") {
        SemanticAnchorState state(2, 2, 0.5);
        Tensor2D h = Tensor2D::from_values(2, 2, {1, 1, 2, 2});
        ema_update(state, h, {0.8, 0.81}, 0.8);
        CHECK(!state.active[0]);
        CHECK(!state.initialized[0]);
        CHECK(state.active[1]);
        CHECK(state.initialized[1]);
        CHECK(state.a_hat.at(0, 0) == 0.0); // untouched
        CHECK(state.a_hat.at(1, 0) == 2.0);
    }
}

TEST_CASE("p2a_loss") {
    SemanticAnchorState state(3, 2, 0.999);
    Tensor2D snapshots = Tensor2D::from_values(3, 2, {0, 1, 5, 5, -1, 2});
    ema_update(state, snapshots, {0.9, 0.5, 0.9}, 0.8); // classes 0 and 2 active

    SUBCASE("features equal to their anchors give zero") {
        Tape tape;
        Tensor2D f = Tensor2D::from_values(2, 2, {0, 1, -1, 2}, true);
        auto res = p2a_loss(tape, f, {0, 2}, state);
        CHECK(res.loss.scalar() == 0.0);
        CHECK(!res.empty);
    }

    SUBCASE("hand arithmetic matches the mse op") {
        Tape tape;
        Tensor2D f = Tensor2D::from_values(1, 2, {1.0, 3.0}, true);
        auto res = p2a_loss(tape, f, {0}, state); // anchor row 0 is (0, 1)
        CHECK(res.loss.scalar() == doctest::Approx(2.5).epsilon(1e-12));
    }

    SUBCASE("inactive classes are excluded; all-inactive is flagged empty") {
        Tape tape;
        Tensor2D f = Tensor2D::from_values(2, 2, {9, 9, 9, 9}, true);
        auto res = p2a_loss(tape, f, {1, 1}, state);
        CHECK(res.loss.scalar() == 0.0);
        CHECK(res.empty);
        CHECK(!res.loss.requires_grad());
    }

    SUBCASE("gradient flows into features only") {
        Tape tape;
        Tensor2D f = Tensor2D::from_values(2, 2, {1, 2, 3, 4}, true);
        auto res = p2a_loss(tape, f, {0, 2}, state);
        tape.backward(res.loss);
        bool any = false;
        for (double g : f.grad()) any = any || g != 0.0;
        CHECK(any);
        CHECK(state.a_hat.grad().empty());
    }
}

TEST_CASE("full composite objective matches finite differences on a 2-class toy") {
    // ce + lambda1 * aux-ce + lambda2 * p2a over phi, theta and psi at C=2, D=3
    const std::size_t C = 2, D = 3;
    Rng rng(66);
    Tensor2D x(6, 4, false);
    for (auto& v : x.values()) v = rng.uniform(-1.0, 1.0);
    std::vector<int> labels{0, 1, 0, 1, 0, 1};

    Tensor2D w1(4, 5, true), b1(1, 5, true), w2(5, D, true), b2(1, D, true);
    Tensor2D wc(D, C, true), bc(1, C, true);
    for (Tensor2D* t : {&w1, &b1, &w2, &b2, &wc, &bc})
        for (auto& v : t->values()) v = rng.uniform(-1.0, 1.0);

    auto anchors = generate_anchors(AnchorSource::ND, C, D, 8);
    EmbeddingHead head(D, 0, rng);
    SemanticAnchorState state(C, D, 0.999);
    {
        Tape t;
        ema_update(state, head.forward(t, anchors.A), {0.9, 0.9}, 0.8);
    }
    SarConfig cfg;

    std::vector<double> aux_w;
    {
        Tape t;
        Tensor2D emb = head.forward(t, anchors.A);
        Tensor2D logits = affine(t, emb, wc, bc);
        aux_w = compute_reweights(anchor_confidences(logits), cfg.tau);
    }

    auto forward = [&](Tape& tape) {
        Tensor2D feat = affine(tape, relu(tape, affine(tape, x, w1, b1)), w2, b2);
        Tensor2D ce = softmax_ce(tape, affine(tape, feat, wc, bc), labels).loss;
        Tensor2D p2a = p2a_loss(tape, feat, labels, state).loss;
        Tensor2D emb = head.forward(tape, anchors.A);
        Tensor2D aux = aux_ce_loss(tape, log_softmax_diag(tape, affine(tape, emb, wc, bc)),
                                   aux_w);
        return sar_total_loss(tape, ce, aux, p2a, cfg);
    };

    std::vector<Tensor2D> params{w1, b1, w2, b2, wc, bc};
    for (const auto& p : head.params()) params.push_back(p.tensor);
    for (auto& p : params) p.zero_grad();
    Tape tape;
    Tensor2D loss = forward(tape);
    tape.backward(loss);

    auto loss_fn = [&]() {
        Tape t;
        return forward(t).scalar();
    };
    CHECK(finite_diff_check(loss_fn, params, 1e-4) <= 1e-4);
}

TEST_CASE("sar_total_loss composition") {
    Tape tape;
    Tensor2D ce = Tensor2D::from_values(1, 1, {1.0});
    Tensor2D aux = Tensor2D::from_values(1, 1, {0.5});
    Tensor2D p2a = Tensor2D::from_values(1, 1, {2.0});

    SarConfig cfg;
    cfg.lambda1 = 1.0;
    cfg.lambda2 = 0.1;
    CHECK(sar_total_loss(tape, ce, aux, p2a, cfg).scalar() == doctest::Approx(1.7));

    cfg.lambda1 = 0.0;
    cfg.lambda2 = 0.0;
    CHECK(sar_total_loss(tape, ce, aux, p2a, cfg).scalar() == 1.0); // pure baseline

    SarConfig defaults;
    CHECK(defaults.lambda1 == 1.0);
    CHECK(defaults.lambda2 == 0.1);
    CHECK(defaults.tau == 0.9);
    CHECK(defaults.delta == 0.8);
    CHECK(defaults.alpha == 0.999);
}
