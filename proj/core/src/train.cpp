#include "sar/train.hpp"

#include <cmath>

#include "sar/errors.hpp"
#include "sar/rng.hpp"

namespace sar {

namespace {

constexpr std::uint64_t kHeadInitStream = 11;
constexpr std::uint64_t kShuffleStream = 12;

Tensor2D gather_rows(const Tensor2D& x, const std::vector<std::size_t>& rows) {
    Tensor2D out(rows.size(), x.cols(), false);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t k = 0; k < x.cols(); ++k) out.at(r, k) = x.at(rows[r], k);
    return out;
}

void check_finite_losses(long step, double ce, double reg, double aux) {
    if (std::isfinite(ce) && std::isfinite(reg) && std::isfinite(aux)) return;
    throw NumericError("step " + std::to_string(step) + ": non-finite loss (ce=" +
                       std::to_string(ce) + ", reg=" + std::to_string(reg) + ", aux=" +
                       std::to_string(aux) + ")");
}

} // namespace

std::string to_string(Mode mode) {
    switch (mode) {
    case Mode::Ce: return "ce";
    case Mode::Cr: return "cr";
    case Mode::Sar: return "sar";
    case Mode::Proto: return "proto";
    }
    return "ce";
}

Mode mode_from_string(const std::string& s) {
    if (s == "ce") return Mode::Ce;
    if (s == "cr") return Mode::Cr;
    if (s == "sar") return Mode::Sar;
    if (s == "proto") return Mode::Proto;
    throw InputError("unknown mode '" + s + "' (expected ce, cr, sar or proto)");
}

EvalResult evaluate(const ClassifierModel& model, const LongTailDataset& ds) {
    Tape scratch;
    Tensor2D feat = model.features(scratch, ds.X);
    Tensor2D logits = model.logits(scratch, feat);

    EvalResult out;
    out.features = Tensor2D::from_values(feat.rows(), feat.cols(), feat.values(), false);
    out.labels = ds.y;
    out.predictions.resize(ds.size());
    std::size_t correct = 0;
    const std::size_t c = logits.cols();
    for (std::size_t r = 0; r < ds.size(); ++r) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j)
            if (logits.at(r, j) > logits.at(r, best)) best = j;
        out.predictions[r] = static_cast<int>(best);
        if (out.predictions[r] == ds.y[r]) ++correct;
    }
    out.accuracy =
        ds.size() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(ds.size());
    return out;
}

TrainResult train(const TrainConfig& cfg, const LongTailDataset& train_ds,
                  const LongTailDataset& test_ds) {
    const std::size_t classes = train_ds.class_counts.size();
    const std::size_t n = train_ds.size();
    if (n == 0) throw InputError("train: empty training set");
    if (cfg.batch_size == 0 || cfg.epochs == 0)
        throw InputError("train: epochs and batch_size must be positive");

    const bool needs_anchors = cfg.mode == Mode::Cr || cfg.mode == Mode::Sar;
    if (needs_anchors) {
        if (cfg.anchors.num_classes() != classes)
            throw InputError("train: anchor set has " +
                             std::to_string(cfg.anchors.num_classes()) + " rows for " +
                             std::to_string(classes) + " classes");
        if (cfg.anchors.dim() != cfg.feature_dim)
            throw InputError("train: anchor dimension " + std::to_string(cfg.anchors.dim()) +
                             " does not match feature dimension " +
                             std::to_string(cfg.feature_dim));
    }

    TrainResult result;
    result.model = init_model(train_ds.X.cols(), cfg.hidden, cfg.feature_dim, classes, cfg.seed);
    if (cfg.mode == Mode::Sar) {
        Rng head_rng(derive_seed(cfg.seed, kHeadInitStream));
        result.head = EmbeddingHead(cfg.feature_dim, cfg.head_hidden, head_rng);
        result.anchor_state = SemanticAnchorState(classes, cfg.feature_dim, cfg.sar.alpha);
    }
    if (cfg.mode == Mode::Proto)
        result.bank = PrototypeState(classes, cfg.feature_dim, cfg.bank_momentum);

    OptimizerState opt_main{cfg.lr, cfg.momentum, cfg.weight_decay, 0, {}};
    OptimizerState opt_aux{cfg.lr, cfg.momentum, cfg.weight_decay, 0, {}};
    auto main_params = result.model.main_params();
    std::vector<Param> aux_params;
    if (cfg.mode == Mode::Sar) {
        aux_params = result.head.params();
        for (auto& p : result.model.classifier_params()) aux_params.push_back(p);
    }

    const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const long total_steps = static_cast<long>(cfg.epochs * steps_per_epoch);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, kShuffleStream));

    long step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += cfg.batch_size, ++step) {
            const std::size_t end = std::min(n, start + cfg.batch_size);
            std::vector<std::size_t> rows(order.begin() + start, order.begin() + end);
            Tensor2D x = gather_rows(train_ds.X, rows);
            std::vector<int> labels(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = train_ds.y[rows[i]];

            const double lr = poly_lr(step, total_steps, cfg.lr, cfg.poly_power);

            StepRecord rec;
            rec.step = step;
            rec.lr = lr;

            // ---- main stream ----
            Tape tape;
            Tensor2D feat = result.model.features(tape, x);
            Tensor2D logits = result.model.logits(tape, feat);
            auto ce = softmax_ce(tape, logits, labels);
            rec.loss_ce = ce.loss.scalar();

            std::vector<Tensor2D> terms{ce.loss};
            std::vector<double> coeffs{1.0};
            double reg_weight = 0.0;
            MseResult reg{Tensor2D(1, 1, false), true};
            switch (cfg.mode) {
            case Mode::Ce: break;
            case Mode::Cr:
                reg_weight = cfg.sar.lambda2;
                if (reg_weight != 0.0) {
                    Tensor2D targets(rows.size(), cfg.feature_dim, false);
                    for (std::size_t i = 0; i < rows.size(); ++i)
                        for (std::size_t k = 0; k < cfg.feature_dim; ++k)
                            targets.at(i, k) =
                                cfg.anchors.A.at(static_cast<std::size_t>(labels[i]), k);
                    reg = mse(tape, feat, targets);
                }
                break;
            case Mode::Sar:
                reg_weight = cfg.sar.lambda2;
                if (reg_weight != 0.0) reg = p2a_loss(tape, feat, labels, result.anchor_state);
                break;
            case Mode::Proto: {
                reg_weight = cfg.proto_lambda;
                PrototypeState batch = compute_prototypes(feat, labels, classes);
                bank_update(result.bank, batch);
                if (reg_weight != 0.0) reg = intra_p2p_loss(tape, feat, labels, result.bank);
                break;
            }
            }
            if (reg_weight != 0.0) {
                rec.loss_reg = reg.loss.scalar();
                rec.reg_empty = reg.empty;
                terms.push_back(reg.loss);
                coeffs.push_back(reg_weight);
            }
            Tensor2D total = weighted_sum(tape, terms, coeffs);
            rec.loss_total = total.scalar(); // sar folds the aux term in below
            check_finite_losses(step, rec.loss_ce, rec.loss_reg, 0.0);

            for (auto& p : main_params) p.tensor.zero_grad();
            tape.backward(total);
            sgd_step(main_params, opt_main, lr);

            // ---- auxiliary stream (sar) ----
            if (cfg.mode == Mode::Sar) {
                Tape aux_tape;
                Tensor2D embedded = result.head.forward(aux_tape, cfg.anchors.A);
                Tensor2D aux_logits = result.model.logits(aux_tape, embedded);
                Tensor2D log_conf = log_softmax_diag(aux_tape, aux_logits);
                std::vector<double> conf(classes);
                for (std::size_t c = 0; c < classes; ++c)
                    conf[c] = std::exp(log_conf.values()[c]);

                rec.conf = conf;
                rec.weights = compute_reweights(conf, cfg.sar.tau);
                rec.loss_aux = aux_ce_value(conf, rec.weights);
                check_finite_losses(step, rec.loss_ce, rec.loss_reg, rec.loss_aux);

                bool any_weight = false;
                for (double w : rec.weights) any_weight = any_weight || w != 0.0;
                rec.aux_frozen = !any_weight;

                Tensor2D gate_embedded = embedded;
                std::vector<double> gate_conf = conf;
                if (cfg.sar.lambda1 != 0.0 && any_weight) {
                    Tensor2D aux_loss = aux_ce_loss(aux_tape, log_conf, rec.weights);
                    Tensor2D scaled = weighted_sum(aux_tape, {aux_loss}, {cfg.sar.lambda1});
                    for (auto& p : aux_params) p.tensor.zero_grad();
                    aux_tape.backward(scaled);
                    sgd_step(aux_params, opt_aux, lr);

                    // semantic anchors track the post-step embeddings
                    Tape scratch;
                    gate_embedded = result.head.forward(scratch, cfg.anchors.A);
                    gate_conf = anchor_confidences(
                        result.model.logits(scratch, gate_embedded));
                }
                rec.conf_gate = gate_conf;
                ema_update(result.anchor_state, gate_embedded, gate_conf, cfg.sar.delta);

                rec.active = result.anchor_state.active;
                rec.initialized = result.anchor_state.initialized;
                rec.head_checksum = result.head.checksum();
                if (cfg.log_anchor_matrices) {
                    rec.embedded = gate_embedded.values();
                    rec.a_hat = result.anchor_state.a_hat.values();
                }
            }

            if (cfg.mode == Mode::Sar)
                rec.loss_total =
                    rec.loss_ce + reg_weight * rec.loss_reg + cfg.sar.lambda1 * rec.loss_aux;

            if (cfg.eval_every > 0 && (step + 1) % static_cast<long>(cfg.eval_every) == 0)
                rec.eval_acc = evaluate(result.model, test_ds).accuracy;

            if (cfg.on_step) cfg.on_step(rec);
            result.records.push_back(std::move(rec));
        }
    }

    result.final_eval = evaluate(result.model, test_ds);
    return result;
}

} // namespace sar
