// Acceptance suite: one check per release criterion, each printed as a
// single PASS/FAIL line. Exits non-zero if any criterion fails.
//
// argv[1] (optional): path to the CLI binary, needed for the
// reproducibility criterion; it is resolved by ctest automatically.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sar/anchors.hpp"
#include "sar/datagen.hpp"
#include "sar/experiment.hpp"
#include "sar/gradcheck.hpp"
#include "sar/metrics.hpp"
#include "sar/model.hpp"
#include "sar/serialize.hpp"
#include "sar/train.hpp"

using namespace sar;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int index, const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] %2d %-28s %s\n", ok ? "PASS" : "FAIL", index, name.c_str(),
                detail.c_str());
    if (!ok) ++g_failures;
}

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// The experiment defaults used by the statistical criteria: the long-tailed
// C=10 spec with a balanced 50-per-class test set.
ExperimentConfig default_experiment() {
    ExperimentConfig cfg;
    cfg.seeds = {1, 2, 3, 4, 5};
    return cfg;
}

// ---------------------------------------------------------------------------
// 1. gradient correctness of the full per-mode step loss on a toy instance
// ---------------------------------------------------------------------------
void criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t C = 3, D = 4, N = 12;

    GmmSpec spec;
    spec.classes = C;
    spec.input_dim = 5;
    spec.n_max = N / C;
    spec.beta = 1.0;
    spec.seed = 2024;
    auto ds = sample_gmm(spec);

    auto anchors = generate_anchors(AnchorSource::ND, C, D, 7);
    Rng head_rng(123);
    EmbeddingHead head(D, 0, head_rng);

    // a semantic-anchor state with every class active, and batch prototypes,
    // both frozen targets for the differentiation check
    auto model = init_model(spec.input_dim, {6}, D, C, 9);
    SemanticAnchorState state(C, D, 0.999);
    {
        Tape t;
        Tensor2D emb = head.forward(t, anchors.A);
        ema_update(state, emb, std::vector<double>(C, 0.95), 0.8);
    }
    PrototypeState protos;
    {
        Tape t;
        protos = compute_prototypes(model.features(t, ds.X), ds.y, C);
    }

    SarConfig sar_cfg; // paper defaults
    double worst_overall = 0.0;
    std::string detail;

    for (Mode mode : {Mode::Ce, Mode::Cr, Mode::Sar, Mode::Proto}) {
        // weights of the aux term are computed once at the base point and
        // then held constant, matching the training-step semantics
        std::vector<double> aux_w;
        if (mode == Mode::Sar) {
            Tape t;
            Tensor2D emb = head.forward(t, anchors.A);
            aux_w = compute_reweights(anchor_confidences(model.logits(t, emb)), sar_cfg.tau);
        }

        auto forward = [&](Tape& tape) -> Tensor2D {
            Tensor2D feat = model.features(tape, ds.X);
            Tensor2D ce = softmax_ce(tape, model.logits(tape, feat), ds.y).loss;
            std::vector<Tensor2D> terms{ce};
            std::vector<double> coeffs{1.0};
            switch (mode) {
            case Mode::Ce: break;
            case Mode::Cr: {
                Tensor2D targets(ds.size(), D, false);
                for (std::size_t r = 0; r < ds.size(); ++r)
                    for (std::size_t k = 0; k < D; ++k)
                        targets.at(r, k) = anchors.A.at(static_cast<std::size_t>(ds.y[r]), k);
                terms.push_back(mse(tape, feat, targets).loss);
                coeffs.push_back(sar_cfg.lambda2);
                break;
            }
            case Mode::Sar: {
                terms.push_back(p2a_loss(tape, feat, ds.y, state).loss);
                coeffs.push_back(sar_cfg.lambda2);
                Tensor2D emb = head.forward(tape, anchors.A);
                Tensor2D log_conf = log_softmax_diag(tape, model.logits(tape, emb));
                terms.push_back(aux_ce_loss(tape, log_conf, aux_w));
                coeffs.push_back(sar_cfg.lambda1);
                break;
            }
            case Mode::Proto:
                terms.push_back(intra_p2p_loss(tape, feat, ds.y, protos).loss);
                coeffs.push_back(sar_cfg.lambda2);
                break;
            }
            return weighted_sum(tape, terms, coeffs);
        };

        std::vector<Param> params = model.main_params();
        if (mode == Mode::Sar)
            for (auto& p : head.params()) params.push_back(p);

        for (auto& p : params) p.tensor.zero_grad();
        Tape tape;
        Tensor2D loss = forward(tape);
        tape.backward(loss);

        std::vector<Tensor2D> tensors;
        for (auto& p : params) tensors.push_back(p.tensor);
        auto loss_fn = [&]() {
            Tape t;
            return forward(t).scalar();
        };
        const double err = finite_diff_check(loss_fn, tensors, 1e-4);
        worst_overall = std::max(worst_overall, err);
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%s=%.2e ", to_string(mode).c_str(), err);
        detail += buf;
    }

    const double secs = elapsed_s(t0);
    report(1, "gradient-correctness", worst_overall <= 1e-4 && secs < 30.0,
           detail + "(" + std::to_string(secs).substr(0, 5) + "s)");
}

// ---------------------------------------------------------------------------
// 2. anchor geometry
// ---------------------------------------------------------------------------
void criterion_anchor_geometry() {
    bool ok = true;
    std::string detail;

    for (std::size_t C : {2u, 3u, 10u}) {
        auto set = generate_anchors(AnchorSource::MES, C, 16, 11);
        auto cosine = pairwise_cosine(set);
        const double expect = -1.0 / static_cast<double>(C - 1);
        for (std::size_t i = 0; i < C; ++i)
            for (std::size_t j = 0; j < C; ++j)
                if (i != j) ok = ok && std::abs(cosine.at(i, j) - expect) <= 1e-9;
        detail += "mes" + std::to_string(C) + " ";
    }

    auto om = generate_anchors(AnchorSource::OM, 8, 16, 13);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < 16; ++k) dot += om.A.at(i, k) * om.A.at(j, k);
            ok = ok && std::abs(dot - (i == j ? 1.0 : 0.0)) <= 1e-9;
        }

    for (auto source : {AnchorSource::ND, AnchorSource::OM, AnchorSource::MES}) {
        auto a = generate_anchors(source, 6, 16, 99);
        auto b = generate_anchors(source, 6, 16, 99);
        ok = ok && a.A.values() == b.A.values();
    }

    report(2, "anchor-geometry", ok, detail + "gram+regen");
}

// ---------------------------------------------------------------------------
// 3. reweighting properties and the worked example
// ---------------------------------------------------------------------------
void criterion_reweighting() {
    bool ok = true;

    Rng rng(31337);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t C = 2 + rng.index(10);
        std::vector<double> conf(C);
        for (auto& v : conf) v = 0.001 + 0.998 * rng.uniform();
        const double tau = 0.2 + 0.75 * rng.uniform();
        auto w = compute_reweights(conf, tau);

        double sum = 0.0;
        bool any = false;
        for (std::size_t i = 0; i < C; ++i) {
            if (conf[i] > tau) ok = ok && w[i] == 0.0;
            else {
                ok = ok && w[i] > 0.0;
                sum += w[i];
                any = true;
            }
            for (std::size_t j = 0; j < C; ++j)
                if (conf[i] <= tau && conf[j] <= tau && conf[i] < conf[j] - 1e-12)
                    ok = ok && w[i] > w[j];
        }
        if (any) ok = ok && std::abs(sum - 1.0) <= 1e-9;
    }

    auto w = compute_reweights({0.95, 0.5, 0.2}, 0.9);
    ok = ok && w[0] == 0.0 && std::abs(w[1] - 0.3010) <= 1e-4 && std::abs(w[2] - 0.6990) <= 1e-4;

    report(3, "reweighting", ok,
           "500 random suites + worked example (" + format_full(w[1]).substr(0, 7) + "," +
               format_full(w[2]).substr(0, 7) + ")");
}

// ---------------------------------------------------------------------------
// 4. EMA recurrence replay from logs
// ---------------------------------------------------------------------------
void criterion_ema_replay() {
    auto cfg = default_experiment();
    cfg.epochs = 12; // enough steps to cross gate transitions
    auto [train_ds, test_ds] = cfg.load_or_generate_data();
    auto art = run_training(cfg, Mode::Sar, 1, train_ds, test_ds);

    const std::size_t C = cfg.classes, D = cfg.feature_dim;
    const double alpha = cfg.ema_alpha;

    bool ok = !art.result.records.empty();
    // independent replay of a_hat_t = alpha a_hat_{t-1} + (1-alpha) h_t
    std::vector<double> replay(C * D, 0.0);
    std::vector<bool> seen(C, false);
    std::vector<double> prev_a_hat;
    for (const auto& rec : art.result.records) {
        ok = ok && rec.embedded.size() == C * D && rec.a_hat.size() == C * D;
        if (!ok) break;
        for (std::size_t c = 0; c < C; ++c) {
            const bool gated = rec.conf_gate[c] > cfg.delta;
            if (gated && !seen[c]) {
                for (std::size_t k = 0; k < D; ++k)
                    replay[c * D + k] = rec.embedded[c * D + k];
                seen[c] = true;
            } else if (gated) {
                for (std::size_t k = 0; k < D; ++k)
                    replay[c * D + k] =
                        alpha * replay[c * D + k] + (1.0 - alpha) * rec.embedded[c * D + k];
            } else if (!prev_a_hat.empty()) {
                // gated-off classes may not move between consecutive logs
                for (std::size_t k = 0; k < D; ++k)
                    ok = ok && rec.a_hat[c * D + k] == prev_a_hat[c * D + k];
            }
        }
        for (std::size_t i = 0; i < C * D; ++i) ok = ok && replay[i] == rec.a_hat[i];
        prev_a_hat = rec.a_hat;
        if (!ok) break;
    }

    report(4, "ema-recurrence-replay", ok,
           std::to_string(art.result.records.size()) + " steps replayed exactly");
}

// ---------------------------------------------------------------------------
// 5. prototype brute-force oracle
// ---------------------------------------------------------------------------
void criterion_prototype_oracle() {
    Rng rng(8080);
    bool ok = true;
    for (int trial = 0; trial < 200 && ok; ++trial) {
        const std::size_t n = 1 + rng.index(100);
        const std::size_t c = 1 + rng.index(10);
        const std::size_t d = 1 + rng.index(6);
        Tensor2D f(n, d, false);
        for (auto& v : f.values()) v = rng.uniform(-3.0, 3.0);
        std::vector<int> labels(n);
        for (auto& lab : labels) lab = static_cast<int>(rng.index(c));

        auto state = compute_prototypes(f, labels, c);

        for (std::size_t cls = 0; cls < c && ok; ++cls) {
            double count = 0.0;
            std::vector<double> sum(d, 0.0);
            for (std::size_t r = 0; r < n; ++r) {
                if (static_cast<std::size_t>(labels[r]) != cls) continue;
                count += 1.0;
                for (std::size_t k = 0; k < d; ++k) sum[k] += f.at(r, k);
            }
            if (count == 0.0) {
                ok = ok && !state.present[cls];
                continue;
            }
            for (std::size_t k = 0; k < d; ++k)
                ok = ok && state.P.at(cls, k) == sum[k] / count;
        }
    }
    report(5, "prototype-oracle", ok, "200 random instances, exact match");
}

// ---------------------------------------------------------------------------
// 6. degenerate-mode equivalence
// ---------------------------------------------------------------------------
void criterion_degenerate_modes() {
    auto cfg = default_experiment();
    cfg.epochs = 6;
    auto [train_ds, test_ds] = cfg.load_or_generate_data();

    auto ce_cfg = cfg.train_config(Mode::Ce, 3);
    auto sar_cfg = cfg.train_config(Mode::Sar, 3);
    sar_cfg.sar.lambda1 = 0.0;
    sar_cfg.sar.lambda2 = 0.0;

    auto ce_run = train(ce_cfg, train_ds, test_ds);
    auto sar_run = train(sar_cfg, train_ds, test_ds);

    bool ok = true;
    auto ce_params = ce_run.model.main_params();
    auto sar_params = sar_run.model.main_params();
    for (std::size_t i = 0; i < ce_params.size(); ++i)
        ok = ok && ce_params[i].tensor.values() == sar_params[i].tensor.values();
    const bool bitwise = ok;

    auto cr_cfg = cfg.train_config(Mode::Cr, 3);
    auto cr_run = train(cr_cfg, train_ds, test_ds);
    double worst = 0.0;
    for (const auto& rec : cr_run.records)
        worst = std::max(worst,
                         std::abs(rec.loss_total - (rec.loss_ce + cfg.lambda2 * rec.loss_reg)));
    ok = ok && worst <= 1e-9;

    report(6, "degenerate-modes", ok,
           std::string(bitwise ? "sar(0,0)==ce bitwise" : "sar(0,0) diverged") +
               ", cr residual " + format_full(worst).substr(0, 8));
}

// shared runner for criteria 7 and 8
struct SweepResults {
    std::map<std::string, std::vector<RunArtifacts>> by_mode;
    double seconds = 0.0;
};

SweepResults run_default_sweep() {
    const auto t0 = std::chrono::steady_clock::now();
    auto cfg = default_experiment();
    auto [train_ds, test_ds] = cfg.load_or_generate_data();
    SweepResults out;
    for (const char* mode_name : {"ce", "sar", "proto"})
        for (std::uint64_t seed : cfg.seeds)
            out.by_mode[mode_name].push_back(
                run_training(cfg, mode_from_string(mode_name), seed, train_ds, test_ds));
    out.seconds = elapsed_s(t0);
    return out;
}

// ---------------------------------------------------------------------------
// 7. long-tail directional claim: sar beats ce on tail accuracy and
//    compactness, paired over seeds
// ---------------------------------------------------------------------------
void criterion_long_tail(const SweepResults& sweep) {
    const auto& ce = sweep.by_mode.at("ce");
    const auto& sar_runs = sweep.by_mode.at("sar");

    double ce_tail = 0.0, sar_tail = 0.0, ce_comp = 0.0, sar_comp = 0.0;
    int tail_wins = 0, comp_wins = 0;
    const std::size_t n = ce.size();
    for (std::size_t i = 0; i < n; ++i) {
        ce_tail += ce[i].metrics.tail_acc;
        sar_tail += sar_runs[i].metrics.tail_acc;
        ce_comp += ce[i].metrics.compactness;
        sar_comp += sar_runs[i].metrics.compactness;
        if (sar_runs[i].metrics.tail_acc > ce[i].metrics.tail_acc) ++tail_wins;
        if (sar_runs[i].metrics.compactness < ce[i].metrics.compactness) ++comp_wins;
    }
    ce_tail /= n;
    sar_tail /= n;
    ce_comp /= n;
    sar_comp /= n;

    const bool ok = sar_tail > ce_tail && sar_comp < ce_comp && tail_wins * 5 >= 4 * (int)n &&
                    sweep.seconds <= 600.0;
    std::ostringstream detail;
    detail.precision(4);
    detail << "tail " << ce_tail << "->" << sar_tail << " (wins " << tail_wins << "/" << n
           << "), compactness " << ce_comp << "->" << sar_comp << " (wins " << comp_wins << "/"
           << n << "), " << (int)sweep.seconds << "s";
    report(7, "long-tail-direction", ok, detail.str());
}

// ---------------------------------------------------------------------------
// 8. consistency claim: semantic-anchor dependencies are at least as
//    consistent across seeds as EM-prototype dependencies
// ---------------------------------------------------------------------------
void criterion_consistency(const SweepResults& sweep) {
    std::vector<Tensor2D> sar_deps, proto_deps;
    for (const auto& art : sweep.by_mode.at("sar")) sar_deps.push_back(art.rep_dependency);
    for (const auto& art : sweep.by_mode.at("proto")) proto_deps.push_back(art.rep_dependency);

    const auto sar_score = cross_seed_consistency(sar_deps);
    const auto proto_score = cross_seed_consistency(proto_deps);
    const bool ok = !std::isnan(sar_score.mean) && !std::isnan(proto_score.mean) &&
                    sar_score.mean >= proto_score.mean;

    std::ostringstream detail;
    detail.precision(4);
    detail << "sar " << sar_score.mean << " vs proto " << proto_score.mean;
    report(8, "cross-seed-consistency", ok, detail.str());
}

// ---------------------------------------------------------------------------
// 9. aux-freeze behavior on the default sar run
// ---------------------------------------------------------------------------
void criterion_aux_freeze(const SweepResults& sweep) {
    const auto& records = sweep.by_mode.at("sar").front().result.records;
    const std::size_t total = records.size();

    // a suffix where >90% of steps have every confidence above tau
    bool found = false;
    std::size_t from = 0;
    std::size_t frozen_suffix = 0;
    for (std::size_t t = total; t-- > 0;) {
        if (records[t].aux_frozen) ++frozen_suffix;
        const std::size_t len = total - t;
        if (10 * frozen_suffix > 9 * len && len >= 10) {
            found = true;
            from = t;
        }
    }

    // within the suffix, frozen steps leave the head bit-identical
    bool head_stable = true;
    for (std::size_t t = std::max<std::size_t>(from, 1); t < total; ++t)
        if (records[t].aux_frozen)
            head_stable = head_stable &&
                          records[t].head_checksum == records[t - 1].head_checksum;

    std::size_t frozen_total = 0;
    for (const auto& rec : records) frozen_total += rec.aux_frozen ? 1 : 0;

    report(9, "aux-freeze", found && head_stable,
           "frozen " + std::to_string(frozen_total) + "/" + std::to_string(total) +
               " steps, stable suffix from step " + std::to_string(from));
}

// ---------------------------------------------------------------------------
// 10. reproducibility: two identical compare invocations, identical trees
// ---------------------------------------------------------------------------
void criterion_reproducibility(const std::string& cli_path) {
    if (cli_path.empty()) {
        report(10, "reproducibility", false, "CLI path not provided");
        return;
    }
    const auto base = fs::temp_directory_path() / "sar_acceptance_repro";
    fs::remove_all(base);
    fs::create_directories(base);

    // same configuration both times, including the output tree
    const std::string out = (base / "tree").string();
    auto invoke = [&](const std::string& log) {
        std::ostringstream cmd;
        cmd << '"' << cli_path << '"'
            << " compare --set seeds=1,2 --set modes=ce,sar --set epochs=4"
            << " --set output_dir=" << out << " > " << (base / log).string() << " 2>&1";
        return std::system(cmd.str().c_str());
    };

    const int rc1 = invoke("stdout1.txt");
    std::uint64_t h1 = rc1 == 0 ? tree_checksum(out) : 0;
    const int rc2 = invoke("stdout2.txt");
    std::uint64_t h2 = rc2 == 0 ? tree_checksum(out) : 0;
    bool ok = rc1 == 0 && rc2 == 0 && h1 == h2;
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h1));
    report(10, "reproducibility", ok,
           ok ? "tree checksum " + std::string(hex) + " twice"
              : "exit codes " + std::to_string(rc1) + "/" + std::to_string(rc2) +
                    (rc1 == 0 && rc2 == 0 ? " tree mismatch" : ""));
    fs::remove_all(base);
}

} // namespace

int main(int argc, char** argv) {
    const std::string cli_path = argc > 1 ? argv[1] : "";

    criterion_gradients();
    criterion_anchor_geometry();
    criterion_reweighting();
    criterion_ema_replay();
    criterion_prototype_oracle();
    criterion_degenerate_modes();

    auto sweep = run_default_sweep();
    criterion_long_tail(sweep);
    criterion_consistency(sweep);
    criterion_aux_freeze(sweep);

    criterion_reproducibility(cli_path);

    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
