#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sar/anchors.hpp"
#include "sar/datagen.hpp"
#include "sar/model.hpp"
#include "sar/prototypes.hpp"
#include "sar/sar_reg.hpp"

namespace sar {

// What regularizes the features during training:
//   ce    - plain cross-entropy baseline
//   cr    - pull features straight to the raw pre-defined anchors
//   sar   - full semantic-anchor stream (embedding head, reweighted aux
//           cross-entropy, EMA anchors, gated pull)
//   proto - EM-style pull to batch/bank prototypes
enum class Mode { Ce, Cr, Sar, Proto };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);

struct TrainConfig {
    Mode mode = Mode::Ce;
    SarConfig sar;
    double proto_lambda = 0.1;
    double bank_momentum = 0.0;
    AnchorSet anchors; // consumed by cr and sar

    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    double poly_power = 0.9;
    std::size_t epochs = 50;
    std::size_t batch_size = 64;

    std::vector<std::size_t> hidden = {64, 64};
    std::size_t feature_dim = 16;
    std::size_t head_hidden = 0; // 0 -> feature_dim

    std::uint64_t seed = 1;
    std::size_t eval_every = 0; // 0 -> final evaluation only
    bool log_anchor_matrices = true;

    // streamed per finished step, before the next one starts; lets callers
    // persist partial logs when a run aborts
    std::function<void(const struct StepRecord&)> on_step;
};

struct StepRecord {
    long step = 0;
    double lr = 0.0;
    double loss_total = 0.0;
    double loss_ce = 0.0;
    double loss_reg = 0.0; // p2a (sar), anchor mse (cr), p2p (proto), 0 (ce)
    bool reg_empty = false;
    double eval_acc = -1.0; // periodic test accuracy, -1 when not evaluated

    // auxiliary stream, sar only
    double loss_aux = 0.0;
    bool aux_frozen = false; // every confidence above tau: no aux update
    std::vector<double> conf;      // confidences feeding the reweighting
    std::vector<double> weights;   // reweighted aux-CE coefficients
    std::vector<double> conf_gate; // confidences the EMA gate saw
    std::vector<std::uint8_t> active;
    std::vector<std::uint8_t> initialized;
    std::vector<double> embedded; // h(A) rows consumed by the EMA, C*D
    std::vector<double> a_hat;    // semantic anchors after the update, C*D
    std::uint64_t head_checksum = 0;
};

struct EvalResult {
    std::vector<int> predictions;
    std::vector<int> labels;
    Tensor2D features; // N x D, detached
    double accuracy = 0.0;
};

struct TrainResult {
    ClassifierModel model;
    EmbeddingHead head;               // sar
    SemanticAnchorState anchor_state; // sar
    PrototypeState bank;              // proto
    std::vector<StepRecord> records;
    EvalResult final_eval;
};

// Deterministic: (config, datasets) fix every bit of the result. One run is
// strictly single-threaded; parallelism belongs at the experiment level.
TrainResult train(const TrainConfig& cfg, const LongTailDataset& train_ds,
                  const LongTailDataset& test_ds);

// Argmax predictions (ties go to the lowest class index) plus the feature
// matrix captured before the classifier.
EvalResult evaluate(const ClassifierModel& model, const LongTailDataset& ds);

} // namespace sar
