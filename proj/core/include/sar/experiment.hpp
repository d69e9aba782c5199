#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sar/datagen.hpp"
#include "sar/metrics.hpp"
#include "sar/train.hpp"

namespace sar {

// Flat key=value experiment configuration. Every field has a default; the
// SAR hyperparameters ship at the method's standard settings. Unknown keys
// are rejected.
struct ExperimentConfig {
    // data
    std::size_t classes = 10;
    std::size_t input_dim = 16;
    std::size_t n_max = 500;
    double beta = 100.0;
    double class_separation = 3.0;
    double noise_sigma = 1.0;
    std::uint64_t data_seed = 42;
    std::size_t test_per_class = 50;
    std::string data_dir; // empty: generate inline from the spec above

    // model
    std::size_t feature_dim = 16;
    std::vector<std::size_t> hidden = {64, 64};
    // wide enough that the random projection of the shared anchors
    // concentrates; narrow heads scramble the anchor geometry per seed
    std::size_t head_hidden = 128;

    // training
    std::string mode = "sar";
    std::size_t epochs = 60;
    std::size_t batch_size = 64;
    std::uint64_t seed = 1;
    std::size_t eval_every = 0;
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    double poly_power = 0.9;

    // sar stream
    double lambda1 = 1.0;
    double lambda2 = 0.1;
    double tau = 0.9;
    double delta = 0.8;
    double ema_alpha = 0.999;
    std::string anchor_source = "nd";
    long long anchor_seed = -1; // -1: derived from data_seed, shared across run seeds

    // prototype baseline
    double proto_lambda = -1.0; // -1: mirror lambda2
    double bank_momentum = 0.0; // 0: plain batch prototypes, no memory bank

    // experiment sweep
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::vector<std::string> modes = {"ce", "sar", "proto"};
    std::string output_dir = "out";
    bool log_anchors = true;

    void set(const std::string& key, const std::string& value);
    std::string echo() const;

    // every accepted key, in echo order
    static const std::vector<std::string>& keys();

    GmmSpec gmm_spec() const;
    std::uint64_t resolved_anchor_seed() const;
    double resolved_proto_lambda() const { return proto_lambda < 0.0 ? lambda2 : proto_lambda; }
    TrainConfig train_config(Mode m, std::uint64_t run_seed) const;
    std::pair<LongTailDataset, LongTailDataset> load_or_generate_data() const;
};

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides);

struct RunArtifacts {
    TrainResult result;
    MetricsReport metrics;
    // representation whose pairwise-cosine stability the mode is judged by:
    // semantic anchors (sar), bank prototypes (proto), feature centroids
    // otherwise
    Tensor2D representation;
    Tensor2D rep_dependency;
};

RunArtifacts run_training(const ExperimentConfig& cfg, Mode m, std::uint64_t run_seed,
                          const LongTailDataset& train, const LongTailDataset& test,
                          const std::function<void(const StepRecord&)>& on_step = nullptr);

// Writes metrics.json, trainlog.jsonl, run_config.txt and the mode's
// representation CSVs into dir.
void write_run_dir(const std::string& dir, const ExperimentConfig& cfg, Mode m,
                   std::uint64_t run_seed, const RunArtifacts& art);

struct RunRow {
    std::string mode;
    std::uint64_t seed = 0;
    MetricsReport metrics;
};

struct CompareSummary {
    std::vector<RunRow> rows;
    std::map<std::string, ConsistencyScore> consistency; // per mode
};

// Seed-swept mode comparison. Requires >= 2 seeds (consistency is part of
// the report). Writes the full output tree under cfg.output_dir and is
// byte-identical across reruns of the same config.
CompareSummary run_compare(const ExperimentConfig& cfg);

} // namespace sar
