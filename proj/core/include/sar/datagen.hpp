#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sar/tensor.hpp"

namespace sar {

// Synthetic long-tailed Gaussian-mixture specification. beta is the
// imbalance factor N_max / N_min; per-class counts follow the exponential
// profile N_c = round(N_max * beta^(-c/(C-1))), clamped to at least 1.
struct GmmSpec {
    std::size_t classes = 10;
    std::size_t input_dim = 16;
    std::size_t n_max = 500;
    double beta = 100.0;
    double class_separation = 3.0; // min pairwise mean distance, in noise sigmas
    double noise_sigma = 1.0;
    std::uint64_t seed = 42;
};

struct LongTailDataset {
    Tensor2D X; // N x input_dim
    std::vector<int> y;
    std::vector<long> class_counts;
    GmmSpec spec;

    std::size_t size() const { return y.size(); }
};

std::vector<long> class_counts(std::size_t classes, std::size_t n_max, double beta);

// Deterministic from the spec: class means are rejection-sampled so every
// pair is at least class_separation * noise_sigma apart, then samples are
// mean + N(0, noise_sigma^2 I). Samples are stored grouped by class.
LongTailDataset sample_gmm(const GmmSpec& spec);
LongTailDataset sample_gmm(const GmmSpec& spec, const std::vector<long>& counts);

// Removes exactly test_per_class samples of every class into a balanced
// test set (seeded choice); the train set keeps the remainder. Throws
// InputError naming the class if one is too small.
std::pair<LongTailDataset, LongTailDataset> split(const LongTailDataset& ds,
                                                  std::size_t test_per_class,
                                                  std::uint64_t seed);

// Long-tailed train set with the exact class_counts profile plus a
// balanced test set, both from one deterministic generation.
std::pair<LongTailDataset, LongTailDataset> make_train_test(const GmmSpec& spec,
                                                            std::size_t test_per_class);

// CSV with header label,f_0..f_{K-1}; values at full precision so the
// round-trip is lossless. The spec goes to a key=value sidecar <path>.meta.
void save_csv(const LongTailDataset& ds, const std::string& path);
LongTailDataset load_csv(const std::string& path);

} // namespace sar
