#pragma once

#include <string>
#include <vector>

#include "sar/tensor.hpp"

namespace sar {

// Sentinel for separability when every point sits on its centroid.
inline constexpr double kSeparabilityCap = 1e9;

struct MetricsReport {
    double overall_acc = 0.0;
    std::vector<double> per_class_acc; // NaN for classes absent from the test set
    double head_acc = 0.0;
    double body_acc = 0.0;
    double tail_acc = 0.0;
    double compactness = 0.0;
    double separability = 0.0;
    Tensor2D dependency; // C x C centroid cosines, NaN off-diagonal where undefined
    std::vector<int> singleton_classes; // classes contributing zero spread
    std::string hbt_rule = "count-tertiles-head-first";
};

struct HbtSummary {
    double head = 0.0;
    double body = 0.0;
    double tail = 0.0;
    std::vector<int> group; // per class: 0 head, 1 body, 2 tail
};

struct ConsistencyScore {
    double mean = 0.0;
    std::vector<double> per_pair; // NaN for excluded (constant) pairs
};

// acc[c] = correct / count; classes absent from the labels get NaN and are
// excluded from all means.
std::vector<double> per_class_accuracy(const std::vector<int>& preds,
                                       const std::vector<int>& labels, std::size_t classes);

// Classes sorted by training count, split into head/body/tail tertiles with
// remainders assigned head-first; with fewer than 3 classes only head and
// tail are populated.
HbtSummary hbt_summary(const std::vector<double>& per_class_acc,
                       const std::vector<long>& class_counts);

// Mean distance of each sample to its class centroid.
double compactness(const Tensor2D& features, const std::vector<int>& labels);

// Min pairwise centroid distance divided by compactness (dimensionless,
// larger is better); kSeparabilityCap when the spread is exactly zero.
double separability(const Tensor2D& features, const std::vector<int>& labels);

// Pairwise cosine similarity of row vectors; zero rows yield NaN
// off-diagonals, the diagonal is always 1.
Tensor2D dependency_matrix(const Tensor2D& rows);

// Mean Pearson correlation between the strict upper triangles of every
// matrix pair; pairs with a constant triangle (or no finite overlap) are
// excluded as NaN.
ConsistencyScore cross_seed_consistency(const std::vector<Tensor2D>& matrices);

MetricsReport compute_metrics(const std::vector<int>& preds, const std::vector<int>& labels,
                              const std::vector<long>& train_class_counts,
                              const Tensor2D& features);

} // namespace sar
