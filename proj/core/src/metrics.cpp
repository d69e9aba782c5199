#include "sar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sar/errors.hpp"

namespace sar {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_ignoring_nan(const std::vector<double>& v, const std::vector<int>& group,
                         int which) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (group[i] != which || std::isnan(v[i])) continue;
        sum += v[i];
        ++count;
    }
    return count == 0 ? kNaN : sum / static_cast<double>(count);
}

// centroid per class; returns (centroids, counts)
std::pair<Tensor2D, std::vector<long>> class_centroids(const Tensor2D& features,
                                                       const std::vector<int>& labels) {
    int max_label = 0;
    for (int lab : labels) max_label = std::max(max_label, lab);
    const std::size_t c = static_cast<std::size_t>(max_label) + 1, d = features.cols();
    Tensor2D centroids(c, d, false);
    std::vector<long> counts(c, 0);
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const std::size_t lab = static_cast<std::size_t>(labels[r]);
        ++counts[lab];
        for (std::size_t k = 0; k < d; ++k) centroids.at(lab, k) += features.at(r, k);
    }
    for (std::size_t i = 0; i < c; ++i)
        if (counts[i] > 0)
            for (std::size_t k = 0; k < d; ++k)
                centroids.at(i, k) /= static_cast<double>(counts[i]);
    return {centroids, counts};
}

} // namespace

std::vector<double> per_class_accuracy(const std::vector<int>& preds,
                                       const std::vector<int>& labels, std::size_t classes) {
    if (preds.size() != labels.size())
        throw ShapeError("per_class_accuracy: prediction/label count mismatch");
    std::vector<long> total(classes, 0), correct(classes, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int lab = labels[i];
        if (lab < 0 || static_cast<std::size_t>(lab) >= classes)
            throw InputError("per_class_accuracy: label " + std::to_string(lab) +
                             " outside [0, " + std::to_string(classes) + ")");
        ++total[static_cast<std::size_t>(lab)];
        if (preds[i] == lab) ++correct[static_cast<std::size_t>(lab)];
    }
    std::vector<double> acc(classes, kNaN);
    for (std::size_t c = 0; c < classes; ++c)
        if (total[c] > 0) acc[c] = static_cast<double>(correct[c]) / total[c];
    return acc;
}

HbtSummary hbt_summary(const std::vector<double>& per_class_acc,
                       const std::vector<long>& class_counts) {
    const std::size_t c = per_class_acc.size();
    if (class_counts.size() != c)
        throw ShapeError("hbt_summary: counts/accuracy length mismatch");

    std::vector<std::size_t> order(c);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return class_counts[a] > class_counts[b];
    });

    HbtSummary out;
    out.group.assign(c, 2);
    if (c < 3) {
        // head/tail only: the more frequent half is head
        const std::size_t head = (c + 1) / 2;
        for (std::size_t i = 0; i < c; ++i) out.group[order[i]] = i < head ? 0 : 2;
    } else {
        const std::size_t base = c / 3, rem = c % 3;
        const std::size_t head = base + (rem > 0 ? 1 : 0);
        const std::size_t body = base + (rem > 1 ? 1 : 0);
        for (std::size_t i = 0; i < c; ++i)
            out.group[order[i]] = i < head ? 0 : (i < head + body ? 1 : 2);
    }
    out.head = mean_ignoring_nan(per_class_acc, out.group, 0);
    out.body = mean_ignoring_nan(per_class_acc, out.group, 1);
    out.tail = mean_ignoring_nan(per_class_acc, out.group, 2);
    return out;
}

double compactness(const Tensor2D& features, const std::vector<int>& labels) {
    if (features.rows() != labels.size())
        throw ShapeError("compactness: feature/label count mismatch");
    if (labels.empty()) return 0.0;
    auto [centroids, counts] = class_centroids(features, labels);
    const std::size_t d = features.cols();
    double sum = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const std::size_t lab = static_cast<std::size_t>(labels[r]);
        double dist2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = features.at(r, k) - centroids.at(lab, k);
            dist2 += diff * diff;
        }
        sum += std::sqrt(dist2);
    }
    return sum / static_cast<double>(labels.size());
}

double separability(const Tensor2D& features, const std::vector<int>& labels) {
    auto [centroids, counts] = class_centroids(features, labels);
    const std::size_t c = centroids.rows(), d = centroids.cols();
    std::size_t present = 0;
    for (long cnt : counts) present += cnt > 0 ? 1 : 0;
    if (present < 2) throw InputError("separability: need at least 2 classes present");

    double min_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < c; ++i) {
        if (counts[i] == 0) continue;
        for (std::size_t j = i + 1; j < c; ++j) {
            if (counts[j] == 0) continue;
            double dist2 = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = centroids.at(i, k) - centroids.at(j, k);
                dist2 += diff * diff;
            }
            min_dist = std::min(min_dist, std::sqrt(dist2));
        }
    }
    const double spread = compactness(features, labels);
    if (spread == 0.0) return kSeparabilityCap;
    return min_dist / spread;
}

Tensor2D dependency_matrix(const Tensor2D& rows) {
    const std::size_t c = rows.rows(), d = rows.cols();
    std::vector<double> norms(c);
    for (std::size_t i = 0; i < c; ++i) {
        double n = 0.0;
        for (std::size_t k = 0; k < d; ++k) n += rows.at(i, k) * rows.at(i, k);
        norms[i] = std::sqrt(n);
    }
    Tensor2D out(c, c, false);
    for (std::size_t i = 0; i < c; ++i) {
        out.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < c; ++j) {
            double value = kNaN;
            if (norms[i] > 0.0 && norms[j] > 0.0) {
                double dot = 0.0;
                for (std::size_t k = 0; k < d; ++k) dot += rows.at(i, k) * rows.at(j, k);
                value = dot / (norms[i] * norms[j]);
            }
            out.at(i, j) = value;
            out.at(j, i) = value;
        }
    }
    return out;
}

ConsistencyScore cross_seed_consistency(const std::vector<Tensor2D>& matrices) {
    if (matrices.size() < 2)
        throw InputError("cross_seed_consistency: need at least 2 matrices");
    const std::size_t c = matrices.front().rows();
    for (const auto& m : matrices)
        if (m.rows() != c || m.cols() != c)
            throw ShapeError("cross_seed_consistency: matrices must share the same C");

    auto upper = [c](const Tensor2D& m) {
        std::vector<double> v;
        v.reserve(c * (c - 1) / 2);
        for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = i + 1; j < c; ++j) v.push_back(m.at(i, j));
        return v;
    };

    ConsistencyScore score;
    double sum = 0.0;
    std::size_t valid = 0;
    for (std::size_t a = 0; a < matrices.size(); ++a) {
        const auto va = upper(matrices[a]);
        for (std::size_t b = a + 1; b < matrices.size(); ++b) {
            const auto vb = upper(matrices[b]);
            // Pearson over entries finite in both triangles
            double ma = 0.0, mb = 0.0;
            std::size_t k = 0;
            for (std::size_t i = 0; i < va.size(); ++i) {
                if (std::isnan(va[i]) || std::isnan(vb[i])) continue;
                ma += va[i];
                mb += vb[i];
                ++k;
            }
            double r = kNaN;
            if (k >= 2) {
                ma /= static_cast<double>(k);
                mb /= static_cast<double>(k);
                double cov = 0.0, sa = 0.0, sb = 0.0;
                for (std::size_t i = 0; i < va.size(); ++i) {
                    if (std::isnan(va[i]) || std::isnan(vb[i])) continue;
                    cov += (va[i] - ma) * (vb[i] - mb);
                    sa += (va[i] - ma) * (va[i] - ma);
                    sb += (vb[i] - mb) * (vb[i] - mb);
                }
                if (sa > 0.0 && sb > 0.0) r = cov / std::sqrt(sa * sb);
            }
            score.per_pair.push_back(r);
            if (!std::isnan(r)) {
                sum += r;
                ++valid;
            }
        }
    }
    score.mean = valid == 0 ? kNaN : sum / static_cast<double>(valid);
    return score;
}

MetricsReport compute_metrics(const std::vector<int>& preds, const std::vector<int>& labels,
                              const std::vector<long>& train_class_counts,
                              const Tensor2D& features) {
    MetricsReport report;
    const std::size_t classes = train_class_counts.size();

    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (preds[i] == labels[i]) ++correct;
    report.overall_acc =
        labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());

    report.per_class_acc = per_class_accuracy(preds, labels, classes);
    auto hbt = hbt_summary(report.per_class_acc, train_class_counts);
    report.head_acc = hbt.head;
    report.body_acc = hbt.body;
    report.tail_acc = hbt.tail;

    report.compactness = compactness(features, labels);
    report.separability = separability(features, labels);

    auto [centroids, counts] = class_centroids(features, labels);
    // pad to the full class count so the matrix is always C x C
    Tensor2D padded(classes, features.cols(), false);
    for (std::size_t i = 0; i < std::min(classes, centroids.rows()); ++i)
        if (counts[i] > 0)
            for (std::size_t k = 0; k < features.cols(); ++k)
                padded.at(i, k) = centroids.at(i, k);
    report.dependency = dependency_matrix(padded);

    for (std::size_t i = 0; i < std::min(classes, counts.size()); ++i)
        if (counts[i] == 1) report.singleton_classes.push_back(static_cast<int>(i));
    return report;
}

} // namespace sar
