#include "sar/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sar {

namespace {

void require_same_shape(const Tensor2D& a, const Tensor2D& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
}

Tensor2D make_output(std::size_t rows, std::size_t cols, bool taped) {
    Tensor2D out(rows, cols, taped);
    return out;
}

} // namespace

Tensor2D affine(Tape& tape, const Tensor2D& x, const Tensor2D& W, const Tensor2D& b) {
    if (x.cols() != W.rows())
        throw ShapeError("affine: x is " + x.shape_str() + " but W is " + W.shape_str());
    if (b.rows() != 1 || b.cols() != W.cols())
        throw ShapeError("affine: b is " + b.shape_str() + " but W is " + W.shape_str());

    const std::size_t n = x.rows(), in = x.cols(), out_dim = W.cols();
    const bool taped = x.requires_grad() || W.requires_grad() || b.requires_grad();
    Tensor2D y = make_output(n, out_dim, taped);

    const auto& xv = x.values();
    const auto& wv = W.values();
    const auto& bv = b.values();
    auto& yv = y.values();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t o = 0; o < out_dim; ++o) {
            double acc = bv[o];
            for (std::size_t i = 0; i < in; ++i) acc += xv[r * in + i] * wv[i * out_dim + o];
            yv[r * out_dim + o] = acc;
        }
    }

    if (taped) {
        tape.record([x = x, W = W, b = b, y = y]() mutable {
            const std::size_t n = x.rows(), in = x.cols(), out_dim = W.cols();
            const auto& gy = y.grad();
            if (x.requires_grad()) {
                auto& gx = x.grad();
                const auto& wv = W.values();
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t i = 0; i < in; ++i) {
                        double acc = 0.0;
                        for (std::size_t o = 0; o < out_dim; ++o)
                            acc += gy[r * out_dim + o] * wv[i * out_dim + o];
                        gx[r * in + i] += acc;
                    }
            }
            if (W.requires_grad()) {
                auto& gw = W.grad();
                const auto& xv = x.values();
                for (std::size_t i = 0; i < in; ++i)
                    for (std::size_t o = 0; o < out_dim; ++o) {
                        double acc = 0.0;
                        for (std::size_t r = 0; r < n; ++r)
                            acc += xv[r * in + i] * gy[r * out_dim + o];
                        gw[i * out_dim + o] += acc;
                    }
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (std::size_t o = 0; o < out_dim; ++o) {
                    double acc = 0.0;
                    for (std::size_t r = 0; r < n; ++r) acc += gy[r * out_dim + o];
                    gb[o] += acc;
                }
            }
        });
    }
    return y;
}

Tensor2D relu(Tape& tape, const Tensor2D& x) {
    const bool taped = x.requires_grad();
    Tensor2D y = make_output(x.rows(), x.cols(), taped);
    const auto& xv = x.values();
    auto& yv = y.values();
    for (std::size_t i = 0; i < xv.size(); ++i) yv[i] = xv[i] > 0.0 ? xv[i] : 0.0;

    if (taped) {
        tape.record([x = x, y = y]() mutable {
            const auto& gy = y.grad();
            const auto& xv = x.values();
            auto& gx = x.grad();
            for (std::size_t i = 0; i < xv.size(); ++i)
                if (xv[i] > 0.0) gx[i] += gy[i];
        });
    }
    return y;
}

SoftmaxCeResult softmax_ce(Tape& tape, const Tensor2D& logits, const std::vector<int>& labels) {
    const std::size_t n = logits.rows(), c = logits.cols();
    if (n == 0) throw InputError("softmax_ce: empty batch");
    if (labels.size() != n)
        throw ShapeError("softmax_ce: " + std::to_string(labels.size()) + " labels for " +
                         logits.shape_str() + " logits");
    for (std::size_t r = 0; r < n; ++r)
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= c)
            throw InputError("softmax_ce: label " + std::to_string(labels[r]) + " at row " +
                             std::to_string(r) + " outside [0, " + std::to_string(c) + ")");

    Tensor2D probs(n, c, false);
    const auto& lv = logits.values();
    auto& pv = probs.values();
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        double m = lv[r * c];
        for (std::size_t j = 1; j < c; ++j) m = std::max(m, lv[r * c + j]);
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            pv[r * c + j] = std::exp(lv[r * c + j] - m);
            s += pv[r * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) pv[r * c + j] /= s;
        const double lse = m + std::log(s);
        total += lse - lv[r * c + static_cast<std::size_t>(labels[r])];
    }

    const bool taped = logits.requires_grad();
    Tensor2D loss = make_output(1, 1, taped);
    loss.values()[0] = total / static_cast<double>(n);

    if (taped) {
        tape.record([logits = logits, probs = probs, labels, loss = loss]() mutable {
            const std::size_t n = logits.rows(), c = logits.cols();
            const double g = loss.grad()[0] / static_cast<double>(n);
            auto& gl = logits.grad();
            const auto& pv = probs.values();
            for (std::size_t r = 0; r < n; ++r) {
                const std::size_t lab = static_cast<std::size_t>(labels[r]);
                for (std::size_t j = 0; j < c; ++j)
                    gl[r * c + j] += g * (pv[r * c + j] - (j == lab ? 1.0 : 0.0));
            }
        });
    }
    return {loss, probs};
}

MseResult mse(Tape& tape, const Tensor2D& a, const Tensor2D& b) {
    return mse(tape, a, b, std::vector<std::uint8_t>(a.rows(), 1));
}

MseResult mse(Tape& tape, const Tensor2D& a, const Tensor2D& b,
              const std::vector<std::uint8_t>& row_mask) {
    require_same_shape(a, b, "mse");
    if (row_mask.size() != a.rows())
        throw ShapeError("mse: mask length " + std::to_string(row_mask.size()) + " for " +
                         std::to_string(a.rows()) + " rows");

    std::size_t kept = 0;
    for (auto m : row_mask) kept += m ? 1 : 0;
    if (kept == 0) {
        Tensor2D zero(1, 1, false);
        return {zero, true};
    }

    const std::size_t cols = a.cols();
    const double denom = static_cast<double>(kept * cols);
    const auto& av = a.values();
    const auto& bv = b.values();
    double total = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        if (!row_mask[r]) continue;
        for (std::size_t j = 0; j < cols; ++j) {
            const double d = av[r * cols + j] - bv[r * cols + j];
            total += d * d;
        }
    }

    const bool taped = a.requires_grad() || b.requires_grad();
    Tensor2D loss = make_output(1, 1, taped);
    loss.values()[0] = total / denom;

    if (taped) {
        tape.record([a = a, b = b, row_mask, loss = loss, denom]() mutable {
            const std::size_t cols = a.cols();
            const double g = loss.grad()[0];
            const auto& av = a.values();
            const auto& bv = b.values();
            for (std::size_t r = 0; r < a.rows(); ++r) {
                if (!row_mask[r]) continue;
                for (std::size_t j = 0; j < cols; ++j) {
                    const double d = 2.0 * (av[r * cols + j] - bv[r * cols + j]) / denom;
                    if (a.requires_grad()) a.grad()[r * cols + j] += g * d;
                    if (b.requires_grad()) b.grad()[r * cols + j] -= g * d;
                }
            }
        });
    }
    return {loss, false};
}

Tensor2D log_softmax_diag(Tape& tape, const Tensor2D& logits) {
    const std::size_t c = logits.rows();
    if (logits.cols() != c)
        throw ShapeError("log_softmax_diag: logits must be square, got " + logits.shape_str());

    Tensor2D probs(c, c, false);
    const bool taped = logits.requires_grad();
    Tensor2D out = make_output(c, 1, taped);
    const auto& lv = logits.values();
    auto& pv = probs.values();
    for (std::size_t r = 0; r < c; ++r) {
        double m = lv[r * c];
        for (std::size_t j = 1; j < c; ++j) m = std::max(m, lv[r * c + j]);
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            pv[r * c + j] = std::exp(lv[r * c + j] - m);
            s += pv[r * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) pv[r * c + j] /= s;
        out.values()[r] = lv[r * c + r] - (m + std::log(s));
    }

    if (taped) {
        tape.record([logits = logits, probs = probs, out = out]() mutable {
            const std::size_t c = logits.rows();
            const auto& go = out.grad();
            const auto& pv = probs.values();
            auto& gl = logits.grad();
            for (std::size_t r = 0; r < c; ++r)
                for (std::size_t j = 0; j < c; ++j)
                    gl[r * c + j] += go[r] * ((j == r ? 1.0 : 0.0) - pv[r * c + j]);
        });
    }
    return out;
}

Tensor2D weighted_neg_sum(Tape& tape, const Tensor2D& x, const std::vector<double>& w) {
    if (x.cols() != 1 || x.rows() != w.size())
        throw ShapeError("weighted_neg_sum: x is " + x.shape_str() + " but " +
                         std::to_string(w.size()) + " weights given");

    const bool taped = x.requires_grad();
    Tensor2D loss = make_output(1, 1, taped);
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) total -= w[i] * x.values()[i];
    loss.values()[0] = total;

    if (taped) {
        tape.record([x = x, w, loss = loss]() mutable {
            const double g = loss.grad()[0];
            for (std::size_t i = 0; i < w.size(); ++i) x.grad()[i] -= g * w[i];
        });
    }
    return loss;
}

Tensor2D sum_all(Tape& tape, const Tensor2D& x) {
    const bool taped = x.requires_grad();
    Tensor2D loss = make_output(1, 1, taped);
    double total = 0.0;
    for (double v : x.values()) total += v;
    loss.values()[0] = total;

    if (taped) {
        tape.record([x = x, loss = loss]() mutable {
            const double g = loss.grad()[0];
            for (auto& gi : x.grad()) gi += g;
        });
    }
    return loss;
}

Tensor2D weighted_sum(Tape& tape, const std::vector<Tensor2D>& terms,
                      const std::vector<double>& coeffs) {
    if (terms.size() != coeffs.size())
        throw ShapeError("weighted_sum: " + std::to_string(terms.size()) + " terms vs " +
                         std::to_string(coeffs.size()) + " coefficients");
    bool taped = false;
    double total = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        total += coeffs[i] * terms[i].scalar();
        taped = taped || terms[i].requires_grad();
    }
    Tensor2D loss = make_output(1, 1, taped);
    loss.values()[0] = total;

    if (taped) {
        tape.record([terms = terms, coeffs, loss = loss]() mutable {
            const double g = loss.grad()[0];
            for (std::size_t i = 0; i < terms.size(); ++i)
                if (terms[i].requires_grad()) terms[i].grad()[0] += g * coeffs[i];
        });
    }
    return loss;
}

} // namespace sar
