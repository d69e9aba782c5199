#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sar/errors.hpp"

namespace sar {

// Dense row-major 2-D tensor. Handles share storage (copying a Tensor2D
// aliases the same values/grad buffers), which is what lets parameter
// tensors live in a model while tape closures reference them. Use clone()
// for an independent copy.
class Tensor2D {
public:
    Tensor2D() : data_(std::make_shared<Data>()) {}

    Tensor2D(std::size_t rows, std::size_t cols, bool requires_grad = false)
        : data_(std::make_shared<Data>()) {
        data_->rows = rows;
        data_->cols = cols;
        data_->values.assign(rows * cols, 0.0);
        data_->requires_grad = requires_grad;
        if (requires_grad) data_->grad.assign(rows * cols, 0.0);
    }

    static Tensor2D from_values(std::size_t rows, std::size_t cols, std::vector<double> values,
                                bool requires_grad = false) {
        if (values.size() != rows * cols)
            throw ShapeError("Tensor2D: " + std::to_string(values.size()) + " values for " +
                             std::to_string(rows) + "x" + std::to_string(cols) + " shape");
        Tensor2D t;
        t.data_->rows = rows;
        t.data_->cols = cols;
        t.data_->values = std::move(values);
        t.data_->requires_grad = requires_grad;
        if (requires_grad) t.data_->grad.assign(rows * cols, 0.0);
        return t;
    }

    std::size_t rows() const { return data_->rows; }
    std::size_t cols() const { return data_->cols; }
    std::size_t size() const { return data_->values.size(); }

    double& at(std::size_t r, std::size_t c) { return data_->values[r * data_->cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data_->values[r * data_->cols + c]; }

    std::vector<double>& values() { return data_->values; }
    const std::vector<double>& values() const { return data_->values; }

    bool requires_grad() const { return data_->requires_grad; }
    void set_requires_grad(bool on) {
        data_->requires_grad = on;
        if (on && data_->grad.size() != data_->values.size())
            data_->grad.assign(data_->values.size(), 0.0);
    }

    std::vector<double>& grad() { return data_->grad; }
    const std::vector<double>& grad() const { return data_->grad; }

    void zero_grad() {
        if (data_->requires_grad) data_->grad.assign(data_->values.size(), 0.0);
    }

    // value of a 1x1 tensor
    double scalar() const {
        if (size() != 1) throw ShapeError("scalar() on non-1x1 tensor");
        return data_->values[0];
    }

    bool same_storage(const Tensor2D& o) const { return data_ == o.data_; }

    Tensor2D clone() const {
        Tensor2D t = from_values(rows(), cols(), data_->values, data_->requires_grad);
        return t;
    }

    std::string shape_str() const {
        return std::to_string(rows()) + "x" + std::to_string(cols());
    }

private:
    struct Data {
        std::size_t rows = 0;
        std::size_t cols = 0;
        std::vector<double> values;
        std::vector<double> grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Data> data_;
};

// Records the backward rule of each differentiable op in forward order.
// backward() seeds the loss gradient, runs the rules in reverse (each node
// exactly once; the order is topological by construction) and clears the
// tape. One tape per training run; never shared across threads.
class Tape {
public:
    using BackwardFn = std::function<void()>;

    void record(BackwardFn fn) { ops_.push_back(std::move(fn)); }

    void backward(Tensor2D& loss) {
        if (loss.size() != 1) throw ShapeError("backward: loss must be 1x1");
        if (ops_.empty())
            throw StateError("backward called without recorded forward ops "
                             "(backward may have already consumed the tape)");
        loss.set_requires_grad(true);
        loss.grad()[0] = 1.0;
        std::size_t executed = 0;
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
            (*it)();
            ++executed;
        }
        last_backward_ops_ = executed;
        ops_.clear();
    }

    std::size_t recorded_ops() const { return ops_.size(); }
    std::size_t last_backward_ops() const { return last_backward_ops_; }

private:
    std::vector<BackwardFn> ops_;
    std::size_t last_backward_ops_ = 0;
};

} // namespace sar
