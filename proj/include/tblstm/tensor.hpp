#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tblstm/common.hpp"

namespace tblstm {

// Dense row-major tensor with an attached gradient buffer. Tensors are cheap
// shared handles: copying a Tensor aliases the same storage, which is what
// lets backward closures accumulate into the gradients the optimizer sees.
// Slices and reshapes copy; there is no view aliasing.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int64_t> shape) {
        Tensor t;
        t.d_ = std::make_shared<Data>();
        t.d_->shape = std::move(shape);
        t.d_->values.assign(count(t.d_->shape), T(0));
        return t;
    }

    static Tensor full(std::vector<int64_t> shape, T value) {
        Tensor t = zeros(std::move(shape));
        for (auto& v : t.d_->values) v = value;
        return t;
    }

    static Tensor from(std::vector<int64_t> shape, std::vector<T> values) {
        if (count(shape) != static_cast<int64_t>(values.size()))
            throw ShapeError("tensor init: shape " + shape_str(shape) + " wants " +
                             std::to_string(count(shape)) + " values, got " +
                             std::to_string(values.size()));
        Tensor t;
        t.d_ = std::make_shared<Data>();
        t.d_->shape = std::move(shape);
        t.d_->values = std::move(values);
        return t;
    }

    static Tensor scalar(T value) { return from({1}, {value}); }

    bool defined() const { return d_ != nullptr; }
    const std::vector<int64_t>& shape() const { return d_->shape; }
    int64_t ndim() const { return static_cast<int64_t>(d_->shape.size()); }
    int64_t dim(int64_t i) const { return d_->shape[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(d_->values.size()); }

    std::span<T> values() { return {d_->values.data(), d_->values.size()}; }
    std::span<const T> values() const { return {d_->values.data(), d_->values.size()}; }

    T item() const {
        if (numel() != 1)
            throw ContractError("item(): tensor " + shape_str(shape()) + " is not a scalar");
        return d_->values[0];
    }

    T at(int64_t r, int64_t c) const {  // 2-d convenience
        return d_->values[static_cast<size_t>(r * dim(1) + c)];
    }

    bool requires_grad() const { return d_->requires_grad; }
    Tensor& set_requires_grad(bool v) {
        d_->requires_grad = v;
        return *this;
    }

    bool has_grad() const { return !d_->grad.empty(); }

    // Materializes a zero gradient buffer on first use. Shallow-const: the
    // tensor is a shared handle, so backward closures holding const copies
    // may still accumulate into the gradient they all share.
    std::span<T> grad() const {
        if (d_->grad.empty()) d_->grad.assign(d_->values.size(), T(0));
        return {d_->grad.data(), d_->grad.size()};
    }

    std::span<const T> grad_view() const { return {d_->grad.data(), d_->grad.size()}; }

    void zero_grad() { d_->grad.clear(); }

    uint64_t epoch() const { return d_->epoch; }
    void stamp(uint64_t e) { d_->epoch = e; }

    // Identity of the underlying storage; tied parameters share it.
    const void* storage_id() const { return d_.get(); }

    void check_finite(const char* op) const {
        for (T v : d_->values)
            if (!std::isfinite(static_cast<double>(v)))
                throw NumericError(std::string(op) + ": non-finite value in output " +
                                   shape_str(shape()));
    }

    static int64_t count(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (int64_t d : shape) {
            if (d <= 0) throw ShapeError("non-positive dimension in " + shape_str(shape));
            n *= d;
        }
        return n;
    }

private:
    struct Data {
        std::vector<int64_t> shape;
        std::vector<T> values;
        std::vector<T> grad;  // empty until materialized
        bool requires_grad = false;
        uint64_t epoch = 0;  // tape epoch that produced this tensor; 0 for leaves
    };
    std::shared_ptr<Data> d_;
};

// Records one training step's operations in execution order (which is a
// topological order by construction) and replays their backward rules in
// reverse. One tape per step, built and consumed on a single thread. Tapes
// nest: constructing one makes it current for the thread until destroyed.
template <typename T>
class Tape {
public:
    Tape() : prev_(current_), epoch_(next_epoch_.fetch_add(1)) { current_ = this; }
    ~Tape() { current_ = prev_; }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* current() { return current_; }

    uint64_t epoch() const { return epoch_; }
    size_t size() const { return nodes_.size(); }

    void record(std::function<void()> backward_rule) { nodes_.push_back(std::move(backward_rule)); }

    // Seeds d(loss)/d(loss) = 1 and visits every recorded node exactly once,
    // newest first. Gradients accumulate additively across multiple uses.
    void backward(Tensor<T> loss) {
        if (loss.numel() != 1)
            throw ContractError("backward: loss must be a scalar, got " + shape_str(loss.shape()));
        if (loss.epoch() != epoch_)
            throw ContractError("backward: loss was not produced on this tape");
        if (consumed_)
            throw ContractError("backward: tape already consumed");
        consumed_ = true;
        loss.grad()[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

private:
    std::vector<std::function<void()>> nodes_;
    Tape* prev_;
    uint64_t epoch_;
    bool consumed_ = false;
    static inline thread_local Tape* current_ = nullptr;
    static inline std::atomic<uint64_t> next_epoch_{1};
};

}  // namespace tblstm
