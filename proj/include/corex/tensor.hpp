/* Copyright 2026 The CorEx-VAE Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
        limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "corex/error.hpp"

namespace corex {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;

// Dense row-major f64 array. Values are shared and immutable once created, so
// copies are cheap and safe to hand across threads. A tensor produced by an op
// whose inputs live on a Tape is itself recorded on that tape.
class Tensor {
public:
    Tensor();
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double value);
    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return values_->size(); }
    std::size_t dim(std::size_t axis) const;
    // Matrix extents; throw ShapeError unless rank() == 2.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> values() const noexcept { return {values_->data(), values_->size()}; }
    const double* data() const noexcept { return values_->data(); }
    double operator[](std::size_t flat) const { return (*values_)[flat]; }
    double at(std::size_t row, std::size_t col) const;
    double item() const;
    std::vector<double> to_vector() const { return *values_; }

    bool on_tape() const noexcept { return tape_ != nullptr; }
    Tape* tape() const noexcept { return tape_; }
    std::size_t node() const noexcept { return node_; }
    std::uint64_t generation() const noexcept { return generation_; }

    // Same values, no tape participation.
    Tensor detach() const;

private:
    friend class Tape;

    Shape shape_;
    std::shared_ptr<const std::vector<double>> values_;
    Tape* tape_ = nullptr;
    std::size_t node_ = 0;
    std::uint64_t generation_ = 0;
};

// Reverse-mode gradient tape. Nodes are appended in evaluation order, which is
// a topological order by construction. Single owner; not thread safe.
class Tape {
public:
    // Accumulates d(loss)/d(input_k) into *grad_in[k]; entries for inputs that
    // are not on the tape are null.
    using BackwardRule =
        std::function<void(std::span<const double> grad_out, std::span<std::vector<double>*> grad_in)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Registers a named leaf whose gradient backward() reports.
    Tensor parameter(const std::string& name, const Tensor& value);

    Tensor record(Shape shape, std::vector<double> values, std::span<const Tensor* const> inputs,
                  BackwardRule rule);

    // Gradient of a scalar loss with respect to every named leaf. Clears the
    // tape; tensors recorded before the call become detached.
    std::map<std::string, Tensor> backward(const Tensor& loss);

    std::size_t size() const noexcept { return nodes_.size(); }
    void clear();

private:
    struct Node {
        Shape shape;
        std::vector<std::size_t> inputs;  // node ids, or npos for constants
        BackwardRule rule;
        std::string parameter;  // empty unless a named leaf
    };

    bool owns(const Tensor& t) const noexcept { return t.tape_ == this && t.generation_ == generation_; }

    std::vector<Node> nodes_;
    std::uint64_t generation_ = 1;
};

// ---------------------------------------------------------------------------
// Differentiable primitives.
//
// Binary elementwise ops broadcast only when one operand is a scalar (one
// element) or its shape, ignoring leading unit extents, equals the trailing
// extents of the other operand.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);
Tensor operator+(const Tensor& a, double b);
Tensor operator+(double a, const Tensor& b);
Tensor operator-(const Tensor& a, double b);
Tensor operator-(double a, const Tensor& b);
Tensor operator*(const Tensor& a, double b);
Tensor operator*(double a, const Tensor& b);
Tensor operator/(const Tensor& a, double b);

Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sigmoid(const Tensor& x);
// ln(1 + e^x), stable for large |x|.
Tensor softplus(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
// Gradient is zero where the input lies outside [lo, hi].
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, std::size_t axis);
// ln sum exp along axis with max shift; the axis is removed from the shape.
Tensor log_sum_exp(const Tensor& x, std::size_t axis);
Tensor softmax(const Tensor& x, std::size_t axis);

Tensor reshape(const Tensor& x, Shape shape);
// Contiguous range of the flattened values, viewed with the given shape.
Tensor slice_flat(const Tensor& x, std::size_t begin, Shape shape);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor concat_cols(std::span<const Tensor> parts);
// [n x m] -> [(reps * n) x m]; row r*n + i is row i of x.
Tensor tile_rows(const Tensor& x, std::size_t reps);

// ---------------------------------------------------------------------------

// max_i |analytic_i - central_i| / (|analytic_i| + |central_i| + 1e-12) for a
// scalar function evaluated at `point`. `f` must build its result from its
// argument with the primitives above.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double eps = 1e-5);

}  // namespace corex
