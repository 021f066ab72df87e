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

#include "corex/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace corex {

namespace {

constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

using Grad = std::vector<double>;

#ifdef CXAE_DEBUG_CHECKS
void check_finite(const std::vector<double>& values, const char* op) {
    for (double v : values) {
        if (!std::isfinite(v)) throw NumericError(std::string(op) + ": produced a non-finite value");
    }
}
#endif

// Builds the result of a primitive, recording it when any input is taped.
Tensor make(Shape shape, std::vector<double> values, std::initializer_list<const Tensor*> inputs,
            Tape::BackwardRule rule, [[maybe_unused]] const char* op) {
#ifdef CXAE_DEBUG_CHECKS
    check_finite(values, op);
#endif
    Tape* tape = nullptr;
    for (const Tensor* in : inputs) {
        if (!in->on_tape()) continue;
        if (tape != nullptr && tape != in->tape()) throw Error(std::string(op) + ": inputs live on different tapes");
        tape = in->tape();
    }
    if (tape == nullptr) return Tensor(std::move(shape), std::move(values));
    std::vector<const Tensor*> ins(inputs);
    return tape->record(std::move(shape), std::move(values), ins, std::move(rule));
}

Tensor make(Shape shape, std::vector<double> values, std::span<const Tensor* const> inputs,
            Tape::BackwardRule rule, [[maybe_unused]] const char* op) {
#ifdef CXAE_DEBUG_CHECKS
    check_finite(values, op);
#endif
    Tape* tape = nullptr;
    for (const Tensor* in : inputs) {
        if (!in->on_tape()) continue;
        if (tape != nullptr && tape != in->tape()) throw Error(std::string(op) + ": inputs live on different tapes");
        tape = in->tape();
    }
    if (tape == nullptr) return Tensor(std::move(shape), std::move(values));
    return tape->record(std::move(shape), std::move(values), inputs, std::move(rule));
}

Shape strip_leading_ones(const Shape& s) {
    std::size_t k = 0;
    while (k + 1 < s.size() && s[k] == 1) ++k;
    return Shape(s.begin() + static_cast<std::ptrdiff_t>(k), s.end());
}

bool trailing_match(const Shape& big, const Shape& small) {
    Shape s = strip_leading_ones(small);
    if (s.size() > big.size()) return false;
    return std::equal(s.rbegin(), s.rend(), big.rbegin());
}

Shape broadcast_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() == b.shape()) return a.shape();
    if (a.size() == 1 && b.size() == 1) return a.rank() >= b.rank() ? a.shape() : b.shape();
    if (b.size() == 1) return a.shape();
    if (a.size() == 1) return b.shape();
    if (trailing_match(a.shape(), b.shape())) return a.shape();
    if (trailing_match(b.shape(), a.shape())) return b.shape();
    throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a.shape()) + " with " +
                     shape_str(b.shape()));
}

template <class F, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, F f, DA da, DB db) {
    Shape out_shape = broadcast_shape(a, b, op);
    const std::size_t n = shape_size(out_shape);
    const std::size_t na = a.size();
    const std::size_t nb = b.size();
    std::vector<double> out(n);
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = f(pa[i % na], pb[i % nb]);
    auto rule = [a, b, da, db, na, nb](std::span<const double> g, std::span<Grad*> gin) {
        const double* pa = a.data();
        const double* pb = b.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = pa[i % na];
            const double y = pb[i % nb];
            if (gin[0] != nullptr) (*gin[0])[i % na] += g[i] * da(x, y);
            if (gin[1] != nullptr) (*gin[1])[i % nb] += g[i] * db(x, y);
        }
    };
    return make(std::move(out_shape), std::move(out), {&a, &b}, rule, op);
}

// d is the derivative expressed through the input x and output y.
template <class F, class D>
Tensor unary(const Tensor& x, const char* op, F f, D d) {
    std::vector<double> out(x.size());
    const double* px = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(px[i]);
    Tensor result_values(x.shape(), out);
    auto rule = [x, result_values, d](std::span<const double> g, std::span<Grad*> gin) {
        const double* px = x.data();
        const double* py = result_values.data();
        Grad& gx = *gin[0];
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * d(px[i], py[i]);
    };
    return make(x.shape(), std::move(out), {&x}, rule, op);
}

struct AxisSplit {
    std::size_t outer = 1;
    std::size_t len = 1;
    std::size_t inner = 1;
    Shape reduced;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
    if (axis >= shape.size()) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(shape));
    }
    AxisSplit s;
    for (std::size_t k = 0; k < axis; ++k) s.outer *= shape[k];
    s.len = shape[axis];
    for (std::size_t k = axis + 1; k < shape.size(); ++k) s.inner *= shape[k];
    s.reduced = shape;
    s.reduced.erase(s.reduced.begin() + static_cast<std::ptrdiff_t>(axis));
    return s;
}

// c[n x m] += a[n x k] * b[k x m]
void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        double* ci = c + i * m;
        const double* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            if (aip == 0.0) continue;
            const double* bp = b + p * m;
            for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
        }
    }
}

// c[n x k] += g[n x m] * b[k x m]^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* gi = g + i * m;
        double* ci = c + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double* bp = b + p * m;
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += gi[j] * bp[j];
            ci[p] += acc;
        }
    }
}

// c[k x m] += a[n x k]^T * g[n x m]
void gemm_tn(const double* a, const double* g, double* c, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a + i * k;
        const double* gi = g + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            if (aip == 0.0) continue;
            double* cp = c + p * m;
            for (std::size_t j = 0; j < m; ++j) cp[j] += aip * gi[j];
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t k = 0; k < shape.size(); ++k) os << (k ? "x" : "") << shape[k];
    os << ']';
    return os.str();
}

Tensor::Tensor() : shape_{0}, values_(std::make_shared<const std::vector<double>>()) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
    if (shape_size(shape_) != values.size()) {
        throw ShapeError("tensor shape " + shape_str(shape_) + " needs " + std::to_string(shape_size(shape_)) +
                         " values, got " + std::to_string(values.size()));
    }
    values_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
    const std::size_t n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t n = rows.size();
    const std::size_t m = n ? rows.begin()->size() : 0;
    std::vector<double> values;
    values.reserve(n * m);
    for (const auto& r : rows) {
        if (r.size() != m) throw ShapeError("from_rows: ragged rows");
        values.insert(values.end(), r.begin(), r.end());
    }
    return Tensor({n, m}, std::move(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) throw ShapeError("axis out of range for shape " + shape_str(shape_));
    return shape_[axis];
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw ShapeError("expected a matrix, got shape " + shape_str(shape_));
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw ShapeError("expected a matrix, got shape " + shape_str(shape_));
    return shape_[1];
}

double Tensor::at(std::size_t row, std::size_t col) const { return (*values_)[row * cols() + col]; }

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    return (*values_)[0];
}

Tensor Tensor::detach() const {
    Tensor t;
    t.shape_ = shape_;
    t.values_ = values_;
    return t;
}

// ---------------------------------------------------------------------------

Tensor Tape::parameter(const std::string& name, const Tensor& value) {
    for (const Node& n : nodes_) {
        if (!name.empty() && n.parameter == name) throw Error("duplicate tape parameter '" + name + "'");
    }
    Tensor t = value.detach();
    nodes_.push_back(Node{t.shape_, {}, nullptr, name});
    t.tape_ = this;
    t.node_ = nodes_.size() - 1;
    t.generation_ = generation_;
    return t;
}

Tensor Tape::record(Shape shape, std::vector<double> values, std::span<const Tensor* const> inputs,
                    BackwardRule rule) {
    Node node{shape, {}, std::move(rule), {}};
    node.inputs.reserve(inputs.size());
    for (const Tensor* in : inputs) {
        if (!in->on_tape()) {
            node.inputs.push_back(kNoNode);
            continue;
        }
        if (!owns(*in)) throw Error("input tensor is detached from its tape (tape was cleared)");
        node.inputs.push_back(in->node_);
    }
    Tensor t(std::move(shape), std::move(values));
    nodes_.push_back(std::move(node));
    t.tape_ = this;
    t.node_ = nodes_.size() - 1;
    t.generation_ = generation_;
    return t;
}

std::map<std::string, Tensor> Tape::backward(const Tensor& loss) {
    if (!owns(loss)) throw Error("backward: loss is not recorded on this tape");
    if (loss.size() != 1) throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));

    std::vector<Grad> grads(nodes_.size());
    std::vector<char> has(nodes_.size(), 0);
    grads[loss.node_] = {1.0};
    has[loss.node_] = 1;

    std::vector<Grad*> gin;
    for (std::size_t k = loss.node_ + 1; k-- > 0;) {
        Node& node = nodes_[k];
        if (!has[k] || !node.rule) continue;
        gin.assign(node.inputs.size(), nullptr);
        for (std::size_t i = 0; i < node.inputs.size(); ++i) {
            const std::size_t src = node.inputs[i];
            if (src == kNoNode) continue;
            if (!has[src]) {
                grads[src].assign(shape_size(nodes_[src].shape), 0.0);
                has[src] = 1;
            }
            gin[i] = &grads[src];
        }
        node.rule(grads[k], gin);
    }

    std::map<std::string, Tensor> out;
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        const Node& node = nodes_[k];
        if (node.parameter.empty()) continue;
        if (has[k]) {
            out.emplace(node.parameter, Tensor(node.shape, std::move(grads[k])));
        } else {
            out.emplace(node.parameter, Tensor::zeros(node.shape));
        }
    }
    clear();
    return out;
}

void Tape::clear() {
    nodes_.clear();
    ++generation_;
}

// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "div", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
Tensor operator-(const Tensor& a) { return neg(a); }
Tensor operator+(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
Tensor operator+(double a, const Tensor& b) { return add(Tensor::scalar(a), b); }
Tensor operator-(const Tensor& a, double b) { return sub(a, Tensor::scalar(b)); }
Tensor operator-(double a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
Tensor operator*(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
Tensor operator*(double a, const Tensor& b) { return mul(Tensor::scalar(a), b); }
Tensor operator/(const Tensor& a, double b) { return div(a, Tensor::scalar(b)); }

Tensor neg(const Tensor& x) {
    return unary(x, "neg", [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& x) {
    return unary(x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
    return unary(x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
    return unary(x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

namespace {
double sigmoid_value(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}
double softplus_value(double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }
}  // namespace

Tensor sigmoid(const Tensor& x) {
    return unary(x, "sigmoid", sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& x) {
    return unary(x, "softplus", softplus_value, [](double v, double) { return sigmoid_value(v); });
}

Tensor relu(const Tensor& x) {
    return unary(
        x, "relu", [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
    return unary(x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    if (!(lo <= hi)) throw std::invalid_argument("clamp: lo must not exceed hi");
    return unary(
        x, "clamp", [lo, hi](double v) { return std::clamp(v, lo, hi); },
        [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
        throw ShapeError("matmul: shape mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    const std::size_t n = a.shape()[0];
    const std::size_t k = a.shape()[1];
    const std::size_t m = b.shape()[1];
    std::vector<double> out(n * m, 0.0);
    gemm_nn(a.data(), b.data(), out.data(), n, k, m);
    auto rule = [a, b, n, k, m](std::span<const double> g, std::span<Grad*> gin) {
        if (gin[0] != nullptr) gemm_nt(g.data(), b.data(), gin[0]->data(), n, k, m);
        if (gin[1] != nullptr) gemm_tn(a.data(), g.data(), gin[1]->data(), n, k, m);
    };
    return make({n, m}, std::move(out), {&a, &b}, rule, "matmul");
}

Tensor transpose(const Tensor& a) {
    const std::size_t n = a.rows();
    const std::size_t m = a.cols();
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[j * n + i] = a[i * m + j];
    auto rule = [n, m](std::span<const double> g, std::span<Grad*> gin) {
        Grad& ga = *gin[0];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += g[j * n + i];
    };
    return make({m, n}, std::move(out), {&a}, rule, "transpose");
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.values()) s += v;
    auto rule = [](std::span<const double> g, std::span<Grad*> gin) {
        for (double& v : *gin[0]) v += g[0];
    };
    return make({}, {s}, {&x}, rule, "sum");
}

Tensor sum(const Tensor& x, std::size_t axis) {
    const AxisSplit s = split_axis(x.shape(), axis, "sum");
    std::vector<double> out(s.outer * s.inner, 0.0);
    const double* px = x.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t l = 0; l < s.len; ++l)
            for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += px[(o * s.len + l) * s.inner + i];
    auto rule = [s](std::span<const double> g, std::span<Grad*> gin) {
        Grad& gx = *gin[0];
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t l = 0; l < s.len; ++l)
                for (std::size_t i = 0; i < s.inner; ++i) gx[(o * s.len + l) * s.inner + i] += g[o * s.inner + i];
    };
    return make(s.reduced, std::move(out), {&x}, rule, "sum");
}

Tensor mean(const Tensor& x) {
    if (x.size() == 0) throw ShapeError("mean of an empty tensor");
    return sum(x) / static_cast<double>(x.size());
}

Tensor mean(const Tensor& x, std::size_t axis) {
    const std::size_t len = x.dim(axis);
    if (len == 0) throw ShapeError("mean over an empty axis");
    return sum(x, axis) / static_cast<double>(len);
}

Tensor log_sum_exp(const Tensor& x, std::size_t axis) {
    const AxisSplit s = split_axis(x.shape(), axis, "log_sum_exp");
    if (s.len == 0) throw ShapeError("log_sum_exp: empty axis in shape " + shape_str(x.shape()));
    std::vector<double> out(s.outer * s.inner);
    const double* px = x.data();
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t l = 0; l < s.len; ++l) mx = std::max(mx, px[(o * s.len + l) * s.inner + i]);
            double acc = 0.0;
            for (std::size_t l = 0; l < s.len; ++l) acc += std::exp(px[(o * s.len + l) * s.inner + i] - mx);
            out[o * s.inner + i] = mx + std::log(acc);
        }
    }
    Tensor result(s.reduced, out);
    auto rule = [x, result, s](std::span<const double> g, std::span<Grad*> gin) {
        Grad& gx = *gin[0];
        const double* px = x.data();
        const double* py = result.data();
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t l = 0; l < s.len; ++l)
                for (std::size_t i = 0; i < s.inner; ++i) {
                    const std::size_t at = (o * s.len + l) * s.inner + i;
                    const std::size_t r = o * s.inner + i;
                    gx[at] += g[r] * std::exp(px[at] - py[r]);
                }
    };
    return make(s.reduced, std::move(out), {&x}, rule, "log_sum_exp");
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    const AxisSplit s = split_axis(x.shape(), axis, "softmax");
    if (s.len == 0) throw ShapeError("softmax: empty axis in shape " + shape_str(x.shape()));
    const Tensor lse = log_sum_exp(x.detach(), axis);
    std::vector<double> out(x.size());
    const double* px = x.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t l = 0; l < s.len; ++l)
            for (std::size_t i = 0; i < s.inner; ++i) {
                const std::size_t at = (o * s.len + l) * s.inner + i;
                out[at] = std::exp(px[at] - lse[o * s.inner + i]);
            }
    Tensor result(x.shape(), out);
    auto rule = [result, s](std::span<const double> g, std::span<Grad*> gin) {
        Grad& gx = *gin[0];
        const double* py = result.data();
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t i = 0; i < s.inner; ++i) {
                double dot = 0.0;
                for (std::size_t l = 0; l < s.len; ++l) {
                    const std::size_t at = (o * s.len + l) * s.inner + i;
                    dot += g[at] * py[at];
                }
                for (std::size_t l = 0; l < s.len; ++l) {
                    const std::size_t at = (o * s.len + l) * s.inner + i;
                    gx[at] += py[at] * (g[at] - dot);
                }
            }
    };
    return make(x.shape(), std::move(out), {&x}, rule, "softmax");
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_size(shape) != x.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    }
    auto rule = [](std::span<const double> g, std::span<Grad*> gin) {
        Grad& gx = *gin[0];
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    };
    return make(std::move(shape), x.to_vector(), {&x}, rule, "reshape");
}

Tensor slice_flat(const Tensor& x, std::size_t begin, Shape shape) {
    const std::size_t n = shape_size(shape);
    if (begin + n > x.size()) {
        throw ShapeError("slice_flat: range [" + std::to_string(begin) + ", " + std::to_string(begin + n) +
                         ") exceeds " + std::to_string(x.size()) + " values");
    }
    std::vector<double> out(x.data() + begin, x.data() + begin + n);
    auto rule = [begin](std::span<const double> g, std::span<Grad*> gin) {
        Grad& gx = *gin[0];
        for (std::size_t i = 0; i < g.size(); ++i) gx[begin + i] += g[i];
    };
    return make(std::move(shape), std::move(out), {&x}, rule, "slice_flat");
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
    const std::size_t n = x.rows();
    const std::size_t m = x.cols();
    if (begin + count > m) {
        throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for shape " + shape_str(x.shape()));
    }
    std::vector<double> out(n * count);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < count; ++j) out[i * count + j] = x[i * m + begin + j];
    auto rule = [n, m, begin, count](std::span<const double> g, std::span<Grad*> gin) {
        Grad& gx = *gin[0];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < count; ++j) gx[i * m + begin + j] += g[i * count + j];
    };
    return make({n, count}, std::move(out), {&x}, rule, "slice_cols");
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
    if (x.rank() == 0) throw ShapeError("slice_rows on a scalar");
    const std::size_t n = x.shape()[0];
    if (begin + count > n) {
        throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for shape " + shape_str(x.shape()));
    }
    const std::size_t stride = n ? x.size() / n : 0;
    Shape shape = x.shape();
    shape[0] = count;
    std::vector<double> out(x.data() + begin * stride, x.data() + (begin + count) * stride);
    auto rule = [begin, stride](std::span<const double> g, std::span<Grad*> gin) {
        Grad& gx = *gin[0];
        for (std::size_t i = 0; i < g.size(); ++i) gx[begin * stride + i] += g[i];
    };
    return make(std::move(shape), std::move(out), {&x}, rule, "slice_rows");
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t n = parts[0].rows();
    std::size_t total = 0;
    std::vector<std::size_t> widths;
    for (const Tensor& p : parts) {
        if (p.rows() != n) throw ShapeError("concat_cols: row count mismatch " + shape_str(p.shape()));
        widths.push_back(p.cols());
        total += p.cols();
    }
    std::vector<double> out(n * total);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + offset + j] = parts[k][i * widths[k] + j];
        offset += widths[k];
    }
    std::vector<const Tensor*> inputs;
    for (const Tensor& p : parts) inputs.push_back(&p);
    auto rule = [n, total, widths](std::span<const double> g, std::span<Grad*> gin) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            if (gin[k] != nullptr) {
                Grad& gk = *gin[k];
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < widths[k]; ++j) gk[i * widths[k] + j] += g[i * total + offset + j];
            }
            offset += widths[k];
        }
    };
    return make({n, total}, std::move(out), std::span<const Tensor* const>(inputs), rule, "concat_cols");
}

Tensor tile_rows(const Tensor& x, std::size_t reps) {
    if (x.rank() == 0) throw ShapeError("tile_rows on a scalar");
    Shape shape = x.shape();
    shape[0] *= reps;
    std::vector<double> out;
    out.reserve(x.size() * reps);
    for (std::size_t r = 0; r < reps; ++r) out.insert(out.end(), x.values().begin(), x.values().end());
    const std::size_t block = x.size();
    auto rule = [block, reps](std::span<const double> g, std::span<Grad*> gin) {
        Grad& gx = *gin[0];
        for (std::size_t r = 0; r < reps; ++r)
            for (std::size_t i = 0; i < block; ++i) gx[i] += g[r * block + i];
    };
    return make(std::move(shape), std::move(out), {&x}, rule, "tile_rows");
}

// ---------------------------------------------------------------------------

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double eps) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3]");
    const Tensor base = point.detach();

    std::vector<double> analytic(base.size(), 0.0);
    {
        Tape tape;
        const Tensor x = tape.parameter("x", base);
        const Tensor y = f(x);
        if (y.size() != 1) throw ShapeError("grad_check: function must be scalar, got " + shape_str(y.shape()));
        if (!std::isfinite(y.item())) throw NumericError("grad_check: function is not finite at the point");
        if (y.on_tape()) analytic = tape.backward(y).at("x").to_vector();
    }

    double worst = 0.0;
    std::vector<double> probe = base.to_vector();
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + eps;
        const double up = f(Tensor(base.shape(), probe)).item();
        probe[i] = saved - eps;
        const double down = f(Tensor(base.shape(), probe)).item();
        probe[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericError("grad_check: function is not finite near coordinate " + std::to_string(i));
        }
        const double central = (up - down) / (2.0 * eps);
        const double err = std::abs(analytic[i] - central) / (std::abs(analytic[i]) + std::abs(central) + 1e-12);
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace corex
