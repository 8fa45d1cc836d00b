#pragma once

// Dense tensors and a define-by-run reverse-mode differentiation tape.
//
// Tensors are row-major 64-bit arrays of rank 0, 1 or 2. A rank-1 tensor of
// length k behaves as a 1 x k row wherever a matrix is expected. There is no
// broadcasting: every op states the shapes it accepts.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dmf/errors.hpp"

namespace dmf {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

class Tensor {
public:
    Tensor() : shape_{0}, values_{} {}

    explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
        if (shape_.size() > 2) throw DimensionError("tensor rank > 2 is not supported");
        values_.assign(element_count(shape_), fill);
    }

    Tensor(Shape shape, std::vector<double> values)
        : shape_(std::move(shape)), values_(std::move(values)) {
        if (shape_.size() > 2) throw DimensionError("tensor rank > 2 is not supported");
        if (element_count(shape_) != values_.size()) {
            throw DimensionError("shape " + shape_string(shape_) + " does not hold " +
                                 std::to_string(values_.size()) + " values");
        }
    }

    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

    static Tensor vector(std::vector<double> values) {
        const std::size_t n = values.size();
        return Tensor(Shape{n}, std::move(values));
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
        return Tensor(Shape{rows, cols}, fill);
    }

    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r ? rows.begin()->size() : 0;
        std::vector<double> values;
        values.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw DimensionError("ragged matrix literal");
            values.insert(values.end(), row.begin(), row.end());
        }
        return Tensor(Shape{r, c}, std::move(values));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    std::size_t rows() const noexcept { return shape_.size() == 2 ? shape_[0] : 1; }
    std::size_t cols() const noexcept {
        if (shape_.empty()) return 1;
        return shape_.back();
    }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    const double* data() const noexcept { return values_.data(); }
    double* data() noexcept { return values_.data(); }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

    /// Value of a single-element tensor.
    double item() const {
        if (values_.size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape_));
        return values_[0];
    }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    void require_finite(const char* op) const {
        if (!all_finite()) throw NumericError(std::string(op) + ": non-finite value");
    }

    void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

    bool operator==(const Tensor& other) const = default;

private:
    static std::size_t element_count(const Shape& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    Shape shape_;
    std::vector<double> values_;
};

/// Compressed sparse rows; used for the mostly-empty rating vectors fed to
/// the first layer of each branch.
struct SparseRows {
    std::size_t cols = 0;
    std::vector<std::size_t> row_ptr{0};
    std::vector<std::size_t> index;
    std::vector<double> value;

    std::size_t rows() const noexcept { return row_ptr.size() - 1; }

    void push_row(std::span<const std::pair<std::size_t, double>> entries) {
        for (const auto& [c, v] : entries) {
            if (c >= cols) throw IndexError("sparse column " + std::to_string(c) + " >= " + std::to_string(cols));
            index.push_back(c);
            value.push_back(v);
        }
        row_ptr.push_back(index.size());
    }

    Tensor to_dense() const {
        Tensor out = Tensor::matrix(rows(), cols);
        for (std::size_t r = 0; r < rows(); ++r)
            for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) out(r, index[k]) = value[k];
        return out;
    }

    static SparseRows from_dense(const Tensor& dense) {
        SparseRows out;
        out.cols = dense.cols();
        for (std::size_t r = 0; r < dense.rows(); ++r) {
            for (std::size_t c = 0; c < out.cols; ++c) {
                if (dense(r, c) != 0.0) {
                    out.index.push_back(c);
                    out.value.push_back(dense(r, c));
                }
            }
            out.row_ptr.push_back(out.index.size());
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Plain kernels

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() == 0 || b.rank() == 0 || a.cols() != b.rows()) {
        throw DimensionError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    Tensor out = Tensor::matrix(n, m);
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::size_t i = 0; i < n; ++i) {
        double* row = po + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double s = pa[i * k + p];
            if (s == 0.0) continue;
            const double* brow = pb + p * m;
            for (std::size_t j = 0; j < m; ++j) row[j] += s * brow[j];
        }
    }
    out.require_finite("matmul");
    return out;
}

inline Tensor sparse_matmul(const SparseRows& x, const Tensor& w) {
    if (w.rank() != 2 || x.cols != w.rows()) {
        throw DimensionError("sparse_matmul: [" + std::to_string(x.rows()) + "x" + std::to_string(x.cols) +
                             "] x " + shape_string(w.shape()));
    }
    const std::size_t m = w.cols();
    Tensor out = Tensor::matrix(x.rows(), m);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double* row = out.data() + r * m;
        for (std::size_t k = x.row_ptr[r]; k < x.row_ptr[r + 1]; ++k) {
            const double s = x.value[k];
            const double* wrow = w.data() + x.index[k] * m;
            for (std::size_t j = 0; j < m; ++j) row[j] += s * wrow[j];
        }
    }
    out.require_finite("sparse_matmul");
    return out;
}

inline constexpr double kNormFloor = 1e-12;

/// Euclidean norm of all entries.
inline double l2_norm(const Tensor& x) {
    if (x.empty()) throw DimensionError("l2_norm of empty tensor");
    double s = 0.0;
    for (double v : x.values()) s += v * v;
    return std::sqrt(s);
}

enum class Elementwise { selu, sigmoid, square, abs, identity };

/// Element-wise map. `slope` and `center` only apply to sigmoid:
/// 1 / (1 + exp(-slope * (x - center))).
struct ElementwiseOp {
    Elementwise kind = Elementwise::identity;
    double slope = 1.0;
    double center = 0.0;

    static constexpr double kSeluScale = 1.0507009873554804934193349852946;
    static constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

    static double logistic(double z) {
        if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
        const double e = std::exp(z);
        return e / (1.0 + e);
    }

    double apply(double x) const {
        switch (kind) {
            case Elementwise::selu:
                return x > 0.0 ? kSeluScale * x : kSeluScale * kSeluAlpha * std::expm1(x);
            case Elementwise::sigmoid:
                return logistic(slope * (x - center));
            case Elementwise::square:
                return x * x;
            case Elementwise::abs:
                return std::fabs(x);
            case Elementwise::identity:
                return x;
        }
        return x;
    }

    double derivative(double x) const {
        switch (kind) {
            case Elementwise::selu:
                return x > 0.0 ? kSeluScale : kSeluScale * kSeluAlpha * std::exp(x);
            case Elementwise::sigmoid: {
                const double s = logistic(slope * (x - center));
                return slope * s * (1.0 - s);
            }
            case Elementwise::square:
                return 2.0 * x;
            case Elementwise::abs:
                return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
            case Elementwise::identity:
                return 1.0;
        }
        return 1.0;
    }
};

inline Tensor elementwise(const ElementwiseOp& op, const Tensor& x) {
    x.require_finite("elementwise input");
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = op.apply(x[i]);
    out.require_finite("elementwise");
    return out;
}

// ---------------------------------------------------------------------------
// Tape

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    std::size_t id() const noexcept { return id_; }
    Tape& tape() const noexcept { return *tape_; }
    const Tensor& value() const;
    double item() const { return value().item(); }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    /// Receives the gradient of the loss w.r.t. the node's output and pushes
    /// contributions into its operands via `Tape::accumulate`.
    using BackwardFn = std::function<void(Tape&, const Tensor&)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value) { return push(Node{std::move(value), nullptr, {}, {}, false, nullptr}); }

    /// Leaf that receives a gradient. The tensor is referenced, not copied,
    /// and must outlive the tape.
    Var parameter(const Tensor& value) { return push(Node{Tensor(), &value, {}, {}, true, nullptr}); }

    /// Records an op. The node requires a gradient iff any operand does.
    Var record(Tensor value, std::initializer_list<Var> operands, BackwardFn backward) {
        Node node{std::move(value), nullptr, {}, std::move(backward), false, nullptr};
        for (const Var& v : operands) {
            if (v.tape_ != this) throw ContractError("operand belongs to a different tape");
            node.operands.push_back(v.id_);
            node.requires_grad = node.requires_grad || nodes_[v.id_].requires_grad;
        }
        return push(std::move(node));
    }

    const Tensor& value(Var v) const { return nodes_.at(v.id_).value(); }
    bool requires_grad(Var v) const { return nodes_.at(v.id_).requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Adds `g` (same shape as the node value) into the node's gradient.
    void accumulate(Var v, const Tensor& g) {
        Tensor* dst = grad_slot(v);
        if (!dst) return;
        for (std::size_t i = 0; i < g.size(); ++i) (*dst)[i] += g[i];
    }

    /// Writable gradient buffer for `v`, or nullptr if `v` needs no gradient.
    Tensor* grad_slot(Var v) {
        Node& node = nodes_.at(v.id_);
        if (!node.requires_grad) return nullptr;
        if (!node.grad) node.grad = std::make_unique<Tensor>(node.value().shape());
        return node.grad.get();
    }

    /// Reverse sweep from a scalar node. Visits each recorded node once, in
    /// reverse recording order. Gradients from a previous sweep are cleared.
    void backward(Var loss) {
        if (loss.tape_ != this) throw ContractError("backward: loss belongs to a different tape");
        const Tensor& lv = value(loss);
        if (lv.size() != 1) throw ContractError("backward: loss must be scalar, got " + shape_string(lv.shape()));
        for (Node& n : nodes_) n.grad.reset();
        Tensor* seed = grad_slot(loss);
        if (!seed) return;
        (*seed)[0] = 1.0;
        visited_ = 0;
        for (std::size_t id = loss.id_ + 1; id-- > 0;) {
            ++visited_;
            Node& node = nodes_[id];
            if (!node.grad || !node.backward) continue;
            node.backward(*this, *node.grad);
        }
    }

    /// Gradient of the last backward sweep; zeros if the node received none.
    Tensor grad(Var v) const {
        const Node& node = nodes_.at(v.id_);
        if (node.grad) return *node.grad;
        return Tensor(node.value().shape());
    }

    std::size_t visited_in_last_backward() const noexcept { return visited_; }

private:
    struct Node {
        Tensor owned;
        const Tensor* borrowed = nullptr;
        std::vector<std::size_t> operands;
        BackwardFn backward;
        bool requires_grad = false;
        std::unique_ptr<Tensor> grad;

        const Tensor& value() const { return borrowed ? *borrowed : owned; }
    };

    Var push(Node node) {
        nodes_.push_back(std::move(node));
        return Var(this, nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
    std::size_t visited_ = 0;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }

// ---------------------------------------------------------------------------
// Differentiable ops

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.size() != b.size()) {
        throw DimensionError(std::string(op) + ": " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
}

inline Tensor transpose(const Tensor& a) {
    Tensor out = Tensor::matrix(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
    return out;
}

// out += a^T * b without materialising the transpose.
inline void accumulate_at_b(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        const double* brow = b.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double s = a.data()[i * k + p];
            if (s == 0.0) continue;
            double* orow = out.data() + p * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += s * brow[j];
        }
    }
}

// out += a * b^T
inline void accumulate_a_bt(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t n = a.rows(), m = a.cols(), k = b.rows();
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double* brow = b.data() + p * m;
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += arow[j] * brow[j];
            out.data()[i * k + p] += s;
        }
    }
}

}  // namespace detail

inline Var matmul(Var a, Var b) {
    Tensor out = matmul(a.value(), b.value());
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
        if (Tensor* ga = t.grad_slot(a)) detail::accumulate_a_bt(g, b.value(), *ga);
        if (Tensor* gb = t.grad_slot(b)) detail::accumulate_at_b(a.value(), g, *gb);
    });
}

/// Constant sparse input times a dense weight matrix.
inline Var sparse_matmul(std::shared_ptr<const SparseRows> x, Var w) {
    Tensor out = sparse_matmul(*x, w.value());
    return w.tape().record(std::move(out), {w}, [x, w](Tape& t, const Tensor& g) {
        Tensor* gw = t.grad_slot(w);
        if (!gw) return;
        const std::size_t m = g.cols();
        for (std::size_t r = 0; r < x->rows(); ++r) {
            const double* grow = g.data() + r * m;
            for (std::size_t k = x->row_ptr[r]; k < x->row_ptr[r + 1]; ++k) {
                const double s = x->value[k];
                double* dst = gw->data() + x->index[k] * m;
                for (std::size_t j = 0; j < m; ++j) dst[j] += s * grow[j];
            }
        }
    });
}

inline Var add(Var a, Var b) {
    detail::require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    out.require_finite("add");
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

inline Var sub(Var a, Var b) {
    detail::require_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    out.require_finite("sub");
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
        t.accumulate(a, g);
        if (Tensor* gb = t.grad_slot(b))
            for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
    });
}

/// Hadamard product.
inline Var mul(Var a, Var b) {
    detail::require_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    out.require_finite("mul");
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
        if (Tensor* ga = t.grad_slot(a))
            for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * b.value()[i];
        if (Tensor* gb = t.grad_slot(b))
            for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * a.value()[i];
    });
}

inline Var div(Var a, Var b) {
    detail::require_same_shape(a.value(), b.value(), "div");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= b.value()[i];
    out.require_finite("div");
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
        const Tensor& bv = b.value();
        if (Tensor* ga = t.grad_slot(a))
            for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] / bv[i];
        if (Tensor* gb = t.grad_slot(b))
            for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i] * a.value()[i] / (bv[i] * bv[i]);
    });
}

/// x (B x k) plus a bias row (1 x k) added to every row.
inline Var add_row(Var x, Var bias) {
    const Tensor& xv = x.value();
    const Tensor& bv = bias.value();
    if (bv.rows() != 1 || bv.cols() != xv.cols()) {
        throw DimensionError("add_row: " + shape_string(xv.shape()) + " + " + shape_string(bv.shape()));
    }
    Tensor out = xv;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv[c];
    out.require_finite("add_row");
    return x.tape().record(std::move(out), {x, bias}, [x, bias](Tape& t, const Tensor& g) {
        t.accumulate(x, g);
        if (Tensor* gb = t.grad_slot(bias))
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) (*gb)[c] += g(r, c);
    });
}

inline Var scale(Var x, double s) {
    Tensor out = x.value();
    for (double& v : out.values()) v *= s;
    out.require_finite("scale");
    return x.tape().record(std::move(out), {x}, [x, s](Tape& t, const Tensor& g) {
        if (Tensor* gx = t.grad_slot(x))
            for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += s * g[i];
    });
}

inline Var add_scalar(Var x, double s) {
    Tensor out = x.value();
    for (double& v : out.values()) v += s;
    out.require_finite("add_scalar");
    return x.tape().record(std::move(out), {x}, [x](Tape& t, const Tensor& g) { t.accumulate(x, g); });
}

inline Var elementwise(const ElementwiseOp& op, Var x) {
    Tensor out = elementwise(op, x.value());
    return x.tape().record(std::move(out), {x}, [op, x](Tape& t, const Tensor& g) {
        if (Tensor* gx = t.grad_slot(x))
            for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * op.derivative(x.value()[i]);
    });
}

/// Sum of all entries, as a scalar node.
inline Var sum(Var x) {
    double s = 0.0;
    for (double v : x.value().values()) s += v;
    return x.tape().record(Tensor::scalar(s), {x}, [x](Tape& t, const Tensor& g) {
        if (Tensor* gx = t.grad_slot(x))
            for (double& v : gx->values()) v += g[0];
    });
}

inline Var mean(Var x) {
    if (x.value().empty()) throw DimensionError("mean of empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

/// Sum of squared entries.
inline Var sum_squares(Var x) {
    double s = 0.0;
    for (double v : x.value().values()) s += v * v;
    return x.tape().record(Tensor::scalar(s), {x}, [x](Tape& t, const Tensor& g) {
        if (Tensor* gx = t.grad_slot(x))
            for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += 2.0 * x.value()[i] * g[0];
    });
}

/// Euclidean norm; the gradient divides by max(norm, 1e-12).
inline Var l2_norm(Var x) {
    const double n = l2_norm(x.value());
    return x.tape().record(Tensor::scalar(n), {x}, [x, n](Tape& t, const Tensor& g) {
        if (Tensor* gx = t.grad_slot(x)) {
            const double denom = std::max(n, kNormFloor);
            for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += g[0] * x.value()[i] / denom;
        }
    });
}

/// Row-wise inner products of two B x k matrices, giving B x 1.
inline Var row_dot(Var a, Var b) {
    detail::require_same_shape(a.value(), b.value(), "row_dot");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    Tensor out = Tensor::matrix(av.rows(), 1);
    for (std::size_t r = 0; r < av.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < av.cols(); ++c) s += av(r, c) * bv(r, c);
        out[r] = s;
    }
    out.require_finite("row_dot");
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
        const Tensor& av = a.value();
        const Tensor& bv = b.value();
        if (Tensor* ga = t.grad_slot(a))
            for (std::size_t r = 0; r < av.rows(); ++r)
                for (std::size_t c = 0; c < av.cols(); ++c) (*ga)(r, c) += g[r] * bv(r, c);
        if (Tensor* gb = t.grad_slot(b))
            for (std::size_t r = 0; r < av.rows(); ++r)
                for (std::size_t c = 0; c < av.cols(); ++c) (*gb)(r, c) += g[r] * av(r, c);
    });
}

/// Row-wise Euclidean norms clamped below at 1e-12, giving B x 1.
inline Var row_norm(Var a) {
    const Tensor& av = a.value();
    Tensor out = Tensor::matrix(av.rows(), 1);
    for (std::size_t r = 0; r < av.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < av.cols(); ++c) s += av(r, c) * av(r, c);
        out[r] = std::max(std::sqrt(s), kNormFloor);
    }
    Tensor norms = out;
    return a.tape().record(std::move(out), {a}, [a, norms = std::move(norms)](Tape& t, const Tensor& g) {
        Tensor* ga = t.grad_slot(a);
        if (!ga) return;
        const Tensor& av = a.value();
        for (std::size_t r = 0; r < av.rows(); ++r) {
            // Inside the clamp the norm is constant.
            if (norms[r] <= kNormFloor) continue;
            for (std::size_t c = 0; c < av.cols(); ++c) (*ga)(r, c) += g[r] * av(r, c) / norms[r];
        }
    });
}

}  // namespace dmf
