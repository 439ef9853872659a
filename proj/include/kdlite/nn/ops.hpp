#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "kdlite/nn/errors.hpp"
#include "kdlite/nn/var.hpp"

namespace kdlite::nn {

namespace detail {

inline void require_rank(const Var& v, std::size_t rank, const char* op) {
    if (v.shape().size() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                             to_string(v.shape()));
    }
}

// C[m x n] (+)= A[m x k] * B[k x n]
inline void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x n] (+)= A[m x k] * B[n x k]^T
inline void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            c[i * n + j] += acc;
        }
    }
}

// C[k x n] (+)= A[m x k]^T * B[m x n]
inline void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0) continue;
            double* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
    detail::require_rank(a, 2, "matmul");
    detail::require_rank(b, 2, "matmul");
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    if (b.shape()[0] != k) {
        throw DimensionError("matmul: inner dims disagree, " + to_string(a.shape()) + " x " + to_string(b.shape()));
    }
    Tensor out({m, n});
    detail::gemm_nn(a.value().data.data(), b.value().data.data(), out.data.data(), m, k, n);
    return make_result("matmul", std::move(out), {a, b}, [m, k, n](Node& self) {
        const auto& dc = self.value.grad;
        if (auto* da = parent_grad(self, 0)) {
            detail::gemm_nt(dc.data(), parent_value(self, 1).data.data(), da->data(), m, n, k);
        }
        if (auto* db = parent_grad(self, 1)) {
            detail::gemm_tn(parent_value(self, 0).data.data(), dc.data(), db->data(), m, k, n);
        }
    });
}

// x[N x in] * W[out x in]^T + b[out]
inline Var linear(const Var& x, const Var& weight, const Var& bias) {
    detail::require_rank(x, 2, "linear");
    detail::require_rank(weight, 2, "linear");
    const std::size_t rows = x.shape()[0], in = x.shape()[1], out_dim = weight.shape()[0];
    if (weight.shape()[1] != in || bias.size() != out_dim) {
        throw DimensionError("linear: input " + to_string(x.shape()) + ", weight " + to_string(weight.shape()) +
                             ", bias " + to_string(bias.shape()));
    }
    Tensor out({rows, out_dim});
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(bias.value().data.begin(), out_dim, out.data.begin() + static_cast<std::ptrdiff_t>(r * out_dim));
    }
    detail::gemm_nt(x.value().data.data(), weight.value().data.data(), out.data.data(), rows, in, out_dim);
    return make_result("linear", std::move(out), {x, weight, bias}, [rows, in, out_dim](Node& self) {
        const auto& dy = self.value.grad;
        if (auto* dx = parent_grad(self, 0)) {
            detail::gemm_nn(dy.data(), parent_value(self, 1).data.data(), dx->data(), rows, out_dim, in);
        }
        if (auto* dw = parent_grad(self, 1)) {
            detail::gemm_tn(dy.data(), parent_value(self, 0).data.data(), dw->data(), rows, out_dim, in);
        }
        if (auto* db = parent_grad(self, 2)) {
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t o = 0; o < out_dim; ++o) (*db)[o] += dy[r * out_dim + o];
            }
        }
    });
}

enum class Elementwise { add, mul, tanh, sigmoid, relu };

namespace detail {

enum class Broadcast { same, scalar, row };

inline Broadcast broadcast_kind(const Shape& a, const Shape& b, const char* op) {
    if (a == b) return Broadcast::same;
    if (element_count(b) == 1) return Broadcast::scalar;
    if (!a.empty() && element_count(b) == a.back() && (b.size() == 1 || (b.size() == 2 && b[0] == 1))) {
        return Broadcast::row;
    }
    throw DimensionError(std::string(op) + ": cannot broadcast " + to_string(b) + " onto " + to_string(a));
}

inline Var binary(Elementwise tag, Var a, Var b) {
    const char* name = tag == Elementwise::add ? "add" : "mul";
    // Only the second operand broadcasts; both ops commute.
    if (element_count(a.shape()) < element_count(b.shape())) std::swap(a, b);
    const Broadcast kind = broadcast_kind(a.shape(), b.shape(), name);
    const std::size_t n = a.size();
    const std::size_t width = b.size();
    auto index = [kind, width](std::size_t i) -> std::size_t {
        switch (kind) {
            case Broadcast::same: return i;
            case Broadcast::scalar: return 0;
            case Broadcast::row: return i % width;
        }
        return 0;
    };
    Tensor out(a.shape());
    const auto& av = a.value().data;
    const auto& bv = b.value().data;
    if (tag == Elementwise::add) {
        for (std::size_t i = 0; i < n; ++i) out.data[i] = av[i] + bv[index(i)];
    } else {
        for (std::size_t i = 0; i < n; ++i) out.data[i] = av[i] * bv[index(i)];
    }
    return make_result(name, std::move(out), {a, b}, [tag, n, index](Node& self) {
        const auto& dy = self.value.grad;
        const auto& av = parent_value(self, 0).data;
        const auto& bv = parent_value(self, 1).data;
        if (auto* da = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < n; ++i) (*da)[i] += tag == Elementwise::add ? dy[i] : dy[i] * bv[index(i)];
        }
        if (auto* db = parent_grad(self, 1)) {
            for (std::size_t i = 0; i < n; ++i) (*db)[index(i)] += tag == Elementwise::add ? dy[i] : dy[i] * av[i];
        }
    });
}

inline Var unary(Elementwise tag, const Var& x) {
    const char* name = tag == Elementwise::tanh ? "tanh" : tag == Elementwise::sigmoid ? "sigmoid" : "relu";
    Tensor out(x.shape());
    const auto& xv = x.value().data;
    for (std::size_t i = 0; i < xv.size(); ++i) {
        switch (tag) {
            case Elementwise::tanh: out.data[i] = std::tanh(xv[i]); break;
            case Elementwise::sigmoid: out.data[i] = 1.0 / (1.0 + std::exp(-xv[i])); break;
            default: out.data[i] = xv[i] > 0.0 ? xv[i] : 0.0; break;
        }
    }
    return make_result(name, std::move(out), {x}, [tag](Node& self) {
        auto* dx = parent_grad(self, 0);
        if (!dx) return;
        const auto& dy = self.value.grad;
        const auto& y = self.value.data;
        for (std::size_t i = 0; i < y.size(); ++i) {
            switch (tag) {
                case Elementwise::tanh: (*dx)[i] += dy[i] * (1.0 - y[i] * y[i]); break;
                case Elementwise::sigmoid: (*dx)[i] += dy[i] * y[i] * (1.0 - y[i]); break;
                default: (*dx)[i] += y[i] > 0.0 ? dy[i] : 0.0; break;
            }
        }
    });
}

}  // namespace detail

// add/mul take two inputs (scalar- or row-broadcast); the activations take one.
inline Var elementwise(Elementwise tag, std::span<const Var> inputs) {
    const bool is_binary = tag == Elementwise::add || tag == Elementwise::mul;
    if (inputs.size() != (is_binary ? 2u : 1u)) {
        throw DimensionError("elementwise: wrong operand count " + std::to_string(inputs.size()));
    }
    return is_binary ? detail::binary(tag, inputs[0], inputs[1]) : detail::unary(tag, inputs[0]);
}

inline Var add(const Var& a, const Var& b) { return detail::binary(Elementwise::add, a, b); }
inline Var mul(const Var& a, const Var& b) { return detail::binary(Elementwise::mul, a, b); }
inline Var tanh(const Var& x) { return detail::unary(Elementwise::tanh, x); }
inline Var sigmoid(const Var& x) { return detail::unary(Elementwise::sigmoid, x); }
inline Var relu(const Var& x) { return detail::unary(Elementwise::relu, x); }

inline Var scale(const Var& x, double factor) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = x.value().data[i] * factor;
    return make_result("scale", std::move(out), {x}, [factor](Node& self) {
        if (auto* dx = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < dx->size(); ++i) (*dx)[i] += self.value.grad[i] * factor;
        }
    });
}

inline Var sum(const Var& x) {
    double total = 0.0;
    for (double v : x.value().data) total += v;
    return make_result("sum", Tensor::scalar(total), {x}, [](Node& self) {
        if (auto* dx = parent_grad(self, 0)) {
            const double g = self.value.grad[0];
            for (double& d : *dx) d += g;
        }
    });
}

inline Var reshape(const Var& x, Shape shape) {
    if (element_count(shape) != x.size()) {
        throw DimensionError("reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
    }
    Tensor out(std::move(shape), x.value().data);
    return make_result("reshape", std::move(out), {x}, [](Node& self) {
        if (auto* dx = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < dx->size(); ++i) (*dx)[i] += self.value.grad[i];
        }
    });
}

// Row softmax with max subtraction. With `lengths`, row r only spans its first
// lengths[r] columns and the rest get exactly zero weight.
inline Var softmax_rows(const Var& x, const std::vector<std::size_t>* lengths = nullptr) {
    detail::require_rank(x, 2, "softmax_rows");
    const std::size_t rows = x.shape()[0], cols = x.shape()[1];
    if (cols == 0) throw DimensionError("softmax_rows: rows must have at least one column");
    if (lengths && lengths->size() != rows) throw DimensionError("softmax_rows: lengths/rows mismatch");
    Tensor out({rows, cols});
    const auto& xv = x.value().data;
    std::vector<std::size_t> spans(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (lengths) {
            spans[r] = std::min((*lengths)[r], cols);
            if (spans[r] == 0) throw MaskError("softmax_rows: row " + std::to_string(r) + " is fully masked");
        }
        const double* in = xv.data() + r * cols;
        double* o = out.data.data() + r * cols;
        const double peak = *std::max_element(in, in + spans[r]);
        double total = 0.0;
        for (std::size_t c = 0; c < spans[r]; ++c) total += (o[c] = std::exp(in[c] - peak));
        for (std::size_t c = 0; c < spans[r]; ++c) o[c] /= total;
    }
    return make_result("softmax_rows", std::move(out), {x}, [rows, cols, spans](Node& self) {
        auto* dx = parent_grad(self, 0);
        if (!dx) return;
        const auto& y = self.value.data;
        const auto& dy = self.value.grad;
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < spans[r]; ++c) dot += y[r * cols + c] * dy[r * cols + c];
            for (std::size_t c = 0; c < spans[r]; ++c) {
                (*dx)[r * cols + c] += y[r * cols + c] * (dy[r * cols + c] - dot);
            }
        }
    });
}

inline Var concat(const Var& a, const Var& b, std::size_t axis) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() != sb.size() || axis >= sa.size()) {
        throw DimensionError("concat: incompatible ranks " + to_string(sa) + ", " + to_string(sb));
    }
    for (std::size_t d = 0; d < sa.size(); ++d) {
        if (d != axis && sa[d] != sb[d]) {
            throw DimensionError("concat: non-axis dims differ " + to_string(sa) + ", " + to_string(sb));
        }
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= sa[d];
    for (std::size_t d = axis + 1; d < sa.size(); ++d) inner *= sa[d];
    const std::size_t ca = sa[axis] * inner, cb = sb[axis] * inner, cc = ca + cb;
    Shape shape = sa;
    shape[axis] = sa[axis] + sb[axis];
    Tensor out(shape);
    for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(a.value().data.data() + o * ca, ca, out.data.data() + o * cc);
        std::copy_n(b.value().data.data() + o * cb, cb, out.data.data() + o * cc + ca);
    }
    return make_result("concat", std::move(out), {a, b}, [outer, ca, cb, cc](Node& self) {
        const auto& dy = self.value.grad;
        if (auto* da = parent_grad(self, 0)) {
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t i = 0; i < ca; ++i) (*da)[o * ca + i] += dy[o * cc + i];
            }
        }
        if (auto* db = parent_grad(self, 1)) {
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t i = 0; i < cb; ++i) (*db)[o * cb + i] += dy[o * cc + ca + i];
            }
        }
    });
}

}  // namespace kdlite::nn
