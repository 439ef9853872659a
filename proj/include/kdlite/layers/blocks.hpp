#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kdlite/nn.hpp"

namespace kdlite::layers {

using nn::BoolTensor;
using nn::IntTensor;
using nn::Node;
using nn::Shape;
using nn::Tensor;
using nn::Var;

enum class Mode { train, eval };

inline constexpr std::int64_t kPadId = 0;

struct EmbeddingTable {
    Var weights;  // [vocab_size x dim], row kPadId stays zero

    std::size_t vocab_size() const { return weights.shape()[0]; }
    std::size_t dim() const { return weights.shape()[1]; }
};

// Gate rows are packed input, forget, cell, output: rows [0,h) are the input
// gate, [h,2h) forget, [2h,3h) cell candidate, [3h,4h) output.
struct LstmDirection {
    Var input_weights;      // [4h x d]
    Var recurrent_weights;  // [4h x h]
    Var bias;               // [4h]
};

struct BiLstmParams {
    LstmDirection forward;
    LstmDirection backward;

    std::size_t hidden() const { return forward.recurrent_weights.shape()[1]; }
};

struct AttentionParams {
    Var weight;   // [2h x 2h]
    Var bias;     // [2h]
    Var context;  // [2h], the word-level context vector
};

// One filter per kernel; kernel k spans widths[k] consecutive tokens and the
// full embedding dimension.
struct CnnParams {
    std::vector<std::size_t> widths;
    std::vector<Var> filters;  // filters[k] is [widths[k] x d]
    std::vector<Var> biases;   // biases[k] is [1]

    std::size_t max_width() const { return widths.empty() ? 0 : *std::max_element(widths.begin(), widths.end()); }
};

struct DenseParams {
    Var weight;  // [out x in]
    Var bias;    // [out]
};

inline Var embed(const IntTensor& ids, const EmbeddingTable& table) {
    if (ids.shape.size() != 2) throw DimensionError("embed: ids must be [B x T], got " + nn::to_string(ids.shape));
    const std::size_t vocab = table.vocab_size(), dim = table.dim();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
            throw VocabError("embed: token id " + std::to_string(ids[i]) + " outside vocabulary of size " +
                             std::to_string(vocab));
        }
    }
    Tensor out({ids.shape[0], ids.shape[1], dim});
    const auto& w = table.weights.value().data;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] == kPadId) continue;
        std::copy_n(w.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(ids[i]) * dim), dim,
                    out.data.begin() + static_cast<std::ptrdiff_t>(i * dim));
    }
    return nn::make_result("embed", std::move(out), {table.weights}, [ids = ids.data, dim](Node& self) {
        auto* dw = nn::parent_grad(self, 0);
        if (!dw) return;
        const auto& dy = self.value.grad;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] == kPadId) continue;
            double* row = dw->data() + static_cast<std::size_t>(ids[i]) * dim;
            for (std::size_t c = 0; c < dim; ++c) row[c] += dy[i * dim + c];
        }
    });
}

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One LSTM direction over right-padded input. Row b only visits its first
// lengths[b] steps; every other output row is zero. Output is [B x T x h].
inline Var lstm_direction(const Var& x, const std::vector<std::size_t>& lengths, const LstmDirection& p,
                          bool reverse) {
    const std::size_t batch = x.shape()[0], steps = x.shape()[1], in = x.shape()[2];
    const std::size_t h = p.recurrent_weights.shape()[1], g4 = 4 * h;
    if (p.input_weights.shape() != Shape{g4, in} || p.recurrent_weights.shape() != Shape{g4, h} ||
        p.bias.size() != g4) {
        throw DimensionError("lstm: parameter shapes do not match input width " + std::to_string(in));
    }

    // Input projection for every position at once.
    std::vector<double> gates(batch * steps * g4, 0.0);
    nn::detail::gemm_nt(x.value().data.data(), p.input_weights.value().data.data(), gates.data(), batch * steps, in,
                        g4);

    std::vector<double> cells(batch * steps * h, 0.0);
    std::vector<double> cell_tanh(batch * steps * h, 0.0);
    Tensor out({batch, steps, h});
    const auto& wh = p.recurrent_weights.value().data;
    const auto& bias = p.bias.value().data;
    const std::vector<double> zeros(h, 0.0);

    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t len = lengths[b];
        for (std::size_t s = 0; s < len; ++s) {
            const std::size_t t = reverse ? len - 1 - s : s;
            const std::size_t pos = b * steps + t;
            const bool first = s == 0;
            const std::size_t prev = reverse ? pos + 1 : pos - 1;
            const double* h_prev = first ? zeros.data() : out.data.data() + prev * h;
            const double* c_prev = first ? zeros.data() : cells.data() + prev * h;

            double* z = gates.data() + pos * g4;
            for (std::size_t r = 0; r < g4; ++r) {
                double acc = z[r] + bias[r];
                const double* wrow = wh.data() + r * h;
                for (std::size_t c = 0; c < h; ++c) acc += wrow[c] * h_prev[c];
                z[r] = acc;
            }
            // Activations are stored in place of the pre-activations.
            for (std::size_t j = 0; j < h; ++j) {
                z[j] = sigmoid(z[j]);
                z[h + j] = sigmoid(z[h + j]);
                z[2 * h + j] = std::tanh(z[2 * h + j]);
                z[3 * h + j] = sigmoid(z[3 * h + j]);
                const double c = z[h + j] * c_prev[j] + z[j] * z[2 * h + j];
                cells[pos * h + j] = c;
                cell_tanh[pos * h + j] = std::tanh(c);
                out.data[pos * h + j] = z[3 * h + j] * cell_tanh[pos * h + j];
            }
        }
    }

    return nn::make_result(
        reverse ? "lstm_backward_dir" : "lstm_forward_dir", std::move(out),
        {x, p.input_weights, p.recurrent_weights, p.bias},
        [batch, steps, in, h, g4, reverse, lengths, gates = std::move(gates), cells = std::move(cells),
         cell_tanh = std::move(cell_tanh)](Node& self) {
            const auto& dout = self.value.grad;
            const auto& hs = self.value.data;
            const auto& xv = nn::parent_value(self, 0).data;
            const auto& wx = nn::parent_value(self, 1).data;
            const auto& wh = nn::parent_value(self, 2).data;
            auto* dx = nn::parent_grad(self, 0);
            auto* dwx = nn::parent_grad(self, 1);
            auto* dwh = nn::parent_grad(self, 2);
            auto* db = nn::parent_grad(self, 3);

            std::vector<double> dz_all(batch * steps * g4, 0.0);
            std::vector<double> dh_carry(h), dc_carry(h);
            const std::vector<double> zeros(h, 0.0);

            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t len = lengths[b];
                std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
                std::fill(dc_carry.begin(), dc_carry.end(), 0.0);
                for (std::size_t s = len; s-- > 0;) {
                    const std::size_t t = reverse ? len - 1 - s : s;
                    const std::size_t pos = b * steps + t;
                    const bool first = s == 0;
                    const std::size_t prev = reverse ? pos + 1 : pos - 1;
                    const double* h_prev = first ? zeros.data() : hs.data() + prev * h;
                    const double* c_prev = first ? zeros.data() : cells.data() + prev * h;
                    const double* a = gates.data() + pos * g4;
                    double* dz = dz_all.data() + pos * g4;

                    for (std::size_t j = 0; j < h; ++j) {
                        const double ig = a[j], fg = a[h + j], cg = a[2 * h + j], og = a[3 * h + j];
                        const double tc = cell_tanh[pos * h + j];
                        const double dhj = dout[pos * h + j] + dh_carry[j];
                        const double dcj = dhj * og * (1.0 - tc * tc) + dc_carry[j];
                        dz[j] = dcj * cg * ig * (1.0 - ig);
                        dz[h + j] = dcj * c_prev[j] * fg * (1.0 - fg);
                        dz[2 * h + j] = dcj * ig * (1.0 - cg * cg);
                        dz[3 * h + j] = dhj * tc * og * (1.0 - og);
                        dc_carry[j] = dcj * fg;
                    }
                    std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
                    for (std::size_t r = 0; r < g4; ++r) {
                        const double d = dz[r];
                        if (d == 0.0) continue;
                        const double* wrow = wh.data() + r * h;
                        for (std::size_t c = 0; c < h; ++c) dh_carry[c] += wrow[c] * d;
                        if (dwh) {
                            double* grow = dwh->data() + r * h;
                            for (std::size_t c = 0; c < h; ++c) grow[c] += d * h_prev[c];
                        }
                        if (db) (*db)[r] += d;
                    }
                }
            }
            if (dwx) nn::detail::gemm_tn(dz_all.data(), xv.data(), dwx->data(), batch * steps, g4, in);
            if (dx) nn::detail::gemm_nn(dz_all.data(), wx.data(), dx->data(), batch * steps, g4, in);
        });
}

// Picks seq[b, index[b], :] for every row: [B x T x C] -> [B x C].
inline Var select_steps(const Var& seq, std::vector<std::size_t> index) {
    const std::size_t batch = seq.shape()[0], steps = seq.shape()[1], width = seq.shape()[2];
    Tensor out({batch, width});
    for (std::size_t b = 0; b < batch; ++b) {
        std::copy_n(seq.value().data.begin() + static_cast<std::ptrdiff_t>((b * steps + index[b]) * width), width,
                    out.data.begin() + static_cast<std::ptrdiff_t>(b * width));
    }
    return nn::make_result("select_steps", std::move(out), {seq}, [steps, width, index = std::move(index)](Node& self) {
        auto* dseq = nn::parent_grad(self, 0);
        if (!dseq) return;
        for (std::size_t b = 0; b < index.size(); ++b) {
            for (std::size_t c = 0; c < width; ++c) {
                (*dseq)[(b * steps + index[b]) * width + c] += self.value.grad[b * width + c];
            }
        }
    });
}

// out[b] = sum_t weights[b, t] * seq[b, t, :] over the first lengths[b] steps.
inline Var weighted_sum(const Var& weights, const Var& seq, const std::vector<std::size_t>& lengths) {
    const std::size_t batch = seq.shape()[0], steps = seq.shape()[1], width = seq.shape()[2];
    if (weights.shape() != Shape{batch, steps}) throw DimensionError("weighted_sum: weights/sequence mismatch");
    Tensor out({batch, width});
    const auto& w = weights.value().data;
    const auto& sv = seq.value().data;
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < lengths[b]; ++t) {
            const double a = w[b * steps + t];
            for (std::size_t c = 0; c < width; ++c) out.data[b * width + c] += a * sv[(b * steps + t) * width + c];
        }
    }
    return nn::make_result("weighted_sum", std::move(out), {weights, seq},
                           [batch, steps, width, lengths](Node& self) {
                               const auto& dy = self.value.grad;
                               const auto& w = nn::parent_value(self, 0).data;
                               const auto& sv = nn::parent_value(self, 1).data;
                               auto* dw = nn::parent_grad(self, 0);
                               auto* ds = nn::parent_grad(self, 1);
                               for (std::size_t b = 0; b < batch; ++b) {
                                   for (std::size_t t = 0; t < lengths[b]; ++t) {
                                       const std::size_t base = (b * steps + t) * width;
                                       double dot = 0.0;
                                       for (std::size_t c = 0; c < width; ++c) {
                                           dot += dy[b * width + c] * sv[base + c];
                                           if (ds) (*ds)[base + c] += w[b * steps + t] * dy[b * width + c];
                                       }
                                       if (dw) (*dw)[b * steps + t] += dot;
                                   }
                               }
                           });
}

// 1-D convolution along time with one filter spanning the full feature width.
// Positions past the end of the padded input read as zero (PAD embeddings are
// zero), so output position t exists for every t in [0, T).
inline Var conv1d(const Var& x, const Var& filter, const Var& bias) {
    const std::size_t batch = x.shape()[0], steps = x.shape()[1], dim = x.shape()[2];
    const std::size_t width = filter.shape()[0];
    if (filter.shape()[1] != dim || bias.size() != 1) throw DimensionError("conv1d: filter/input mismatch");
    Tensor out({batch, steps});
    const auto& xv = x.value().data;
    const auto& fv = filter.value().data;
    const double b0 = bias.value().data[0];
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < steps; ++t) {
            double acc = b0;
            const std::size_t span = std::min(width, steps - t);
            for (std::size_t j = 0; j < span; ++j) {
                const double* xrow = xv.data() + (b * steps + t + j) * dim;
                const double* frow = fv.data() + j * dim;
                for (std::size_t c = 0; c < dim; ++c) acc += frow[c] * xrow[c];
            }
            out.data[b * steps + t] = acc;
        }
    }
    return nn::make_result("conv1d", std::move(out), {x, filter, bias}, [batch, steps, dim, width](Node& self) {
        const auto& dy = self.value.grad;
        const auto& xv = nn::parent_value(self, 0).data;
        const auto& fv = nn::parent_value(self, 1).data;
        auto* dx = nn::parent_grad(self, 0);
        auto* df = nn::parent_grad(self, 1);
        auto* db = nn::parent_grad(self, 2);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t t = 0; t < steps; ++t) {
                const double g = dy[b * steps + t];
                if (g == 0.0) continue;
                if (db) (*db)[0] += g;
                const std::size_t span = std::min(width, steps - t);
                for (std::size_t j = 0; j < span; ++j) {
                    const std::size_t xbase = (b * steps + t + j) * dim;
                    for (std::size_t c = 0; c < dim; ++c) {
                        if (df) (*df)[j * dim + c] += g * xv[xbase + c];
                        if (dx) (*dx)[xbase + c] += g * fv[j * dim + c];
                    }
                }
            }
        }
    });
}

// Max over the first lengths[b] positions of each row: [B x T] -> [B x 1].
// Ties resolve to the earliest position.
inline Var masked_max(const Var& x, const std::vector<std::size_t>& lengths) {
    const std::size_t batch = x.shape()[0], steps = x.shape()[1];
    Tensor out({batch, 1});
    std::vector<std::size_t> argmax(batch, 0);
    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t span = std::min(lengths[b], steps);
        if (span == 0) throw MaskError("masked_max: row " + std::to_string(b) + " has no real token");
        const double* row = x.value().data.data() + b * steps;
        argmax[b] = static_cast<std::size_t>(std::max_element(row, row + span) - row);
        out.data[b] = row[argmax[b]];
    }
    return nn::make_result("masked_max", std::move(out), {x}, [steps, argmax = std::move(argmax)](Node& self) {
        auto* dx = nn::parent_grad(self, 0);
        if (!dx) return;
        for (std::size_t b = 0; b < argmax.size(); ++b) (*dx)[b * steps + argmax[b]] += self.value.grad[b];
    });
}

inline void require_mask_shape(const BoolTensor& mask, std::size_t batch, std::size_t steps, const char* op) {
    if (mask.shape != Shape{batch, steps}) {
        throw DimensionError(std::string(op) + ": mask " + nn::to_string(mask.shape) + " does not match [" +
                                 std::to_string(batch) + "x" + std::to_string(steps) + "]");
    }
}

}  // namespace detail

struct BiLstmOutput {
    Var sequence;  // [B x T x 2h], zero rows at padded positions
    Var final;     // [B x 2h]: forward state at the last real token, backward state at the first
};

inline BiLstmOutput bilstm_forward(const Var& x, const std::vector<std::size_t>& lengths, const BiLstmParams& p) {
    if (x.shape().size() != 3) throw DimensionError("bilstm: input must be [B x T x d]");
    const std::size_t batch = x.shape()[0];
    if (lengths.size() != batch) throw DimensionError("bilstm: lengths/batch mismatch");
    for (std::size_t b = 0; b < batch; ++b) {
        if (lengths[b] == 0 || lengths[b] > x.shape()[1]) {
            throw MaskError("bilstm: row " + std::to_string(b) + " has invalid length " + std::to_string(lengths[b]));
        }
    }
    Var fwd = detail::lstm_direction(x, lengths, p.forward, false);
    Var bwd = detail::lstm_direction(x, lengths, p.backward, true);
    std::vector<std::size_t> last(batch), first(batch, 0);
    for (std::size_t b = 0; b < batch; ++b) last[b] = lengths[b] - 1;
    Var final = nn::concat(detail::select_steps(fwd, std::move(last)), detail::select_steps(bwd, std::move(first)), 1);
    return {nn::concat(fwd, bwd, 2), final};
}

inline BiLstmOutput bilstm_forward(const Var& x, const BoolTensor& mask, const BiLstmParams& p) {
    if (x.shape().size() != 3) throw DimensionError("bilstm: input must be [B x T x d]");
    detail::require_mask_shape(mask, x.shape()[0], x.shape()[1], "bilstm");
    return bilstm_forward(x, nn::prefix_lengths(mask), p);
}

struct AttentionOutput {
    Var pooled;   // [B x 2h]
    Var weights;  // [B x T], zero on padded positions
};

inline AttentionOutput attention_forward(const Var& seq, const std::vector<std::size_t>& lengths,
                                         const AttentionParams& p) {
    if (seq.shape().size() != 3) throw DimensionError("attention: input must be [B x T x 2h]");
    const std::size_t batch = seq.shape()[0], steps = seq.shape()[1], width = seq.shape()[2];
    if (p.weight.shape() != Shape{width, width} || p.bias.size() != width || p.context.size() != width) {
        throw DimensionError("attention: parameters do not match width " + std::to_string(width));
    }
    for (std::size_t b = 0; b < batch; ++b) {
        if (lengths[b] == 0) throw MaskError("attention: row " + std::to_string(b) + " is fully masked");
    }
    Var flat = nn::reshape(seq, {batch * steps, width});
    Var u = nn::tanh(nn::linear(flat, p.weight, p.bias));
    Var scores = nn::reshape(nn::matmul(u, nn::reshape(p.context, {width, 1})), {batch, steps});
    Var weights = nn::softmax_rows(scores, &lengths);
    return {detail::weighted_sum(weights, seq, lengths), weights};
}

inline AttentionOutput attention_forward(const Var& seq, const BoolTensor& mask, const AttentionParams& p) {
    if (seq.shape().size() != 3) throw DimensionError("attention: input must be [B x T x 2h]");
    detail::require_mask_shape(mask, seq.shape()[0], seq.shape()[1], "attention");
    return attention_forward(seq, nn::prefix_lengths(mask), p);
}

// Per kernel: convolution, ReLU, then max over the positions whose window
// starts on a real token. Returns [B x K].
inline Var cnn_forward(const Var& x, const std::vector<std::size_t>& lengths, const CnnParams& p) {
    if (x.shape().size() != 3) throw DimensionError("cnn: input must be [B x T x d]");
    if (p.filters.empty()) throw DimensionError("cnn: no kernels configured");
    const std::size_t steps = x.shape()[1];
    if (steps < p.max_width()) {
        throw Error("cnn: padded length " + std::to_string(steps) + " is shorter than the widest filter " +
                    std::to_string(p.max_width()));
    }
    Var features;
    for (std::size_t k = 0; k < p.filters.size(); ++k) {
        Var pooled = detail::masked_max(nn::relu(detail::conv1d(x, p.filters[k], p.biases[k])), lengths);
        features = k == 0 ? pooled : nn::concat(features, pooled, 1);
    }
    return features;
}

inline Var cnn_forward(const Var& x, const BoolTensor& mask, const CnnParams& p) {
    if (x.shape().size() != 3) throw DimensionError("cnn: input must be [B x T x d]");
    detail::require_mask_shape(mask, x.shape()[0], x.shape()[1], "cnn");
    return cnn_forward(x, nn::prefix_lengths(mask), p);
}

inline Var dense(const Var& x, const DenseParams& p) { return nn::linear(x, p.weight, p.bias); }

// Inverted dropout: kept units are scaled by 1/(1-rate) in train mode.
inline Var dropout(const Var& x, double rate, Mode mode, nn::Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
    if (mode == Mode::eval || rate == 0.0) return x;
    const double keep = 1.0 - rate;
    std::vector<double> scale(x.size());
    for (double& s : scale) s = rng.uniform() < keep ? 1.0 / keep : 0.0;
    Tensor out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = x.value().data[i] * scale[i];
    return nn::make_result("dropout", std::move(out), {x}, [scale = std::move(scale)](Node& self) {
        if (auto* dx = nn::parent_grad(self, 0)) {
            for (std::size_t i = 0; i < scale.size(); ++i) (*dx)[i] += self.value.grad[i] * scale[i];
        }
    });
}

}  // namespace kdlite::layers
