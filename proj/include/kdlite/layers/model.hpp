#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kdlite/layers/blocks.hpp"

namespace kdlite::layers {

enum class Architecture { bilstm, bilstm_attn, cnn };

inline std::string_view to_string(Architecture arch) {
    switch (arch) {
        case Architecture::bilstm: return "bilstm";
        case Architecture::bilstm_attn: return "bilstm_attn";
        case Architecture::cnn: return "cnn";
    }
    return "unknown";
}

inline Architecture parse_architecture(std::string_view tag) {
    if (tag == "bilstm") return Architecture::bilstm;
    if (tag == "bilstm_attn") return Architecture::bilstm_attn;
    if (tag == "cnn") return Architecture::cnn;
    throw ConfigError("unknown architecture '" + std::string(tag) + "' (expected bilstm, bilstm_attn or cnn)");
}

inline constexpr std::size_t kNumClasses = 2;
inline constexpr double kTeacherParams = 110e6;

struct ModelConfig {
    Architecture arch = Architecture::bilstm;
    std::size_t vocab_size = 2;
    std::size_t embed_dim = 64;
    std::size_t hidden_dim = 64;
    std::vector<std::size_t> kernel_widths{3, 4, 5};
    std::size_t cnn_hidden = 64;
    double dropout = 0.5;
    std::size_t max_len = 128;

    void validate() const {
        if (vocab_size < 2) throw ConfigError("model: vocab_size must include PAD and UNK");
        if (embed_dim == 0 || hidden_dim == 0) throw ConfigError("model: dimensions must be positive");
        if (arch == Architecture::cnn) {
            if (kernel_widths.empty() || cnn_hidden == 0) throw ConfigError("model: cnn needs kernels and a hidden layer");
            for (auto w : kernel_widths) {
                if (w == 0 || w > max_len) throw ConfigError("model: kernel width out of range");
            }
        }
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must lie in [0, 1)");
    }

    std::size_t min_padded_length() const {
        std::size_t widest = 1;
        if (arch == Architecture::cnn) {
            for (auto w : kernel_widths) widest = std::max(widest, w);
        }
        return widest;
    }
};

class Model {
public:
    const ModelConfig& config() const { return config_; }
    const nn::NamedParams& parameters() const { return params_; }

    const Var& parameter(std::string_view name) const {
        for (const auto& [n, v] : params_) {
            if (n == name) return v;
        }
        throw ConfigError("model: no parameter named '" + std::string(name) + "'");
    }

    const EmbeddingTable& embedding() const { return embedding_; }
    const BiLstmParams& bilstm() const { return bilstm_; }
    const AttentionParams& attention() const { return attention_; }
    const CnnParams& cnn() const { return cnn_; }
    const DenseParams& hidden() const { return hidden_; }
    const DenseParams& output() const { return output_; }

    // logits [B x 2]. `rng` feeds dropout and may be null in eval mode.
    Var forward(const IntTensor& ids, const BoolTensor& mask, Mode mode, nn::Rng* rng = nullptr) const {
        if (ids.shape.size() != 2) throw DimensionError("model: ids must be [B x T]");
        detail::require_mask_shape(mask, ids.shape[0], ids.shape[1], "model");
        const auto lengths = nn::prefix_lengths(mask);
        for (std::size_t b = 0; b < lengths.size(); ++b) {
            if (lengths[b] == 0) throw MaskError("model: row " + std::to_string(b) + " has no real token");
        }
        Var x = embed(ids, embedding_);
        switch (config_.arch) {
            case Architecture::bilstm: return dense(bilstm_forward(x, lengths, bilstm_).final, output_);
            case Architecture::bilstm_attn: {
                const auto seq = bilstm_forward(x, lengths, bilstm_).sequence;
                return dense(attention_forward(seq, lengths, attention_).pooled, output_);
            }
            case Architecture::cnn: {
                Var features = cnn_forward(x, lengths, cnn_);
                if (mode == Mode::train && config_.dropout > 0.0) {
                    if (!rng) throw ConfigError("model: train-mode dropout needs an rng");
                    features = dropout(features, config_.dropout, mode, *rng);
                }
                return dense(nn::relu(dense(features, hidden_)), output_);
            }
        }
        throw ConfigError("model: unhandled architecture");
    }

    // Loads weights by name; shapes must match exactly.
    void load_weights(const std::vector<std::pair<std::string, Tensor>>& weights) {
        if (weights.size() != params_.size()) throw ConfigError("model: weight count mismatch");
        for (std::size_t i = 0; i < weights.size(); ++i) {
            auto& [name, var] = params_[i];
            if (weights[i].first != name || weights[i].second.shape != var.shape()) {
                throw ConfigError("model: weight '" + weights[i].first + "' does not match parameter '" + name + "'");
            }
            var.value().data = weights[i].second.data;
        }
    }

    std::vector<std::pair<std::string, Tensor>> snapshot() const {
        std::vector<std::pair<std::string, Tensor>> out;
        out.reserve(params_.size());
        for (const auto& [name, var] : params_) out.emplace_back(name, Tensor(var.shape(), var.value().data));
        return out;
    }

private:
    friend Model build_model(const ModelConfig& cfg, nn::Rng& rng);

    Var add(std::string name, Tensor init) {
        Var v = nn::parameter(std::move(init));
        params_.emplace_back(std::move(name), v);
        return v;
    }

    ModelConfig config_;
    nn::NamedParams params_;
    EmbeddingTable embedding_;
    BiLstmParams bilstm_;
    AttentionParams attention_;
    CnnParams cnn_;
    DenseParams hidden_;
    DenseParams output_;
};

namespace detail {

inline Tensor uniform_init(Shape shape, std::size_t fan_in, nn::Rng& rng) {
    Tensor t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

}  // namespace detail

// Weight matrices and the context vector draw from U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
// The embedding is a lookup from a one-hot input, so its fan-in is 1. Biases
// start at zero except the LSTM forget gate, which starts at 1.
inline Model build_model(const ModelConfig& cfg, nn::Rng& rng) {
    cfg.validate();
    Model m;
    m.config_ = cfg;
    const std::size_t d = cfg.embed_dim, h = cfg.hidden_dim;

    Tensor table = detail::uniform_init({cfg.vocab_size, d}, 1, rng);
    std::fill_n(table.data.begin(), d, 0.0);
    m.embedding_.weights = m.add("embedding", std::move(table));

    auto lstm_dir = [&](const std::string& prefix) {
        LstmDirection dir;
        dir.input_weights = m.add(prefix + ".w_x", detail::uniform_init({4 * h, d}, d, rng));
        dir.recurrent_weights = m.add(prefix + ".w_h", detail::uniform_init({4 * h, h}, h, rng));
        Tensor bias({4 * h});
        std::fill_n(bias.data.begin() + static_cast<std::ptrdiff_t>(h), h, 1.0);
        dir.bias = m.add(prefix + ".b", std::move(bias));
        return dir;
    };

    std::size_t head_in = 0;
    switch (cfg.arch) {
        case Architecture::bilstm:
        case Architecture::bilstm_attn:
            m.bilstm_.forward = lstm_dir("lstm.fwd");
            m.bilstm_.backward = lstm_dir("lstm.bwd");
            head_in = 2 * h;
            if (cfg.arch == Architecture::bilstm_attn) {
                m.attention_.weight = m.add("attn.w", detail::uniform_init({2 * h, 2 * h}, 2 * h, rng));
                m.attention_.bias = m.add("attn.b", Tensor({2 * h}));
                m.attention_.context = m.add("attn.u", detail::uniform_init({2 * h}, 2 * h, rng));
            }
            break;
        case Architecture::cnn:
            m.cnn_.widths = cfg.kernel_widths;
            for (std::size_t k = 0; k < cfg.kernel_widths.size(); ++k) {
                const std::size_t w = cfg.kernel_widths[k];
                m.cnn_.filters.push_back(
                    m.add("cnn.filter" + std::to_string(k), detail::uniform_init({w, d}, w * d, rng)));
                m.cnn_.biases.push_back(m.add("cnn.bias" + std::to_string(k), Tensor({1})));
            }
            {
                const std::size_t k = cfg.kernel_widths.size();
                m.hidden_.weight = m.add("hidden.w", detail::uniform_init({cfg.cnn_hidden, k}, k, rng));
                m.hidden_.bias = m.add("hidden.b", Tensor({cfg.cnn_hidden}));
            }
            head_in = cfg.cnn_hidden;
            break;
    }
    m.output_.weight = m.add("out.w", detail::uniform_init({kNumClasses, head_in}, head_in, rng));
    m.output_.bias = m.add("out.b", Tensor({kNumClasses}));
    return m;
}

struct ParamCount {
    std::size_t total = 0;
    double ratio_vs_teacher = 0.0;
};

// Trainable elements, excluding the PAD embedding row.
inline ParamCount count_params(const Model& model) {
    ParamCount count;
    for (const auto& [name, var] : model.parameters()) count.total += var.size();
    count.total -= model.config().embed_dim;
    count.ratio_vs_teacher = kTeacherParams / static_cast<double>(count.total);
    return count;
}

}  // namespace kdlite::layers
