#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "kdlite/data.hpp"
#include "kdlite/harness/checkpoint.hpp"
#include "kdlite/harness/config.hpp"
#include "kdlite/layers/model.hpp"
#include "kdlite/objectives/losses.hpp"
#include "kdlite/objectives/optim.hpp"

namespace kdlite::harness {

// Argmax over the two logits; an exact tie goes to class 0.
inline int predict_class(double logit0, double logit1) { return logit1 > logit0 ? 1 : 0; }

inline double accuracy(const nn::IntTensor& predictions, const nn::IntTensor& labels) {
    if (predictions.size() != labels.size()) throw DimensionError("accuracy: predictions/labels length mismatch");
    if (predictions.size() == 0) throw ConfigError("accuracy: no predictions");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

struct Corpus {
    data::Vocabulary vocab;
    std::vector<data::TokenizedExample> train;
    std::vector<data::TokenizedExample> dev;
    std::vector<data::TokenizedExample> test;
    std::size_t train_split_size = 0;  // rows in the full training split, before any subsetting
};

// Builds the vocabulary from the (possibly truncated) training rows and encodes all three splits.
inline Corpus make_corpus(std::vector<data::RawRecord> train, const std::vector<data::RawRecord>& dev,
                          const std::vector<data::RawRecord>& test, std::size_t max_train = 0,
                          std::size_t max_tokens = data::kMaxTokens) {
    Corpus c;
    c.train_split_size = train.size();
    if (max_train && train.size() > max_train) train.resize(max_train);
    c.vocab = data::build_vocab(train, 1, max_tokens);
    c.train = data::encode(train, c.vocab, max_tokens);
    c.dev = data::encode(dev, c.vocab, max_tokens);
    c.test = data::encode(test, c.vocab, max_tokens);
    return c;
}

inline std::string split_path(const std::string& dir, const std::string& split) {
    return (std::filesystem::path(dir) / (split + ".tsv")).string();
}

inline Corpus load_corpus(const std::string& data_dir, std::size_t max_train = 0,
                          std::size_t max_tokens = data::kMaxTokens) {
    return make_corpus(data::load_split(split_path(data_dir, "train"), "train"),
                       data::load_split(split_path(data_dir, "dev"), "dev"),
                       data::load_split(split_path(data_dir, "test"), "test"), max_train, max_tokens);
}

inline constexpr std::size_t kEvalBatch = 32;

inline nn::IntTensor predict(const layers::Model& model, const std::vector<data::TokenizedExample>& examples) {
    nn::NoGradGuard no_grad;
    nn::Rng unused(0);
    const auto batches =
        data::make_batches(examples, kEvalBatch, false, unused, model.config().min_padded_length());
    nn::IntTensor out({examples.size()}, 0);
    std::size_t row = 0;
    for (const auto& batch : batches) {
        const auto logits = model.forward(batch.ids, batch.mask, layers::Mode::eval);
        for (std::size_t b = 0; b < batch.size(); ++b, ++row) {
            out[row] = predict_class(logits.value().data[2 * b], logits.value().data[2 * b + 1]);
        }
    }
    return out;
}

inline double evaluate(const layers::Model& model, const std::vector<data::TokenizedExample>& examples) {
    nn::IntTensor labels({examples.size()}, 0);
    for (std::size_t i = 0; i < examples.size(); ++i) labels[i] = examples[i].label;
    return accuracy(predict(model, examples), labels);
}

inline double evaluate(const Checkpoint& checkpoint, const std::vector<data::TokenizedExample>& examples) {
    return evaluate(restore_model(checkpoint), examples);
}

struct TrainResult {
    Checkpoint checkpoint;
    RunReport report;
};

namespace detail {

// Independent streams so that, e.g., the dropout draws never shift the
// shuffling order.
enum Stream : std::uint64_t { kInitStream = 1, kShuffleStream = 2, kDropoutStream = 3 };

inline void check_teacher_coverage(const TrainConfig& cfg, const Corpus& corpus, const data::LogitCache& cache) {
    const std::size_t cached = cache.count("train");
    if (cached > corpus.train_split_size) {
        throw CacheError("logit cache holds " + std::to_string(cached) + " train records but the train split has " +
                         std::to_string(corpus.train_split_size) + " rows");
    }
    for (const auto& rec : cache.records()) {
        if (rec.split == "train" && static_cast<std::size_t>(rec.id) >= corpus.train_split_size) {
            throw CacheError("logit cache: train id " + std::to_string(rec.id) + " beyond split size " +
                             std::to_string(corpus.train_split_size));
        }
    }
    for (const auto& ex : corpus.train) {
        if (!cache.contains("train", ex.example_id)) {
            throw CacheError("logit cache: missing teacher logits for train id " + std::to_string(ex.example_id) +
                             (cfg.logits_path.empty() ? "" : " in " + cfg.logits_path));
        }
    }
}

}  // namespace detail

// Full training run: Adam + StepLR over shuffled mini-batches, dev accuracy
// after every epoch, best-dev weights kept (earliest epoch on ties) and scored
// on test. `cache` is required iff cfg.mode is distill.
inline TrainResult train(const TrainConfig& cfg, ModelConfig model_cfg, const Corpus& corpus,
                         const data::LogitCache* cache = nullptr) {
    cfg.validate();
    model_cfg.arch = cfg.arch;
    model_cfg.vocab_size = corpus.vocab.size();
    if (corpus.train.empty()) throw ConfigError("train: empty training split");
    if (corpus.dev.empty()) throw ConfigError("train: empty dev split");

    std::vector<data::TokenizedExample> train_set = corpus.train;
    if (cfg.mode == TrainMode::distill) {
        if (!cache) throw ConfigError("train: distill mode needs a teacher logit cache");
        detail::check_teacher_coverage(cfg, corpus, *cache);
        data::attach_teacher(train_set, *cache, "train");
    }

    const nn::Rng root(cfg.seed);
    nn::Rng init_rng = root.split(detail::kInitStream);
    nn::Rng shuffle_rng = root.split(detail::kShuffleStream);
    nn::Rng dropout_rng = root.split(detail::kDropoutStream);

    layers::Model model = layers::build_model(model_cfg, init_rng);
    objectives::AdamState adam_state;
    adam_state.lr = cfg.lr;
    objectives::Adam optimizer(model.parameters(), adam_state);
    const objectives::StepLrState schedule{cfg.lr, cfg.gamma, cfg.step_size};
    const objectives::DistillWeights weights{cfg.alpha};

    RunReport report;
    report.arch = std::string(layers::to_string(cfg.arch));
    report.mode = std::string(to_string(cfg.mode));
    // Baseline minimizes plain cross-entropy, i.e. the alpha = 1 objective.
    report.alpha = cfg.mode == TrainMode::baseline ? 1.0 : cfg.alpha;
    report.seed = cfg.seed;
    report.epochs = cfg.epochs;
    const auto count = layers::count_params(model);
    report.param_count = count.total;
    report.param_ratio = count.ratio_vs_teacher;

    auto best = model.snapshot();
    double best_dev = -1.0;
    std::size_t best_epoch = 0;
    if (cfg.epochs == 0) best_dev = evaluate(model, corpus.dev);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        optimizer.state().lr = objectives::steplr_update(schedule, epoch);
        const auto batches =
            data::make_batches(train_set, cfg.batch_size, true, shuffle_rng, model_cfg.min_padded_length());
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& batch = batches[bi];
            try {
                optimizer.zero_grad();
                const auto logits = model.forward(batch.ids, batch.mask, layers::Mode::train, &dropout_rng);
                const auto loss = cfg.mode == TrainMode::baseline
                                      ? objectives::cross_entropy(logits, batch.labels)
                                      : objectives::distill_loss(logits, batch.labels, *batch.teacher_logits, weights);
                if (!std::isfinite(loss.item())) throw NumericError("non-finite loss");
                nn::backward(loss);
                optimizer.step();
                loss_sum += loss.item() * static_cast<double>(batch.size());
                seen += batch.size();
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch + 1) + ", batch " +
                                   std::to_string(bi) + ")");
            }
        }
        report.train_loss_per_epoch.push_back(loss_sum / static_cast<double>(seen));
        const double dev = evaluate(model, corpus.dev);
        report.dev_acc_per_epoch.push_back(dev);
        if (dev > best_dev) {
            best_dev = dev;
            best_epoch = epoch + 1;
            best = model.snapshot();
        }
    }

    model.load_weights(best);
    report.selected_epoch = best_epoch;
    report.selected_dev_acc = best_dev;
    if (!corpus.test.empty()) report.test_acc = evaluate(model, corpus.test);

    TrainResult result;
    result.checkpoint = Checkpoint{cfg, model_cfg, corpus.vocab, std::move(best), best_epoch, best_dev};
    result.report = std::move(report);
    return result;
}

inline TrainResult train_baseline(TrainConfig cfg, const ModelConfig& model_cfg, const Corpus& corpus) {
    cfg.mode = TrainMode::baseline;
    return train(cfg, model_cfg, corpus);
}

inline TrainResult train_distill(TrainConfig cfg, const ModelConfig& model_cfg, const Corpus& corpus,
                                 const data::LogitCache& cache) {
    cfg.mode = TrainMode::distill;
    return train(cfg, model_cfg, corpus, &cache);
}

}  // namespace kdlite::harness
