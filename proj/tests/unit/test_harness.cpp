#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>
#include <vector>

#include "kdlite/harness/train.hpp"
#include "support/toy_corpus.hpp"

using namespace kdlite;
using namespace kdlite::harness;
using nn::IntTensor;
using nn::Rng;

namespace {

// Shared across tests: one separable corpus and one trained BiLSTM.
const Corpus& separable() {
    static const Corpus corpus = [] {
        Rng rng(11);
        auto train = toy::separable_corpus(200, rng);
        auto dev = toy::separable_corpus(100, rng);
        auto test = toy::separable_corpus(100, rng);
        return make_corpus(train, dev, test);
    }();
    return corpus;
}

TrainConfig quick_config(Architecture arch, std::size_t epochs) {
    TrainConfig cfg;
    cfg.arch = arch;
    cfg.seed = 5;
    cfg.epochs = epochs;
    return cfg;
}

const TrainResult& trained_bilstm() {
    static const TrainResult result = train_baseline(quick_config(Architecture::bilstm, 20), {}, separable());
    return result;
}

}  // namespace

TEST(Accuracy, HandCases) {
    EXPECT_EQ(accuracy(IntTensor({3}, std::vector<std::int64_t>{1, 0, 1}), IntTensor({3}, std::vector<std::int64_t>{1, 0, 1})), 1.0);
    EXPECT_EQ(accuracy(IntTensor({4}, std::vector<std::int64_t>{1, 0, 1, 1}),
                       IntTensor({4}, std::vector<std::int64_t>{1, 0, 1, 0})),
              0.75);
    EXPECT_THROW(accuracy(IntTensor({0}), IntTensor({0})), ConfigError);
    EXPECT_THROW(accuracy(IntTensor({1}), IntTensor({2})), DimensionError);
    EXPECT_EQ(predict_class(0.3, 0.3), 0);
    EXPECT_EQ(predict_class(0.3, 0.30001), 1);
}

TEST(Accuracy, RandomCaseMatchesCountingOracle) {
    Rng rng(1);
    IntTensor pred({1000}), gold({1000});
    for (std::size_t i = 0; i < 1000; ++i) {
        pred[i] = static_cast<std::int64_t>(rng.below(2));
        gold[i] = static_cast<std::int64_t>(rng.below(2));
    }
    std::size_t count = 0;
    for (std::size_t i = 0; i < 1000; ++i) count += pred[i] == gold[i] ? 1 : 0;
    EXPECT_EQ(accuracy(pred, gold), static_cast<double>(count) / 1000.0);
}

TEST(TrainBaseline, SeparableCorpusIsLearnedByRecurrentModels) {
    for (auto arch : {Architecture::bilstm, Architecture::bilstm_attn}) {
        const auto result = arch == Architecture::bilstm ? trained_bilstm()
                                                         : train_baseline(quick_config(arch, 20), {}, separable());
        const auto& loss = result.report.train_loss_per_epoch;
        ASSERT_GE(loss.size(), 5u);
        for (std::size_t e = 1; e < 5; ++e) EXPECT_LT(loss[e], loss[e - 1]) << layers::to_string(arch) << " epoch " << e;
        EXPECT_GE(evaluate(result.checkpoint, separable().train), 0.99) << layers::to_string(arch);
    }
}

// Three pooled features feed the CNN head, so 0.5 dropout makes the per-epoch
// training loss a noisy estimate and lr 1e-3 needs far more than 20 epochs.
TEST(TrainBaseline, SeparableCorpusIsLearnedByCnn) {
    auto cfg = quick_config(Architecture::cnn, 20);
    cfg.lr = 1e-2;
    ModelConfig no_dropout;
    no_dropout.dropout = 0.0;
    const auto& loss = train_baseline(cfg, no_dropout, separable()).report.train_loss_per_epoch;
    for (std::size_t e = 1; e < 5; ++e) EXPECT_LT(loss[e], loss[e - 1]) << "epoch " << e;

    const auto result = train_baseline(cfg, {}, separable());
    EXPECT_GE(evaluate(result.checkpoint, separable().train), 0.99);
}

TEST(TrainBaseline, ZeroEpochsReportsUntrainedModel) {
    Rng rng(2);
    const auto corpus = make_corpus(toy::separable_corpus(100, rng), toy::separable_corpus(200, rng),
                                    toy::separable_corpus(50, rng));
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        for (auto arch : {Architecture::bilstm, Architecture::cnn}) {
            auto cfg = quick_config(arch, 0);
            cfg.seed = seed;
            const auto r = train_baseline(cfg, {}, corpus).report;
            EXPECT_EQ(r.selected_epoch, 0u);
            EXPECT_TRUE(r.dev_acc_per_epoch.empty());
            ASSERT_TRUE(r.test_acc.has_value());
            total += r.selected_dev_acc;
        }
    }
    // A single random init can correlate with the cue words either way; the average sits at chance.
    EXPECT_NEAR(total / 16.0, 0.5, 0.1);
}

TEST(TrainBaseline, SameSeedGivesIdenticalReports) {
    const auto a = train_baseline(quick_config(Architecture::cnn, 3), {}, separable());
    const auto b = train_baseline(quick_config(Architecture::cnn, 3), {}, separable());
    EXPECT_EQ(a.report, b.report);
    ASSERT_EQ(a.checkpoint.weights.size(), b.checkpoint.weights.size());
    for (std::size_t i = 0; i < a.checkpoint.weights.size(); ++i) {
        EXPECT_EQ(a.checkpoint.weights[i].second.data, b.checkpoint.weights[i].second.data);
    }
}

TEST(TrainBaseline, SelectionIsEarliestBestDevEpoch) {
    const auto& r = trained_bilstm().report;
    const auto best = std::max_element(r.dev_acc_per_epoch.begin(), r.dev_acc_per_epoch.end());
    EXPECT_EQ(r.selected_epoch, static_cast<std::size_t>(best - r.dev_acc_per_epoch.begin()) + 1);
    EXPECT_EQ(r.selected_dev_acc, *best);
    ASSERT_TRUE(r.test_acc.has_value());
    EXPECT_EQ(*r.test_acc, evaluate(trained_bilstm().checkpoint, separable().test));
}

TEST(TrainDistill, AlphaOneMatchesBaseline) {
    data::LogitCache cache;
    Rng teacher_rng(4);
    for (const auto& r : data::synthetic_teacher("train", separable().train, {0.7, 1.0, 3.0}, teacher_rng)) cache.insert(r);
    for (auto arch : {Architecture::bilstm, Architecture::cnn}) {
        auto cfg = quick_config(arch, 3);
        cfg.alpha = 1.0;
        const auto base = train_baseline(cfg, {}, separable());
        const auto dist = train_distill(cfg, {}, separable(), cache);
        EXPECT_EQ(dist.report.mode, "distill");
        EXPECT_EQ(base.report.mode, "baseline");
        auto relabeled = dist.report;
        relabeled.mode = base.report.mode;
        EXPECT_EQ(relabeled, base.report);
        for (std::size_t i = 0; i < base.checkpoint.weights.size(); ++i) {
            EXPECT_EQ(dist.checkpoint.weights[i].second.data, base.checkpoint.weights[i].second.data);
        }
    }
}

TEST(TrainDistill, MissingTeacherIdFailsBeforeTraining) {
    data::LogitCache cache;
    for (std::int64_t i = 0; i < 200; ++i) {
        if (i != 7) cache.insert({"train", i, {0.0, 1.0}});
    }
    try {
        (void)train_distill(quick_config(Architecture::cnn, 50), {}, separable(), cache);
        FAIL() << "expected CacheError";
    } catch (const CacheError& e) {
        EXPECT_NE(std::string(e.what()).find("id 7"), std::string::npos) << e.what();
    }
    cache.insert({"train", 7, {0.0, 1.0}});
    cache.insert({"train", 200, {0.0, 1.0}});
    EXPECT_THROW((void)train_distill(quick_config(Architecture::cnn, 1), {}, separable(), cache), CacheError);
}

TEST(TrainConfigValidation, RejectsBadValues) {
    auto cfg = quick_config(Architecture::cnn, 1);
    cfg.alpha = 1.5;
    EXPECT_THROW(train_baseline(cfg, {}, separable()), ConfigError);
    cfg = quick_config(Architecture::cnn, 1);
    cfg.batch_size = 0;
    EXPECT_THROW(train_baseline(cfg, {}, separable()), ConfigError);
    cfg = quick_config(Architecture::cnn, 1);
    cfg.mode = TrainMode::distill;
    EXPECT_THROW(train(cfg, {}, separable()), ConfigError);
}

TEST(Evaluate, CheckpointRoundTripIsBitwise) {
    const auto& ckpt = trained_bilstm().checkpoint;
    std::stringstream io;
    write_checkpoint(io, ckpt);
    const auto back = read_checkpoint(io);
    EXPECT_EQ(back.vocab, ckpt.vocab);
    EXPECT_EQ(back.epoch, ckpt.epoch);
    ASSERT_EQ(back.weights.size(), ckpt.weights.size());
    for (std::size_t i = 0; i < ckpt.weights.size(); ++i) {
        EXPECT_EQ(back.weights[i].first, ckpt.weights[i].first);
        EXPECT_EQ(back.weights[i].second.shape, ckpt.weights[i].second.shape);
        EXPECT_EQ(back.weights[i].second.data, ckpt.weights[i].second.data);
    }
    EXPECT_EQ(evaluate(back, separable().dev), evaluate(ckpt, separable().dev));
}

TEST(Evaluate, CorruptCheckpointRejected) {
    std::stringstream io;
    write_checkpoint(io, trained_bilstm().checkpoint);
    std::string bytes = io.str();
    std::istringstream truncated(bytes.substr(0, bytes.size() - 5));
    EXPECT_THROW(read_checkpoint(truncated), IoError);
    bytes[0] = 'X';
    std::istringstream bad_magic(bytes);
    EXPECT_THROW(read_checkpoint(bad_magic), IoError);
}

TEST(Evaluate, OrderInvariant) {
    auto shuffled = separable().dev;
    Rng rng(6);
    rng.shuffle(std::span(shuffled));
    EXPECT_EQ(evaluate(trained_bilstm().checkpoint, shuffled), evaluate(trained_bilstm().checkpoint, separable().dev));
}

TEST(RunReport, JsonRoundTripAndTable) {
    const auto& r = trained_bilstm().report;
    const auto j = to_json(r);
    for (const char* key : {"arch", "mode", "alpha", "seed", "epochs", "dev_acc_per_epoch", "selected_epoch", "test_acc",
                            "param_count", "param_ratio"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_EQ(report_from_json(nlohmann::json::parse(j.dump())), r);
    const auto table = format_table(r);
    EXPECT_NE(table.find("selected epoch"), std::string::npos);
    EXPECT_NE(table.find("test accuracy"), std::string::npos);
}
