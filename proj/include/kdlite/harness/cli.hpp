#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kdlite/data.hpp"
#include "kdlite/harness/train.hpp"

namespace kdlite::harness {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

namespace detail {

inline const std::vector<std::string> kArchNames{"bilstm", "bilstm_attn", "cnn"};
inline const std::vector<std::string> kSplitNames{"train", "dev", "test"};

struct RunFlags {
    TrainConfig cfg;
    ModelConfig model;
    std::string arch = "bilstm";
};

inline void add_model_flags(CLI::App& sub, ModelConfig& m) {
    sub.add_option("--embed-dim", m.embed_dim, "word embedding size")->capture_default_str()->check(CLI::PositiveNumber);
    sub.add_option("--hidden-dim", m.hidden_dim, "LSTM hidden size per direction")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub.add_option("--cnn-hidden", m.cnn_hidden, "CNN dense hidden size")->capture_default_str()->check(CLI::PositiveNumber);
    sub.add_option("--dropout", m.dropout, "CNN dropout rate")->capture_default_str()->check(CLI::Range(0.0, 0.999));
    sub.add_option("--max-len", m.max_len, "tokens kept per sentence")->capture_default_str()->check(CLI::PositiveNumber);
}

inline void add_run_flags(CLI::App& sub, RunFlags& f, bool distill) {
    sub.add_option("--arch", f.arch, "student architecture")->capture_default_str()->check(CLI::IsMember(kArchNames));
    sub.add_option("--data", f.cfg.data_dir, "directory with train.tsv, dev.tsv, test.tsv")->required();
    sub.add_option("--out", f.cfg.out_dir, "output directory for checkpoint and report")->required();
    sub.add_option("--seed", f.cfg.seed, "random seed")->capture_default_str();
    sub.add_option("--epochs", f.cfg.epochs, "training epochs")->capture_default_str();
    sub.add_option("--batch-size", f.cfg.batch_size, "mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
    sub.add_option("--lr", f.cfg.lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
    sub.add_option("--gamma", f.cfg.gamma, "StepLR decay factor")->capture_default_str()->check(CLI::Range(1e-12, 1.0));
    sub.add_option("--step-size", f.cfg.step_size, "StepLR period in epochs")->capture_default_str()->check(CLI::PositiveNumber);
    sub.add_option("--max-train", f.cfg.max_train, "use only the first N training rows (0 = all)")->capture_default_str();
    if (distill) {
        sub.add_option("--logits", f.cfg.logits_path, "teacher logit cache (JSON-Lines)")->required();
        sub.add_option("--alpha", f.cfg.alpha, "weight of the cross-entropy term")
            ->capture_default_str()
            ->check(CLI::Range(0.0, 1.0));
    }
    add_model_flags(sub, f.model);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

inline int run_training(RunFlags f, TrainMode mode, std::ostream& out) {
    f.cfg.mode = mode;
    f.cfg.arch = layers::parse_architecture(f.arch);
    f.model.arch = f.cfg.arch;
    f.cfg.validate();
    const Corpus corpus = load_corpus(f.cfg.data_dir, f.cfg.max_train, f.model.max_len);
    std::optional<data::LogitCache> cache;
    if (mode == TrainMode::distill) cache = data::logits_load(f.cfg.logits_path);

    const auto result = train(f.cfg, f.model, corpus, cache ? &*cache : nullptr);

    const std::filesystem::path dir(f.cfg.out_dir);
    std::filesystem::create_directories(dir);
    save_checkpoint((dir / "checkpoint.bin").string(), result.checkpoint);
    const std::string table = format_table(result.report);
    write_text(dir / "report.json", to_json(result.report).dump(2) + "\n");
    write_text(dir / "report.txt", table);
    out << table << "wrote " << (dir / "report.json").string() << ", " << (dir / "report.txt").string() << ", "
        << (dir / "checkpoint.bin").string() << "\n";
    return kExitOk;
}

struct EvalFlags {
    std::string checkpoint;
    std::string data_dir;
    std::string split = "test";
    std::string report;
};

inline int run_eval(const EvalFlags& f, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(f.checkpoint);
    const auto records = data::load_split(split_path(f.data_dir, f.split), f.split);
    const auto examples = data::encode(records, ckpt.vocab, ckpt.model.max_len);
    const double acc = evaluate(ckpt, examples);
    out << f.split << " accuracy " << std::fixed << std::setprecision(4) << acc << " on " << examples.size()
        << " examples\n";
    if (!f.report.empty()) {
        nlohmann::ordered_json j;
        j["checkpoint"] = f.checkpoint;
        j["split"] = f.split;
        j["examples"] = examples.size();
        j["accuracy"] = acc;
        write_text(f.report, j.dump(2) + "\n");
    }
    return kExitOk;
}

struct ParamsFlags {
    std::string arch = "all";
    std::size_t vocab_size = 0;
    std::string data_dir;
    std::size_t max_train = 0;
    std::string json_path;
    ModelConfig model;
};

inline int run_params(ParamsFlags f, std::ostream& out) {
    if (!f.data_dir.empty()) {
        const auto train = data::load_split(split_path(f.data_dir, "train"), "train");
        auto rows = train;
        if (f.max_train && rows.size() > f.max_train) rows.resize(f.max_train);
        f.vocab_size = data::build_vocab(rows, 1, f.model.max_len).size();
    }
    if (f.vocab_size < 2) throw ConfigError("params: vocabulary must hold at least <PAD> and <UNK>");
    const std::vector<std::string> archs = f.arch == "all" ? kArchNames : std::vector<std::string>{f.arch};

    auto rows = nlohmann::ordered_json::array();
    out << "vocabulary size " << f.vocab_size << " (incl. <PAD>, <UNK>)\n";
    out << std::left << std::setw(14) << "arch" << std::setw(14) << "parameters" << "ratio vs 110M\n";
    for (const auto& name : archs) {
        ModelConfig m = f.model;
        m.arch = layers::parse_architecture(name);
        m.vocab_size = f.vocab_size;
        nn::Rng rng(0);
        const auto count = layers::count_params(layers::build_model(m, rng));
        out << std::setw(14) << name << std::setw(14) << count.total << "x" << std::fixed << std::setprecision(1)
            << count.ratio_vs_teacher << "\n";
        rows.push_back({{"arch", name},
                        {"vocab_size", f.vocab_size},
                        {"param_count", count.total},
                        {"param_ratio", count.ratio_vs_teacher}});
    }
    if (!f.json_path.empty()) write_text(f.json_path, rows.dump(2) + "\n");
    return kExitOk;
}

struct TeacherFlags {
    std::string data_dir;
    std::string out_path;
    std::uint64_t seed = 0;
    data::SyntheticTeacherOptions opts;
    std::vector<std::string> splits = kSplitNames;
};

inline std::vector<data::TokenizedExample> rows_as_examples(const std::vector<data::RawRecord>& records) {
    std::vector<data::TokenizedExample> out(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        out[i].example_id = static_cast<std::int64_t>(i);
        out[i].label = records[i].label;
    }
    return out;
}

inline int run_make_teacher(const TeacherFlags& f, std::ostream& out) {
    const nn::Rng root(f.seed);
    std::vector<data::LogitRecord> all;
    for (std::size_t s = 0; s < f.splits.size(); ++s) {
        const auto& split = f.splits[s];
        const auto examples = rows_as_examples(data::load_split(split_path(f.data_dir, split), split));
        nn::Rng rng = root.split(s + 1);
        const auto recs = data::synthetic_teacher(split, examples, f.opts, rng);
        std::size_t agree = 0;
        for (const auto& r : recs) {
            agree += predict_class(r.logits[0], r.logits[1]) == examples[static_cast<std::size_t>(r.id)].label;
        }
        out << split << ": " << recs.size() << " records, teacher agrees with gold on " << agree << "\n";
        all.insert(all.end(), recs.begin(), recs.end());
    }
    data::logits_save(f.out_path, all);
    out << "wrote " << f.out_path << "\n";
    return kExitOk;
}

struct InspectFlags {
    std::string logits_path;
    std::string data_dir;
};

inline int run_inspect(const InspectFlags& f, std::ostream& out, std::ostream& err) {
    const auto cache = data::logits_load(f.logits_path);
    std::map<std::string, std::vector<data::RawRecord>> splits;
    if (!f.data_dir.empty()) {
        for (const auto& s : kSplitNames) {
            const auto path = split_path(f.data_dir, s);
            if (std::filesystem::exists(path)) splits[s] = data::load_split(path, s);
        }
    }
    out << f.logits_path << ": " << cache.size() << " records\n";
    out << std::left << std::setw(8) << "split" << std::setw(10) << "records" << std::setw(16) << "id range"
        << "teacher acc\n";
    for (const auto& split : cache.splits()) {
        std::int64_t lo = -1, hi = -1;
        std::size_t agree = 0, labeled = 0;
        const auto gold = splits.find(split);
        for (const auto& r : cache.records()) {
            if (r.split != split) continue;
            if (lo < 0) lo = r.id;
            hi = r.id;
            if (gold != splits.end() && static_cast<std::size_t>(r.id) < gold->second.size()) {
                ++labeled;
                agree += predict_class(r.logits[0], r.logits[1]) == gold->second[static_cast<std::size_t>(r.id)].label;
            }
        }
        out << std::setw(8) << split << std::setw(10) << cache.count(split) << std::setw(16)
            << (std::to_string(lo) + ".." + std::to_string(hi));
        if (labeled) {
            out << std::fixed << std::setprecision(4) << static_cast<double>(agree) / static_cast<double>(labeled);
        } else {
            out << "-";
        }
        out << "\n";
    }
    if (f.data_dir.empty()) return kExitOk;

    std::map<std::string, std::size_t> rows;
    for (const auto& [s, recs] : splits) rows[s] = recs.size();
    const auto issues = data::check_coverage(cache, rows);
    if (issues.empty()) {
        out << "coverage ok: every split row has exactly one record\n";
        return kExitOk;
    }
    for (const auto& issue : issues) err << "coverage: " << issue.split << ": " << issue.problem << "\n";
    return kExitData;
}

}  // namespace detail

// Entry point for the `kdlite` executable; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Train compact sentiment classifiers, optionally distilled from cached teacher logits."};
    app.name("kdlite");
    app.set_config("--config", "", "TOML/INI file; put options under a [<subcommand>] section, flags win");
    app.require_subcommand(1);

    detail::RunFlags train_flags, distill_flags;
    auto* train_cmd = app.add_subcommand("train", "train a student on gold labels (cross-entropy)");
    detail::add_run_flags(*train_cmd, train_flags, false);
    auto* distill_cmd = app.add_subcommand("distill", "train a student against gold labels and teacher logits");
    detail::add_run_flags(*distill_cmd, distill_flags, true);

    detail::EvalFlags eval_flags;
    auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on one split");
    eval_cmd->add_option("--checkpoint", eval_flags.checkpoint, "checkpoint.bin from a training run")->required();
    eval_cmd->add_option("--data", eval_flags.data_dir, "directory with the split TSVs")->required();
    eval_cmd->add_option("--split", eval_flags.split, "split to score")
        ->capture_default_str()
        ->check(CLI::IsMember(detail::kSplitNames));
    eval_cmd->add_option("--report", eval_flags.report, "also write the result as JSON");

    detail::ParamsFlags params_flags;
    auto* params_cmd = app.add_subcommand("params", "count trainable parameters and the ratio vs a 110M teacher");
    std::vector<std::string> arch_or_all = detail::kArchNames;
    arch_or_all.push_back("all");
    params_cmd->add_option("--arch", params_flags.arch, "architecture")
        ->capture_default_str()
        ->check(CLI::IsMember(arch_or_all));
    auto* vocab_opt = params_cmd->add_option("--vocab-size", params_flags.vocab_size, "vocabulary size incl. <PAD>, <UNK>");
    auto* data_opt = params_cmd->add_option("--data", params_flags.data_dir, "build the vocabulary from <dir>/train.tsv");
    vocab_opt->excludes(data_opt);
    params_cmd->add_option("--max-train", params_flags.max_train, "vocabulary from the first N training rows only");
    params_cmd->add_option("--json", params_flags.json_path, "also write the counts as JSON");
    detail::add_model_flags(*params_cmd, params_flags.model);

    detail::TeacherFlags teacher_flags;
    auto* teacher_cmd =
        app.add_subcommand("make-synthetic-teacher", "write a label-derived stand-in teacher logit cache");
    teacher_cmd->add_option("--data", teacher_flags.data_dir, "directory with the split TSVs")->required();
    teacher_cmd->add_option("--out", teacher_flags.out_path, "output JSON-Lines file")->required();
    teacher_cmd->add_option("--seed", teacher_flags.seed, "random seed")->capture_default_str();
    teacher_cmd->add_option("--quality", teacher_flags.opts.quality, "probability the teacher agrees with gold")
        ->capture_default_str()
        ->check(CLI::Range(0.5, 1.0));
    teacher_cmd->add_option("--margin-min", teacher_flags.opts.margin_min, "smallest logit gap")->capture_default_str();
    teacher_cmd->add_option("--margin-max", teacher_flags.opts.margin_max, "largest logit gap")->capture_default_str();
    teacher_cmd->add_option("--splits", teacher_flags.splits, "splits to cover")
        ->capture_default_str()
        ->check(CLI::IsMember(detail::kSplitNames));

    detail::InspectFlags inspect_flags;
    auto* inspect_cmd = app.add_subcommand("inspect-cache", "summarize and validate a teacher logit cache");
    inspect_cmd->add_option("--logits", inspect_flags.logits_path, "JSON-Lines cache")->required();
    inspect_cmd->add_option("--data", inspect_flags.data_dir, "check coverage against the split TSVs");

    for (auto* sub : app.get_subcommands({})) {
        sub->configurable();
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        err << "error: " << e.what() << "\n\n";
        const auto parsed = app.get_subcommands();
        err << (parsed.empty() ? app.help() : parsed.front()->help());
        return kExitUsage;
    }

    try {
        if (*train_cmd) return detail::run_training(train_flags, TrainMode::baseline, out);
        if (*distill_cmd) return detail::run_training(distill_flags, TrainMode::distill, out);
        if (*eval_cmd) return detail::run_eval(eval_flags, out);
        if (*params_cmd) return detail::run_params(params_flags, out);
        if (*teacher_cmd) return detail::run_make_teacher(teacher_flags, out);
        if (*inspect_cmd) return detail::run_inspect(inspect_flags, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const Error& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace kdlite::harness
