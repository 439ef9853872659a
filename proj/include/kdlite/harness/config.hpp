#pragma once

#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdlite/layers/model.hpp"
#include "kdlite/nn/errors.hpp"

namespace kdlite::harness {

using layers::Architecture;
using layers::ModelConfig;

enum class TrainMode { baseline, distill };

inline std::string_view to_string(TrainMode m) { return m == TrainMode::baseline ? "baseline" : "distill"; }

inline TrainMode parse_mode(std::string_view s) {
    if (s == "baseline") return TrainMode::baseline;
    if (s == "distill") return TrainMode::distill;
    throw ConfigError("unknown mode '" + std::string(s) + "'");
}

struct TrainConfig {
    Architecture arch = Architecture::bilstm;
    std::uint64_t seed = 0;
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double alpha = 0.5;
    double lr = 1e-3;
    std::size_t step_size = 1;
    double gamma = 0.9;
    TrainMode mode = TrainMode::baseline;
    std::string data_dir;
    std::string logits_path;
    std::string out_dir;
    std::size_t max_train = 0;  // 0 keeps the whole training split, else its first N rows

    void validate() const {
        if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
        if (step_size == 0) throw ConfigError("step_size must be at least 1");
        if (!(lr > 0.0)) throw ConfigError("lr must be positive");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    }
};

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
    nlohmann::ordered_json j;
    j["arch"] = layers::to_string(c.arch);
    j["seed"] = c.seed;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["alpha"] = c.alpha;
    j["lr"] = c.lr;
    j["step_size"] = c.step_size;
    j["gamma"] = c.gamma;
    j["mode"] = to_string(c.mode);
    j["data_dir"] = c.data_dir;
    j["logits_path"] = c.logits_path;
    j["out_dir"] = c.out_dir;
    j["max_train"] = c.max_train;
    return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.arch = layers::parse_architecture(j.at("arch").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.alpha = j.at("alpha").get<double>();
    c.lr = j.at("lr").get<double>();
    c.step_size = j.at("step_size").get<std::size_t>();
    c.gamma = j.at("gamma").get<double>();
    c.mode = parse_mode(j.at("mode").get<std::string>());
    c.data_dir = j.at("data_dir").get<std::string>();
    c.logits_path = j.at("logits_path").get<std::string>();
    c.out_dir = j.at("out_dir").get<std::string>();
    c.max_train = j.at("max_train").get<std::size_t>();
    return c;
}

inline nlohmann::ordered_json to_json(const ModelConfig& m) {
    nlohmann::ordered_json j;
    j["arch"] = layers::to_string(m.arch);
    j["vocab_size"] = m.vocab_size;
    j["embed_dim"] = m.embed_dim;
    j["hidden_dim"] = m.hidden_dim;
    j["kernel_widths"] = m.kernel_widths;
    j["cnn_hidden"] = m.cnn_hidden;
    j["dropout"] = m.dropout;
    j["max_len"] = m.max_len;
    return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig m;
    m.arch = layers::parse_architecture(j.at("arch").get<std::string>());
    m.vocab_size = j.at("vocab_size").get<std::size_t>();
    m.embed_dim = j.at("embed_dim").get<std::size_t>();
    m.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    m.kernel_widths = j.at("kernel_widths").get<std::vector<std::size_t>>();
    m.cnn_hidden = j.at("cnn_hidden").get<std::size_t>();
    m.dropout = j.at("dropout").get<double>();
    m.max_len = j.at("max_len").get<std::size_t>();
    return m;
}

struct RunReport {
    std::string arch;
    std::string mode;
    double alpha = 0.0;
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    std::vector<double> train_loss_per_epoch;
    std::vector<double> dev_acc_per_epoch;
    std::size_t selected_epoch = 0;  // 1-based; 0 means the untrained model
    double selected_dev_acc = 0.0;
    std::optional<double> test_acc;
    std::size_t param_count = 0;
    double param_ratio = 0.0;

    bool operator==(const RunReport&) const = default;
};

inline nlohmann::ordered_json to_json(const RunReport& r) {
    nlohmann::ordered_json j;
    j["arch"] = r.arch;
    j["mode"] = r.mode;
    j["alpha"] = r.alpha;
    j["seed"] = r.seed;
    j["epochs"] = r.epochs;
    j["train_loss_per_epoch"] = r.train_loss_per_epoch;
    j["dev_acc_per_epoch"] = r.dev_acc_per_epoch;
    j["selected_epoch"] = r.selected_epoch;
    j["selected_dev_acc"] = r.selected_dev_acc;
    j["test_acc"] = r.test_acc ? nlohmann::ordered_json(*r.test_acc) : nlohmann::ordered_json(nullptr);
    j["param_count"] = r.param_count;
    j["param_ratio"] = r.param_ratio;
    return j;
}

inline RunReport report_from_json(const nlohmann::json& j) {
    RunReport r;
    r.arch = j.at("arch").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.alpha = j.at("alpha").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.epochs = j.at("epochs").get<std::size_t>();
    r.train_loss_per_epoch = j.at("train_loss_per_epoch").get<std::vector<double>>();
    r.dev_acc_per_epoch = j.at("dev_acc_per_epoch").get<std::vector<double>>();
    r.selected_epoch = j.at("selected_epoch").get<std::size_t>();
    r.selected_dev_acc = j.at("selected_dev_acc").get<double>();
    if (!j.at("test_acc").is_null()) r.test_acc = j.at("test_acc").get<double>();
    r.param_count = j.at("param_count").get<std::size_t>();
    r.param_ratio = j.at("param_ratio").get<double>();
    return r;
}

inline std::string format_table(const RunReport& r) {
    std::ostringstream os;
    os << "arch " << r.arch << "  mode " << r.mode << "  alpha " << r.alpha << "  seed " << r.seed << "\n";
    os << std::left << std::setw(8) << "epoch" << std::setw(14) << "train_loss" << "dev_acc\n";
    os << std::fixed;
    for (std::size_t e = 0; e < r.dev_acc_per_epoch.size(); ++e) {
        os << std::setw(8) << (e + 1) << std::setw(14) << std::setprecision(6) << r.train_loss_per_epoch[e]
           << std::setprecision(4) << r.dev_acc_per_epoch[e] << (e + 1 == r.selected_epoch ? "  *" : "") << "\n";
    }
    os << "selected epoch   " << r.selected_epoch << " (dev acc " << std::setprecision(4) << r.selected_dev_acc
       << ")\n";
    os << "test accuracy    ";
    if (r.test_acc) {
        os << std::setprecision(4) << *r.test_acc << "\n";
    } else {
        os << "n/a\n";
    }
    os << "parameters       " << r.param_count << " (x" << std::setprecision(1) << r.param_ratio
       << " fewer than 110M)\n";
    return os.str();
}

}  // namespace kdlite::harness
