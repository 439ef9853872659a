#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdlite/data/vocab.hpp"
#include "kdlite/harness/config.hpp"
#include "kdlite/layers/model.hpp"

namespace kdlite::harness {

// File layout:
//   8 bytes  magic "KDLITECK"
//   u32 LE   format version
//   u64 LE   header length N
//   N bytes  JSON header (configs, vocabulary, tensor names and shapes)
//   float64 LE payload for every tensor, in header order
inline constexpr std::array<char, 8> kCheckpointMagic{'K', 'D', 'L', 'I', 'T', 'E', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    TrainConfig train;
    ModelConfig model;
    data::Vocabulary vocab;
    std::vector<std::pair<std::string, nn::Tensor>> weights;
    std::size_t epoch = 0;
    double dev_acc = 0.0;
};

namespace detail {

template <typename U>
void put_le(std::ostream& out, U v) {
    std::array<char, sizeof(U)> bytes{};
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in) {
    std::array<unsigned char, sizeof(U)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in) throw IoError("checkpoint: truncated file");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
    return v;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& c) {
    nlohmann::ordered_json header;
    header["format_version"] = kCheckpointVersion;
    header["train_config"] = to_json(c.train);
    header["model_config"] = to_json(c.model);
    header["vocab"] = c.vocab.tokens();
    header["epoch"] = c.epoch;
    header["dev_acc"] = c.dev_acc;
    auto tensors = nlohmann::ordered_json::array();
    for (const auto& [name, t] : c.weights) tensors.push_back({{"name", name}, {"shape", t.shape}});
    header["tensors"] = std::move(tensors);
    const std::string text = header.dump();

    out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
    detail::put_le<std::uint32_t>(out, kCheckpointVersion);
    detail::put_le<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : c.weights) {
        for (double v : t.data) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
}

inline Checkpoint read_checkpoint(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kCheckpointMagic) throw IoError("checkpoint: bad magic");
    const auto version = detail::get_le<std::uint32_t>(in);
    if (version != kCheckpointVersion) throw IoError("checkpoint: unsupported format version " + std::to_string(version));
    const auto length = detail::get_le<std::uint64_t>(in);
    std::string text(length, '\0');
    in.read(text.data(), static_cast<std::streamsize>(length));
    if (!in) throw IoError("checkpoint: truncated header");

    Checkpoint c;
    try {
        const auto header = nlohmann::json::parse(text);
        c.train = train_config_from_json(header.at("train_config"));
        c.model = model_config_from_json(header.at("model_config"));
        c.vocab = data::Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>());
        c.epoch = header.at("epoch").get<std::size_t>();
        c.dev_acc = header.at("dev_acc").get<double>();
        for (const auto& t : header.at("tensors")) {
            c.weights.emplace_back(t.at("name").get<std::string>(), nn::Tensor(t.at("shape").get<nn::Shape>()));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("checkpoint: malformed header: ") + e.what());
    }
    for (auto& [name, t] : c.weights) {
        for (double& v : t.data) v = std::bit_cast<double>(detail::get_le<std::uint64_t>(in));
    }
    return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    write_checkpoint(out, c);
    if (!out) throw IoError("failed writing " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return read_checkpoint(in);
}

inline layers::Model restore_model(const Checkpoint& c) {
    nn::Rng scratch(0);
    layers::Model model = layers::build_model(c.model, scratch);
    model.load_weights(c.weights);
    return model;
}

}  // namespace kdlite::harness
