#include "storyweave/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <fmt/core.h>

namespace storyweave {
namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little endian");

constexpr char kMagic[16] = {'S', 'T', 'O', 'R', 'Y', 'W', 'E', 'A',
                             'V', 'E', '-', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) {
        throw std::runtime_error("checkpoint truncated");
    }
    return value;
}

}  // namespace

json encoder_config_to_json(const EncoderConfig& c) {
    return json{{"num_layers", c.num_layers}, {"hidden_dim", c.hidden_dim},
                {"num_heads", c.num_heads},   {"ff_dim", c.ff_dim},
                {"vocab_size", c.vocab_size}, {"max_seq_len", c.max_seq_len},
                {"dropout", c.dropout},       {"seed", c.seed},
                {"init_std", c.init_std}};
}

EncoderConfig encoder_config_from_json(const json& j, EncoderConfig c) {
    c.num_layers = j.value("num_layers", c.num_layers);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.num_heads = j.value("num_heads", c.num_heads);
    c.ff_dim = j.value("ff_dim", c.ff_dim);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
    c.dropout = j.value("dropout", c.dropout);
    c.seed = j.value("seed", c.seed);
    c.init_std = j.value("init_std", c.init_std);
    return c;
}

json train_config_to_json(const TrainConfig& c) {
    return json{{"batch_size", c.batch_size},
                {"dropout", c.dropout},
                {"learning_rate", c.learning_rate},
                {"epochs", c.epochs},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"epsilon", c.epsilon},
                {"seed", c.seed},
                {"output", c.output == OutputMode::softmax ? "softmax" : "sigmoid"},
                {"warmup_fraction", c.warmup_fraction},
                {"linear_decay", c.linear_decay},
                {"max_grad_norm", c.max_grad_norm}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
    const auto known = train_config_to_json(c);
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) {
            throw std::invalid_argument(fmt::format("unknown training option '{}'", key));
        }
    }
    c.batch_size = j.value("batch_size", c.batch_size);
    c.dropout = j.value("dropout", c.dropout);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.seed = j.value("seed", c.seed);
    if (j.contains("output")) {
        const auto output = j.at("output").get<std::string>();
        if (output != "softmax" && output != "sigmoid") {
            throw std::invalid_argument(fmt::format("unknown output mode '{}'", output));
        }
        c.output = output == "softmax" ? OutputMode::softmax : OutputMode::sigmoid;
    }
    c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
    c.linear_decay = j.value("linear_decay", c.linear_decay);
    c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
    return c;
}

void save_checkpoint(const RelationModel& model, const std::filesystem::path& path) {
    json header;
    header["encoder_config"] = encoder_config_to_json(model.encoder_config);
    header["output"] = model.output == OutputMode::softmax ? "softmax" : "sigmoid";
    header["labels"] = json::array();
    for (auto label : kAllLabels) {
        header["labels"].push_back(label_name(label));
    }
    header["vocab"] = model.vocab.tokens();
    header["tensors"] = json::array();
    const auto tensors = model.params.named_tensors();
    for (const auto& [name, m] : tensors) {
        header["tensors"].push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}});
    }
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error(fmt::format("cannot write checkpoint {}", path.string()));
    }
    out.write(kMagic, sizeof kMagic);
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint64_t>(header_text.size()));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& [name, m] : tensors) {
        out.write(reinterpret_cast<const char*>(m->data()),
                  static_cast<std::streamsize>(m->size() * sizeof(double)));
    }
    if (!out) {
        throw std::runtime_error(fmt::format("failed writing checkpoint {}", path.string()));
    }
}

RelationModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot read checkpoint {}", path.string()));
    }
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw std::runtime_error(fmt::format("{} is not a storyweave checkpoint", path.string()));
    }
    if (const auto version = read_pod<std::uint32_t>(in); version != kVersion) {
        throw std::runtime_error(fmt::format("unsupported checkpoint version {}", version));
    }
    const auto header_len = read_pod<std::uint64_t>(in);
    if (header_len > (1ull << 30)) {
        throw std::runtime_error("checkpoint header too large");
    }
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) {
        throw std::runtime_error("checkpoint truncated");
    }
    const json header = json::parse(header_text);

    RelationModel model;
    model.encoder_config = encoder_config_from_json(header.at("encoder_config"));
    model.encoder_config.validate();
    const auto output = header.at("output").get<std::string>();
    if (output != "softmax" && output != "sigmoid") {
        throw std::runtime_error(fmt::format("unknown output mode '{}'", output));
    }
    model.output = output == "softmax" ? OutputMode::softmax : OutputMode::sigmoid;

    const auto labels = header.at("labels").get<std::vector<std::string>>();
    if (labels.size() != kNumLabels) {
        throw std::runtime_error("checkpoint label order does not match");
    }
    for (std::size_t i = 0; i < kNumLabels; ++i) {
        if (labels[i] != label_name(kAllLabels[i])) {
            throw std::runtime_error("checkpoint label order does not match");
        }
    }

    model.vocab = EncoderVocab::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    if (model.vocab.size() != model.encoder_config.vocab_size) {
        throw std::invalid_argument(fmt::format("vocabulary has {} entries but config says {}",
                                                model.vocab.size(),
                                                model.encoder_config.vocab_size));
    }

    model.params = ClassifierParams::zeros(model.encoder_config);
    auto tensors = model.params.named_tensors();
    const auto& directory = header.at("tensors");
    if (directory.size() != tensors.size()) {
        throw std::invalid_argument(fmt::format("checkpoint holds {} tensors, config needs {}",
                                                directory.size(), tensors.size()));
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        auto& [name, m] = tensors[i];
        const auto& entry = directory[i];
        const auto rows = entry.at("rows").get<Eigen::Index>();
        const auto cols = entry.at("cols").get<Eigen::Index>();
        if (entry.at("name").get<std::string>() != name || rows != m->rows() || cols != m->cols()) {
            throw std::invalid_argument(fmt::format(
                "tensor {} ({}x{}) does not match expected {} ({}x{})",
                entry.at("name").get<std::string>(), rows, cols, name, m->rows(), m->cols()));
        }
        in.read(reinterpret_cast<char*>(m->data()),
                static_cast<std::streamsize>(m->size() * sizeof(double)));
        if (!in) {
            throw std::runtime_error(fmt::format("checkpoint truncated in tensor {}", name));
        }
    }
    model.params.encoder.validate(model.encoder_config);
    return model;
}

}  // namespace storyweave
