#include "storyweave/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/core.h>

#include "storyweave/text.hpp"

namespace storyweave {
namespace {

RowVector dropout_mask(Eigen::Index n, double p, Rng& rng) {
    std::bernoulli_distribution keep(1.0 - p);
    const double scale = 1.0 / (1.0 - p);
    RowVector mask(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        mask(i) = keep(rng) ? scale : 0.0;
    }
    return mask;
}

void require_finite(const RowVector& v, const char* stage) {
    if (!v.allFinite()) {
        throw std::runtime_error(fmt::format("non-finite value in classifier stage '{}'", stage));
    }
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
    if (z >= 0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = dist(rng);
    }
    return m;
}

struct AdamState {
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    std::size_t step = 0;
};

}  // namespace

RowVector combine_features(const HiddenVector& h1, const HiddenVector& h2) {
    if (h1.size() != h2.size()) {
        throw std::invalid_argument(
            fmt::format("hidden vectors differ in length: {} vs {}", h1.size(), h2.size()));
    }
    const Eigen::Index d = h1.size();
    RowVector x(kFeatureBlocks * static_cast<std::size_t>(d));
    x.segment(0, d) = h1;
    x.segment(d, d) = h2;
    x.segment(2 * d, d) = (h1 - h2).cwiseAbs();
    x.segment(3 * d, d) = h1.cwiseProduct(h2);
    x.segment(4 * d, d) = (h1 + h2) / 2.0;
    return x;
}

HeadParams HeadParams::zeros(std::size_t hidden_dim) {
    const auto in = static_cast<Eigen::Index>(kFeatureBlocks * hidden_dim);
    const auto mid = static_cast<Eigen::Index>(kHeadHiddenUnits);
    const auto out = static_cast<Eigen::Index>(kNumLabels);
    return {Matrix::Zero(in, mid), Matrix::Zero(1, mid), Matrix::Zero(mid, out),
            Matrix::Zero(1, out)};
}

HeadParams HeadParams::initialize(std::size_t hidden_dim, double init_std, Rng& rng) {
    HeadParams h = zeros(hidden_dim);
    h.dense_w = normal_matrix(h.dense_w.rows(), h.dense_w.cols(), init_std, rng);
    h.out_w = normal_matrix(h.out_w.rows(), h.out_w.cols(), init_std, rng);
    return h;
}

ClassifierParams ClassifierParams::zeros(const EncoderConfig& config) {
    return {EncoderParams::zeros(config), HeadParams::zeros(config.hidden_dim)};
}

ClassifierParams ClassifierParams::initialize(const EncoderConfig& config, Rng& rng) {
    ClassifierParams p;
    p.encoder = EncoderParams::initialize(config, rng);
    p.head = HeadParams::initialize(config.hidden_dim, config.init_std, rng);
    return p;
}

std::vector<std::pair<std::string, const Matrix*>> ClassifierParams::named_tensors() const {
    auto out = encoder.named_tensors();
    for (auto& entry : out) {
        entry.first = "encoder." + entry.first;
    }
    out.emplace_back("head.dense_w", &head.dense_w);
    out.emplace_back("head.dense_b", &head.dense_b);
    out.emplace_back("head.out_w", &head.out_w);
    out.emplace_back("head.out_b", &head.out_b);
    return out;
}

std::vector<std::pair<std::string, Matrix*>> ClassifierParams::named_tensors() {
    std::vector<std::pair<std::string, Matrix*>> out;
    for (auto& [name, m] : std::as_const(*this).named_tensors()) {
        out.emplace_back(std::move(name), const_cast<Matrix*>(m));
    }
    return out;
}

void ClassifierParams::set_zero() {
    for (auto& [name, m] : named_tensors()) {
        m->setZero();
    }
}

RelationScores classify(const HiddenVector& h1, const HiddenVector& h2, const HeadParams& head,
                        OutputMode output, double dropout, Mode mode, Rng* rng, HeadTrace* trace) {
    const bool use_dropout = mode == Mode::train && dropout > 0.0;
    if (use_dropout && rng == nullptr) {
        throw std::invalid_argument("train-mode classify with dropout needs an RNG");
    }
    RowVector x = combine_features(h1, h2);
    if (x.size() != head.dense_w.rows()) {
        throw std::invalid_argument(fmt::format("feature width {} does not match head input {}",
                                                x.size(), head.dense_w.rows()));
    }
    require_finite(x, "features");
    RowVector x_mask;
    if (use_dropout) {
        x_mask = dropout_mask(x.size(), dropout, *rng);
        x = x.cwiseProduct(x_mask);
    }
    RowVector pre = x * head.dense_w + head.dense_b.row(0);
    require_finite(pre, "dense");
    RowVector hidden = pre.cwiseMax(0.0);
    RowVector h_mask;
    if (use_dropout) {
        h_mask = dropout_mask(hidden.size(), dropout, *rng);
        hidden = hidden.cwiseProduct(h_mask);
    }
    RowVector logits = hidden * head.out_w + head.out_b.row(0);
    require_finite(logits, "logits");

    RelationScores scores{};
    if (output == OutputMode::softmax) {
        const double mx = logits.maxCoeff();
        double total = 0.0;
        for (std::size_t i = 0; i < kNumLabels; ++i) {
            scores[i] = std::exp(logits(static_cast<Eigen::Index>(i)) - mx);
            total += scores[i];
        }
        for (auto& s : scores) {
            s /= total;
        }
    } else {
        for (std::size_t i = 0; i < kNumLabels; ++i) {
            scores[i] = sigmoid(logits(static_cast<Eigen::Index>(i)));
        }
    }
    if (trace) {
        trace->h1 = h1;
        trace->h2 = h2;
        trace->features = std::move(x);
        trace->features_mask = std::move(x_mask);
        trace->hidden_pre = std::move(pre);
        trace->hidden_mask = std::move(h_mask);
        trace->hidden = std::move(hidden);
        trace->logits = std::move(logits);
        trace->scores = scores;
    }
    return scores;
}

std::pair<HiddenVector, HiddenVector> classify_backward(const RowVector& grad_logits,
                                                        const HeadTrace& trace,
                                                        const HeadParams& head, HeadParams& grads) {
    grads.out_w.noalias() += trace.hidden.transpose() * grad_logits;
    grads.out_b.row(0) += grad_logits;
    RowVector dhidden = grad_logits * head.out_w.transpose();
    if (trace.hidden_mask.size() > 0) {
        dhidden = dhidden.cwiseProduct(trace.hidden_mask);
    }
    for (Eigen::Index i = 0; i < dhidden.size(); ++i) {
        if (trace.hidden_pre(i) <= 0.0) {
            dhidden(i) = 0.0;
        }
    }
    grads.dense_w.noalias() += trace.features.transpose() * dhidden;
    grads.dense_b.row(0) += dhidden;
    RowVector dx = dhidden * head.dense_w.transpose();
    if (trace.features_mask.size() > 0) {
        dx = dx.cwiseProduct(trace.features_mask);
    }

    const Eigen::Index d = trace.h1.size();
    const auto dx1 = dx.segment(0, d);
    const auto dx2 = dx.segment(d, d);
    const auto dabs = dx.segment(2 * d, d);
    const auto dprod = dx.segment(3 * d, d);
    const auto dmean = dx.segment(4 * d, d);
    const RowVector sign = (trace.h1 - trace.h2).unaryExpr(
        [](double z) { return z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0); });

    HiddenVector dh1 = dx1 + sign.cwiseProduct(dabs) + trace.h2.cwiseProduct(dprod) + 0.5 * dmean;
    HiddenVector dh2 = dx2 - sign.cwiseProduct(dabs) + trace.h1.cwiseProduct(dprod) + 0.5 * dmean;
    return {std::move(dh1), std::move(dh2)};
}

HiddenVector RelationModel::encode_text(std::string_view text) const {
    const auto tokens = tokenize(text);
    return encode(tokens, vocab, params.encoder, encoder_config, Mode::eval);
}

RelationScores RelationModel::score_encoded(const HiddenVector& h1, const HiddenVector& h2) const {
    return classify(h1, h2, params.head, output, 0.0, Mode::eval);
}

RelationScores RelationModel::score(std::string_view arg1, std::string_view arg2) const {
    return score_encoded(encode_text(arg1), encode_text(arg2));
}

double pair_loss(const RelationModel& model, std::span<const std::string> arg1_tokens,
                 std::span<const std::string> arg2_tokens, RelationLabel label, Mode mode,
                 Rng* rng, ClassifierParams* grads) {
    EncoderTrace t1;
    EncoderTrace t2;
    HeadTrace head_trace;
    const bool keep = grads != nullptr;
    const auto h1 = encode(arg1_tokens, model.vocab, model.params.encoder, model.encoder_config,
                           mode, rng, keep ? &t1 : nullptr);
    const auto h2 = encode(arg2_tokens, model.vocab, model.params.encoder, model.encoder_config,
                           mode, rng, keep ? &t2 : nullptr);
    classify(h1, h2, model.params.head, model.output, model.encoder_config.dropout, mode, rng,
             &head_trace);

    const RowVector& z = head_trace.logits;
    const auto y = static_cast<Eigen::Index>(label_index(label));
    double loss = 0.0;
    RowVector dlogits(z.size());
    if (model.output == OutputMode::softmax) {
        const double mx = z.maxCoeff();
        const double lse = mx + std::log((z.array() - mx).exp().sum());
        loss = lse - z(y);
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            dlogits(i) = head_trace.scores[static_cast<std::size_t>(i)] - (i == y ? 1.0 : 0.0);
        }
    } else {
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double target = i == y ? 1.0 : 0.0;
            loss += softplus(z(i)) - target * z(i);
            dlogits(i) = head_trace.scores[static_cast<std::size_t>(i)] - target;
        }
    }
    if (grads) {
        auto [dh1, dh2] = classify_backward(dlogits, head_trace, model.params.head, grads->head);
        encode_backward(dh1, t1, model.params.encoder, grads->encoder);
        encode_backward(dh2, t2, model.params.encoder, grads->encoder);
    }
    return loss;
}

void TrainConfig::validate() const {
    if (batch_size < 1) {
        throw std::invalid_argument("batch_size must be at least 1");
    }
    if (!(learning_rate > 0.0)) {
        throw std::invalid_argument("learning_rate must be positive");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw std::invalid_argument("dropout must lie in [0, 1)");
    }
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
        throw std::invalid_argument("warmup_fraction must lie in [0, 1)");
    }
    if (!(max_grad_norm >= 0.0)) {
        throw std::invalid_argument("max_grad_norm must be non-negative");
    }
}

double TrainConfig::learning_rate_at(std::size_t step, std::size_t total_steps) const {
    // step is 1-based
    const auto warmup = static_cast<std::size_t>(warmup_fraction * static_cast<double>(total_steps));
    if (warmup > 0 && step <= warmup) {
        return learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
    }
    if (!linear_decay || total_steps <= warmup) {
        return learning_rate;
    }
    const double remaining = static_cast<double>(total_steps - std::min(step, total_steps) + 1);
    return learning_rate * remaining / static_cast<double>(total_steps - warmup);
}

TrainResult train(std::span<const LabeledPair> data, EncoderConfig encoder_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch) {
    if (data.empty()) {
        throw std::invalid_argument("training data is empty");
    }
    train_config.validate();
    encoder_config.dropout = train_config.dropout;
    encoder_config.seed = train_config.seed;

    std::vector<std::vector<std::string>> tokens1;
    std::vector<std::vector<std::string>> tokens2;
    std::vector<std::vector<std::string>> all_tokens;
    for (const auto& ex : data) {
        if (ex.arg1.empty() || ex.arg2.empty()) {
            throw std::invalid_argument("labelled pairs need two non-empty arguments");
        }
        tokens1.push_back(tokenize(ex.arg1));
        tokens2.push_back(tokenize(ex.arg2));
        all_tokens.push_back(tokens1.back());
        all_tokens.push_back(tokens2.back());
    }

    TrainResult result;
    RelationModel& model = result.model;
    model.vocab = EncoderVocab::build(all_tokens, encoder_config.vocab_size);
    encoder_config.vocab_size = model.vocab.size();
    encoder_config.validate();
    model.encoder_config = encoder_config;
    model.output = train_config.output;

    Rng rng(train_config.seed);
    model.params = ClassifierParams::initialize(encoder_config, rng);

    ClassifierParams grads = ClassifierParams::zeros(encoder_config);
    auto param_list = model.params.named_tensors();
    auto grad_list = grads.named_tensors();
    AdamState adam;
    for (const auto& [name, m] : param_list) {
        adam.m.push_back(Matrix::Zero(m->rows(), m->cols()));
        adam.v.push_back(Matrix::Zero(m->rows(), m->cols()));
    }

    const std::size_t steps_per_epoch =
        (data.size() + train_config.batch_size - 1) / train_config.batch_size;
    const std::size_t total_steps = steps_per_epoch * train_config.epochs;

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += train_config.batch_size) {
            const std::size_t end = std::min(order.size(), start + train_config.batch_size);
            grads.set_zero();
            double batch_loss = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                const std::size_t ex = order[i];
                Rng example_rng(rng());
                batch_loss += pair_loss(model, tokens1[ex], tokens2[ex], data[ex].label,
                                        Mode::train, &example_rng, &grads);
            }
            if (!std::isfinite(batch_loss)) {
                throw std::runtime_error(fmt::format(
                    "non-finite training loss in epoch {} at examples {}..{}", epoch + 1, start,
                    end - 1));
            }
            epoch_loss += batch_loss;

            double inv_b = 1.0 / static_cast<double>(end - start);
            if (train_config.max_grad_norm > 0.0) {
                double sq = 0.0;
                for (const auto& [name, g] : grad_list) {
                    sq += g->squaredNorm();
                }
                const double norm = std::sqrt(sq) * inv_b;
                if (norm > train_config.max_grad_norm) {
                    inv_b *= train_config.max_grad_norm / norm;
                }
            }
            ++adam.step;
            const double lr = train_config.learning_rate_at(adam.step, total_steps);
            const double c1 = 1.0 - std::pow(train_config.beta1, static_cast<double>(adam.step));
            const double c2 = 1.0 - std::pow(train_config.beta2, static_cast<double>(adam.step));
            for (std::size_t k = 0; k < param_list.size(); ++k) {
                const Matrix g = *grad_list[k].second * inv_b;
                adam.m[k] = train_config.beta1 * adam.m[k] + (1.0 - train_config.beta1) * g;
                adam.v[k] = train_config.beta2 * adam.v[k] +
                            (1.0 - train_config.beta2) * g.cwiseProduct(g);
                param_list[k].second->array() -=
                    lr * (adam.m[k].array() / c1) /
                    ((adam.v[k].array() / c2).sqrt() + train_config.epsilon);
            }
        }
        const double mean_loss = epoch_loss / static_cast<double>(data.size());
        result.epoch_losses.push_back(mean_loss);
        if (on_epoch) {
            on_epoch(epoch + 1, mean_loss);
        }
    }
    return result;
}

}  // namespace storyweave
