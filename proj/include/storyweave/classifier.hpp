#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "storyweave/encoder.hpp"
#include "storyweave/labels.hpp"

namespace storyweave {

/// [h1; h2; |h1 - h2|; h1 * h2; (h1 + h2) / 2], five blocks of hidden_dim.
/// Throws std::invalid_argument when the lengths differ.
RowVector combine_features(const HiddenVector& h1, const HiddenVector& h2);

inline constexpr std::size_t kFeatureBlocks = 5;
inline constexpr std::size_t kHeadHiddenUnits = 100;

// softmax: single-label probabilities. sigmoid: independent per-label scores.
enum class OutputMode { softmax, sigmoid };

/// MLP on top of the combined features: dense (5d -> 100), ReLU, dense (100 -> 5).
struct HeadParams {
    Matrix dense_w, dense_b;  // 5d x 100, 1 x 100
    Matrix out_w, out_b;      // 100 x 5, 1 x 5

    static HeadParams zeros(std::size_t hidden_dim);
    static HeadParams initialize(std::size_t hidden_dim, double init_std, Rng& rng);
};

/// One encoder shared by both arguments plus the head.
struct ClassifierParams {
    EncoderParams encoder;
    HeadParams head;

    static ClassifierParams zeros(const EncoderConfig& config);
    static ClassifierParams initialize(const EncoderConfig& config, Rng& rng);

    std::vector<std::pair<std::string, Matrix*>> named_tensors();
    std::vector<std::pair<std::string, const Matrix*>> named_tensors() const;
    void set_zero();
};

struct HeadTrace {
    HiddenVector h1, h2;
    RowVector features;  // after dropout
    RowVector features_mask;
    RowVector hidden_pre;
    RowVector hidden_mask;
    RowVector hidden;  // after ReLU and dropout
    RowVector logits;
    RelationScores scores{};
};

/// Applies the head. `dropout` is used in train mode only (features and the
/// ReLU output). Throws std::runtime_error naming the stage that produced a
/// non-finite value.
RelationScores classify(const HiddenVector& h1, const HiddenVector& h2, const HeadParams& head,
                        OutputMode output, double dropout, Mode mode, Rng* rng = nullptr,
                        HeadTrace* trace = nullptr);

/// Backward through the head given d(loss)/d(logits); returns the gradients
/// w.r.t. h1 and h2 and adds parameter gradients into `grads`.
std::pair<HiddenVector, HiddenVector> classify_backward(const RowVector& grad_logits,
                                                        const HeadTrace& trace,
                                                        const HeadParams& head, HeadParams& grads);

struct LabeledPair {
    std::string arg1;
    std::string arg2;
    RelationLabel label = RelationLabel::None;

    bool operator==(const LabeledPair&) const = default;
};

/// A trained Siamese classifier and everything needed to apply it to text.
struct RelationModel {
    EncoderConfig encoder_config;
    EncoderVocab vocab;
    ClassifierParams params;
    OutputMode output = OutputMode::softmax;

    /// Eval-mode CLS encoding of raw text.
    HiddenVector encode_text(std::string_view text) const;
    RelationScores score(std::string_view arg1, std::string_view arg2) const;
    RelationScores score_encoded(const HiddenVector& h1, const HiddenVector& h2) const;
};

/// Loss for one labelled pair; when `grads` is given its gradients are added
/// there. Softmax mode uses cross-entropy, sigmoid mode summed binary
/// cross-entropy against the one-hot target.
double pair_loss(const RelationModel& model, std::span<const std::string> arg1_tokens,
                 std::span<const std::string> arg2_tokens, RelationLabel label, Mode mode,
                 Rng* rng, ClassifierParams* grads);

struct TrainConfig {
    std::size_t batch_size = 16;
    double dropout = 0.1;
    double learning_rate = 2e-5;
    std::size_t epochs = 5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 42;
    OutputMode output = OutputMode::softmax;
    /// Linear warmup over this share of the steps, then linear decay to zero.
    /// Zero warmup with `linear_decay` off gives a constant rate.
    double warmup_fraction = 0.1;
    bool linear_decay = true;
    /// Global gradient-norm clip; 0 disables.
    double max_grad_norm = 1.0;

    void validate() const;
    /// `step` counts from 1.
    double learning_rate_at(std::size_t step, std::size_t total_steps) const;
};

struct TrainResult {
    RelationModel model;
    std::vector<double> epoch_losses;  // mean training loss of each epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// End-to-end Adam training of encoder and head. The encoder's dropout is
/// overridden by `train_config.dropout`. Throws std::invalid_argument for
/// empty data and std::runtime_error when the loss becomes non-finite.
TrainResult train(std::span<const LabeledPair> data, EncoderConfig encoder_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch = {});

}  // namespace storyweave
