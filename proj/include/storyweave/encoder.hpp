#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace storyweave {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
/// Final-layer state at the CLS position.
using HiddenVector = Eigen::RowVectorXd;
using Rng = std::mt19937_64;

enum class Mode { train, eval };

struct EncoderConfig {
    std::size_t num_layers = 2;
    std::size_t hidden_dim = 64;
    std::size_t num_heads = 4;
    std::size_t ff_dim = 256;
    std::size_t vocab_size = 5000;
    std::size_t max_seq_len = 64;
    double dropout = 0.1;
    std::uint64_t seed = 42;
    double init_std = 0.02;

    std::size_t head_dim() const { return hidden_dim / num_heads; }
    /// Throws std::invalid_argument on any broken invariant.
    void validate() const;

    bool operator==(const EncoderConfig&) const = default;
};

/// Word-level vocabulary with reserved ids PAD=0, UNK=1, CLS=2.
class EncoderVocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr std::size_t kReserved = 3;

    EncoderVocab();

    /// Keeps the `vocab_size - 3` most frequent tokens, frequency descending
    /// with lexicographic tiebreak.
    static EncoderVocab build(std::span<const std::vector<std::string>> token_lists,
                              std::size_t vocab_size);
    /// Restores a vocabulary from its id-ordered token list (reserved ids included).
    static EncoderVocab from_tokens(std::vector<std::string> tokens);

    int id_of(std::string_view token) const;
    std::vector<int> to_ids(std::span<const std::string> tokens) const;
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

struct LayerParams {
    Matrix wq, wk, wv, wo;  // d x d
    Matrix bq, bk, bv, bo;  // 1 x d
    Matrix w1, b1;          // d x ff, 1 x ff
    Matrix w2, b2;          // ff x d, 1 x d
    Matrix ln1_gamma, ln1_beta;
    Matrix ln2_gamma, ln2_beta;
};

struct EncoderParams {
    Matrix token_embedding;     // vocab x d
    Matrix position_embedding;  // max_seq_len x d
    std::vector<LayerParams> layers;

    /// Every tensor set to zero, shaped for `config`.
    static EncoderParams zeros(const EncoderConfig& config);
    /// Normal(0, init_std) weights, zero biases, unit normalization scales.
    static EncoderParams initialize(const EncoderConfig& config, Rng& rng);

    /// Stable names ("layers.0.wq", ...) paired with their tensors.
    std::vector<std::pair<std::string, Matrix*>> named_tensors();
    std::vector<std::pair<std::string, const Matrix*>> named_tensors() const;

    /// Throws std::invalid_argument naming the first tensor whose shape does
    /// not match `config` or which holds a non-finite value.
    void validate(const EncoderConfig& config) const;
};

/// Everything the backward pass needs from one forward call.
struct LayerTrace {
    Matrix input;
    Matrix q, k, v;
    std::vector<Matrix> attention;  // per head, rows sum to 1
    Matrix context;
    Matrix attn_mask;  // empty when dropout is off
    Matrix ln1_xhat;
    Eigen::VectorXd ln1_inv_std;
    Matrix ln1_out;
    Matrix ff_pre;
    Matrix ff_act;
    Matrix ff_mask;
    Matrix ln2_xhat;
    Eigen::VectorXd ln2_inv_std;
};

struct EncoderTrace {
    std::vector<int> ids;
    Matrix embedding_mask;
    std::vector<LayerTrace> layers;

    bool valid() const { return !ids.empty(); }
};

/// Runs the post-norm transformer over [CLS] + ids (truncated to
/// max_seq_len) and returns the CLS state. Dropout needs `rng` in train
/// mode; `trace` is filled when given.
HiddenVector encode(std::span<const int> token_ids, const EncoderParams& params,
                    const EncoderConfig& config, Mode mode, Rng* rng = nullptr,
                    EncoderTrace* trace = nullptr);

HiddenVector encode(std::span<const std::string> tokens, const EncoderVocab& vocab,
                    const EncoderParams& params, const EncoderConfig& config, Mode mode,
                    Rng* rng = nullptr, EncoderTrace* trace = nullptr);

/// Reverse-mode pass: adds d(loss)/d(param) into `grads` given the gradient
/// at the CLS output. Throws std::logic_error for an empty trace.
void encode_backward(const HiddenVector& grad_output, const EncoderTrace& trace,
                     const EncoderParams& params, EncoderParams& grads);

// Building blocks, exposed for tests.
Matrix layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                  Matrix* xhat = nullptr, Eigen::VectorXd* inv_std = nullptr);
Matrix softmax_rows(const Matrix& scores);
double gelu(double x);
double gelu_derivative(double x);

inline constexpr double kLayerNormEps = 1e-12;

}  // namespace storyweave
