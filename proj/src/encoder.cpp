#include "storyweave/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <utility>

#include <fmt/core.h>

namespace storyweave {
namespace {

void add_row_bias(Matrix& m, const Matrix& bias) { m.rowwise() += bias.row(0); }

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
    std::bernoulli_distribution keep(1.0 - p);
    const double scale = 1.0 / (1.0 - p);
    Matrix mask(rows, cols);
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        mask.data()[i] = keep(rng) ? scale : 0.0;
    }
    return mask;
}

// dL/dx of y = xhat * gamma + beta, per row.
Matrix layer_norm_backward(const Matrix& dy, const Matrix& xhat, const Eigen::VectorXd& inv_std,
                           const Matrix& gamma, Matrix& dgamma, Matrix& dbeta) {
    dgamma.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
    dbeta.row(0) += dy.colwise().sum();
    Matrix dxhat = dy.array().rowwise() * gamma.row(0).array();
    const double inv_n = 1.0 / static_cast<double>(dy.cols());
    Matrix dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const double mean_d = dxhat.row(r).sum() * inv_n;
        const double mean_dx = dxhat.row(r).dot(xhat.row(r)) * inv_n;
        dx.row(r) = inv_std(r) * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx).matrix();
    }
    return dx;
}

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = dist(rng);
    }
    return m;
}

}  // namespace

void EncoderConfig::validate() const {
    if (num_layers < 1 || hidden_dim < 1 || num_heads < 1 || ff_dim < 1 || max_seq_len < 1) {
        throw std::invalid_argument("encoder dimensions must all be at least 1");
    }
    if (vocab_size < EncoderVocab::kReserved) {
        throw std::invalid_argument(
            fmt::format("vocab_size must be at least {}", EncoderVocab::kReserved));
    }
    if (hidden_dim % num_heads != 0) {
        throw std::invalid_argument(fmt::format("hidden_dim {} is not divisible by num_heads {}",
                                                hidden_dim, num_heads));
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw std::invalid_argument(fmt::format("dropout {} outside [0, 1)", dropout));
    }
}

EncoderVocab::EncoderVocab() : tokens_{"[PAD]", "[UNK]", "[CLS]"} {}

EncoderVocab EncoderVocab::from_tokens(std::vector<std::string> tokens) {
    EncoderVocab v;
    const std::size_t skip =
        tokens.size() >= kReserved && tokens[0] == "[PAD]" && tokens[1] == "[UNK]" &&
                tokens[2] == "[CLS]"
            ? kReserved
            : 0;
    for (std::size_t i = skip; i < tokens.size(); ++i) {
        v.tokens_.push_back(std::move(tokens[i]));
    }
    for (std::size_t i = kReserved; i < v.tokens_.size(); ++i) {
        if (!v.ids_.emplace(v.tokens_[i], static_cast<int>(i)).second) {
            throw std::invalid_argument(fmt::format("duplicate vocabulary token '{}'", v.tokens_[i]));
        }
    }
    return v;
}

EncoderVocab EncoderVocab::build(std::span<const std::vector<std::string>> token_lists,
                                 std::size_t vocab_size) {
    std::map<std::string, std::size_t> freq;
    for (const auto& list : token_lists) {
        for (const auto& t : list) {
            ++freq[t];
        }
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    // map order is lexicographic, stable_sort keeps it among equal counts
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    const std::size_t keep = vocab_size > kReserved ? vocab_size - kReserved : 0;
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < ranked.size() && i < keep; ++i) {
        tokens.push_back(ranked[i].first);
    }
    return from_tokens(std::move(tokens));
}

int EncoderVocab::id_of(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    return it == ids_.end() ? kUnk : it->second;
}

std::vector<int> EncoderVocab::to_ids(std::span<const std::string> tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) {
        ids.push_back(id_of(t));
    }
    return ids;
}

EncoderParams EncoderParams::zeros(const EncoderConfig& config) {
    config.validate();
    const auto d = static_cast<Eigen::Index>(config.hidden_dim);
    const auto ff = static_cast<Eigen::Index>(config.ff_dim);
    EncoderParams p;
    p.token_embedding = Matrix::Zero(static_cast<Eigen::Index>(config.vocab_size), d);
    p.position_embedding = Matrix::Zero(static_cast<Eigen::Index>(config.max_seq_len), d);
    p.layers.resize(config.num_layers);
    for (auto& l : p.layers) {
        l.wq = l.wk = l.wv = l.wo = Matrix::Zero(d, d);
        l.bq = l.bk = l.bv = l.bo = Matrix::Zero(1, d);
        l.w1 = Matrix::Zero(d, ff);
        l.b1 = Matrix::Zero(1, ff);
        l.w2 = Matrix::Zero(ff, d);
        l.b2 = Matrix::Zero(1, d);
        l.ln1_gamma = l.ln1_beta = l.ln2_gamma = l.ln2_beta = Matrix::Zero(1, d);
    }
    return p;
}

EncoderParams EncoderParams::initialize(const EncoderConfig& config, Rng& rng) {
    EncoderParams p = zeros(config);
    const double s = config.init_std;
    p.token_embedding = normal_matrix(p.token_embedding.rows(), p.token_embedding.cols(), s, rng);
    p.position_embedding =
        normal_matrix(p.position_embedding.rows(), p.position_embedding.cols(), s, rng);
    for (auto& l : p.layers) {
        for (Matrix* w : {&l.wq, &l.wk, &l.wv, &l.wo, &l.w1, &l.w2}) {
            *w = normal_matrix(w->rows(), w->cols(), s, rng);
        }
        l.ln1_gamma.setOnes();
        l.ln2_gamma.setOnes();
    }
    return p;
}

std::vector<std::pair<std::string, const Matrix*>> EncoderParams::named_tensors() const {
    std::vector<std::pair<std::string, const Matrix*>> out;
    out.emplace_back("token_embedding", &token_embedding);
    out.emplace_back("position_embedding", &position_embedding);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const std::pair<const char*, const Matrix*> entries[] = {
            {"wq", &l.wq},           {"bq", &l.bq},          {"wk", &l.wk},
            {"bk", &l.bk},           {"wv", &l.wv},          {"bv", &l.bv},
            {"wo", &l.wo},           {"bo", &l.bo},          {"ln1_gamma", &l.ln1_gamma},
            {"ln1_beta", &l.ln1_beta}, {"w1", &l.w1},        {"b1", &l.b1},
            {"w2", &l.w2},           {"b2", &l.b2},          {"ln2_gamma", &l.ln2_gamma},
            {"ln2_beta", &l.ln2_beta},
        };
        for (const auto& [name, m] : entries) {
            out.emplace_back(fmt::format("layers.{}.{}", i, name), m);
        }
    }
    return out;
}

std::vector<std::pair<std::string, Matrix*>> EncoderParams::named_tensors() {
    std::vector<std::pair<std::string, Matrix*>> out;
    for (auto& [name, m] : std::as_const(*this).named_tensors()) {
        out.emplace_back(std::move(name), const_cast<Matrix*>(m));
    }
    return out;
}

void EncoderParams::validate(const EncoderConfig& config) const {
    const EncoderParams expected = zeros(config);
    if (layers.size() != expected.layers.size()) {
        throw std::invalid_argument(fmt::format("expected {} layers, found {}",
                                                expected.layers.size(), layers.size()));
    }
    const auto want = expected.named_tensors();
    const auto have = named_tensors();
    for (std::size_t i = 0; i < want.size(); ++i) {
        const Matrix& w = *want[i].second;
        const Matrix& h = *have[i].second;
        if (w.rows() != h.rows() || w.cols() != h.cols()) {
            throw std::invalid_argument(fmt::format("tensor {} has shape {}x{}, expected {}x{}",
                                                    have[i].first, h.rows(), h.cols(), w.rows(),
                                                    w.cols()));
        }
        if (!h.allFinite()) {
            throw std::invalid_argument(fmt::format("tensor {} holds non-finite values", have[i].first));
        }
    }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_derivative(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

Matrix layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta, Matrix* xhat_out,
                  Eigen::VectorXd* inv_std_out) {
    const double inv_n = 1.0 / static_cast<double>(x.cols());
    Matrix xhat(x.rows(), x.cols());
    Eigen::VectorXd inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).sum() * inv_n;
        const auto centered = (x.row(r).array() - mean).matrix();
        const double var = centered.squaredNorm() * inv_n;
        inv_std(r) = 1.0 / std::sqrt(var + kLayerNormEps);
        xhat.row(r) = centered * inv_std(r);
    }
    Matrix y = xhat.array().rowwise() * gamma.row(0).array();
    y.rowwise() += beta.row(0);
    if (xhat_out) {
        *xhat_out = std::move(xhat);
    }
    if (inv_std_out) {
        *inv_std_out = std::move(inv_std);
    }
    return y;
}

Matrix softmax_rows(const Matrix& scores) {
    Matrix out(scores.rows(), scores.cols());
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const double mx = scores.row(r).maxCoeff();
        out.row(r) = (scores.row(r).array() - mx).exp().matrix();
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

HiddenVector encode(std::span<const int> token_ids, const EncoderParams& params,
                    const EncoderConfig& config, Mode mode, Rng* rng, EncoderTrace* trace) {
    const bool use_dropout = mode == Mode::train && config.dropout > 0.0;
    if (use_dropout && rng == nullptr) {
        throw std::invalid_argument("train-mode encode with dropout needs an RNG");
    }
    std::vector<int> ids;
    ids.reserve(std::min(token_ids.size() + 1, config.max_seq_len));
    ids.push_back(EncoderVocab::kCls);
    for (int id : token_ids) {
        if (ids.size() >= config.max_seq_len) {
            break;
        }
        if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size) {
            id = EncoderVocab::kUnk;
        }
        ids.push_back(id);
    }

    const auto n = static_cast<Eigen::Index>(ids.size());
    const auto d = static_cast<Eigen::Index>(config.hidden_dim);
    const auto dh = static_cast<Eigen::Index>(config.head_dim());
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Matrix x(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        x.row(i) = params.token_embedding.row(ids[static_cast<std::size_t>(i)]) +
                   params.position_embedding.row(i);
    }
    if (trace) {
        trace->ids = ids;
        trace->layers.clear();
        trace->embedding_mask.resize(0, 0);
    }
    if (use_dropout) {
        Matrix mask = dropout_mask(n, d, config.dropout, *rng);
        x.array() *= mask.array();
        if (trace) {
            trace->embedding_mask = std::move(mask);
        }
    }

    for (const auto& layer : params.layers) {
        LayerTrace lt;
        Matrix q = x * layer.wq;
        Matrix k = x * layer.wk;
        Matrix v = x * layer.wv;
        add_row_bias(q, layer.bq);
        add_row_bias(k, layer.bk);
        add_row_bias(v, layer.bv);

        Matrix context(n, d);
        for (Eigen::Index h = 0; h < static_cast<Eigen::Index>(config.num_heads); ++h) {
            const Matrix s = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() * scale;
            Matrix a = softmax_rows(s);
            context.middleCols(h * dh, dh) = a * v.middleCols(h * dh, dh);
            if (trace) {
                lt.attention.push_back(std::move(a));
            }
        }
        Matrix attn_out = context * layer.wo;
        add_row_bias(attn_out, layer.bo);
        if (use_dropout) {
            lt.attn_mask = dropout_mask(n, d, config.dropout, *rng);
            attn_out.array() *= lt.attn_mask.array();
        }
        Matrix y1 = layer_norm(x + attn_out, layer.ln1_gamma, layer.ln1_beta, &lt.ln1_xhat,
                               &lt.ln1_inv_std);

        Matrix ff_pre = y1 * layer.w1;
        add_row_bias(ff_pre, layer.b1);
        Matrix ff_act = ff_pre.unaryExpr([](double z) { return gelu(z); });
        Matrix ff_out = ff_act * layer.w2;
        add_row_bias(ff_out, layer.b2);
        if (use_dropout) {
            lt.ff_mask = dropout_mask(n, d, config.dropout, *rng);
            ff_out.array() *= lt.ff_mask.array();
        }
        Matrix y2 = layer_norm(y1 + ff_out, layer.ln2_gamma, layer.ln2_beta, &lt.ln2_xhat,
                               &lt.ln2_inv_std);
        if (trace) {
            lt.input = std::move(x);
            lt.q = std::move(q);
            lt.k = std::move(k);
            lt.v = std::move(v);
            lt.context = std::move(context);
            lt.ln1_out = std::move(y1);
            lt.ff_pre = std::move(ff_pre);
            lt.ff_act = std::move(ff_act);
            trace->layers.push_back(std::move(lt));
        }
        x = std::move(y2);
    }
    return x.row(0);
}

HiddenVector encode(std::span<const std::string> tokens, const EncoderVocab& vocab,
                    const EncoderParams& params, const EncoderConfig& config, Mode mode, Rng* rng,
                    EncoderTrace* trace) {
    const auto ids = vocab.to_ids(tokens);
    return encode(ids, params, config, mode, rng, trace);
}

void encode_backward(const HiddenVector& grad_output, const EncoderTrace& trace,
                     const EncoderParams& params, EncoderParams& grads) {
    if (!trace.valid() || trace.layers.size() != params.layers.size()) {
        throw std::logic_error("encode_backward needs the trace of a forward pass");
    }
    const auto n = static_cast<Eigen::Index>(trace.ids.size());
    const auto d = params.token_embedding.cols();
    const auto heads = static_cast<Eigen::Index>(trace.layers.front().attention.size());
    const auto dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Matrix dy = Matrix::Zero(n, d);
    dy.row(0) = grad_output;

    for (std::size_t li = params.layers.size(); li-- > 0;) {
        const LayerParams& p = params.layers[li];
        LayerParams& g = grads.layers[li];
        const LayerTrace& t = trace.layers[li];

        // second sublayer: y2 = LN(y1 + dropout(ffn(y1)))
        Matrix dr2 = layer_norm_backward(dy, t.ln2_xhat, t.ln2_inv_std, p.ln2_gamma, g.ln2_gamma,
                                         g.ln2_beta);
        Matrix dff_out = dr2;
        if (t.ff_mask.size() > 0) {
            dff_out.array() *= t.ff_mask.array();
        }
        g.w2.noalias() += t.ff_act.transpose() * dff_out;
        g.b2.row(0) += dff_out.colwise().sum();
        Matrix dff_pre = dff_out * p.w2.transpose();
        dff_pre.array() *= t.ff_pre.unaryExpr([](double z) { return gelu_derivative(z); }).array();
        g.w1.noalias() += t.ln1_out.transpose() * dff_pre;
        g.b1.row(0) += dff_pre.colwise().sum();
        Matrix dy1 = dr2;
        dy1.noalias() += dff_pre * p.w1.transpose();

        // first sublayer: y1 = LN(x + dropout(attention(x)))
        Matrix dr1 = layer_norm_backward(dy1, t.ln1_xhat, t.ln1_inv_std, p.ln1_gamma, g.ln1_gamma,
                                         g.ln1_beta);
        Matrix dattn = dr1;
        if (t.attn_mask.size() > 0) {
            dattn.array() *= t.attn_mask.array();
        }
        g.wo.noalias() += t.context.transpose() * dattn;
        g.bo.row(0) += dattn.colwise().sum();
        const Matrix dcontext = dattn * p.wo.transpose();

        Matrix dq(n, d);
        Matrix dk(n, d);
        Matrix dv(n, d);
        for (Eigen::Index h = 0; h < heads; ++h) {
            const Matrix& a = t.attention[static_cast<std::size_t>(h)];
            const auto dctx_h = dcontext.middleCols(h * dh, dh);
            const Matrix da = dctx_h * t.v.middleCols(h * dh, dh).transpose();
            dv.middleCols(h * dh, dh) = a.transpose() * dctx_h;
            Matrix ds = a.array() * (da.array().colwise() - (da.array() * a.array()).rowwise().sum());
            ds *= scale;
            dq.middleCols(h * dh, dh) = ds * t.k.middleCols(h * dh, dh);
            dk.middleCols(h * dh, dh) = ds.transpose() * t.q.middleCols(h * dh, dh);
        }
        g.wq.noalias() += t.input.transpose() * dq;
        g.wk.noalias() += t.input.transpose() * dk;
        g.wv.noalias() += t.input.transpose() * dv;
        g.bq.row(0) += dq.colwise().sum();
        g.bk.row(0) += dk.colwise().sum();
        g.bv.row(0) += dv.colwise().sum();

        Matrix dx = dr1;
        dx.noalias() += dq * p.wq.transpose();
        dx.noalias() += dk * p.wk.transpose();
        dx.noalias() += dv * p.wv.transpose();
        dy = std::move(dx);
    }

    if (trace.embedding_mask.size() > 0) {
        dy.array() *= trace.embedding_mask.array();
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        grads.token_embedding.row(trace.ids[static_cast<std::size_t>(i)]) += dy.row(i);
        grads.position_embedding.row(i) += dy.row(i);
    }
}

}  // namespace storyweave
