#include <doctest.h>

#include <cmath>
#include <random>

#include "gradient_check.hpp"
#include "storyweave/encoder.hpp"

using namespace storyweave;

namespace {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

Mat to_mat(const Matrix& m) {
    Mat out(static_cast<std::size_t>(m.rows()), Vec(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            out[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = m(r, c);
        }
    }
    return out;
}

Mat matmul(const Mat& a, const Mat& b) {
    Mat out(a.size(), Vec(b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t k = 0; k < b.size(); ++k) {
            for (std::size_t j = 0; j < b[0].size(); ++j) {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    return out;
}

Mat plus_bias(Mat m, const Matrix& bias) {
    for (auto& row : m) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            row[j] += bias(0, static_cast<Eigen::Index>(j));
        }
    }
    return m;
}

Mat naive_layer_norm(const Mat& x, const Matrix& gamma, const Matrix& beta) {
    Mat out = x;
    for (std::size_t r = 0; r < x.size(); ++r) {
        double mean = 0.0;
        for (double v : x[r]) {
            mean += v;
        }
        mean /= static_cast<double>(x[r].size());
        double var = 0.0;
        for (double v : x[r]) {
            var += (v - mean) * (v - mean);
        }
        var /= static_cast<double>(x[r].size());
        for (std::size_t j = 0; j < x[r].size(); ++j) {
            const auto c = static_cast<Eigen::Index>(j);
            out[r][j] = (x[r][j] - mean) / std::sqrt(var + kLayerNormEps) * gamma(0, c) + beta(0, c);
        }
    }
    return out;
}

// Scalar-loop eval-mode forward, independent of the Eigen implementation.
Vec naive_encode(const std::vector<int>& tokens, const EncoderParams& p, const EncoderConfig& c) {
    std::vector<int> ids = {EncoderVocab::kCls};
    for (int t : tokens) {
        if (ids.size() < c.max_seq_len) {
            ids.push_back(t);
        }
    }
    const std::size_t n = ids.size();
    const std::size_t d = c.hidden_dim;
    const std::size_t dh = d / c.num_heads;
    Mat x(n, Vec(d));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            x[i][j] = p.token_embedding(ids[i], jj) +
                      p.position_embedding(static_cast<Eigen::Index>(i), jj);
        }
    }
    for (const auto& L : p.layers) {
        const Mat q = plus_bias(matmul(x, to_mat(L.wq)), L.bq);
        const Mat k = plus_bias(matmul(x, to_mat(L.wk)), L.bk);
        const Mat v = plus_bias(matmul(x, to_mat(L.wv)), L.bv);
        Mat ctx(n, Vec(d, 0.0));
        for (std::size_t h = 0; h < c.num_heads; ++h) {
            for (std::size_t i = 0; i < n; ++i) {
                Vec s(n);
                double mx = -1e300;
                for (std::size_t j = 0; j < n; ++j) {
                    s[j] = 0.0;
                    for (std::size_t e = h * dh; e < (h + 1) * dh; ++e) {
                        s[j] += q[i][e] * k[j][e];
                    }
                    s[j] /= std::sqrt(static_cast<double>(dh));
                    mx = std::max(mx, s[j]);
                }
                double z = 0.0;
                for (auto& sj : s) {
                    sj = std::exp(sj - mx);
                    z += sj;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    for (std::size_t e = h * dh; e < (h + 1) * dh; ++e) {
                        ctx[i][e] += s[j] / z * v[j][e];
                    }
                }
            }
        }
        Mat attn = plus_bias(matmul(ctx, to_mat(L.wo)), L.bo);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                attn[i][j] += x[i][j];
            }
        }
        const Mat y1 = naive_layer_norm(attn, L.ln1_gamma, L.ln1_beta);
        Mat ff = plus_bias(matmul(y1, to_mat(L.w1)), L.b1);
        for (auto& row : ff) {
            for (auto& z : row) {
                z = 0.5 * z * (1.0 + std::erf(z / std::sqrt(2.0)));
            }
        }
        Mat out = plus_bias(matmul(ff, to_mat(L.w2)), L.b2);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                out[i][j] += y1[i][j];
            }
        }
        x = naive_layer_norm(out, L.ln2_gamma, L.ln2_beta);
    }
    return x[0];
}

EncoderConfig small_config() {
    EncoderConfig c;
    c.num_layers = 2;
    c.hidden_dim = 8;
    c.num_heads = 2;
    c.ff_dim = 12;
    c.vocab_size = 20;
    c.max_seq_len = 6;
    c.init_std = 0.4;
    return c;
}

}  // namespace

TEST_CASE("hand-computed forward on a two-dimensional encoder") {
    EncoderConfig c;
    c.num_layers = 1;
    c.hidden_dim = 2;
    c.num_heads = 1;
    c.ff_dim = 2;
    c.vocab_size = 4;
    c.max_seq_len = 4;
    auto p = EncoderParams::zeros(c);
    for (auto& L : p.layers) {
        L.ln1_gamma.setOnes();
        L.ln2_gamma.setOnes();
    }
    // Zero projections make both sublayers vanish, so the output is
    // LN(LN(cls + pos0)); a 2-vector normalizes to (+1, -1) or (-1, +1).
    p.token_embedding.row(EncoderVocab::kCls) << 3.0, 1.0;
    p.position_embedding.row(0) << 0.0, 0.5;
    const std::vector<int> ids = {3};
    const auto h = encode(ids, p, c, Mode::eval);
    REQUIRE(h.size() == 2);
    CHECK(h(0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(h(1) == doctest::Approx(-1.0).epsilon(1e-9));

    p.layers[0].ln2_gamma << 2.0, 3.0;
    p.layers[0].ln2_beta << 0.5, -0.5;
    const auto g = encode(ids, p, c, Mode::eval);
    CHECK(g(0) == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(g(1) == doctest::Approx(-3.5).epsilon(1e-9));
}

TEST_CASE("forward matches a scalar reference implementation") {
    const auto c = small_config();
    Rng rng(17);
    const auto p = EncoderParams::initialize(c, rng);
    std::uniform_int_distribution<int> tok(0, static_cast<int>(c.vocab_size) - 1);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> ids(1 + static_cast<std::size_t>(trial % 9));
        for (auto& t : ids) {
            t = tok(rng);
        }
        const auto h = encode(ids, p, c, Mode::eval);
        const auto ref = naive_encode(ids, p, c);
        for (std::size_t j = 0; j < ref.size(); ++j) {
            CHECK(h(static_cast<Eigen::Index>(j)) == doctest::Approx(ref[j]).epsilon(1e-10));
        }
    }
}

TEST_CASE("layer norm and attention invariants") {
    Rng rng(3);
    std::normal_distribution<double> dist(0.0, 2.0);
    Matrix x(5, 7);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x.data()[i] = dist(rng);
    }
    Matrix gamma = Matrix::Ones(1, 7);
    Matrix beta = Matrix::Zero(1, 7);
    const Matrix y = layer_norm(x, gamma, beta);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        CHECK(std::abs(y.row(r).mean()) < 1e-12);
        CHECK(y.row(r).squaredNorm() / 7.0 == doctest::Approx(1.0).epsilon(1e-9));
    }

    const Matrix a = softmax_rows(x * 100.0);
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        CHECK(a.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(a.row(r).minCoeff() >= 0.0);
    }
    CHECK(a.allFinite());

    const auto c = small_config();
    const auto p = EncoderParams::initialize(c, rng);
    EncoderTrace trace;
    const std::vector<int> ids = {4, 5, 6};
    encode(ids, p, c, Mode::eval, nullptr, &trace);
    for (const auto& lt : trace.layers) {
        REQUIRE(lt.attention.size() == c.num_heads);
        for (const auto& head : lt.attention) {
            for (Eigen::Index r = 0; r < head.rows(); ++r) {
                CHECK(head.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("gelu and its derivative") {
    CHECK(gelu(0.0) == 0.0);
    CHECK(gelu(10.0) == doctest::Approx(10.0));
    CHECK(std::abs(gelu(-10.0)) < 1e-12);
    for (double x : {-2.0, -0.3, 0.0, 0.7, 1.9}) {
        const double numeric = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
        CHECK(gelu_derivative(x) == doctest::Approx(numeric).epsilon(1e-7));
    }
}

TEST_CASE("long inputs are truncated to max_seq_len") {
    const auto c = small_config();
    Rng rng(1);
    const auto p = EncoderParams::initialize(c, rng);
    std::vector<int> ids(40, 7);
    EncoderTrace trace;
    const auto h = encode(ids, p, c, Mode::eval, nullptr, &trace);
    CHECK(trace.ids.size() == c.max_seq_len);
    CHECK(trace.ids[0] == EncoderVocab::kCls);
    const std::vector<int> prefix(ids.begin(), ids.begin() + c.max_seq_len - 1);
    CHECK(h.isApprox(encode(prefix, p, c, Mode::eval), 0.0));
    // Out-of-range ids fall back to UNK.
    const std::vector<int> bad = {999};
    const std::vector<int> unk = {EncoderVocab::kUnk};
    CHECK(encode(bad, p, c, Mode::eval).isApprox(encode(unk, p, c, Mode::eval), 0.0));
}

TEST_CASE("eval mode is deterministic and train mode needs an rng") {
    const auto c = small_config();
    Rng rng(5);
    const auto p = EncoderParams::initialize(c, rng);
    const std::vector<int> ids = {3, 9, 11};
    CHECK(encode(ids, p, c, Mode::eval) == encode(ids, p, c, Mode::eval));
    CHECK_THROWS_AS(encode(ids, p, c, Mode::train), std::invalid_argument);
    Rng a(8);
    Rng b(8);
    CHECK(encode(ids, p, c, Mode::train, &a) == encode(ids, p, c, Mode::train, &b));
}

TEST_CASE("encoder vocabulary") {
    const std::vector<std::vector<std::string>> lists = {{"b", "a", "a"}, {"c", "b", "a"}};
    const auto v = EncoderVocab::build(lists, 5);
    CHECK(v.size() == 5);
    CHECK(v.tokens()[3] == "a");
    CHECK(v.tokens()[4] == "b");
    CHECK(v.id_of("c") == EncoderVocab::kUnk);
    CHECK(EncoderVocab::from_tokens(v.tokens()).tokens() == v.tokens());
}

TEST_CASE("config and parameter validation") {
    auto c = small_config();
    CHECK_NOTHROW(c.validate());
    c.num_heads = 3;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small_config();
    auto p = EncoderParams::zeros(c);
    CHECK_NOTHROW(p.validate(c));
    p.layers[1].w1.resize(3, 3);
    CHECK_THROWS_AS(p.validate(c), std::invalid_argument);
    p = EncoderParams::zeros(c);
    p.token_embedding(0, 0) = std::nan("");
    CHECK_THROWS_AS(p.validate(c), std::invalid_argument);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
    const auto c = small_config();
    Rng rng(2);
    const auto p = EncoderParams::initialize(c, rng);
    EncoderTrace trace;
    const std::vector<int> ids = {4, 8};
    encode(ids, p, c, Mode::eval, nullptr, &trace);
    auto grads = EncoderParams::zeros(c);
    encode_backward(HiddenVector::Zero(static_cast<Eigen::Index>(c.hidden_dim)), trace, p, grads);
    for (const auto& [name, m] : std::as_const(grads).named_tensors()) {
        CAPTURE(name);
        CHECK(m->isZero(0.0));
    }
    CHECK_THROWS_AS(encode_backward(HiddenVector::Ones(8), EncoderTrace{}, p, grads),
                    std::logic_error);
}

TEST_CASE("unused vocabulary rows get zero gradient") {
    auto problem = gradcheck::micro_problem();
    auto grads = ClassifierParams::zeros(problem.model.encoder_config);
    problem.loss(&grads);
    const auto& emb = grads.encoder.token_embedding;
    const int used = problem.model.vocab.id_of("w07");
    const int unused = problem.model.vocab.id_of("w40");
    REQUIRE(unused != EncoderVocab::kUnk);
    CHECK_FALSE(emb.row(used).isZero(0.0));
    CHECK(emb.row(unused).isZero(0.0));
    // Positions past the longest input are never read either.
    CHECK(grads.encoder.position_embedding.row(10).isZero(0.0));
}

TEST_CASE("finite-difference gradient check on the micro config") {
    for (auto output : {OutputMode::softmax, OutputMode::sigmoid}) {
        const auto report = gradcheck::run(gradcheck::micro_problem(output));
        CHECK(report.groups.size() > 20);
        for (const auto& g : report.groups) {
            CAPTURE(g.name);
            CAPTURE(g.max_abs_diff);
            CHECK(g.failures == 0);
        }
        CHECK(report.max_rel_error() < gradcheck::kRelTol);
    }
}
