#include <doctest.h>

#include <cmath>

#include "mixctc/attention.hpp"
#include "mixctc/ctc.hpp"
#include "test_util.hpp"

using namespace mixctc;
using testutil::check_gradients;
using testutil::rand_tensor;

namespace {

// Raw-value helpers for the formula-transcription oracles (no autodiff).
std::vector<double> matvec(const Tensor& W, const std::vector<double>& x) {
  std::vector<double> y(static_cast<size_t>(W.extent(0)), 0.0);
  for (int64_t i = 0; i < W.extent(0); ++i)
    for (int64_t j = 0; j < W.extent(1); ++j) y[static_cast<size_t>(i)] += W.at(i, j) * x[static_cast<size_t>(j)];
  return y;
}

std::vector<double> vec_of(const ad::NodePtr& node) {
  return node->value.data();
}

std::vector<double> softmax_raw(const std::vector<double>& e) {
  double mx = e[0];
  for (double v : e) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : e) z += std::exp(v - mx);
  std::vector<double> out;
  for (double v : e) out.push_back(std::exp(v - mx) / z);
  return out;
}

attn::AttentionParams make_params(const attn::AttentionConfig& cfg, int n, int K, uint64_t seed) {
  Rng rng(seed);
  return attn::AttentionParams::init(cfg, n, K, rng);
}

std::vector<ad::NodePtr> make_window(int C, int n, Rng& rng) {
  std::vector<ad::NodePtr> w;
  for (int i = 0; i < C; ++i) w.push_back(ad::leaf(rand_tensor({n}, rng)));
  return w;
}

}  // namespace

TEST_CASE("time_convolution") {
  SUBCASE("identity kernel with tau = 0 passes the center frame through") {
    attn::AttentionConfig cfg;
    cfg.tau = 0;
    auto params = make_params(cfg, 3, 4, 1);
    params.kernels[0] = ad::leaf(Tensor::identity(3));
    auto h = ad::leaf(Tensor::vector({0.2, -0.5, 1.0}));
    attn::TimeConv tc = attn::time_convolution({h}, params.kernels);
    for (int i = 0; i < 3; ++i) CHECK(tc.uniform_context->value[i] == h->value[i]);
  }
  SUBCASE("identity kernels over a constant window sum to C * h") {
    const int C = 5, n = 3;
    std::vector<ad::NodePtr> kernels, window;
    auto h = ad::leaf(Tensor::vector({0.4, -1.0, 2.5}));
    for (int i = 0; i < C; ++i) {
      kernels.push_back(ad::leaf(Tensor::identity(n)));
      window.push_back(h);
    }
    attn::TimeConv tc = attn::time_convolution(window, kernels);
    for (int i = 0; i < n; ++i) {
      CHECK(tc.uniform_context->value[i] == doctest::Approx(C * h->value[i]).epsilon(1e-12));
    }
  }
  SUBCASE("random kernels match the direct summation") {
    Rng rng(99);
    const int tau = 1, C = 3, n = 4;
    std::vector<ad::NodePtr> kernels, window;
    for (int i = 0; i < C; ++i) kernels.push_back(ad::leaf(rand_tensor({n, n}, rng)));
    window = make_window(C, n, rng);
    attn::TimeConv tc = attn::time_convolution(window, kernels);
    // c = sum_j W'[C-1-j] h_j, offsets u - t = tau - j
    std::vector<double> expect(n, 0.0);
    for (int j = 0; j < C; ++j) {
      auto g = matvec(kernels[static_cast<size_t>(C - 1 - j)]->value, vec_of(window[static_cast<size_t>(j)]));
      for (int i = 0; i < n; ++i) expect[static_cast<size_t>(i)] += g[static_cast<size_t>(i)];
      for (int i = 0; i < n; ++i) {
        CHECK(tc.filtered[static_cast<size_t>(j)]->value[i] == doctest::Approx(g[static_cast<size_t>(i)]).epsilon(1e-12));
      }
    }
    for (int i = 0; i < n; ++i) {
      CHECK(tc.uniform_context->value[i] == doctest::Approx(expect[static_cast<size_t>(i)]).epsilon(1e-12));
    }
    CHECK(tau == 1);
  }
  SUBCASE("kernel count must equal the window size") {
    Rng rng(1);
    auto window = make_window(3, 2, rng);
    std::vector<ad::NodePtr> kernels = {ad::leaf(Tensor::identity(2))};
    CHECK_THROWS_AS(attn::time_convolution(window, kernels), std::invalid_argument);
  }
}

TEST_CASE("location_features") {
  auto alpha = ad::leaf(Tensor::vector({0.2, 0.5, 0.3}));
  SUBCASE("single-tap identity kernel is a pass-through") {
    auto f = attn::location_features(alpha, ad::leaf(Tensor::vector({1.0})));
    for (int i = 0; i < 3; ++i) CHECK(f->value[i] == alpha->value[i]);
  }
  SUBCASE("zero kernel gives zero features") {
    auto f = attn::location_features(alpha, ad::leaf(Tensor::vector({0.0, 0.0, 0.0})));
    for (int i = 0; i < 3; ++i) CHECK(f->value[i] == 0.0);
  }
  SUBCASE("three-tap kernel matches the hand convolution with zero boundary") {
    auto kernel = ad::leaf(Tensor::vector({0.5, -1.0, 2.0}));
    auto f = attn::location_features(alpha, kernel);
    // f[i] = 0.5*a[i-1] - 1.0*a[i] + 2.0*a[i+1], zeros outside
    CHECK(f->value[0] == doctest::Approx(-1.0 * 0.2 + 2.0 * 0.5).epsilon(1e-12));
    CHECK(f->value[1] == doctest::Approx(0.5 * 0.2 - 1.0 * 0.5 + 2.0 * 0.3).epsilon(1e-12));
    CHECK(f->value[2] == doctest::Approx(0.5 * 0.5 - 1.0 * 0.3).epsilon(1e-12));
  }
}

TEST_CASE("attend") {
  Rng rng(7);
  const int n = 4, K = 5, C = 3;
  attn::AttentionConfig cfg;
  cfg.tau = 1;
  auto params = make_params(cfg, n, K, 2);
  auto z = ad::leaf(rand_tensor({K}, rng));
  auto alpha_prev = ad::leaf(Tensor::full({C}, 1.0 / C));
  auto g = make_window(C, n, rng);

  SUBCASE("zero projection vector gives uniform weights") {
    params.v = ad::leaf(Tensor::zeros({n}));
    auto alpha = attn::attend(z, alpha_prev, g, params, attn::ScoreMode::content);
    for (int t = 0; t < C; ++t) CHECK(alpha->value[t] == doctest::Approx(1.0 / C).epsilon(1e-12));
  }
  SUBCASE("hybrid with V = 0 equals content mode exactly") {
    params.V = ad::leaf(Tensor::zeros({n, 1}));
    auto content = attn::attend(z, alpha_prev, g, params, attn::ScoreMode::content);
    auto hybrid = attn::attend(z, alpha_prev, g, params, attn::ScoreMode::hybrid);
    for (int t = 0; t < C; ++t) CHECK(hybrid->value[t] == content->value[t]);
  }
  SUBCASE("hybrid without location parameters is rejected") {
    params.V = nullptr;
    CHECK_THROWS_AS(attn::attend(z, alpha_prev, g, params, attn::ScoreMode::hybrid),
                    std::invalid_argument);
  }
  SUBCASE("matches a literal transcription of the hybrid scoring formula") {
    auto alpha = attn::attend(z, alpha_prev, g, params, attn::ScoreMode::hybrid);
    // f = F * alpha_prev (zero boundary), e_t = v' tanh(Uz + Wg_t + Vf_t + b)
    const Tensor& F = params.F->value;
    const int width = static_cast<int>(F.numel());
    const int center = (width - 1) / 2;
    std::vector<double> f(C, 0.0);
    for (int i = 0; i < C; ++i) {
      for (int k = 0; k < width; ++k) {
        const int j = i + k - center;
        if (j >= 0 && j < C) f[static_cast<size_t>(i)] += F[k] * alpha_prev->value[j];
      }
    }
    auto uz = matvec(params.U->value, vec_of(z));
    std::vector<double> scores;
    for (int t = 0; t < C; ++t) {
      auto wg = matvec(params.W->value, vec_of(g[static_cast<size_t>(t)]));
      double e = 0.0;
      for (int i = 0; i < n; ++i) {
        const double pre = uz[static_cast<size_t>(i)] + wg[static_cast<size_t>(i)] +
                           params.V->value.at(i, 0) * f[static_cast<size_t>(t)] +
                           params.b->value[i];
        e += params.v->value[i] * std::tanh(pre);
      }
      scores.push_back(e);
    }
    auto expect = softmax_raw(scores);
    for (int t = 0; t < C; ++t) {
      CHECK(alpha->value[t] == doctest::Approx(expect[static_cast<size_t>(t)]).epsilon(1e-12));
    }
  }
}

TEST_CASE("context") {
  Rng rng(15);
  const int n = 3, C = 3;
  auto g = make_window(C, n, rng);
  SUBCASE("uniform weights with gamma = C equal the plain sum") {
    auto alpha = ad::leaf(Tensor::full({C}, 1.0 / C));
    auto c = attn::context(alpha, g, static_cast<double>(C));
    for (int i = 0; i < n; ++i) {
      double plain = 0.0;
      for (int t = 0; t < C; ++t) plain += g[static_cast<size_t>(t)]->value[i];
      CHECK(std::abs(c->value[i] - plain) <= 1e-12);
    }
  }
  SUBCASE("one-hot weights with gamma = 1 select one filtered vector") {
    auto alpha = ad::leaf(Tensor::vector({0.0, 0.0, 1.0}));
    auto c = attn::context(alpha, g, 1.0);
    for (int i = 0; i < n; ++i) CHECK(c->value[i] == g[2]->value[i]);
  }
  SUBCASE("random weights match the direct weighted sum") {
    Tensor a = rand_tensor({C}, rng, 0.0, 1.0);
    double norm = 0.0;
    for (int t = 0; t < C; ++t) norm += a[t];
    for (int t = 0; t < C; ++t) a[t] /= norm;
    auto alpha = ad::leaf(a);
    auto c = attn::context(alpha, g, static_cast<double>(C));
    for (int i = 0; i < n; ++i) {
      double expect = 0.0;
      for (int t = 0; t < C; ++t) expect += a[t] * g[static_cast<size_t>(t)]->value[i];
      CHECK(c->value[i] == doctest::Approx(C * expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("output_head") {
  SUBCASE("zero weights give the uniform posterior") {
    auto c = ad::leaf(Tensor::vector({1.0, -2.0}));
    auto head = attn::output_head(c, ad::leaf(Tensor::zeros({4, 2})), ad::leaf(Tensor::zeros({4})));
    for (int k = 0; k < 4; ++k) {
      CHECK(head.log_probs->value[k] == doctest::Approx(std::log(0.25)).epsilon(1e-12));
    }
  }
  SUBCASE("bias of log target distribution reproduces it") {
    const std::vector<double> dist = {0.1, 0.2, 0.3, 0.4};
    Tensor b({4});
    for (int k = 0; k < 4; ++k) b[k] = std::log(dist[static_cast<size_t>(k)]);
    auto head = attn::output_head(ad::leaf(Tensor::vector({0.7})),
                                  ad::leaf(Tensor::zeros({4, 1})), ad::leaf(b));
    for (int k = 0; k < 4; ++k) {
      CHECK(std::exp(head.log_probs->value[k]) == doctest::Approx(dist[static_cast<size_t>(k)]).epsilon(1e-12));
    }
  }
  SUBCASE("posterior sums to one") {
    Rng rng(3);
    auto head = attn::output_head(ad::leaf(rand_tensor({3}, rng)),
                                  ad::leaf(rand_tensor({5, 3}, rng)),
                                  ad::leaf(rand_tensor({5}, rng)));
    double total = 0.0;
    for (int k = 0; k < 5; ++k) total += std::exp(head.log_probs->value[k]);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("plm_step") {
  const int K = 5, n = 3;
  SUBCASE("zero parameters give a zero output") {
    attn::PlmState state;
    state.cell = rnn::LstmParams::zeros(K + n, n);
    state.state = rnn::LstmState::zeros(n);
    auto out = attn::plm_step(ad::leaf(Tensor::zeros({K})), ad::leaf(Tensor::zeros({n})), state);
    for (int i = 0; i < n; ++i) CHECK(out->value[i] == 0.0);
  }
  SUBCASE("input width is always K + n") {
    Rng rng(4);
    attn::PlmState state = attn::PlmState::init(K, n, rng);
    CHECK(state.cell.input_dim() == K + n);
    CHECK(state.cell.cells() == n);
    auto out = attn::plm_step(ad::leaf(rand_tensor({K}, rng)), ad::leaf(rand_tensor({n}, rng)),
                              state);
    CHECK(out->value.numel() == n);
  }
  SUBCASE("gradient through two chained steps matches finite differences") {
    Rng rng(8);
    attn::PlmState proto = attn::PlmState::init(K, n, rng);
    auto z0 = ad::leaf(rand_tensor({K}, rng));
    auto c0 = ad::leaf(rand_tensor({n}, rng));
    std::vector<ad::NodePtr> leaves = {proto.cell.W_i, proto.cell.W_f, proto.cell.W_c,
                                       proto.cell.W_o, proto.cell.b_i, proto.cell.b_f,
                                       proto.cell.b_c, proto.cell.b_o, z0, c0};
    auto res = check_gradients(leaves, [&] {
      attn::PlmState state = proto;
      state.reset(n);
      auto z1 = attn::plm_step(z0, c0, state);
      auto z2 = attn::plm_step(z0, z1, state);  // previous output feeds back as c
      return ad::sum(z2);
    });
    CHECK_MESSAGE(res.ok, res.detail);
  }
}

TEST_CASE("coma") {
  Rng rng(21);
  attn::AttentionConfig cfg;
  cfg.tau = 1;
  const int C = cfg.window();

  SUBCASE("dimension one with v = 1 reproduces attend + context") {
    const int n = 1, K = 3;
    auto params = make_params(cfg, n, K, 31);
    params.v = ad::leaf(Tensor::vector({1.0}));
    auto z = ad::leaf(rand_tensor({K}, rng));
    auto alpha_prev = ad::leaf(Tensor::full({C}, 1.0 / C));
    auto g = make_window(C, n, rng);
    attn::ComaOut co = attn::coma(z, alpha_prev, g, params, attn::ScoreMode::hybrid, C);
    auto alpha = attn::attend(z, alpha_prev, g, params, attn::ScoreMode::hybrid);
    auto ctx = attn::context(alpha, g, C);
    for (int t = 0; t < C; ++t) {
      CHECK(std::abs(co.weights->value.at(0, t) - alpha->value[t]) <= 1e-12);
    }
    CHECK(std::abs(co.context->value[0] - ctx->value[0]) <= 1e-12);
  }
  SUBCASE("scores constant across the window make each row uniform") {
    const int n = 3, K = 4;
    auto params = make_params(cfg, n, K, 33);
    params.W = ad::leaf(Tensor::zeros({n, n}));  // kills the g_t dependence
    params.V = ad::leaf(Tensor::zeros({n, 1}));
    auto z = ad::leaf(rand_tensor({K}, rng));
    auto alpha_prev = ad::leaf(Tensor::full({C}, 1.0 / C));
    auto g = make_window(C, n, rng);
    attn::ComaOut co = attn::coma(z, alpha_prev, g, params, attn::ScoreMode::hybrid, C);
    for (int j = 0; j < n; ++j) {
      for (int t = 0; t < C; ++t) {
        CHECK(co.weights->value.at(j, t) == doctest::Approx(1.0 / C).epsilon(1e-12));
      }
    }
  }
  SUBCASE("matches a literal transcription of the component-attention formulas") {
    const int n = 3, K = 4;
    auto params = make_params(cfg, n, K, 35);
    auto z = ad::leaf(rand_tensor({K}, rng));
    Tensor a0 = rand_tensor({C}, rng, 0.0, 1.0);
    double norm = 0.0;
    for (int t = 0; t < C; ++t) norm += a0[t];
    for (int t = 0; t < C; ++t) a0[t] /= norm;
    auto alpha_prev = ad::leaf(a0);
    auto g = make_window(C, n, rng);
    const double gamma = C;
    attn::ComaOut co = attn::coma(z, alpha_prev, g, params, attn::ScoreMode::hybrid, gamma);

    const Tensor& F = params.F->value;
    const int width = static_cast<int>(F.numel());
    const int center = (width - 1) / 2;
    std::vector<double> f(C, 0.0);
    for (int i = 0; i < C; ++i)
      for (int k = 0; k < width; ++k) {
        const int j = i + k - center;
        if (j >= 0 && j < C) f[static_cast<size_t>(i)] += F[k] * a0[j];
      }
    auto uz = matvec(params.U->value, vec_of(z));
    std::vector<std::vector<double>> e(static_cast<size_t>(C));
    for (int t = 0; t < C; ++t) {
      auto wg = matvec(params.W->value, vec_of(g[static_cast<size_t>(t)]));
      for (int i = 0; i < n; ++i) {
        e[static_cast<size_t>(t)].push_back(std::tanh(uz[static_cast<size_t>(i)] + wg[static_cast<size_t>(i)] +
                                    params.V->value.at(i, 0) * f[static_cast<size_t>(t)] +
                                    params.b->value[i]));
      }
    }
    for (int j = 0; j < n; ++j) {
      std::vector<double> row;
      for (int t = 0; t < C; ++t) row.push_back(e[static_cast<size_t>(t)][static_cast<size_t>(j)]);
      auto w = softmax_raw(row);
      double cj = 0.0;
      for (int t = 0; t < C; ++t) {
        CHECK(co.weights->value.at(j, t) == doctest::Approx(w[static_cast<size_t>(t)]).epsilon(1e-12));
        cj += w[static_cast<size_t>(t)] * g[static_cast<size_t>(t)]->value[j];
      }
      CHECK(co.context->value[j] == doctest::Approx(gamma * cj).epsilon(1e-11));
    }
  }
}

TEST_CASE("self_attention_block") {
  SUBCASE("window of one frame reduces to the residual feed-forward stack") {
    Rng rng(51);
    const int n = 3, d = 2;
    attn::SelfAttentionParams p = attn::SelfAttentionParams::init(n, d, 1, 4, rng);
    auto h = ad::leaf(rand_tensor({n}, rng));
    attn::SelfAttentionOut out = attn::self_attention_block({h}, p);
    CHECK(out.head_weights.size() == 1);
    CHECK(out.head_weights[0]->value[0] == doctest::Approx(1.0).epsilon(1e-12));
    // raw transcription: c = v_u, x = LN(c + b_u), out = LN(FFN(x) + x)
    auto b_u = matvec(p.W_p->value, vec_of(h));
    auto v_u = matvec(p.Wv->value, b_u);
    Tensor sum1({d});
    for (int i = 0; i < d; ++i) sum1[i] = v_u[static_cast<size_t>(i)] + b_u[static_cast<size_t>(i)];
    Tensor x = ad::layer_norm_values(sum1, p.ln1_gain->value, p.ln1_bias->value);
    auto hidden = matvec(p.ff_W1->value, x.data());
    for (size_t i = 0; i < hidden.size(); ++i) hidden[i] = std::tanh(hidden[i] + p.ff_b1->value[static_cast<int64_t>(i)]);
    auto ff = matvec(p.ff_W2->value, hidden);
    Tensor sum2({d});
    for (int i = 0; i < d; ++i) sum2[i] = ff[static_cast<size_t>(i)] + p.ff_b2->value[i] + x[i];
    Tensor expect = ad::layer_norm_values(sum2, p.ln2_gain->value, p.ln2_bias->value);
    for (int i = 0; i < d; ++i) CHECK(out.output->value[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  }
  SUBCASE("identical frames give uniform attention weights") {
    Rng rng(53);
    const int n = 4, d = 4;
    attn::SelfAttentionParams p = attn::SelfAttentionParams::init(n, d, 2, 5, rng);
    auto h = ad::leaf(rand_tensor({n}, rng));
    std::vector<ad::NodePtr> window = {h, h, h};
    attn::SelfAttentionOut out = attn::self_attention_block(window, p);
    for (const auto& alpha : out.head_weights) {
      for (int t = 0; t < 3; ++t) CHECK(alpha->value[t] == doctest::Approx(1.0 / 3).epsilon(1e-12));
    }
  }
  SUBCASE("hand-computed scalar oracle over a three-frame window") {
    Rng rng(57);
    const int n = 2, d = 2;
    attn::SelfAttentionParams p = attn::SelfAttentionParams::init(n, d, 1, 3, rng);
    auto window = make_window(3, n, rng);
    attn::SelfAttentionOut out = attn::self_attention_block(window, p);

    std::vector<std::vector<double>> b(3), k(3), v(3);
    for (int t = 0; t < 3; ++t) {
      b[static_cast<size_t>(t)] = matvec(p.W_p->value, vec_of(window[static_cast<size_t>(t)]));
      k[static_cast<size_t>(t)] = matvec(p.Wk->value, b[static_cast<size_t>(t)]);
      v[static_cast<size_t>(t)] = matvec(p.Wv->value, b[static_cast<size_t>(t)]);
    }
    auto q = matvec(p.Wq->value, b[1]);
    std::vector<double> scores;
    for (int t = 0; t < 3; ++t) {
      double dot = 0.0;
      for (int i = 0; i < d; ++i) dot += q[static_cast<size_t>(i)] * k[static_cast<size_t>(t)][static_cast<size_t>(i)];
      scores.push_back(dot / std::sqrt(static_cast<double>(d)));
    }
    auto alpha = softmax_raw(scores);
    for (int t = 0; t < 3; ++t) {
      CHECK(out.head_weights[0]->value[t] == doctest::Approx(alpha[static_cast<size_t>(t)]).epsilon(1e-12));
    }
    Tensor sum1({d});
    for (int i = 0; i < d; ++i) {
      double c = 0.0;
      for (int t = 0; t < 3; ++t) c += alpha[static_cast<size_t>(t)] * v[static_cast<size_t>(t)][static_cast<size_t>(i)];
      sum1[i] = c + b[1][static_cast<size_t>(i)];
    }
    Tensor x = ad::layer_norm_values(sum1, p.ln1_gain->value, p.ln1_bias->value);
    auto hidden = matvec(p.ff_W1->value, x.data());
    for (size_t i = 0; i < hidden.size(); ++i) hidden[i] = std::tanh(hidden[i] + p.ff_b1->value[static_cast<int64_t>(i)]);
    auto ff = matvec(p.ff_W2->value, hidden);
    Tensor sum2({d});
    for (int i = 0; i < d; ++i) sum2[i] = ff[static_cast<size_t>(i)] + p.ff_b2->value[i] + x[i];
    Tensor expect = ad::layer_norm_values(sum2, p.ln2_gain->value, p.ln2_bias->value);
    for (int i = 0; i < d; ++i) {
      CHECK(out.output->value[i] == doctest::Approx(expect[i]).epsilon(1e-10));
    }
  }
  SUBCASE("head count must divide the dimensions") {
    Rng rng(59);
    CHECK_THROWS_AS(attn::SelfAttentionParams::init(4, 6, 4, 3, rng), std::invalid_argument);
  }
}

TEST_CASE("attention weights are probability distributions") {
  Rng rng(61);
  attn::AttentionConfig cfg;
  cfg.tau = 2;
  const int C = cfg.window(), n = 4, K = 5;
  for (int trial = 0; trial < 25; ++trial) {
    auto params = make_params(cfg, n, K, 100 + static_cast<uint64_t>(trial));
    auto z = ad::leaf(rand_tensor({K}, rng, -3.0, 3.0));
    auto alpha_prev = ad::leaf(Tensor::full({C}, 1.0 / C));
    auto g = make_window(C, n, rng);
    auto alpha = attn::attend(z, alpha_prev, g, params, attn::ScoreMode::hybrid);
    double total = 0.0;
    for (int t = 0; t < C; ++t) {
      CHECK(alpha->value[t] >= 0.0);
      total += alpha->value[t];
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);

    attn::ComaOut co = attn::coma(z, alpha_prev, g, params, attn::ScoreMode::hybrid, C);
    for (int j = 0; j < n; ++j) {
      double row = 0.0;
      for (int t = 0; t < C; ++t) {
        CHECK(co.weights->value.at(j, t) >= 0.0);
        row += co.weights->value.at(j, t);
      }
      CHECK(std::abs(row - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("attention head with tau 0 and identity kernel reduces to a plain head") {
  Rng rng(71);
  const int n = 3, K = 4, T = 5;
  attn::AttentionConfig cfg;
  cfg.tau = 0;
  auto params = make_params(cfg, n, K, 81);
  params.kernels[0] = ad::leaf(Tensor::identity(n));
  std::vector<ad::NodePtr> hidden = make_window(T, n, rng);
  attn::SequenceOut seq = attn::run_attention_head(hidden, cfg, params, nullptr);
  for (int t = 0; t < T; ++t) {
    attn::HeadOut plain = attn::output_head(hidden[static_cast<size_t>(t)], params.W_soft, params.b_soft);
    for (int k = 0; k < K; ++k) {
      CHECK(seq.log_probs[static_cast<size_t>(t)]->value[k] ==
            doctest::Approx(plain.log_probs->value[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("end-to-end gradient through stack, attention, and CTC") {
  Rng rng(73);
  rnn::StackConfig scfg;
  scfg.layers = 1;
  scfg.cells_per_direction = 4;
  scfg.projection_dim = 4;
  rnn::StackParams stack = rnn::StackParams::init(scfg, 3, rng);
  attn::AttentionConfig acfg;
  acfg.tau = 1;
  acfg.mode = attn::ScoreMode::hybrid;
  acfg.plm = true;
  acfg.coma = true;
  const int K = 4;
  Rng prng(75);
  attn::AttentionParams aparams = attn::AttentionParams::init(acfg, 4, K, prng);
  attn::PlmState plm = attn::PlmState::init(K, 4, prng);
  Tensor features = rand_tensor({5, 3}, rng);
  const std::vector<int> target = {2, 1};

  std::vector<ad::NodePtr> leaves;
  stack.for_each_param("", [&](const std::string&, const ad::NodePtr& p) { leaves.push_back(p); });
  aparams.for_each_param("", [&](const std::string&, const ad::NodePtr& p) { leaves.push_back(p); });
  plm.for_each_param("", [&](const std::string&, const ad::NodePtr& p) { leaves.push_back(p); });

  auto res = check_gradients(leaves, [&] {
    auto hidden = rnn::run_stack(features, scfg, stack);
    attn::PlmState state = plm;
    attn::SequenceOut out = attn::run_attention_head(hidden, acfg, aparams, &state);
    return ctc::loss_node(out.log_probs, target);
  });
  CHECK_MESSAGE(res.ok, res.detail);
}
