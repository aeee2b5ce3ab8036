#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "cpt/encoder.hpp"
#include "cpt/grad_check.hpp"

namespace {

using namespace cpt;

Graph random_graph(NodeId n, std::size_t f, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j)
      if (rng.uniform_real() < 0.3) edges.push_back({i, j});
  MatrixF x(static_cast<std::size_t>(n), f);
  for (float& v : x.data()) v = static_cast<float>(rng.normal());
  std::vector<ClassId> labels(static_cast<std::size_t>(n));
  for (NodeId i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % 2;
  return Graph::create(n, std::move(edges), std::move(x), std::move(labels));
}

// Straight-line dense reference: build the normalized adjacency densely and
// evaluate A*relu(A*X*W1)*W2 with dense products only.
Matrix dense_reference(const Graph& g, const EncoderParams& p) {
  const std::size_t n = static_cast<std::size_t>(g.num_nodes());
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0;
  for (const Edge& e : g.edges()) {
    a(static_cast<std::size_t>(e.u), static_cast<std::size_t>(e.v)) = 1.0;
    a(static_cast<std::size_t>(e.v), static_cast<std::size_t>(e.u)) = 1.0;
  }
  std::vector<double> dinv(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
    dinv[i] = 1.0 / std::sqrt(deg);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) *= dinv[i] * dinv[j];

  Matrix x(n, g.features().cols());
  for (std::size_t i = 0; i < x.size(); ++i)
    x.data()[i] = static_cast<double>(g.features().data()[i]);
  Matrix u = matmul(a, matmul(x, p.w1));
  for (double& v : u.data())
    if (v < 0.0) v = 0.0;
  return matmul(matmul(a, u), p.w2);
}

TEST(Encode, MatchesDenseReference) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Graph g = random_graph(18, 5, seed);
    Rng rng(seed + 100);
    const EncoderParams p = init_params(5, 4, 3, rng);
    const NormalizedAdjacency adj = normalize_adjacency(g);
    const Matrix got = encode(adj, g.features(), p);
    const Matrix want = dense_reference(g, p);
    ASSERT_EQ(got.rows(), want.rows());
    ASSERT_EQ(got.cols(), want.cols());
    for (std::size_t i = 0; i < got.size(); ++i)
      EXPECT_NEAR(got.data()[i], want.data()[i], 1e-12);
  }
}

TEST(Encode, CacheHoldsPreActivationAndPropagatedHidden) {
  const Graph g = random_graph(10, 4, 5);
  Rng rng(6);
  const EncoderParams p = init_params(4, 3, 2, rng);
  const NormalizedAdjacency adj = normalize_adjacency(g);
  ForwardCache cache;
  const Matrix e = encode(adj, g.features(), p, &cache);
  ASSERT_EQ(cache.pre_activation.rows(), 10u);
  ASSERT_EQ(cache.pre_activation.cols(), 3u);
  ASSERT_EQ(cache.propagated_hidden.rows(), 10u);
  ASSERT_EQ(cache.propagated_hidden.cols(), 3u);
  // E == propagated_hidden * W2 by construction
  const Matrix expect = matmul(cache.propagated_hidden, p.w2);
  for (std::size_t i = 0; i < e.size(); ++i)
    EXPECT_EQ(e.data()[i], expect.data()[i]);
  // relu of the cached pre-activation propagated once more equals the cache
  Matrix h = cache.pre_activation;
  for (double& v : h.data())
    if (v < 0.0) v = 0.0;
  const Matrix m = spmm(adj, h);
  for (std::size_t i = 0; i < m.size(); ++i)
    EXPECT_EQ(m.data()[i], cache.propagated_hidden.data()[i]);
}

TEST(Encode, ShapeMismatchesRejected) {
  const Graph g = random_graph(8, 4, 7);
  Rng rng(8);
  const NormalizedAdjacency adj = normalize_adjacency(g);
  EXPECT_THROW(encode(adj, g.features(), init_params(5, 3, 2, rng)), config_error);
  EncoderParams bad = init_params(4, 3, 2, rng);
  bad.w2 = Matrix(5, 2);
  EXPECT_THROW(encode(adj, g.features(), bad), config_error);
  const Graph g2 = random_graph(9, 4, 9);
  EXPECT_THROW(encode(adj, g2.features(), init_params(4, 3, 2, rng)), config_error);
}

// Gradient of a fixed linear functional sum(E .* G) checked against central
// differences through the full sparse forward/backward.
TEST(EncodeBackward, MatchesFiniteDifferences) {
  const Graph g = random_graph(12, 5, 10);
  const NormalizedAdjacency adj = normalize_adjacency(g);
  Rng rng(11);
  const EncoderParams p0 = init_params(5, 4, 3, rng);
  Matrix gmat(12, 3);
  for (double& v : gmat.data()) v = rng.normal();

  const auto fn = [&](const std::vector<double>& flat) {
    const EncoderParams p = unflatten_params(flat, 5, 4, 3);
    ForwardCache cache;
    const Matrix e = encode(adj, g.features(), p, &cache);
    double loss = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i)
      loss += e.data()[i] * gmat.data()[i];
    const EncoderGrads grads = encode_backward(gmat, cache, adj, g.features(), p);
    return std::make_pair(loss, flatten_params({grads.w1, grads.w2}));
  };
  EXPECT_LT(grad_check(fn, flatten_params(p0), 1e-5), 1e-6);
}

TEST(EncodeBackward, ZeroUpstreamGivesZeroGrads) {
  const Graph g = random_graph(9, 4, 12);
  const NormalizedAdjacency adj = normalize_adjacency(g);
  Rng rng(13);
  const EncoderParams p = init_params(4, 3, 2, rng);
  ForwardCache cache;
  encode(adj, g.features(), p, &cache);
  const EncoderGrads grads =
      encode_backward(Matrix(9, 2), cache, adj, g.features(), p);
  for (double v : grads.w1.data()) EXPECT_EQ(v, 0.0);
  for (double v : grads.w2.data()) EXPECT_EQ(v, 0.0);
}

TEST(EncodeBackward, MismatchedCacheIsInternalError) {
  const Graph g = random_graph(9, 4, 14);
  const NormalizedAdjacency adj = normalize_adjacency(g);
  Rng rng(15);
  const EncoderParams p = init_params(4, 3, 2, rng);
  ForwardCache cache;
  encode(adj, g.features(), p, &cache);
  const EncoderParams other = init_params(4, 5, 2, rng);  // different hidden
  EXPECT_THROW(encode_backward(Matrix(9, 2), cache, adj, g.features(), other),
               std::logic_error);
  EXPECT_THROW(encode_backward(Matrix(9, 3), cache, adj, g.features(), p),
               config_error);  // wrong grad shape
}

TEST(InitParams, DeterministicAndBounded) {
  Rng a(20), b(20), c(21);
  const EncoderParams pa = init_params(6, 5, 4, a);
  const EncoderParams pb = init_params(6, 5, 4, b);
  const EncoderParams pc = init_params(6, 5, 4, c);
  EXPECT_EQ(pa.w1, pb.w1);
  EXPECT_EQ(pa.w2, pb.w2);
  EXPECT_NE(pa.w1, pc.w1);
  const double lim1 = std::sqrt(6.0 / 11.0), lim2 = std::sqrt(6.0 / 9.0);
  for (double v : pa.w1.data()) EXPECT_LE(std::fabs(v), lim1);
  for (double v : pa.w2.data()) EXPECT_LE(std::fabs(v), lim2);
  EXPECT_THROW(init_params(0, 5, 4, a), config_error);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(22);
  const EncoderParams p = init_params(7, 5, 3, rng);
  const std::string path =
      (std::filesystem::temp_directory_path() / "cpt_ckpt_test.bin").string();
  save_params(p, path);
  const EncoderParams back = load_params(path);
  EXPECT_EQ(back.w1, p.w1);
  EXPECT_EQ(back.w2, p.w2);
  std::filesystem::remove(path);
  EXPECT_THROW(load_params(path), io_error);
}

TEST(GradCheck, FlagsAWrongGradient) {
  // f(x) = x0^2 + 3 x1, with a deliberately wrong analytic gradient
  const LossAndGradFn wrong = [](const std::vector<double>& x) {
    return std::make_pair(x[0] * x[0] + 3.0 * x[1],
                          std::vector<double>{2.0 * x[0] + 0.5, 3.0});
  };
  const double err = grad_check(wrong, {0.7, -0.3}, 1e-6);
  EXPECT_GT(err, 0.1);
  const LossAndGradFn right = [](const std::vector<double>& x) {
    return std::make_pair(x[0] * x[0] + 3.0 * x[1],
                          std::vector<double>{2.0 * x[0], 3.0});
  };
  EXPECT_LT(grad_check(right, {0.7, -0.3}, 1e-6), 1e-8);
}

TEST(GradCheck, NonFiniteLossIsNumericError) {
  const LossAndGradFn bad = [](const std::vector<double>& x) {
    return std::make_pair(std::log(x[0]), std::vector<double>{1.0 / x[0]});
  };
  EXPECT_THROW(grad_check(bad, {-1.0}, 1e-6), numeric_error);
  const LossAndGradFn ok = [](const std::vector<double>& x) {
    return std::make_pair(x[0], std::vector<double>{1.0});
  };
  EXPECT_THROW(grad_check(ok, {0.0}, 0.0), config_error);
}

TEST(GradCheck, EncoderTrialsStayTight) {
  // the acceptance bound is 1e-4; the suite keeps a small margin
  EXPECT_LT(encoder_grad_trials(5, 77), 1e-5);
}

}  // namespace
