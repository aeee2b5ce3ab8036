#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include "cpt/error.hpp"
#include "cpt/graph.hpp"
#include "cpt/matrix.hpp"
#include "cpt/rng.hpp"

namespace cpt {

// Two-layer graph-convolutional encoder:
//   E = A * relu(A * X * W1) * W2
// with A the symmetrically normalized adjacency (self-loops included).
struct EncoderParams {
  Matrix w1;  // feature_dim x hidden_dim
  Matrix w2;  // hidden_dim x embed_dim
};

struct EncoderGrads {
  Matrix w1;
  Matrix w2;
};

// Intermediates the backward pass needs. pre_activation is A*X*W1 before the
// relu; propagated_hidden is A*relu(pre_activation).
struct ForwardCache {
  Matrix pre_activation;
  Matrix propagated_hidden;
};

// Uniform init in [-limit, limit] with limit = sqrt(6/(fan_in+fan_out)),
// drawn row-major so layouts are reproducible.
inline EncoderParams init_params(std::int64_t feature_dim, std::int64_t hidden_dim,
                                 std::int64_t embed_dim, Rng& rng) {
  if (feature_dim < 1 || hidden_dim < 1 || embed_dim < 1)
    throw config_error("init_params: dimensions must be >= 1");
  const auto fill = [&](Matrix& w, std::int64_t fan_in, std::int64_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : w.data()) v = rng.uniform_real(-limit, limit);
  };
  EncoderParams p;
  p.w1 = Matrix(static_cast<std::size_t>(feature_dim),
                static_cast<std::size_t>(hidden_dim));
  p.w2 = Matrix(static_cast<std::size_t>(hidden_dim),
                static_cast<std::size_t>(embed_dim));
  fill(p.w1, feature_dim, hidden_dim);
  fill(p.w2, hidden_dim, embed_dim);
  return p;
}

inline Matrix encode(const NormalizedAdjacency& adj, const MatrixF& features,
                     const EncoderParams& params, ForwardCache* cache = nullptr) {
  if (features.rows() != static_cast<std::size_t>(adj.n))
    throw config_error("encode: feature rows " + std::to_string(features.rows()) +
                       " != adjacency size " + std::to_string(adj.n));
  if (features.cols() != params.w1.rows())
    throw config_error("encode: feature dim " + std::to_string(features.cols()) +
                       " != W1 rows " + std::to_string(params.w1.rows()));
  if (params.w1.cols() != params.w2.rows())
    throw config_error("encode: W1 cols != W2 rows");
  // A*(X*W1) rather than (A*X)*W1: same map, but the intermediates stay
  // n x hidden instead of n x feature_dim.
  Matrix u = spmm(adj, matmul_promote(features, params.w1));
  Matrix h = u;
  for (double& v : h.data())
    if (v < 0.0) v = 0.0;
  Matrix m = spmm(adj, h);
  Matrix e = matmul(m, params.w2);
  if (cache) {
    cache->pre_activation = std::move(u);
    cache->propagated_hidden = std::move(m);
  }
  return e;
}

// Reverse-mode gradients for encode. grad_embeddings is dLoss/dE (n x embed).
// Uses A^T = A and the reassociation dW1 = X^T * (A * dU).
inline EncoderGrads encode_backward(const Matrix& grad_embeddings,
                                    const ForwardCache& cache,
                                    const NormalizedAdjacency& adj,
                                    const MatrixF& features,
                                    const EncoderParams& params) {
  const Matrix& u = cache.pre_activation;
  const Matrix& m = cache.propagated_hidden;
  if (m.rows() != static_cast<std::size_t>(adj.n) || u.rows() != m.rows() ||
      u.cols() != m.cols() || u.cols() != params.w1.cols() ||
      features.rows() != m.rows() || features.cols() != params.w1.rows())
    throw std::logic_error("encode_backward: cache does not match inputs");
  if (grad_embeddings.rows() != m.rows() ||
      grad_embeddings.cols() != params.w2.cols())
    throw config_error("encode_backward: gradient shape mismatch");

  EncoderGrads g;
  g.w2 = matmul_at_b(m, grad_embeddings);
  Matrix dm = matmul_a_bt(grad_embeddings, params.w2);
  Matrix dh = spmm(adj, dm);
  // relu mask: prop only where the pre-activation was strictly positive
  for (std::size_t i = 0; i < dh.size(); ++i)
    if (u.data()[i] <= 0.0) dh.data()[i] = 0.0;
  Matrix dv = spmm(adj, dh);
  g.w1 = matmul_at_b(features, dv);
  return g;
}

// Checkpoint format: u64 feature_dim, hidden_dim, embed_dim, flags (0),
// then W1 and W2 row-major as float64.
inline void save_params(const EncoderParams& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error(path + ": cannot open for writing");
  const std::uint64_t header[4] = {p.w1.rows(), p.w1.cols(), p.w2.cols(), 0};
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  out.write(reinterpret_cast<const char*>(p.w1.data().data()),
            static_cast<std::streamsize>(p.w1.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(p.w2.data().data()),
            static_cast<std::streamsize>(p.w2.size() * sizeof(double)));
  if (!out) throw io_error(path + ": write failed");
}

inline EncoderParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(path + ": cannot open");
  std::uint64_t header[4];
  if (!in.read(reinterpret_cast<char*>(header), sizeof header))
    throw io_error(path + ": truncated checkpoint header");
  if (header[3] != 0)
    throw io_error(path + ": unsupported checkpoint flags " +
                   std::to_string(header[3]));
  EncoderParams p;
  p.w1 = Matrix(static_cast<std::size_t>(header[0]),
                static_cast<std::size_t>(header[1]));
  p.w2 = Matrix(static_cast<std::size_t>(header[1]),
                static_cast<std::size_t>(header[2]));
  if (!in.read(reinterpret_cast<char*>(p.w1.data().data()),
               static_cast<std::streamsize>(p.w1.size() * sizeof(double))) ||
      !in.read(reinterpret_cast<char*>(p.w2.data().data()),
               static_cast<std::streamsize>(p.w2.size() * sizeof(double))))
    throw io_error(path + ": truncated checkpoint payload");
  char extra;
  if (in.read(&extra, 1)) throw io_error(path + ": trailing bytes");
  return p;
}

}  // namespace cpt
