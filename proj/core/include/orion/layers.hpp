#pragma once

#include <functional>
#include <string>
#include <vector>

#include "orion/params.hpp"

namespace orion {

struct NetConfig {
  int d = 128;
  int heads = 4;
  int encoder_layers = 2;
  int option_count = 2;

  void validate() const {
    if (d % heads != 0) throw DimensionError("d must be divisible by heads");
    if (option_count < 2) throw DimensionError("option_count must be >= 2");
  }
};

// ---------------------------------------------------------------------------
// Linear: y = x W + b, W [in x out], b [1 x out]
// ---------------------------------------------------------------------------

struct LinearCache {
  DenseMatrix input;
};

struct Linear {
  std::string w, b;
  Linear() = default;
  explicit Linear(const std::string& prefix) : w(prefix + ".w"), b(prefix + ".b") {}
  static void init(ParameterStore& store, const std::string& prefix, int in, int out, Rng& rng);

  DenseMatrix forward(const ParameterStore& p, const DenseMatrix& x, LinearCache& cache) const;
  DenseMatrix backward(const ParameterStore& p, const LinearCache& cache, const DenseMatrix& gy,
                       ParameterStore& grads) const;
};

// ---------------------------------------------------------------------------
// Row-wise layer normalization with learnable gain/bias.
// ---------------------------------------------------------------------------

struct LayerNormCache {
  DenseMatrix normalized;      // (x - mean) / std
  std::vector<double> inv_std; // per row
};

struct LayerNorm {
  std::string g, b;
  LayerNorm() = default;
  explicit LayerNorm(const std::string& prefix) : g(prefix + ".g"), b(prefix + ".b") {}
  static void init(ParameterStore& store, const std::string& prefix, int d);

  DenseMatrix forward(const ParameterStore& p, const DenseMatrix& x, LayerNormCache& cache) const;
  DenseMatrix backward(const ParameterStore& p, const LayerNormCache& cache, const DenseMatrix& gy,
                       ParameterStore& grads) const;
};

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

// leak = 0 is plain ReLU; the mask cache stores the per-element slope.
DenseMatrix relu_forward(const DenseMatrix& x, DenseMatrix& mask_cache, double leak = 0.0);
DenseMatrix relu_backward(const DenseMatrix& mask_cache, const DenseMatrix& gy);

// ---------------------------------------------------------------------------
// Multi-head attention with optional per-query neighbor restriction. The
// `allowed` lists realize the binary mask: query row i attends exactly to the
// listed key rows (self-loops included by the caller). nullptr means full
// attention. Softmax is computed only over allowed entries, which is exactly
// the additive -1e9 mask in the limit and keeps zero mass on masked pairs.
// ---------------------------------------------------------------------------

struct AttentionCache {
  DenseMatrix xq, xkv;
  DenseMatrix q, k, v;
  DenseMatrix ctx;
  std::vector<std::vector<int>> allowed;     // resolved lists, per query row
  std::vector<std::vector<double>> weights;  // per query row: heads x allowed
};

struct MultiHeadAttention {
  std::string wq, wk, wv, wo;
  int d = 0;
  int heads = 1;
  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& prefix, int d_, int heads_)
      : wq(prefix + ".wq"), wk(prefix + ".wk"), wv(prefix + ".wv"), wo(prefix + ".wo"),
        d(d_), heads(heads_) {}
  static void init(ParameterStore& store, const std::string& prefix, int d, Rng& rng);

  DenseMatrix forward(const ParameterStore& p, const DenseMatrix& xq, const DenseMatrix& xkv,
                      const std::vector<std::vector<int>>* allowed, AttentionCache& cache) const;
  // Returns the gradient w.r.t. xq and accumulates the xkv gradient into
  // gxkv (callers using self-attention add the two).
  DenseMatrix backward(const ParameterStore& p, const AttentionCache& cache,
                       const DenseMatrix& gy, ParameterStore& grads, DenseMatrix& gxkv) const;
};

// ---------------------------------------------------------------------------
// Graph encoder: input linear, then pre-LN masked self-attention blocks with
// residuals, then a final layer norm.
// ---------------------------------------------------------------------------

struct EncoderCache {
  LinearCache in;
  struct Block {
    LayerNormCache ln;
    AttentionCache attn;
  };
  std::vector<Block> blocks;
  LayerNormCache out_ln;
};

struct Encoder {
  Linear in;
  std::vector<LayerNorm> block_ln;
  std::vector<MultiHeadAttention> block_attn;
  LayerNorm out_ln;

  Encoder() = default;
  Encoder(const std::string& prefix, const NetConfig& cfg);
  static void init(ParameterStore& store, const std::string& prefix, int in_dim,
                   const NetConfig& cfg, Rng& rng);

  DenseMatrix forward(const ParameterStore& p, const DenseMatrix& x,
                      const std::vector<std::vector<int>>& allowed, EncoderCache& cache) const;
  DenseMatrix backward(const ParameterStore& p, const EncoderCache& cache, const DenseMatrix& gy,
                       ParameterStore& grads) const;
};

// ---------------------------------------------------------------------------
// Two-layer MLP with ReLU.
// ---------------------------------------------------------------------------

struct MlpCache {
  LinearCache l1;
  DenseMatrix relu_mask;
  LinearCache l2;
};

struct Mlp {
  Linear l1, l2;
  double leak = 0.0;
  Mlp() = default;
  explicit Mlp(const std::string& prefix, double leak_ = 0.0)
      : l1(prefix + ".l1"), l2(prefix + ".l2"), leak(leak_) {}
  static void init(ParameterStore& store, const std::string& prefix, int in, int hidden, int out,
                   Rng& rng);

  DenseMatrix forward(const ParameterStore& p, const DenseMatrix& x, MlpCache& cache) const;
  DenseMatrix backward(const ParameterStore& p, const MlpCache& cache, const DenseMatrix& gy,
                       ParameterStore& grads) const;
};

// ---------------------------------------------------------------------------
// Small softmax / sigmoid utilities shared by the option and waypoint heads.
// ---------------------------------------------------------------------------

// Softmax over scores where mask[i] == 1; zero probability where mask[i] == 0.
// Throws InvalidFsmError when the mask row is all zero.
std::vector<double> masked_softmax(const std::vector<double>& scores,
                                   const std::vector<int>& mask);
// Gradient of scores given probs and upstream dL/dprobs.
std::vector<double> masked_softmax_backward(const std::vector<double>& probs,
                                            const std::vector<double>& gprobs);

double sigmoid(double z);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking. `loss` must return the scalar loss and,
// when `grads` is non-null, accumulate analytic gradients into it.
// ---------------------------------------------------------------------------

struct FdResult {
  double max_rel_error = 0.0;
  std::string worst_param;
};

using LossFn = std::function<double(const ParameterStore&, ParameterStore*)>;

FdResult fd_check(const ParameterStore& params, const std::vector<std::string>& names,
                  const LossFn& loss, int probe_count, Rng& rng, double eps = 1e-5);

}  // namespace orion
