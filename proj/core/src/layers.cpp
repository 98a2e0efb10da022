#include "orion/layers.hpp"

#include <algorithm>
#include <cmath>

namespace orion {

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

void Linear::init(ParameterStore& store, const std::string& prefix, int in, int out, Rng& rng) {
  glorot_init(store.add(prefix + ".w", in, out), rng);
  store.add(prefix + ".b", 1, out);
}

DenseMatrix Linear::forward(const ParameterStore& p, const DenseMatrix& x,
                            LinearCache& cache) const {
  const DenseMatrix& W = p.at(w);
  const DenseMatrix& B = p.at(b);
  if (x.cols != W.rows) {
    throw DimensionError("linear '" + w + "': input cols " + std::to_string(x.cols) +
                         " vs weight rows " + std::to_string(W.rows));
  }
  cache.input = x;
  DenseMatrix y = matmul(x, W);
  for (int i = 0; i < y.rows; ++i) {
    for (int j = 0; j < y.cols; ++j) y.at(i, j) += B.at(0, j);
  }
  return y;
}

DenseMatrix Linear::backward(const ParameterStore& p, const LinearCache& cache,
                             const DenseMatrix& gy, ParameterStore& grads) const {
  grads.accumulate(w, matmul_transA(cache.input, gy));
  DenseMatrix gb(1, gy.cols);
  for (int i = 0; i < gy.rows; ++i) {
    for (int j = 0; j < gy.cols; ++j) gb.at(0, j) += gy.at(i, j);
  }
  grads.accumulate(b, gb);
  return matmul_transB(gy, p.at(w));
}

// ---------------------------------------------------------------------------
// LayerNorm
// ---------------------------------------------------------------------------

namespace {
constexpr double kLnEps = 1e-5;
}

void LayerNorm::init(ParameterStore& store, const std::string& prefix, int d) {
  DenseMatrix& g = store.add(prefix + ".g", 1, d);
  std::fill(g.data.begin(), g.data.end(), 1.0);
  store.add(prefix + ".b", 1, d);
}

DenseMatrix LayerNorm::forward(const ParameterStore& p, const DenseMatrix& x,
                               LayerNormCache& cache) const {
  const DenseMatrix& G = p.at(g);
  const DenseMatrix& B = p.at(b);
  const int d = x.cols;
  cache.normalized = DenseMatrix(x.rows, d);
  cache.inv_std.assign(x.rows, 0.0);
  DenseMatrix y(x.rows, d);
  for (int i = 0; i < x.rows; ++i) {
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += x.at(i, j);
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = x.at(i, j) - mean;
      var += c * c;
    }
    var /= d;
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    cache.inv_std[i] = inv;
    for (int j = 0; j < d; ++j) {
      const double xh = (x.at(i, j) - mean) * inv;
      cache.normalized.at(i, j) = xh;
      y.at(i, j) = xh * G.at(0, j) + B.at(0, j);
    }
  }
  return y;
}

DenseMatrix LayerNorm::backward(const ParameterStore& p, const LayerNormCache& cache,
                                const DenseMatrix& gy, ParameterStore& grads) const {
  const DenseMatrix& G = p.at(g);
  const int d = gy.cols;
  DenseMatrix gg(1, d), gb(1, d), gx(gy.rows, d);
  for (int i = 0; i < gy.rows; ++i) {
    double sum_gh = 0.0;
    double sum_gh_xh = 0.0;
    for (int j = 0; j < d; ++j) {
      const double xh = cache.normalized.at(i, j);
      const double gyv = gy.at(i, j);
      gg.at(0, j) += gyv * xh;
      gb.at(0, j) += gyv;
      const double gh = gyv * G.at(0, j);
      sum_gh += gh;
      sum_gh_xh += gh * xh;
    }
    const double inv = cache.inv_std[i];
    for (int j = 0; j < d; ++j) {
      const double xh = cache.normalized.at(i, j);
      const double gh = gy.at(i, j) * G.at(0, j);
      gx.at(i, j) = inv * (gh - sum_gh / d - xh * sum_gh_xh / d);
    }
  }
  grads.accumulate(g, gg);
  grads.accumulate(b, gb);
  return gx;
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

DenseMatrix relu_forward(const DenseMatrix& x, DenseMatrix& mask_cache, double leak) {
  mask_cache = DenseMatrix(x.rows, x.cols);
  DenseMatrix y(x.rows, x.cols);
  for (size_t i = 0; i < x.data.size(); ++i) {
    if (x.data[i] > 0.0) {
      y.data[i] = x.data[i];
      mask_cache.data[i] = 1.0;
    } else {
      y.data[i] = leak * x.data[i];
      mask_cache.data[i] = leak;
    }
  }
  return y;
}

DenseMatrix relu_backward(const DenseMatrix& mask_cache, const DenseMatrix& gy) {
  DenseMatrix gx(gy.rows, gy.cols);
  for (size_t i = 0; i < gy.data.size(); ++i) gx.data[i] = gy.data[i] * mask_cache.data[i];
  return gx;
}

// ---------------------------------------------------------------------------
// Multi-head attention
// ---------------------------------------------------------------------------

void MultiHeadAttention::init(ParameterStore& store, const std::string& prefix, int d, Rng& rng) {
  glorot_init(store.add(prefix + ".wq", d, d), rng);
  glorot_init(store.add(prefix + ".wk", d, d), rng);
  glorot_init(store.add(prefix + ".wv", d, d), rng);
  glorot_init(store.add(prefix + ".wo", d, d), rng);
}

DenseMatrix MultiHeadAttention::forward(const ParameterStore& p, const DenseMatrix& xq,
                                        const DenseMatrix& xkv,
                                        const std::vector<std::vector<int>>* allowed,
                                        AttentionCache& cache) const {
  if (xq.cols != d || xkv.cols != d) {
    throw DimensionError("attention '" + wq + "': inputs " + std::to_string(xq.cols) + "/" +
                         std::to_string(xkv.cols) + " vs d=" + std::to_string(d));
  }
  const int m = xq.rows;
  const int n = xkv.rows;
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  cache.xq = xq;
  cache.xkv = xkv;
  cache.q = matmul(xq, p.at(wq));
  cache.k = matmul(xkv, p.at(wk));
  cache.v = matmul(xkv, p.at(wv));

  cache.allowed.assign(m, {});
  if (allowed) {
    if (static_cast<int>(allowed->size()) != m) {
      throw DimensionError("attention mask rows " + std::to_string(allowed->size()) +
                           " vs queries " + std::to_string(m));
    }
    cache.allowed = *allowed;
  } else {
    for (int i = 0; i < m; ++i) {
      cache.allowed[i].resize(n);
      for (int j = 0; j < n; ++j) cache.allowed[i][j] = j;
    }
  }

  cache.ctx = DenseMatrix(m, d);
  cache.weights.assign(m, {});
  for (int i = 0; i < m; ++i) {
    const auto& nbrs = cache.allowed[i];
    if (nbrs.empty()) {
      throw InvalidFsmError("attention row " + std::to_string(i) + " has an empty mask");
    }
    cache.weights[i].assign(static_cast<size_t>(heads) * nbrs.size(), 0.0);
    for (int h = 0; h < heads; ++h) {
      const int off = h * dh;
      double mx = -1e300;
      std::vector<double> sc(nbrs.size());
      for (size_t t = 0; t < nbrs.size(); ++t) {
        sc[t] = dot_rows(cache.q, i, cache.k, nbrs[t], off, dh) * scale;
        mx = std::max(mx, sc[t]);
      }
      double denom = 0.0;
      for (size_t t = 0; t < nbrs.size(); ++t) {
        sc[t] = std::exp(sc[t] - mx);
        denom += sc[t];
      }
      double* wrow = cache.weights[i].data() + static_cast<size_t>(h) * nbrs.size();
      double* crow = cache.ctx.row(i) + off;
      for (size_t t = 0; t < nbrs.size(); ++t) {
        const double a = sc[t] / denom;
        wrow[t] = a;
        const double* vrow = cache.v.row(nbrs[t]) + off;
        for (int u = 0; u < dh; ++u) crow[u] += a * vrow[u];
      }
    }
  }
  return matmul(cache.ctx, p.at(wo));
}

DenseMatrix MultiHeadAttention::backward(const ParameterStore& p, const AttentionCache& cache,
                                         const DenseMatrix& gy, ParameterStore& grads,
                                         DenseMatrix& gxkv) const {
  const int m = cache.xq.rows;
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  grads.accumulate(wo, matmul_transA(cache.ctx, gy));
  const DenseMatrix gctx = matmul_transB(gy, p.at(wo));

  DenseMatrix gq(m, d), gk(cache.xkv.rows, d), gv(cache.xkv.rows, d);
  for (int i = 0; i < m; ++i) {
    const auto& nbrs = cache.allowed[i];
    for (int h = 0; h < heads; ++h) {
      const int off = h * dh;
      const double* wrow = cache.weights[i].data() + static_cast<size_t>(h) * nbrs.size();
      const double* gc = gctx.row(i) + off;

      // d(alpha) and softmax backward
      std::vector<double> galpha(nbrs.size());
      double inner = 0.0;
      for (size_t t = 0; t < nbrs.size(); ++t) {
        const double* vrow = cache.v.row(nbrs[t]) + off;
        double s = 0.0;
        for (int u = 0; u < dh; ++u) s += gc[u] * vrow[u];
        galpha[t] = s;
        inner += wrow[t] * s;
      }
      for (size_t t = 0; t < nbrs.size(); ++t) {
        const double gscore = wrow[t] * (galpha[t] - inner) * scale;
        const double* krow = cache.k.row(nbrs[t]) + off;
        const double* qrow = cache.q.row(i) + off;
        double* gqrow = gq.row(i) + off;
        double* gkrow = gk.row(nbrs[t]) + off;
        double* gvrow = gv.row(nbrs[t]) + off;
        for (int u = 0; u < dh; ++u) {
          gqrow[u] += gscore * krow[u];
          gkrow[u] += gscore * qrow[u];
          gvrow[u] += wrow[t] * gc[u];
        }
      }
    }
  }

  grads.accumulate(wq, matmul_transA(cache.xq, gq));
  grads.accumulate(wk, matmul_transA(cache.xkv, gk));
  grads.accumulate(wv, matmul_transA(cache.xkv, gv));

  add_inplace(gxkv, matmul_transB(gk, p.at(wk)));
  add_inplace(gxkv, matmul_transB(gv, p.at(wv)));
  return matmul_transB(gq, p.at(wq));
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

Encoder::Encoder(const std::string& prefix, const NetConfig& cfg) : in(prefix + ".in") {
  for (int l = 0; l < cfg.encoder_layers; ++l) {
    const std::string bp = prefix + ".b" + std::to_string(l);
    block_ln.emplace_back(bp + ".ln");
    block_attn.emplace_back(bp + ".attn", cfg.d, cfg.heads);
  }
  out_ln = LayerNorm(prefix + ".out_ln");
}

void Encoder::init(ParameterStore& store, const std::string& prefix, int in_dim,
                   const NetConfig& cfg, Rng& rng) {
  Linear::init(store, prefix + ".in", in_dim, cfg.d, rng);
  for (int l = 0; l < cfg.encoder_layers; ++l) {
    const std::string bp = prefix + ".b" + std::to_string(l);
    LayerNorm::init(store, bp + ".ln", cfg.d);
    MultiHeadAttention::init(store, bp + ".attn", cfg.d, rng);
  }
  LayerNorm::init(store, prefix + ".out_ln", cfg.d);
}

DenseMatrix Encoder::forward(const ParameterStore& p, const DenseMatrix& x,
                             const std::vector<std::vector<int>>& allowed,
                             EncoderCache& cache) const {
  DenseMatrix h = in.forward(p, x, cache.in);
  cache.blocks.resize(block_ln.size());
  for (size_t l = 0; l < block_ln.size(); ++l) {
    auto& bc = cache.blocks[l];
    const DenseMatrix normed = block_ln[l].forward(p, h, bc.ln);
    const DenseMatrix attn_out = block_attn[l].forward(p, normed, normed, &allowed, bc.attn);
    add_inplace(h, attn_out);
  }
  return out_ln.forward(p, h, cache.out_ln);
}

DenseMatrix Encoder::backward(const ParameterStore& p, const EncoderCache& cache,
                              const DenseMatrix& gy, ParameterStore& grads) const {
  DenseMatrix gh = out_ln.backward(p, cache.out_ln, gy, grads);
  for (int l = static_cast<int>(block_ln.size()) - 1; l >= 0; --l) {
    const auto& bc = cache.blocks[l];
    DenseMatrix gkv = zeros_like(gh);
    const DenseMatrix gq = block_attn[l].backward(p, bc.attn, gh, grads, gkv);
    add_inplace(gkv, gq);  // self-attention: query and key/value share input
    const DenseMatrix gnorm = block_ln[l].backward(p, bc.ln, gkv, grads);
    add_inplace(gh, gnorm);  // residual
  }
  return in.backward(p, cache.in, gh, grads);
}

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

void Mlp::init(ParameterStore& store, const std::string& prefix, int in, int hidden, int out,
               Rng& rng) {
  Linear::init(store, prefix + ".l1", in, hidden, rng);
  Linear::init(store, prefix + ".l2", hidden, out, rng);
}

DenseMatrix Mlp::forward(const ParameterStore& p, const DenseMatrix& x, MlpCache& cache) const {
  const DenseMatrix h = l1.forward(p, x, cache.l1);
  const DenseMatrix a = relu_forward(h, cache.relu_mask, leak);
  return l2.forward(p, a, cache.l2);
}

DenseMatrix Mlp::backward(const ParameterStore& p, const MlpCache& cache, const DenseMatrix& gy,
                          ParameterStore& grads) const {
  const DenseMatrix ga = l2.backward(p, cache.l2, gy, grads);
  const DenseMatrix gh = relu_backward(cache.relu_mask, ga);
  return l1.backward(p, cache.l1, gh, grads);
}

// ---------------------------------------------------------------------------
// Softmax / sigmoid helpers
// ---------------------------------------------------------------------------

std::vector<double> masked_softmax(const std::vector<double>& scores,
                                   const std::vector<int>& mask) {
  if (scores.size() != mask.size()) throw DimensionError("masked_softmax: size mismatch");
  double mx = -1e300;
  bool any = false;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (mask[i]) {
      mx = std::max(mx, scores[i]);
      any = true;
    }
  }
  if (!any) throw InvalidFsmError("masked_softmax: all-zero mask row");
  std::vector<double> probs(scores.size(), 0.0);
  double denom = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (mask[i]) {
      probs[i] = std::exp(scores[i] - mx);
      denom += probs[i];
    }
  }
  for (double& v : probs) v /= denom;
  return probs;
}

std::vector<double> masked_softmax_backward(const std::vector<double>& probs,
                                            const std::vector<double>& gprobs) {
  double inner = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) inner += probs[i] * gprobs[i];
  std::vector<double> gscores(probs.size(), 0.0);
  for (size_t i = 0; i < probs.size(); ++i) gscores[i] = probs[i] * (gprobs[i] - inner);
  return gscores;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

FdResult fd_check(const ParameterStore& params, const std::vector<std::string>& names,
                  const LossFn& loss, int probe_count, Rng& rng, double eps) {
  ParameterStore grads;
  const double base = loss(params, &grads);
  if (!std::isfinite(base)) throw NumericError("fd_check: non-finite base loss");

  FdResult result;
  for (int probe = 0; probe < probe_count; ++probe) {
    const std::string& name = names[rng.next_below(names.size())];
    const DenseMatrix& m = params.at(name);
    const size_t idx = rng.next_below(m.data.size());

    ParameterStore perturbed = params;
    perturbed.at(name).data[idx] += eps;
    const double up = loss(perturbed, nullptr);
    perturbed.at(name).data[idx] -= 2.0 * eps;
    const double down = loss(perturbed, nullptr);
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("fd_check: non-finite loss probing '" + name + "'");
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double analytic = grads.contains(name) ? grads.at(name).data[idx] : 0.0;
    const double rel = std::abs(analytic - numeric) /
                       std::max({1.0, std::abs(analytic), std::abs(numeric)});
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_param = name + "[" + std::to_string(idx) + "]";
    }
  }
  return result;
}

}  // namespace orion
