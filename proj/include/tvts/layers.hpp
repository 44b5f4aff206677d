#pragma once

#include <string>

#include "tvts/adamw.hpp"
#include "tvts/ops.hpp"
#include "tvts/rng.hpp"

namespace tvts {

struct InitSpec {
  double stddev = 0.02;  // truncated normal, +/- 2 sigma
  DType dtype = DType::f64;
};

struct LinearLayer {
  Tensor w;  // (d_in, d_out)
  Tensor b;  // (d_out); undefined when bias-free

  void init(int64_t d_in, int64_t d_out, bool bias, Rng& rng, const InitSpec& spec);
  void register_params(ParamSet& ps, const std::string& prefix);
  Tensor forward(const Tensor& x, Tape* tape) const {
    return ops::linear(x, w, b.defined() ? &b : nullptr, tape);
  }
};

struct LayerNormLayer {
  Tensor gain, bias;
  double eps = 1e-5;

  void init(int64_t d, double eps_, DType dt);
  void register_params(ParamSet& ps, const std::string& prefix);
  Tensor forward(const Tensor& x, Tape* tape) const { return ops::layer_norm(x, gain, bias, eps, tape); }
};

// Pre-norm transformer block: x += attn(ln1(x)); x += mlp(ln2(x)).
// GELU MLP with expansion 4.
struct TransformerBlock {
  LayerNormLayer ln1, ln2;
  LinearLayer wq, wk, wv, wo;
  LinearLayer mlp_in, mlp_out;
  int heads = 1;

  void init(int64_t d, int heads_, double ln_eps, Rng& rng, const InitSpec& spec);
  void register_params(ParamSet& ps, const std::string& prefix);
  // key_mask: (B, T) with entries > 0.5 allowed; nullptr = full attention
  Tensor forward(const Tensor& x, const Tensor* key_mask, Tape* tape) const;
};

}  // namespace tvts
