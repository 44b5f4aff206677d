#include "tvts/layers.hpp"

namespace tvts {

void LinearLayer::init(int64_t d_in, int64_t d_out, bool bias, Rng& rng, const InitSpec& spec) {
  w = Tensor::trunc_normal({d_in, d_out}, spec.stddev, rng, spec.dtype);
  if (bias) b = Tensor::zeros({d_out}, spec.dtype);
  else b = Tensor();
}

void LinearLayer::register_params(ParamSet& ps, const std::string& prefix) {
  ps.add(prefix + ".w", &w);
  if (b.defined()) ps.add(prefix + ".b", &b);
}

void LayerNormLayer::init(int64_t d, double eps_, DType dt) {
  gain = Tensor::full({d}, 1.0, dt);
  bias = Tensor::zeros({d}, dt);
  eps = eps_;
}

void LayerNormLayer::register_params(ParamSet& ps, const std::string& prefix) {
  ps.add(prefix + ".gain", &gain);
  ps.add(prefix + ".bias", &bias);
}

void TransformerBlock::init(int64_t d, int heads_, double ln_eps, Rng& rng, const InitSpec& spec) {
  heads = heads_;
  ln1.init(d, ln_eps, spec.dtype);
  ln2.init(d, ln_eps, spec.dtype);
  wq.init(d, d, true, rng, spec);
  wk.init(d, d, true, rng, spec);
  wv.init(d, d, true, rng, spec);
  wo.init(d, d, true, rng, spec);
  mlp_in.init(d, 4 * d, true, rng, spec);
  mlp_out.init(4 * d, d, true, rng, spec);
}

void TransformerBlock::register_params(ParamSet& ps, const std::string& prefix) {
  ln1.register_params(ps, prefix + ".ln1");
  ln2.register_params(ps, prefix + ".ln2");
  wq.register_params(ps, prefix + ".wq");
  wk.register_params(ps, prefix + ".wk");
  wv.register_params(ps, prefix + ".wv");
  wo.register_params(ps, prefix + ".wo");
  mlp_in.register_params(ps, prefix + ".mlp_in");
  mlp_out.register_params(ps, prefix + ".mlp_out");
}

Tensor TransformerBlock::forward(const Tensor& x, const Tensor* key_mask, Tape* tape) const {
  Tensor h = ln1.forward(x, tape);
  Tensor q = wq.forward(h, tape);
  Tensor k = wk.forward(h, tape);
  Tensor v = wv.forward(h, tape);
  Tensor attn = ops::multi_head_attention(q, k, v, heads, key_mask, tape);
  Tensor y = ops::add(x, wo.forward(attn, tape), tape);
  Tensor h2 = ln2.forward(y, tape);
  Tensor m = mlp_out.forward(ops::gelu(mlp_in.forward(h2, tape), tape), tape);
  return ops::add(y, m, tape);
}

}  // namespace tvts
