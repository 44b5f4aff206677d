#include "tvts/encoders.hpp"

#include "tvts/tokenizer.hpp"

namespace tvts {

VideoEncoder::VideoEncoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const InitSpec spec{0.02, cfg.dtype};
  cube_.init(cfg_.cube_dim(), cfg_.d_h, true, rng, spec);
  cls_token_ = Tensor::trunc_normal({cfg_.d_h}, spec.stddev, rng, cfg.dtype);
  cls_pos_ = Tensor::trunc_normal({cfg_.d_h}, spec.stddev, rng, cfg.dtype);
  temporal_table_ = Tensor::trunc_normal({cfg_.temporal_slices(), cfg_.d_h}, spec.stddev, rng, cfg.dtype);
  spatial_table_ = Tensor::trunc_normal({cfg_.spatial_positions(), cfg_.d_h}, spec.stddev, rng, cfg.dtype);
  blocks_.resize(static_cast<size_t>(cfg_.depth));
  for (auto& b : blocks_) b.init(cfg_.d_h, cfg_.heads, cfg_.ln_eps, rng, spec);
}

void VideoEncoder::register_params(ParamSet& ps, const std::string& prefix) {
  cube_.register_params(ps, prefix + ".cube");
  ps.add(prefix + ".cls_token", &cls_token_);
  ps.add(prefix + ".cls_pos", &cls_pos_);
  ps.add(prefix + ".temporal_pos", &temporal_table_);
  ps.add(prefix + ".spatial_pos", &spatial_table_);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].register_params(ps, prefix + ".block" + std::to_string(i));
  }
}

ClipTokens VideoEncoder::cube_embed(const Tensor& frames, Tape* tape) const {
  if (frames.ndim() != 5 || frames.dim(1) != cfg_.frames || frames.dim(2) != cfg_.res_h ||
      frames.dim(3) != cfg_.res_w || frames.dim(4) != 3) {
    throw ConfigError("cube_embed: frames " + shape_str(frames.shape()) + " do not match encoder config");
  }
  Tensor cubes = ops::cube_extract(frames, cfg_.patch, cfg_.tubelet, tape);
  ClipTokens out;
  out.tokens = cube_.forward(cubes, tape);
  out.has_cls = false;
  return out;
}

ClipTokens VideoEncoder::add_spacetime_pos(const ClipTokens& t, Tape* tape) const {
  if (t.has_cls) throw ContractError("add_spacetime_pos: expected tokens without CLS");
  const int ss = cfg_.spatial_positions();
  const int64_t s_count = t.tokens.dim(1);
  if (s_count != cfg_.tokens_per_clip()) throw ContractError("add_spacetime_pos: token grid mismatch");
  std::vector<int> slice_idx(static_cast<size_t>(s_count)), pos_idx(static_cast<size_t>(s_count));
  for (int64_t s = 0; s < s_count; ++s) {
    slice_idx[static_cast<size_t>(s)] = static_cast<int>(s / ss);
    pos_idx[static_cast<size_t>(s)] = static_cast<int>(s % ss);
  }
  // tokens within a slice share the temporal addend; same spatial position
  // across slices shares the spatial addend
  Tensor addend = ops::add(ops::gather_rows(temporal_table_, slice_idx, tape),
                           ops::gather_rows(spatial_table_, pos_idx, tape), tape);
  ClipTokens out;
  out.tokens = ops::add_bcast0(t.tokens, addend, tape);
  out.has_cls = false;
  return out;
}

ClipTokens VideoEncoder::prepend_cls(const ClipTokens& t, Tape* tape) const {
  if (t.has_cls) throw ContractError("prepend_cls: CLS already present");
  Tensor cls = ops::add(cls_token_, cls_pos_, tape);
  Tensor cls_rows = ops::broadcast_rows(cls, t.tokens.dim(0), tape);  // (B,1,D)
  ClipTokens out;
  out.tokens = ops::concat_axis1(cls_rows, t.tokens, tape);
  out.has_cls = true;
  return out;
}

ClipTokens VideoEncoder::apply_mask(const ClipTokens& t, const std::vector<corpus::MaskPattern>& masks,
                                    Tape* tape) const {
  if (!t.has_cls) throw ContractError("apply_mask: CLS must be prepended before masking");
  const int64_t b = t.tokens.dim(0);
  if (static_cast<int64_t>(masks.size()) != b) throw ContractError("apply_mask: one MaskPattern per sample required");
  const int st = cfg_.temporal_slices(), ss = cfg_.spatial_positions();
  std::vector<std::vector<int>> keep(static_cast<size_t>(b));
  for (int64_t bi = 0; bi < b; ++bi) {
    const auto& mp = masks[static_cast<size_t>(bi)];
    if (static_cast<int>(mp.visible.size()) != st || mp.tokens_per_slice != ss) {
      throw ContractError("apply_mask: mask grid " + std::to_string(mp.visible.size()) + "x" +
                          std::to_string(mp.tokens_per_slice) + " does not match token grid " +
                          std::to_string(st) + "x" + std::to_string(ss));
    }
    auto& list = keep[static_cast<size_t>(bi)];
    list.push_back(0);  // CLS always kept
    for (int s = 0; s < st; ++s) {
      for (int p : mp.visible[static_cast<size_t>(s)]) list.push_back(1 + s * ss + p);
    }
  }
  ClipTokens out;
  out.tokens = ops::index_select_tokens(t.tokens, keep, tape);
  out.has_cls = true;
  return out;
}

Tensor VideoEncoder::encode(const ClipTokens& t, Tape* tape) const {
  Tensor x = t.tokens;
  for (const auto& b : blocks_) x = b.forward(x, nullptr, tape);
  return x;
}

Tensor VideoEncoder::forward(const Tensor& frames, const std::vector<corpus::MaskPattern>* masks,
                             Tape* tape) const {
  ClipTokens t = cube_embed(frames, tape);
  t = add_spacetime_pos(t, tape);
  t = prepend_cls(t, tape);
  if (masks) t = apply_mask(t, *masks, tape);
  return encode(t, tape);
}

// ------------------------------------------------------------------- text

TextEncoder::TextEncoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const InitSpec spec{0.02, cfg.dtype};
  tok_emb_ = Tensor::trunc_normal({cfg_.vocab_size, cfg_.d_h}, spec.stddev, rng, cfg.dtype);
  pos_ = Tensor::trunc_normal({cfg_.max_text_len, cfg_.d_h}, spec.stddev, rng, cfg.dtype);
  blocks_.resize(static_cast<size_t>(cfg_.text_depth));
  for (auto& b : blocks_) b.init(cfg_.d_h, cfg_.heads, cfg_.ln_eps, rng, spec);
}

void TextEncoder::register_params(ParamSet& ps, const std::string& prefix) {
  ps.add(prefix + ".tok_emb", &tok_emb_);
  ps.add(prefix + ".pos", &pos_);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].register_params(ps, prefix + ".block" + std::to_string(i));
  }
}

Tensor TextEncoder::forward(const std::vector<std::vector<int>>& ids, Tape* tape) const {
  const int64_t r = static_cast<int64_t>(ids.size());
  const int64_t l = cfg_.max_text_len;
  if (r < 1) throw ContractError("text encoder: empty batch");
  std::vector<int> flat;
  flat.reserve(static_cast<size_t>(r * l));
  Tensor key_mask = Tensor::zeros({r, l}, cfg_.dtype);
  for (int64_t i = 0; i < r; ++i) {
    const auto& seq = ids[static_cast<size_t>(i)];
    if (static_cast<int64_t>(seq.size()) != l) throw ContractError("text encoder: sequence length mismatch");
    for (int64_t j = 0; j < l; ++j) {
      const int id = seq[static_cast<size_t>(j)];
      if (id < 0 || id >= cfg_.vocab_size) {
        throw VocabError("text encoder: token id " + std::to_string(id) + " outside vocab of " +
                         std::to_string(cfg_.vocab_size));
      }
      flat.push_back(id);
      if (id != corpus::Vocab::kPad) key_mask.set(i * l + j, 1.0);
    }
  }
  Tensor x = ops::gather_rows(tok_emb_, flat, tape);
  x = ops::reshape(x, {r, l, cfg_.d_h}, tape);
  x = ops::add_bcast0(x, pos_, tape);
  for (const auto& b : blocks_) x = b.forward(x, &key_mask, tape);
  Tensor cls = ops::slice_axis1(x, 0, 1, tape);  // [CLS] position output
  return ops::reshape(cls, {r, cfg_.d_h}, tape);
}

// ------------------------------------------------------------------ project

ProjectionHead::ProjectionHead(int64_t d_in, int64_t d_out, Rng& rng, const InitSpec& spec) {
  lin_.init(d_in, d_out, /*bias=*/false, rng, spec);  // bias-free: scale invariance
}

void ProjectionHead::register_params(ParamSet& ps, const std::string& prefix) {
  lin_.register_params(ps, prefix);
}

Tensor ProjectionHead::forward(const Tensor& x, Tape* tape) const {
  return ops::l2_normalize_rows(lin_.forward(x, tape), tape);
}

}  // namespace tvts
