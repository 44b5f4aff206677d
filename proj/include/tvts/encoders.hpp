#pragma once

#include <vector>

#include "tvts/layers.hpp"
#include "tvts/model_config.hpp"
#include "tvts/sampling.hpp"

namespace tvts {

// Video token sequence plus whether the CLS slot has been prepended yet.
// Token order is fixed slice-major: (temporal slice, patch row, patch col),
// so coordinates are implied by index and the encoder config.
struct ClipTokens {
  Tensor tokens;  // (B, T, D_h)
  bool has_cls = false;
};

// Cube embedding + divided space-time positions + CLS + mask-aware joint
// space-time attention stack.
class VideoEncoder {
 public:
  VideoEncoder() = default;
  VideoEncoder(const EncoderConfig& cfg, Rng& rng);
  void register_params(ParamSet& ps, const std::string& prefix);

  // frames: (B, M, H, W, 3) in [0,1]
  ClipTokens cube_embed(const Tensor& frames, Tape* tape) const;
  ClipTokens add_spacetime_pos(const ClipTokens& t, Tape* tape) const;
  ClipTokens prepend_cls(const ClipTokens& t, Tape* tape) const;
  // Masked tokens are removed, never replaced; CLS is always kept. Applied
  // after position embedding so surviving tokens keep true coordinates.
  ClipTokens apply_mask(const ClipTokens& t, const std::vector<corpus::MaskPattern>& masks, Tape* tape) const;
  // Joint space-time attention over whatever tokens remain.
  Tensor encode(const ClipTokens& t, Tape* tape) const;

  // Full pipeline. masks == nullptr keeps every token. Output (B, N+1, D_h)
  // with the CLS vector at token 0.
  Tensor forward(const Tensor& frames, const std::vector<corpus::MaskPattern>* masks, Tape* tape) const;

  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  LinearLayer cube_;          // cube_dim -> D_h
  Tensor cls_token_;          // (D_h)
  Tensor cls_pos_;            // (D_h), CLS has its own learned position
  Tensor temporal_table_;     // (S_t, D_h)
  Tensor spatial_table_;      // (S_s, D_h)
  std::vector<TransformerBlock> blocks_;
};

// Small from-scratch transformer over the closed vocabulary; [PAD] keys are
// attention-masked and the output is read at the [CLS] position.
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(const EncoderConfig& cfg, Rng& rng);
  void register_params(ParamSet& ps, const std::string& prefix);

  // ids: R sequences of exactly max_text_len ids -> (R, D_h)
  Tensor forward(const std::vector<std::vector<int>>& ids, Tape* tape) const;

  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  Tensor tok_emb_;  // (V, D_h)
  Tensor pos_;      // (L, D_h)
  std::vector<TransformerBlock> blocks_;
};

// Bias-free linear map D_h -> D followed by L2 normalization.
class ProjectionHead {
 public:
  ProjectionHead() = default;
  ProjectionHead(int64_t d_in, int64_t d_out, Rng& rng, const InitSpec& spec);
  void register_params(ParamSet& ps, const std::string& prefix);
  Tensor forward(const Tensor& x, Tape* tape) const;

 private:
  LinearLayer lin_;
};

}  // namespace tvts
