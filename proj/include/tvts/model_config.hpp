#pragma once

#include <cstdint>
#include <string>

#include "tvts/common.hpp"
#include "tvts/tensor.hpp"

namespace tvts {

// Architecture of both encoders and the sorting head.
// Desk-scale defaults; paper-scale values (D_h=768, P=16, 224x224, M=16)
// remain valid configurations.
struct EncoderConfig {
  int d_h = 64;           // hidden width
  int depth = 4;          // video encoder blocks
  int text_depth = 2;     // text encoder blocks
  int heads = 4;
  int patch = 8;          // P, spatial patch side
  int tubelet = 2;        // temporal cube depth
  int frames = 8;         // M, sampled frames per clip
  int res_h = 32, res_w = 32;
  int max_text_len = 16;  // token ids per transcript, [CLS] included
  int vocab_size = 0;     // filled from the tokenizer vocab
  int d_common = 32;      // D, contrastive space width
  double ln_eps = 1e-5;
  DType dtype = DType::f64;

  int temporal_slices() const { return frames / tubelet; }
  int spatial_positions() const { return (res_h / patch) * (res_w / patch); }
  int tokens_per_clip() const { return temporal_slices() * spatial_positions(); }  // pre-mask, no CLS
  int cube_dim() const { return tubelet * patch * patch * 3; }

  void validate() const {
    if (d_h < 1 || depth < 0 || text_depth < 0 || heads < 1) throw ConfigError("encoder: bad width/depth/heads");
    if (d_h % heads != 0) throw ConfigError("encoder: D_h " + std::to_string(d_h) + " not divisible by heads " + std::to_string(heads));
    if (frames % tubelet != 0) throw ConfigError("encoder: M " + std::to_string(frames) + " not divisible by tubelet " + std::to_string(tubelet));
    if (res_h % patch != 0 || res_w % patch != 0) {
      throw ConfigError("encoder: resolution " + std::to_string(res_h) + "x" + std::to_string(res_w) +
                        " not divisible by patch size " + std::to_string(patch));
    }
    if (max_text_len < 1) throw ConfigError("encoder: max_text_len must be >= 1");
    if (vocab_size < 4) throw ConfigError("encoder: vocab too small");
    if (d_common < 1) throw ConfigError("encoder: common space width must be >= 1");
  }
};

}  // namespace tvts
