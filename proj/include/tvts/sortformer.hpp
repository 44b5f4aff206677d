#pragma once

#include <string>
#include <vector>

#include "tvts/layers.hpp"
#include "tvts/model_config.hpp"
#include "tvts/permutation.hpp"

namespace tvts {

enum class SortProxy { kway, pair, factorial, videosort, none };
SortProxy parse_proxy(const std::string& s);
const char* proxy_name(SortProxy p);

// Two bidirectional transformer blocks over [transcript slots; video tokens].
// The trunk is identical across all proxy heads; only the head differs. No
// positional embedding is added to the transcript slots, which makes the
// K-way head exactly row-equivariant under transcript permutation.
class SortFormer {
 public:
  static constexpr int kTrunkDepth = 2;
  static constexpr int kFactorialCap = 6;  // K! head refuses K > 6

  SortFormer() = default;
  SortFormer(const EncoderConfig& cfg, SortProxy proxy, int k, int num_slices, Rng& rng);
  void register_params(ParamSet& ps, const std::string& prefix);

  // Exposed so the weight-sharing property is directly testable.
  Tensor trunk_forward(const Tensor& tokens, Tape* tape) const;

  // t_slots (B, K, D_h) in shuffled slot order; video (B, N+1, D_h) with CLS
  // at token 0. Logit shapes: kway (B,K,K); pair (B,K(K-1)/2,2) with
  // logit 1 = "slot i precedes slot j"; factorial (B,K!); videosort (B,S,S)
  // from per-slice mean pooling (requires N divisible by num_slices).
  Tensor forward(const Tensor& t_slots, const Tensor& video, Tape* tape) const;

  SortProxy proxy() const { return proxy_; }
  int k() const { return k_; }
  int num_slices() const { return num_slices_; }

 private:
  EncoderConfig cfg_;
  SortProxy proxy_ = SortProxy::kway;
  int k_ = 0;
  int num_slices_ = 0;
  std::vector<TransformerBlock> blocks_;
  LinearLayer classifier_;      // kway: D_h -> K, shared across slots
  LinearLayer pair_head_;       // 2*D_h -> 1 scalar order score
  LinearLayer factorial_head_;  // D_h -> K!
  Tensor ordering_token_;       // factorial proxy input token
  LinearLayer slice_head_;      // D_h -> num_slices
};

}  // namespace tvts
