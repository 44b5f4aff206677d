#include "tvts/sortformer.hpp"

namespace tvts {

SortProxy parse_proxy(const std::string& s) {
  if (s == "kway") return SortProxy::kway;
  if (s == "pair") return SortProxy::pair;
  if (s == "factorial") return SortProxy::factorial;
  if (s == "videosort") return SortProxy::videosort;
  if (s == "none") return SortProxy::none;
  throw ConfigError("unknown sort proxy '" + s + "' (kway|pair|factorial|videosort|none)");
}

const char* proxy_name(SortProxy p) {
  switch (p) {
    case SortProxy::kway: return "kway";
    case SortProxy::pair: return "pair";
    case SortProxy::factorial: return "factorial";
    case SortProxy::videosort: return "videosort";
    default: return "none";
  }
}

SortFormer::SortFormer(const EncoderConfig& cfg, SortProxy proxy, int k, int num_slices, Rng& rng)
    : cfg_(cfg), proxy_(proxy), k_(k), num_slices_(num_slices) {
  if (k_ < 2) throw ConfigError("SortFormer: K must be >= 2");
  if (proxy_ == SortProxy::factorial && k_ > kFactorialCap) {
    throw ConfigError("SortFormer: K! head capped at K = " + std::to_string(kFactorialCap) +
                      ", got K = " + std::to_string(k_));
  }
  if (proxy_ == SortProxy::videosort && num_slices_ < 2) {
    throw ConfigError("SortFormer: videosort needs >= 2 temporal slices");
  }
  const InitSpec spec{0.02, cfg.dtype};
  blocks_.resize(kTrunkDepth);
  for (auto& b : blocks_) b.init(cfg_.d_h, cfg_.heads, cfg_.ln_eps, rng, spec);
  switch (proxy_) {
    case SortProxy::kway:
      classifier_.init(cfg_.d_h, k_, true, rng, spec);
      break;
    case SortProxy::pair:
      pair_head_.init(2 * cfg_.d_h, 1, true, rng, spec);
      break;
    case SortProxy::factorial:
      ordering_token_ = Tensor::trunc_normal({cfg_.d_h}, spec.stddev, rng, cfg.dtype);
      factorial_head_.init(cfg_.d_h, factorial(k_), true, rng, spec);
      break;
    case SortProxy::videosort:
      slice_head_.init(cfg_.d_h, num_slices_, true, rng, spec);
      break;
    case SortProxy::none:
      break;
  }
}

void SortFormer::register_params(ParamSet& ps, const std::string& prefix) {
  for (size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].register_params(ps, prefix + ".trunk.block" + std::to_string(i));
  }
  switch (proxy_) {
    case SortProxy::kway: classifier_.register_params(ps, prefix + ".classifier"); break;
    case SortProxy::pair: pair_head_.register_params(ps, prefix + ".pair_head"); break;
    case SortProxy::factorial:
      ps.add(prefix + ".ordering_token", &ordering_token_);
      factorial_head_.register_params(ps, prefix + ".factorial_head");
      break;
    case SortProxy::videosort: slice_head_.register_params(ps, prefix + ".slice_head"); break;
    case SortProxy::none: break;
  }
}

Tensor SortFormer::trunk_forward(const Tensor& tokens, Tape* tape) const {
  Tensor x = tokens;
  for (const auto& b : blocks_) x = b.forward(x, nullptr, tape);
  return x;
}

Tensor SortFormer::forward(const Tensor& t_slots, const Tensor& video, Tape* tape) const {
  if (proxy_ == SortProxy::none) throw ContractError("SortFormer: proxy 'none' has no forward");
  if (t_slots.ndim() != 3 || video.ndim() != 3 || t_slots.dim(0) != video.dim(0) ||
      t_slots.dim(2) != cfg_.d_h || video.dim(2) != cfg_.d_h) {
    throw ShapeError("SortFormer: t " + shape_str(t_slots.shape()) + " / v " + shape_str(video.shape()));
  }
  if (t_slots.dim(1) != k_) throw ShapeError("SortFormer: expected K = " + std::to_string(k_) + " transcript slots");
  const int64_t b = t_slots.dim(0);
  const int64_t nv = video.dim(1);

  Tensor in = ops::concat_axis1(t_slots, video, tape);
  if (proxy_ == SortProxy::factorial) {
    Tensor ord = ops::broadcast_rows(ordering_token_, b, tape);  // appended last
    in = ops::concat_axis1(in, ord, tape);
  }
  Tensor z = trunk_forward(in, tape);

  switch (proxy_) {
    case SortProxy::kway: {
      Tensor zt = ops::slice_axis1(z, 0, k_, tape);  // first K outputs
      return classifier_.forward(zt, tape);          // (B, K, K)
    }
    case SortProxy::pair: {
      Tensor zt = ops::slice_axis1(z, 0, k_, tape);
      std::vector<int> ii, jj;
      for (int i = 0; i < k_; ++i) {
        for (int j = i + 1; j < k_; ++j) {
          ii.push_back(i);
          jj.push_back(j);
        }
      }
      const std::vector<std::vector<int>> isel(static_cast<size_t>(b), ii);
      const std::vector<std::vector<int>> jsel(static_cast<size_t>(b), jj);
      Tensor zi = ops::index_select_tokens(zt, isel, tape);  // (B, P, D)
      Tensor zj = ops::index_select_tokens(zt, jsel, tape);
      // h(a,b) scored twice with arguments swapped: logits = [h(zj,zi), h(zi,zj)]
      Tensor s_ij = pair_head_.forward(ops::concat_last(zi, zj, tape), tape);  // "i first"
      Tensor s_ji = pair_head_.forward(ops::concat_last(zj, zi, tape), tape);  // "j first"
      return ops::concat_last(s_ji, s_ij, tape);  // (B, P, 2), index 1 = i first
    }
    case SortProxy::factorial: {
      Tensor zo = ops::slice_axis1(z, k_ + nv, 1, tape);  // the ordering token output
      Tensor flat = ops::reshape(zo, {b, cfg_.d_h}, tape);
      return factorial_head_.forward(flat, tape);  // (B, K!)
    }
    case SortProxy::videosort: {
      const int64_t n = nv - 1;  // non-CLS video tokens
      if (n % num_slices_ != 0) {
        throw ContractError("videosort: " + std::to_string(n) + " video tokens not divisible into " +
                            std::to_string(num_slices_) + " slices");
      }
      const int64_t per = n / num_slices_;
      Tensor zv = ops::slice_axis1(z, k_ + 1, n, tape);  // skip transcripts and video CLS
      Tensor grouped = ops::reshape(zv, {b * num_slices_, per, cfg_.d_h}, tape);
      Tensor pooled = ops::mean_axis1(grouped, tape);            // (B*S, D)
      Tensor logits = slice_head_.forward(pooled, tape);         // (B*S, S)
      return ops::reshape(logits, {b, num_slices_, num_slices_}, tape);
    }
    default:
      throw ContractError("SortFormer: unreachable proxy");
  }
}

}  // namespace tvts
