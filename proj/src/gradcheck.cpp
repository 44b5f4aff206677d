#include "tvts/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "tvts/encoders.hpp"
#include "tvts/losses.hpp"
#include "tvts/ops.hpp"
#include "tvts/rng.hpp"
#include "tvts/sortformer.hpp"
#include "tvts/tokenizer.hpp"

namespace tvts::gradcheck {

double rel_err(double ad, double fd) {
  return std::fabs(ad - fd) / std::max({1e-4, std::fabs(ad), std::fabs(fd)});
}

double check(const LossFn& f, std::vector<Tensor> inputs, double h) {
  Tape tape;
  for (auto& t : inputs) tape.track(t);
  Tensor loss = f(inputs, &tape);
  GradMap grads = tape.backward(loss);

  double worst = 0.0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    Tensor ad;
    const auto it = grads.find(inputs[i].node);
    ad = it != grads.end() ? it->second : Tensor::zeros(inputs[i].shape(), inputs[i].dtype());
    const Tensor fd = ops::finite_diff_grad(
        [&](const Tensor& xi) {
          std::vector<Tensor> probe = inputs;
          probe[i] = xi;
          for (auto& t : probe) t.node = -1;
          return f(probe, nullptr).scalar();
        },
        inputs[i], h);
    for (int64_t e = 0; e < fd.numel(); ++e) worst = std::max(worst, rel_err(ad.at(e), fd.at(e)));
  }
  return worst;
}

namespace {

Tensor rand_t(std::vector<int64_t> shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), DType::f64);
  for (int64_t i = 0; i < t.numel(); ++i) t.set(i, rng.uniform(-1.0, 1.0));
  return t;
}

// random fixed cotangent so the scalarization exercises every output element
Tensor proj_loss(const Tensor& y, const Tensor& r, Tape* tape) {
  return ops::sum_all(ops::mul(y, r, tape), tape);
}

struct Case {
  std::string name;
  std::function<double(Rng&)> run;  // returns max rel err
};

std::vector<Case> op_cases() {
  std::vector<Case> cases;
  auto add_case = [&](std::string name, std::function<double(Rng&)> fn) {
    cases.push_back({std::move(name), std::move(fn)});
  };

  add_case("add", [](Rng& rng) {
    Tensor r = rand_t({3, 4}, rng);
    return check([r](std::vector<Tensor>& in, Tape* t) { return proj_loss(ops::add(in[0], in[1], t), r, t); },
                 {rand_t({3, 4}, rng), rand_t({3, 4}, rng)});
  });
  add_case("sub", [](Rng& rng) {
    Tensor r = rand_t({3, 4}, rng);
    return check([r](std::vector<Tensor>& in, Tape* t) { return proj_loss(ops::sub(in[0], in[1], t), r, t); },
                 {rand_t({3, 4}, rng), rand_t({3, 4}, rng)});
  });
  add_case("mul", [](Rng& rng) {
    Tensor r = rand_t({5, 2}, rng);
    return check([r](std::vector<Tensor>& in, Tape* t) { return proj_loss(ops::mul(in[0], in[1], t), r, t); },
                 {rand_t({5, 2}, rng), rand_t({5, 2}, rng)});
  });
  add_case("scale/add_scaled", [](Rng& rng) {
    Tensor r = rand_t({4, 3}, rng);
    return check(
        [r](std::vector<Tensor>& in, Tape* t) {
          return proj_loss(ops::add_scaled(ops::scale(in[0], 1.7, t), in[1], -0.6, t), r, t);
        },
        {rand_t({4, 3}, rng), rand_t({4, 3}, rng)});
  });
  add_case("gelu", [](Rng& rng) {
    Tensor r = rand_t({6, 3}, rng);
    return check([r](std::vector<Tensor>& in, Tape* t) { return proj_loss(ops::gelu(in[0], t), r, t); },
                 {rand_t({6, 3}, rng)});
  });
  add_case("matmul", [](Rng& rng) {
    Tensor r = rand_t({4, 5}, rng);
    return check([r](std::vector<Tensor>& in, Tape* t) { return proj_loss(ops::matmul(in[0], in[1], t), r, t); },
                 {rand_t({4, 3}, rng), rand_t({3, 5}, rng)});
  });
  add_case("transpose2d", [](Rng& rng) {
    Tensor r = rand_t({5, 3}, rng);
    return check([r](std::vector<Tensor>& in, Tape* t) { return proj_loss(ops::transpose2d(in[0], t), r, t); },
                 {rand_t({3, 5}, rng)});
  });
  add_case("reshape", [](Rng& rng) {
    Tensor r = rand_t({6, 2}, rng);
    return check(
        [r](std::vector<Tensor>& in, Tape* t) { return proj_loss(ops::reshape(in[0], {6, 2}, t), r, t); },
        {rand_t({3, 4}, rng)});
  });
  add_case("linear+bias", [](Rng& rng) {
    Tensor r = rand_t({2, 3, 5}, rng);
    return check(
        [r](std::vector<Tensor>& in, Tape* t) {
          return proj_loss(ops::linear(in[0], in[1], &in[2], t), r, t);
        },
        {rand_t({2, 3, 4}, rng), rand_t({4, 5}, rng), rand_t({5}, rng)});
  });
  add_case("add_bias", [](Rng& rng) {
    Tensor r = rand_t({5, 3}, rng);
    return check([r](std::vector<Tensor>& in, Tape* t) { return proj_loss(ops::add_bias(in[0], in[1], t), r, t); },
                 {rand_t({5, 3}, rng), rand_t({3}, rng)});
  });
  add_case("softmax", [](Rng& rng) {
    Tensor r = rand_t({3, 6}, rng);
    return check([r](std::vector<Tensor>& in, Tape* t) { return proj_loss(ops::softmax(in[0], -1, t), r, t); },
                 {rand_t({3, 6}, rng)});
  });
  add_case("softmax_axis0", [](Rng& rng) {
    Tensor r = rand_t({3, 6}, rng);
    return check([r](std::vector<Tensor>& in, Tape* t) { return proj_loss(ops::softmax(in[0], 0, t), r, t); },
                 {rand_t({3, 6}, rng)});
  });
  add_case("layer_norm", [](Rng& rng) {
    Tensor r = rand_t({4, 6}, rng);
    return check(
        [r](std::vector<Tensor>& in, Tape* t) {
          return proj_loss(ops::layer_norm(in[0], in[1], in[2], 1e-5, t), r, t);
        },
        {rand_t({4, 6}, rng), rand_t({6}, rng), rand_t({6}, rng)});
  });
  add_case("attention", [](Rng& rng) {
    Tensor r = rand_t({2, 3, 8}, rng);
    return check(
        [r](std::vector<Tensor>& in, Tape* t) {
          return proj_loss(ops::multi_head_attention(in[0], in[1], in[2], 2, nullptr, t), r, t);
        },
        {rand_t({2, 3, 8}, rng), rand_t({2, 4, 8}, rng), rand_t({2, 4, 8}, rng)});
  });
  add_case("attention_masked", [](Rng& rng) {
    Tensor r = rand_t({2, 3, 8}, rng);
    Tensor mask = Tensor::full({2, 4}, 1.0);
    mask.set(1, 0.0);
    mask.set(6, 0.0);
    return check(
        [r, mask](std::vector<Tensor>& in, Tape* t) {
          return proj_loss(ops::multi_head_attention(in[0], in[1], in[2], 2, &mask, t), r, t);
        },
        {rand_t({2, 3, 8}, rng), rand_t({2, 4, 8}, rng), rand_t({2, 4, 8}, rng)});
  });
  add_case("gather_rows", [](Rng& rng) {
    Tensor r = rand_t({5, 3}, rng);
    const std::vector<int> ids{0, 2, 2, 1, 3};
    return check(
        [r, ids](std::vector<Tensor>& in, Tape* t) { return proj_loss(ops::gather_rows(in[0], ids, t), r, t); },
        {rand_t({4, 3}, rng)});
  });
  add_case("index_select_tokens", [](Rng& rng) {
    Tensor r = rand_t({2, 3, 4}, rng);
    const std::vector<std::vector<int>> idx{{0, 4, 4}, {2, 1, 3}};
    return check(
        [r, idx](std::vector<Tensor>& in, Tape* t) {
          return proj_loss(ops::index_select_tokens(in[0], idx, t), r, t);
        },
        {rand_t({2, 5, 4}, rng)});
  });
  add_case("add_bcast0/broadcast_rows", [](Rng& rng) {
    Tensor r = rand_t({3, 2, 4}, rng);
    return check(
        [r](std::vector<Tensor>& in, Tape* t) {
          Tensor y = ops::add_bcast0(ops::broadcast_rows(in[0], 3, t), in[1], t);
          return proj_loss(y, r, t);
        },
        {rand_t({2, 4}, rng), rand_t({2, 4}, rng)});
  });
  add_case("concat/slice_axis1", [](Rng& rng) {
    Tensor r = rand_t({2, 2, 3}, rng);
    return check(
        [r](std::vector<Tensor>& in, Tape* t) {
          Tensor cat = ops::concat_axis1(in[0], in[1], t);
          return proj_loss(ops::slice_axis1(cat, 1, 2, t), r, t);
        },
        {rand_t({2, 2, 3}, rng), rand_t({2, 2, 3}, rng)});
  });
  add_case("concat_last", [](Rng& rng) {
    Tensor r = rand_t({3, 5}, rng);
    return check(
        [r](std::vector<Tensor>& in, Tape* t) { return proj_loss(ops::concat_last(in[0], in[1], t), r, t); },
        {rand_t({3, 2}, rng), rand_t({3, 3}, rng)});
  });
  add_case("mean_axis1", [](Rng& rng) {
    Tensor r = rand_t({2, 4}, rng);
    return check([r](std::vector<Tensor>& in, Tape* t) { return proj_loss(ops::mean_axis1(in[0], t), r, t); },
                 {rand_t({2, 3, 4}, rng)});
  });
  add_case("l2_normalize_rows", [](Rng& rng) {
    Tensor r = rand_t({4, 5}, rng);
    return check([r](std::vector<Tensor>& in, Tape* t) { return proj_loss(ops::l2_normalize_rows(in[0], t), r, t); },
                 {rand_t({4, 5}, rng)});
  });
  add_case("cross_entropy_rows", [](Rng& rng) {
    const std::vector<int> labels{1, 0, 3, 2};
    return check(
        [labels](std::vector<Tensor>& in, Tape* t) { return ops::cross_entropy_rows(in[0], labels, t); },
        {rand_t({4, 4}, rng)});
  });
  add_case("cube_extract", [](Rng& rng) {
    Tensor r = rand_t({1, 8, 2 * 4 * 4 * 3}, rng);
    return check(
        [r](std::vector<Tensor>& in, Tape* t) { return proj_loss(ops::cube_extract(in[0], 4, 2, t), r, t); },
        {rand_t({1, 4, 8, 8, 3}, rng)});
  });
  add_case("info_nce", [](Rng& rng) {
    return check(
        [](std::vector<Tensor>& in, Tape* t) {
          return obj::info_nce(ops::l2_normalize_rows(in[0], t), ops::l2_normalize_rows(in[1], t), 0.5, t);
        },
        {rand_t({4, 6}, rng), rand_t({4, 6}, rng)});
  });
  add_case("sort_loss", [](Rng& rng) {
    const std::vector<std::vector<int>> perms{{2, 0, 1}, {0, 2, 1}};
    return check(
        [perms](std::vector<Tensor>& in, Tape* t) { return obj::sort_loss(in[0], perms, t); },
        {rand_t({2, 3, 3}, rng)});
  });
  add_case("pair_sort_loss", [](Rng& rng) {
    const std::vector<std::vector<int>> perms{{2, 0, 1}};
    return check(
        [perms](std::vector<Tensor>& in, Tape* t) { return obj::pair_sort_loss(in[0], perms, t); },
        {rand_t({1, 3, 2}, rng)});
  });
  add_case("factorial_sort_loss", [](Rng& rng) {
    const std::vector<std::vector<int>> perms{{1, 2, 0}, {0, 1, 2}};
    return check(
        [perms](std::vector<Tensor>& in, Tape* t) { return obj::factorial_sort_loss(in[0], perms, t); },
        {rand_t({2, 6}, rng)});
  });
  add_case("transformer_block", [](Rng& rng) {
    // full block through parameters: track x plus a couple of weight tensors
    Rng init(rng.u64());
    TransformerBlock blk;
    blk.init(8, 2, 1e-5, init, InitSpec{0.05, DType::f64});
    Tensor r = rand_t({1, 4, 8}, rng);
    return check(
        [&blk, r](std::vector<Tensor>& in, Tape* t) {
          TransformerBlock b2 = blk;  // shared buffers; swap in tracked leaves
          b2.wq.w = in[1];
          b2.mlp_in.b = in[2];
          b2.ln1.gain = in[3];
          return proj_loss(b2.forward(in[0], nullptr, t), r, t);
        },
        {rand_t({1, 4, 8}, rng), blk.wq.w.clone(), blk.mlp_in.b.clone(), blk.ln1.gain.clone()});
  });
  return cases;
}

// Composed model at the acceptance-criterion tiny dims: D_h=8, K=3, M=4,
// H=W=16, heads 2, depth 1, text depth 1, mask ratio 0.5, B=2.
double composed_case(Rng& rng, double* out_masked_pixel_grad_max) {
  EncoderConfig cfg;
  cfg.d_h = 8;
  cfg.depth = 1;
  cfg.text_depth = 1;
  cfg.heads = 2;
  cfg.patch = 8;
  cfg.tubelet = 2;
  cfg.frames = 4;
  cfg.res_h = cfg.res_w = 16;
  cfg.max_text_len = 6;
  cfg.d_common = 4;
  cfg.vocab_size = static_cast<int>(corpus::builtin_vocab().size());
  cfg.dtype = DType::f64;

  const int k = 3, b = 2;
  Rng init(rng.u64());
  VideoEncoder video(cfg, init);
  TextEncoder text(cfg, init);
  ProjectionHead pv(cfg.d_h, cfg.d_common, init, InitSpec{0.05, DType::f64});
  ProjectionHead pt(cfg.d_h, cfg.d_common, init, InitSpec{0.05, DType::f64});
  SortFormer sorter(cfg, SortProxy::kway, k, cfg.temporal_slices(), init);

  // masks: ratio 0.5 over 4 spatial positions per slice -> 2 visible per slice
  Rng mrng(rng.u64());
  std::vector<corpus::MaskPattern> masks;
  for (int i = 0; i < b; ++i) {
    masks.push_back(corpus::build_mask(cfg.spatial_positions(), cfg.temporal_slices(), 0.5, mrng));
  }
  std::vector<std::vector<int>> ids(static_cast<size_t>(b * k));
  for (auto& seq : ids) {
    seq.resize(static_cast<size_t>(cfg.max_text_len));
    seq[0] = corpus::Vocab::kCls;
    for (size_t j = 1; j < seq.size(); ++j) {
      seq[j] = j < 4 ? 3 + static_cast<int>(rng.below(static_cast<uint64_t>(cfg.vocab_size - 3))) : corpus::Vocab::kPad;
    }
  }
  std::vector<std::vector<int>> perms;
  for (int i = 0; i < b; ++i) perms.push_back(rng.permutation(k));

  Tensor frames = Tensor::zeros({b, cfg.frames, cfg.res_h, cfg.res_w, 3}, DType::f64);
  for (int64_t i = 0; i < frames.numel(); ++i) frames.set(i, rng.uniform01());

  auto forward = [&](std::vector<Tensor>& in, Tape* tape) {
    // in[0] = frames (pixels); parameters are tracked on the models directly
    Tensor vtok = video.forward(in[0], &masks, tape);
    Tensor v0 = ops::reshape(ops::slice_axis1(vtok, 0, 1, tape), {b, cfg.d_h}, tape);
    Tensor tvec = text.forward(ids, tape);
    Tensor t3 = ops::reshape(tvec, {b, k, cfg.d_h}, tape);
    Tensor t_hat = pt.forward(ops::mean_axis1(t3, tape), tape);
    Tensor v_hat = pv.forward(v0, tape);
    Tensor l_align = obj::align_loss(t_hat, v_hat, 0.05, tape);
    Tensor logits = sorter.forward(t3, vtok, tape);
    Tensor l_sort = obj::sort_loss(logits, perms, tape);
    return obj::total_loss(l_align, l_sort, 2.0, tape);
  };

  // Check pixels end to end plus every parameter tensor, sampling a few
  // elements per tensor (full finite differences over all weights would not
  // fit the runtime budget; sampled positions still exercise every rule).
  ParamSet ps;
  video.register_params(ps, "video");
  text.register_params(ps, "text");
  pv.register_params(ps, "proj_v");
  pt.register_params(ps, "proj_t");
  sorter.register_params(ps, "sorter");

  Tape tape;
  std::vector<Tensor> tracked{frames};
  tape.track(tracked[0]);
  frames.node = tracked[0].node;
  ps.track_all(tape);
  Tensor loss = forward(tracked, &tape);
  GradMap grads = tape.backward(loss);

  auto eval_loss = [&]() {
    std::vector<Tensor> in{frames};
    return forward(in, nullptr).scalar();
  };

  double worst = 0.0;
  Rng pick(rng.u64());
  const double h = kStep;

  // pixel gradients: visible-cube pixels against central differences
  {
    const auto it = grads.find(frames.node);
    Tensor ga = it != grads.end() ? it->second : Tensor::zeros(frames.shape(), DType::f64);
    for (int probe = 0; probe < 12; ++probe) {
      const int64_t e = static_cast<int64_t>(pick.below(static_cast<uint64_t>(frames.numel())));
      const double orig = frames.at(e);
      frames.set(e, orig + h);
      const double up = eval_loss();
      frames.set(e, orig - h);
      const double dn = eval_loss();
      frames.set(e, orig);
      worst = std::max(worst, rel_err(ga.at(e), (up - dn) / (2.0 * h)));
    }
    if (out_masked_pixel_grad_max) {
      // masked cubes: gradient must be exactly zero
      double mx = 0.0;
      const int ss = cfg.spatial_positions();
      for (int bi = 0; bi < b; ++bi) {
        for (int s = 0; s < cfg.temporal_slices(); ++s) {
          const auto& vis = masks[static_cast<size_t>(bi)].visible[static_cast<size_t>(s)];
          for (int p = 0; p < ss; ++p) {
            if (std::find(vis.begin(), vis.end(), p) != vis.end()) continue;
            // cube (s, p) covers frames [s*2, s*2+2) rows/cols of the patch
            const int gw = cfg.res_w / cfg.patch;
            const int ry = p / gw, rx = p % gw;
            for (int f = 0; f < cfg.tubelet; ++f) {
              for (int y = 0; y < cfg.patch; y += 3) {
                for (int x = 0; x < cfg.patch; x += 3) {
                  const int64_t e =
                      ((((static_cast<int64_t>(bi) * cfg.frames + (s * cfg.tubelet + f)) * cfg.res_h +
                         (ry * cfg.patch + y)) * cfg.res_w + (rx * cfg.patch + x)) * 3);
                  mx = std::max(mx, std::fabs(ga.at(e)));
                }
              }
            }
          }
        }
      }
      *out_masked_pixel_grad_max = mx;
    }
  }

  // parameters: sampled elements per tensor
  for (size_t pi = 0; pi < ps.size(); ++pi) {
    Tensor& w = ps.tensor(pi);
    const auto it = grads.find(w.node);
    Tensor ga = it != grads.end() ? it->second : Tensor::zeros(w.shape(), DType::f64);
    const int samples = static_cast<int>(std::min<int64_t>(w.numel(), 4));
    for (int sidx = 0; sidx < samples; ++sidx) {
      const int64_t e = static_cast<int64_t>(pick.below(static_cast<uint64_t>(w.numel())));
      const double orig = w.at(e);
      w.set(e, orig + h);
      const double up = eval_loss();
      w.set(e, orig - h);
      const double dn = eval_loss();
      w.set(e, orig);
      worst = std::max(worst, rel_err(ga.at(e), (up - dn) / (2.0 * h)));
    }
  }
  return worst;
}

}  // namespace

std::vector<CheckResult> run_all(uint64_t seed0, int seeds, bool include_broken_fixture) {
  std::vector<CheckResult> results;
  for (auto& c : op_cases()) {
    CheckResult res;
    res.name = c.name;
    for (int s = 0; s < seeds; ++s) {
      Rng rng = Rng::derive(seed0, "gradcheck", fnv1a64(c.name), static_cast<uint64_t>(s));
      res.max_rel_err = std::max(res.max_rel_err, c.run(rng));
    }
    res.pass = res.max_rel_err < kTol;
    results.push_back(std::move(res));
  }

  {
    CheckResult res;
    res.name = "composed_L_total";
    CheckResult masked;
    masked.name = "masked_cube_zero_grad";
    for (int s = 0; s < seeds; ++s) {
      Rng rng = Rng::derive(seed0, "gradcheck-composed", static_cast<uint64_t>(s));
      double masked_grad = 0.0;
      res.max_rel_err = std::max(res.max_rel_err, composed_case(rng, &masked_grad));
      masked.max_rel_err = std::max(masked.max_rel_err, masked_grad);
    }
    res.pass = res.max_rel_err < kTol;
    masked.pass = masked.max_rel_err == 0.0;
    results.push_back(std::move(res));
    results.push_back(std::move(masked));
  }

  if (include_broken_fixture) {
    // a gelu whose backward is scaled by 1.01; the harness must flag it
    CheckResult res;
    res.name = "fixture/broken_gelu";
    Rng rng = Rng::derive(seed0, "gradcheck-fixture");
    Tensor r = rand_t({3, 3}, rng);
    res.max_rel_err = check(
        [r](std::vector<Tensor>& in, Tape* t) {
          Tensor y = ops::gelu(in[0], t);
          if (t && y.tracked()) {
            // re-record with a deliberately wrong rule
            Tensor x = in[0];
            Tensor bad = Tensor::zeros(y.shape(), y.dtype());
            for (int64_t i = 0; i < y.numel(); ++i) bad.set(i, y.at(i));
            bad.node = t->record({x.node}, [](const Tensor& g, Tape::Sink& s) {
              s.add(0, ops::scale(g, 1.01));  // wrong on purpose
            });
            return proj_loss(bad, r, t);
          }
          return proj_loss(y, r, t);
        },
        {rand_t({3, 3}, rng)});
    res.pass = res.max_rel_err < kTol;
    results.push_back(std::move(res));
  }
  return results;
}

}  // namespace tvts::gradcheck
