#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tvts/adamw.hpp"
#include "tvts/ops.hpp"
#include "tvts/rng.hpp"

using namespace tvts;

namespace {
GradMap grads_for(Tensor& w, Tape& tape, const Tensor& g) {
  GradMap m;
  m.emplace(w.node, g.clone());
  (void)tape;
  return m;
}
}  // namespace

TEST_CASE("zero gradient: pure decoupled decay w <- w(1 - lr*wd)") {
  Tensor w = Tensor::from({3}, {1.0, -2.0, 0.5});
  const Tensor w0 = w.clone();
  ParamSet ps;
  ps.add("w", &w);
  Tape tape;
  ps.track_all(tape);
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.2;
  AdamW opt(cfg);
  opt.step(ps, grads_for(w, tape, Tensor::zeros({3})));
  for (int64_t i = 0; i < 3; ++i) {
    CHECK(w.at(i) == doctest::Approx(w0.at(i) * (1.0 - 0.1 * 0.2)).epsilon(1e-12));
  }
}

TEST_CASE("first step with decay 0 moves by ~ -lr * sign(g)") {
  Rng rng(5);
  Tensor w = Tensor::randn({6}, 1.0, rng);
  const Tensor w0 = w.clone();
  Tensor g = Tensor::randn({6}, 1.0, rng);
  ParamSet ps;
  ps.add("w", &w);
  Tape tape;
  ps.track_all(tape);
  AdamWConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.0;
  AdamW opt(cfg);
  opt.step(ps, grads_for(w, tape, g));
  for (int64_t i = 0; i < 6; ++i) {
    // bias correction makes m_hat = g, v_hat = g^2, so the step is
    // lr * g/(|g| + eps) ~ lr * sign(g)
    const double want = w0.at(i) - 0.01 * g.at(i) / (std::fabs(g.at(i)) + cfg.eps);
    CHECK(w.at(i) == doctest::Approx(want).epsilon(1e-12));
    CHECK(std::fabs((w.at(i) - w0.at(i))) == doctest::Approx(0.01).epsilon(1e-4));
  }
}

TEST_CASE("two identical runs replay bit-exactly") {
  auto run = [](std::vector<double>* out) {
    Rng rng(7);
    Tensor w = Tensor::randn({8}, 1.0, rng);
    const Tensor g = Tensor::randn({8}, 0.3, rng);
    ParamSet ps;
    ps.add("w", &w);
    AdamWConfig cfg;
    cfg.lr = 1e-3;
    AdamW opt(cfg);
    for (int s = 0; s < 5; ++s) {
      Tape tape;
      ps.track_all(tape);
      GradMap gm;
      gm.emplace(w.node, g.clone());
      opt.step(ps, gm);
    }
    *out = w.to_vector();
  };
  std::vector<double> a, b;
  run(&a);
  run(&b);
  CHECK(a == b);
}

TEST_CASE("moment buffers shape-match and the step counter increments") {
  Tensor w = Tensor::zeros({2, 3});
  ParamSet ps;
  ps.add("w", &w);
  AdamW opt(AdamWConfig{});
  Tape tape;
  ps.track_all(tape);
  GradMap gm;
  gm.emplace(w.node, Tensor::full({2, 3}, 0.5));
  opt.step(ps, gm);
  CHECK(opt.step_count() == 1);
  CHECK(opt.first_moments().at("w").shape() == w.shape());
  CHECK(opt.second_moments().at("w").shape() == w.shape());
  opt.step(ps, gm);
  CHECK(opt.step_count() == 2);
}

TEST_CASE("gradient clipping caps the global norm") {
  Tensor w1 = Tensor::zeros({2});
  Tensor w2 = Tensor::zeros({2});
  ParamSet ps;
  ps.add("a", &w1);
  ps.add("b", &w2);
  Tape tape;
  ps.track_all(tape);
  GradMap gm;
  gm.emplace(w1.node, Tensor::from({2}, {3.0, 0.0}));
  gm.emplace(w2.node, Tensor::from({2}, {0.0, 4.0}));
  CHECK(grad_global_norm(ps, gm) == doctest::Approx(5.0));
  clip_grads(ps, gm, 1.0);
  CHECK(grad_global_norm(ps, gm) == doctest::Approx(1.0).epsilon(1e-9));
  // already within bound: untouched
  clip_grads(ps, gm, 10.0);
  CHECK(grad_global_norm(ps, gm) == doctest::Approx(1.0).epsilon(1e-9));
}
