#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tvts/gradcheck.hpp"
#include "tvts/losses.hpp"
#include "tvts/ops.hpp"
#include "tvts/rng.hpp"

using namespace tvts;

TEST_CASE("backward: loss = sum(x) gives all-ones") {
  Rng rng(1);
  Tensor x = Tensor::randn({3, 4}, 1.0, rng);
  Tape tape;
  tape.track(x);
  Tensor loss = ops::sum_all(x, &tape);
  auto grads = tape.backward(loss);
  const Tensor& g = grads.at(x.node);
  for (int64_t i = 0; i < g.numel(); ++i) CHECK(g.at(i) == 1.0);
}

TEST_CASE("backward: loss = sum(x*x)/2 gives x") {
  Rng rng(2);
  Tensor x = Tensor::randn({5}, 1.0, rng);
  Tape tape;
  tape.track(x);
  Tensor loss = ops::scale(ops::sum_all(ops::mul(x, x, &tape), &tape), 0.5, &tape);
  auto grads = tape.backward(loss);
  const Tensor& g = grads.at(x.node);
  for (int64_t i = 0; i < g.numel(); ++i) CHECK(g.at(i) == doctest::Approx(x.at(i)).epsilon(1e-12));
}

TEST_CASE("backward: non-scalar loss is a contract error; untracked absent from map") {
  Rng rng(3);
  Tensor x = Tensor::randn({2, 2}, 1.0, rng);
  Tensor c = Tensor::randn({2, 2}, 1.0, rng);  // untracked constant
  Tape tape;
  tape.track(x);
  Tensor y = ops::mul(x, c, &tape);
  CHECK_THROWS_AS((void)tape.backward(y), ContractError);
  Tensor loss = ops::sum_all(y, &tape);
  auto grads = tape.backward(loss);
  CHECK(grads.count(x.node) == 1);
  CHECK(grads.size() == 1);  // only the tracked leaf appears
}

TEST_CASE("finite_diff_grad oracle: sum -> ones; x^2 at 3 -> 6") {
  Rng rng(4);
  Tensor x = Tensor::randn({4}, 1.0, rng);
  Tensor g = ops::finite_diff_grad([](const Tensor& t) { return ops::sum_all(t).scalar(); }, x, 1e-5);
  for (int64_t i = 0; i < 4; ++i) CHECK(g.at(i) == doctest::Approx(1.0).epsilon(1e-9));

  Tensor three = Tensor::from({1}, {3.0});
  Tensor g2 = ops::finite_diff_grad([](const Tensor& t) { return t.at(0) * t.at(0); }, three, 1e-5);
  CHECK(std::fabs(g2.at(0) - 6.0) < 1e-6);
}

TEST_CASE("every differentiable op passes the finite-difference check (10 seeds)") {
  const auto results = gradcheck::run_all(20260810, 10, /*include_broken_fixture=*/false);
  for (const auto& r : results) {
    INFO(r.name, " max rel err ", r.max_rel_err);
    CHECK(r.pass);
  }
  // the suite includes the composed L_total and the masked-cube zero-grad probe
  bool has_composed = false, has_masked = false;
  for (const auto& r : results) {
    has_composed |= r.name == "composed_L_total";
    has_masked |= r.name == "masked_cube_zero_grad";
  }
  CHECK(has_composed);
  CHECK(has_masked);
}

TEST_CASE("a deliberately broken gradient rule is flagged") {
  const auto results = gradcheck::run_all(1, 1, /*include_broken_fixture=*/true);
  bool found = false;
  for (const auto& r : results) {
    if (r.name == "fixture/broken_gelu") {
      found = true;
      CHECK_FALSE(r.pass);
    }
  }
  CHECK(found);
}

TEST_CASE("info_nce finite-diff agreement on a 2x4 batch (the oracle cross-check)") {
  Rng rng(6);
  const double worst = gradcheck::check(
      [](std::vector<Tensor>& in, Tape* t) {
        return obj::info_nce(ops::l2_normalize_rows(in[0], t), ops::l2_normalize_rows(in[1], t), 1.0, t);
      },
      {Tensor::randn({2, 4}, 1.0, rng), Tensor::randn({2, 4}, 1.0, rng)});
  CHECK(worst < 1e-4);
}

TEST_CASE("gradient additivity of the combined objective") {
  Rng rng(7);
  const std::vector<std::vector<int>> perms{{1, 0, 2}};
  for (double lambda : {0.0, 2.0}) {
    Tensor q = Tensor::randn({2, 4}, 1.0, rng);
    Tensor k = Tensor::randn({2, 4}, 1.0, rng);
    Tensor p = Tensor::randn({1, 3, 3}, 1.0, rng);

    auto grads_of = [&](int which) {  // 0: align only, 1: sort only, 2: total
      Tape tape;
      Tensor qq = q, kk = k, pp = p;
      tape.track(qq);
      tape.track(kk);
      tape.track(pp);
      Tensor la = obj::align_loss(ops::l2_normalize_rows(qq, &tape), ops::l2_normalize_rows(kk, &tape), 0.5, &tape);
      Tensor ls = obj::sort_loss(pp, perms, &tape);
      Tensor target = which == 0 ? la : which == 1 ? ls : obj::total_loss(la, ls, lambda, &tape);
      auto g = tape.backward(target);
      struct Out { Tensor gq, gk, gp; };
      auto grab = [&](const Tensor& t) {
        auto it = g.find(t.node);
        return it == g.end() ? Tensor::zeros(t.shape(), t.dtype()) : it->second;
      };
      return Out{grab(qq), grab(kk), grab(pp)};
    };

    const auto ga = grads_of(0), gs = grads_of(1), gt = grads_of(2);
    for (int64_t i = 0; i < q.numel(); ++i) {
      CHECK(std::fabs(gt.gq.at(i) - (ga.gq.at(i) + lambda * gs.gq.at(i))) < 1e-10);
      CHECK(std::fabs(gt.gk.at(i) - (ga.gk.at(i) + lambda * gs.gk.at(i))) < 1e-10);
    }
    for (int64_t i = 0; i < p.numel(); ++i) {
      CHECK(std::fabs(gt.gp.at(i) - (ga.gp.at(i) + lambda * gs.gp.at(i))) < 1e-10);
    }
  }
}
