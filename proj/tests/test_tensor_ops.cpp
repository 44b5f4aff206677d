#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tvts/ops.hpp"
#include "tvts/rng.hpp"

using namespace tvts;

TEST_CASE("matmul: identity, zero and a hand-expanded 2x2 product") {
  const Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  CHECK(ops::matmul(eye, a).to_vector() == std::vector<double>{1, 2, 3, 4});

  const Tensor zero = Tensor::zeros({2, 2});
  CHECK(ops::matmul(a, zero).to_vector() == std::vector<double>{0, 0, 0, 0});

  const Tensor b = Tensor::from({2, 2}, {5, 6, 7, 8});
  // [[1,2],[3,4]] x [[5,6],[7,8]] = [[19,22],[43,50]]
  CHECK(ops::matmul(a, b).to_vector() == std::vector<double>{19, 22, 43, 50});

  CHECK_THROWS_AS(ops::matmul(a, Tensor::zeros({3, 2})), ShapeError);
  try {
    ops::matmul(a, Tensor::zeros({3, 2}));
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2, 2]") != std::string::npos);  // names both shapes
    CHECK(msg.find("[3, 2]") != std::string::npos);
  }
}

TEST_CASE("softmax: symmetry, overflow stability, closed form") {
  const Tensor flat = ops::softmax(Tensor::from({4}, {0, 0, 0, 0}), -1);
  for (int i = 0; i < 4; ++i) CHECK(flat.at(i) == doctest::Approx(0.25).epsilon(1e-12));

  const Tensor big = ops::softmax(Tensor::from({2}, {1000, 0}), -1);
  CHECK(ops::all_finite(big));
  CHECK(big.at(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(big.at(1) < 1e-300);

  const Tensor lg = ops::softmax(Tensor::from({2}, {std::log(1.0), std::log(3.0)}), -1);
  CHECK(lg.at(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(lg.at(1) == doctest::Approx(0.75).epsilon(1e-12));

  CHECK_THROWS_AS(ops::softmax(Tensor::from({2}, {std::nan(""), 0.0}), -1), NumericError);
}

TEST_CASE("softmax rows form a probability simplex") {
  Rng rng(5);
  const Tensor x = Tensor::randn({7, 11}, 3.0, rng);
  const Tensor s = ops::softmax(x, -1);
  for (int64_t r = 0; r < 7; ++r) {
    double sum = 0.0;
    for (int64_t c = 0; c < 11; ++c) {
      CHECK(s.at(r * 11 + c) >= 0.0);
      sum += s.at(r * 11 + c);
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
  }
  // axis variant: axis 0 of a 2D tensor
  const Tensor s0 = ops::softmax(x, 0);
  for (int64_t c = 0; c < 11; ++c) {
    double sum = 0.0;
    for (int64_t r = 0; r < 7; ++r) sum += s0.at(r * 11 + c);
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("layer_norm: constant collapse, no-op case, hand arithmetic") {
  const Tensor gain = Tensor::from({3}, {1, 1, 1});
  const Tensor bias = Tensor::zeros({3});

  const Tensor c = ops::layer_norm(Tensor::from({3}, {5, 5, 5}), gain, bias, 1e-5);
  for (int i = 0; i < 3; ++i) CHECK(c.at(i) == doctest::Approx(0.0).epsilon(1e-12));

  const Tensor g2 = Tensor::from({2}, {1, 1});
  const Tensor b2 = Tensor::zeros({2});
  const Tensor pm = ops::layer_norm(Tensor::from({2}, {-1, 1}), g2, b2, 1e-12);
  CHECK(pm.at(0) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(pm.at(1) == doctest::Approx(1.0).epsilon(1e-6));

  const Tensor h = ops::layer_norm(Tensor::from({3}, {0, 2, 4}), gain, bias, 1e-9);
  CHECK(h.at(0) == doctest::Approx(-1.2247).epsilon(1e-3));
  CHECK(h.at(1) == doctest::Approx(0.0).epsilon(1e-3));
  CHECK(h.at(2) == doctest::Approx(1.2247).epsilon(1e-3));

  // mean 0 / variance 1 before affine on random rows
  Rng rng(9);
  const Tensor x = Tensor::randn({5, 16}, 2.0, rng);
  const Tensor g16 = Tensor::full({16}, 1.0), z16 = Tensor::zeros({16});
  const Tensor y = ops::layer_norm(x, g16, z16, 1e-10);
  for (int64_t r = 0; r < 5; ++r) {
    double mean = 0.0, var = 0.0;
    for (int64_t j = 0; j < 16; ++j) mean += y.at(r * 16 + j);
    mean /= 16;
    for (int64_t j = 0; j < 16; ++j) var += (y.at(r * 16 + j) - mean) * (y.at(r * 16 + j) - mean);
    var /= 16;
    CHECK(std::fabs(mean) < 1e-9);
    CHECK(std::fabs(var - 1.0) < 1e-6);
  }
}

TEST_CASE("attention: one key is identity on values; masks force selection; ties average") {
  // single query equal to single key, 1 head
  const Tensor q = Tensor::from({1, 1, 4}, {0.3, -0.2, 0.9, 0.1});
  const Tensor v = Tensor::from({1, 1, 4}, {1, 2, 3, 4});
  const Tensor out = ops::multi_head_attention(q, q, v, 1, nullptr);
  CHECK(out.to_vector() == std::vector<double>{1, 2, 3, 4});

  // all keys masked except position 2 -> output = value row 2
  Rng rng(3);
  const Tensor q2 = Tensor::randn({1, 1, 4}, 1.0, rng);
  const Tensor k2 = Tensor::randn({1, 5, 4}, 1.0, rng);
  const Tensor v2 = Tensor::randn({1, 5, 4}, 1.0, rng);
  Tensor mask = Tensor::zeros({1, 5});
  mask.set(2, 1.0);
  const Tensor sel = ops::multi_head_attention(q2, k2, v2, 2, &mask);
  for (int64_t d = 0; d < 4; ++d) CHECK(sel.at(d) == doctest::Approx(v2.at(2 * 4 + d)).epsilon(1e-12));

  // two identical keys -> mean of the two value rows
  const Tensor k3 = Tensor::from({1, 2, 2}, {0.5, -0.5, 0.5, -0.5});
  const Tensor v3 = Tensor::from({1, 2, 2}, {1, 3, 5, 7});
  const Tensor q3 = Tensor::from({1, 1, 2}, {2.0, 1.0});
  const Tensor avg = ops::multi_head_attention(q3, k3, v3, 1, nullptr);
  CHECK(avg.at(0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(avg.at(1) == doctest::Approx(5.0).epsilon(1e-12));

  CHECK_THROWS_AS(ops::multi_head_attention(q3, k3, v3, 3, nullptr), ConfigError);
}

TEST_CASE("attention with mask assigns literally zero weight to masked keys") {
  Rng rng(17);
  const Tensor q = Tensor::randn({2, 3, 8}, 1.0, rng);
  const Tensor k = Tensor::randn({2, 4, 8}, 1.0, rng);
  const Tensor v = Tensor::randn({2, 4, 8}, 1.0, rng);
  Tensor mask = Tensor::full({2, 4}, 1.0);
  mask.set(1, 0.0);
  mask.set(7, 0.0);
  // verify by checking the output is unchanged when masked value rows change
  Tensor v_alt = v.clone();
  for (int64_t d = 0; d < 8; ++d) {
    v_alt.set((0 * 4 + 1) * 8 + d, 123.0);
    v_alt.set((1 * 4 + 3) * 8 + d, -321.0);
  }
  const Tensor o1 = ops::multi_head_attention(q, k, v, 2, &mask);
  const Tensor o2 = ops::multi_head_attention(q, k, v_alt, 2, &mask);
  for (int64_t i = 0; i < o1.numel(); ++i) CHECK(o1.at(i) == o2.at(i));
}

TEST_CASE("attention output is bit-equivariant under key/value permutation") {
  Rng rng(23);
  const int64_t tk = 9, d = 8;
  const Tensor q = Tensor::randn({1, 2, d}, 1.0, rng);
  const Tensor k = Tensor::randn({1, tk, d}, 1.0, rng);
  const Tensor v = Tensor::randn({1, tk, d}, 1.0, rng);
  const Tensor base = ops::multi_head_attention(q, k, v, 2, nullptr);
  for (int rep = 0; rep < 5; ++rep) {
    auto perm = rng.permutation(static_cast<int>(tk));
    Tensor kp = Tensor::zeros({1, tk, d}), vp = Tensor::zeros({1, tk, d});
    for (int64_t j = 0; j < tk; ++j) {
      for (int64_t c = 0; c < d; ++c) {
        kp.set(j * d + c, k.at(perm[static_cast<size_t>(j)] * d + c));
        vp.set(j * d + c, v.at(perm[static_cast<size_t>(j)] * d + c));
      }
    }
    const Tensor out = ops::multi_head_attention(q, kp, vp, 2, nullptr);
    for (int64_t i = 0; i < base.numel(); ++i) CHECK(out.at(i) == base.at(i));
  }
}

TEST_CASE("l2_normalize_rows: unit norms, scale invariance, closed form") {
  Rng rng(31);
  const Tensor x = Tensor::randn({6, 5}, 2.0, rng);
  const Tensor y = ops::l2_normalize_rows(x);
  for (int64_t r = 0; r < 6; ++r) {
    double n2 = 0.0;
    for (int64_t c = 0; c < 5; ++c) n2 += y.at(r * 5 + c) * y.at(r * 5 + c);
    CHECK(std::fabs(std::sqrt(n2) - 1.0) < 1e-9);
  }
  const Tensor x2 = ops::scale(x, 2.0);
  const Tensor y2 = ops::l2_normalize_rows(x2);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(y2.at(i) == doctest::Approx(y.at(i)).epsilon(1e-12));

  const Tensor v34 = ops::l2_normalize_rows(Tensor::from({2}, {3, 4}));
  CHECK(v34.at(0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(v34.at(1) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("cube_extract token-count algebra and traversal order") {
  // M=2, H=W=16, P=16 -> exactly one cube
  Rng rng(41);
  Tensor frames = Tensor::randn({1, 2, 16, 16, 3}, 1.0, rng);
  Tensor cubes = ops::cube_extract(frames, 16, 2);
  CHECK(cubes.shape() == std::vector<int64_t>{1, 1, 2 * 16 * 16 * 3});
  CHECK(cubes.at(0) == frames.at(0));

  // M=4, H=W=16, P=8 -> 2 slices x 4 spatial = 8 cubes
  Tensor f2 = Tensor::randn({1, 4, 16, 16, 3}, 1.0, rng);
  Tensor c2 = ops::cube_extract(f2, 8, 2);
  CHECK(c2.shape() == std::vector<int64_t>{1, 8, 2 * 8 * 8 * 3});
  // cube (slice 1, row 0, col 1) first element == frame 2, y 0, x 8, ch 0
  const int64_t s = 1 * 4 + 0 * 2 + 1;
  CHECK(c2.at(s * (2 * 8 * 8 * 3)) == f2.at((((0 * 4 + 2) * 16 + 0) * 16 + 8) * 3));

  CHECK_THROWS_AS(ops::cube_extract(Tensor::zeros({1, 3, 16, 16, 3}), 8, 2), ConfigError);
  CHECK_THROWS_AS(ops::cube_extract(Tensor::zeros({1, 4, 15, 16, 3}), 8, 2), ConfigError);
}

TEST_CASE("gather/select/concat/slice plumbing") {
  const Tensor table = Tensor::from({3, 2}, {0, 1, 10, 11, 20, 21});
  const Tensor g = ops::gather_rows(table, {2, 0, 2});
  CHECK(g.to_vector() == std::vector<double>{20, 21, 0, 1, 20, 21});
  CHECK_THROWS_AS(ops::gather_rows(table, {3}), RangeError);

  const Tensor x = Tensor::from({1, 3, 2}, {1, 2, 3, 4, 5, 6});
  const Tensor sel = ops::index_select_tokens(x, {{2, 0}});
  CHECK(sel.to_vector() == std::vector<double>{5, 6, 1, 2});

  const Tensor cat = ops::concat_axis1(x, sel);
  CHECK(cat.shape() == std::vector<int64_t>{1, 5, 2});
  CHECK(ops::slice_axis1(cat, 3, 2).to_vector() == sel.to_vector());

  const Tensor cl = ops::concat_last(Tensor::from({2, 1}, {1, 2}), Tensor::from({2, 2}, {3, 4, 5, 6}));
  CHECK(cl.to_vector() == std::vector<double>{1, 3, 4, 2, 5, 6});

  const Tensor m = ops::mean_axis1(Tensor::from({1, 2, 2}, {1, 2, 3, 4}));
  CHECK(m.at(0) == doctest::Approx(2.0));
  CHECK(m.at(1) == doctest::Approx(3.0));
}

TEST_CASE("cross_entropy_rows closed forms") {
  // uniform logits over 4 classes -> ln 4
  const Tensor u = Tensor::zeros({2, 4});
  const Tensor l = ops::cross_entropy_rows(u, {1, 3});
  CHECK(l.scalar() == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // saturated correct logit -> ~0
  const Tensor hot = Tensor::from({1, 3}, {20, 0, 0});
  CHECK(ops::cross_entropy_rows(hot, {0}).scalar() < 1e-8);

  CHECK_THROWS_AS(ops::cross_entropy_rows(u, {1}), LabelError);
  CHECK_THROWS_AS(ops::cross_entropy_rows(u, {1, 4}), LabelError);
}

TEST_CASE("ops are deterministic for identical inputs") {
  Rng rng(77);
  const Tensor a = Tensor::randn({13, 9}, 1.0, rng);
  const Tensor b = Tensor::randn({9, 7}, 1.0, rng);
  const auto r1 = ops::matmul(a, b).to_vector();
  const auto r2 = ops::matmul(a, b).to_vector();
  CHECK(r1 == r2);
  const auto s1 = ops::softmax(a, -1).to_vector();
  const auto s2 = ops::softmax(a, -1).to_vector();
  CHECK(s1 == s2);
}
