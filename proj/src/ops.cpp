#include "tvts/ops.hpp"

#include <algorithm>
#include <cmath>

#include "tvts/exact_sum.hpp"
#include "tvts/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tvts::ops {
namespace {

template <class T> const T* ro(const Tensor& t);
template <> const float* ro<float>(const Tensor& t) { return t.f32(); }
template <> const double* ro<double>(const Tensor& t) { return t.f64(); }
template <class T> T* rw(Tensor& t);
template <> float* rw<float>(Tensor& t) { return t.f32_mut(); }
template <> double* rw<double>(Tensor& t) { return t.f64_mut(); }

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dtype() != b.dtype()) throw ShapeError(std::string(op) + ": dtype mismatch");
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

int maybe_record(Tape* tape, std::vector<int> inputs, Tape::BackwardFn fn) {
  bool any = false;
  for (int n : inputs) any = any || n >= 0;
  if (!tape || !any) return -1;
  return tape->record(std::move(inputs), std::move(fn));
}

int64_t rows_of(const Tensor& x) { return x.numel() / x.dim(-1); }

constexpr double kMaskFill = -1e9;

}  // namespace

// ----------------------------------------------------------------- arithmetic

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
  require_same(a, b, "add");
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  if (a.dtype() == DType::f32) kern::add<float>(a.numel(), a.f32(), b.f32(), out.f32_mut());
  else kern::add<double>(a.numel(), a.f64(), b.f64(), out.f64_mut());
  out.node = maybe_record(tape, {a.node, b.node}, [](const Tensor& g, Tape::Sink& s) {
    s.add(0, g);
    s.add(1, g);
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b, Tape* tape) {
  require_same(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  if (a.dtype() == DType::f32) kern::sub<float>(a.numel(), a.f32(), b.f32(), out.f32_mut());
  else kern::sub<double>(a.numel(), a.f64(), b.f64(), out.f64_mut());
  out.node = maybe_record(tape, {a.node, b.node}, [](const Tensor& g, Tape::Sink& s) {
    s.add(0, g);
    if (s.needs(1)) s.add(1, scale(g, -1.0));
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b, Tape* tape) {
  require_same(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  if (a.dtype() == DType::f32) kern::mul<float>(a.numel(), a.f32(), b.f32(), out.f32_mut());
  else kern::mul<double>(a.numel(), a.f64(), b.f64(), out.f64_mut());
  out.node = maybe_record(tape, {a.node, b.node}, [a, b](const Tensor& g, Tape::Sink& s) {
    if (s.needs(0)) s.add(0, mul(g, b));
    if (s.needs(1)) s.add(1, mul(g, a));
  });
  return out;
}

Tensor scale(const Tensor& a, double alpha, Tape* tape) {
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  if (a.dtype() == DType::f32) kern::scale<float>(a.numel(), static_cast<float>(alpha), a.f32(), out.f32_mut());
  else kern::scale<double>(a.numel(), alpha, a.f64(), out.f64_mut());
  out.node = maybe_record(tape, {a.node}, [alpha](const Tensor& g, Tape::Sink& s) {
    s.add(0, scale(g, alpha));
  });
  return out;
}

Tensor add_scaled(const Tensor& a, const Tensor& b, double alpha, Tape* tape) {
  require_same(a, b, "add_scaled");
  Tensor out = a.clone();
  if (a.dtype() == DType::f32) kern::axpy<float>(a.numel(), static_cast<float>(alpha), b.f32(), out.f32_mut());
  else kern::axpy<double>(a.numel(), alpha, b.f64(), out.f64_mut());
  out.node = maybe_record(tape, {a.node, b.node}, [alpha](const Tensor& g, Tape::Sink& s) {
    s.add(0, g);
    if (s.needs(1)) s.add(1, scale(g, alpha));
  });
  return out;
}

namespace {
constexpr double kGeluC1 = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluC2 = 0.044715;

template <class T>
void gelu_fwd(const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) {
    const double xd = static_cast<double>(x[i]);
    const double t = std::tanh(kGeluC1 * (xd + kGeluC2 * xd * xd * xd));
    y[i] = static_cast<T>(0.5 * xd * (1.0 + t));
  }
}

template <class T>
void gelu_bwd(const T* x, const T* g, T* gx, int64_t n) {
  for (int64_t i = 0; i < n; ++i) {
    const double xd = static_cast<double>(x[i]);
    const double u = kGeluC1 * (xd + kGeluC2 * xd * xd * xd);
    const double t = std::tanh(u);
    const double du = kGeluC1 * (1.0 + 3.0 * kGeluC2 * xd * xd);
    const double d = 0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * du;
    gx[i] = static_cast<T>(static_cast<double>(g[i]) * d);
  }
}
}  // namespace

Tensor gelu(const Tensor& x, Tape* tape) {
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  if (x.dtype() == DType::f32) gelu_fwd<float>(x.f32(), out.f32_mut(), x.numel());
  else gelu_fwd<double>(x.f64(), out.f64_mut(), x.numel());
  out.node = maybe_record(tape, {x.node}, [x](const Tensor& g, Tape::Sink& s) {
    Tensor gx = Tensor::zeros(x.shape(), x.dtype());
    if (x.dtype() == DType::f32) gelu_bwd<float>(x.f32(), g.f32(), gx.f32_mut(), x.numel());
    else gelu_bwd<double>(x.f64(), g.f64(), gx.f64_mut(), x.numel());
    s.add(0, gx);
  });
  return out;
}

// -------------------------------------------------------------------- linear

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0) || a.dtype() != b.dtype()) {
    throw ShapeError("matmul: incompatible operands " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n}, a.dtype());
  if (a.dtype() == DType::f32) kern::gemm_nn<float>(m, k, n, a.f32(), b.f32(), out.f32_mut());
  else kern::gemm_nn<double>(m, k, n, a.f64(), b.f64(), out.f64_mut());
  out.node = maybe_record(tape, {a.node, b.node}, [a, b, m, k, n](const Tensor& g, Tape::Sink& s) {
    if (s.needs(0)) {
      Tensor ga = Tensor::zeros({m, k}, a.dtype());
      if (a.dtype() == DType::f32) kern::gemm_nt<float>(m, n, k, g.f32(), b.f32(), ga.f32_mut());
      else kern::gemm_nt<double>(m, n, k, g.f64(), b.f64(), ga.f64_mut());
      s.add(0, ga);
    }
    if (s.needs(1)) {
      Tensor gb = Tensor::zeros({k, n}, a.dtype());
      if (a.dtype() == DType::f32) kern::gemm_tn<float>(k, m, n, a.f32(), g.f32(), gb.f32_mut());
      else kern::gemm_tn<double>(k, m, n, a.f64(), g.f64(), gb.f64_mut());
      s.add(1, gb);
    }
  });
  return out;
}

namespace {
template <class T>
void transpose_copy(const T* x, T* y, int64_t m, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) y[j * m + i] = x[i * n + j];
  }
}
}  // namespace

Tensor transpose2d(const Tensor& x, Tape* tape) {
  if (x.ndim() != 2) throw ShapeError("transpose2d: need rank 2, got " + shape_str(x.shape()));
  const int64_t m = x.dim(0), n = x.dim(1);
  Tensor out = Tensor::zeros({n, m}, x.dtype());
  if (x.dtype() == DType::f32) transpose_copy<float>(x.f32(), out.f32_mut(), m, n);
  else transpose_copy<double>(x.f64(), out.f64_mut(), m, n);
  out.node = maybe_record(tape, {x.node}, [](const Tensor& g, Tape::Sink& s) {
    s.add(0, transpose2d(g));
  });
  return out;
}

Tensor reshape(const Tensor& x, std::vector<int64_t> shape, Tape* tape) {
  Tensor out = x.reshaped(std::move(shape));
  const auto orig = x.shape();
  out.node = maybe_record(tape, {x.node}, [orig](const Tensor& g, Tape::Sink& s) {
    s.add(0, g.reshaped(orig));
  });
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias, Tape* tape) {
  if (w.ndim() != 2 || x.dim(-1) != w.dim(0)) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " incompatible with weight " + shape_str(w.shape()));
  }
  if (bias && (bias->ndim() != 1 || bias->dim(0) != w.dim(1))) {
    throw ShapeError("linear: bias shape " + shape_str(bias->shape()) + " does not match weight " + shape_str(w.shape()));
  }
  const int64_t r = rows_of(x), din = w.dim(0), dout = w.dim(1);
  std::vector<int64_t> out_shape = x.shape();
  out_shape.back() = dout;
  Tensor out = Tensor::zeros(out_shape, x.dtype());
  if (x.dtype() == DType::f32) {
    kern::gemm_nn<float>(r, din, dout, x.f32(), w.f32(), out.f32_mut());
    if (bias) {
      float* o = out.f32_mut();
      const float* b = bias->f32();
      for (int64_t i = 0; i < r; ++i) kern::add<float>(dout, o + i * dout, b, o + i * dout);
    }
  } else {
    kern::gemm_nn<double>(r, din, dout, x.f64(), w.f64(), out.f64_mut());
    if (bias) {
      double* o = out.f64_mut();
      const double* b = bias->f64();
      for (int64_t i = 0; i < r; ++i) kern::add<double>(dout, o + i * dout, b, o + i * dout);
    }
  }
  const int bias_node = bias ? bias->node : -1;
  Tensor wc = w;
  Tensor xc = x;
  out.node = maybe_record(tape, {x.node, w.node, bias_node},
                          [xc, wc, r, din, dout](const Tensor& g, Tape::Sink& s) {
    if (s.needs(0)) {
      Tensor gx = Tensor::zeros(xc.shape(), xc.dtype());
      if (xc.dtype() == DType::f32) kern::gemm_nt<float>(r, dout, din, g.f32(), wc.f32(), gx.f32_mut());
      else kern::gemm_nt<double>(r, dout, din, g.f64(), wc.f64(), gx.f64_mut());
      s.add(0, gx);
    }
    if (s.needs(1)) {
      Tensor gw = Tensor::zeros({din, dout}, xc.dtype());
      if (xc.dtype() == DType::f32) kern::gemm_tn<float>(din, r, dout, xc.f32(), g.f32(), gw.f32_mut());
      else kern::gemm_tn<double>(din, r, dout, xc.f64(), g.f64(), gw.f64_mut());
      s.add(1, gw);
    }
    if (s.needs(2)) {
      Tensor gb = Tensor::zeros({dout}, xc.dtype());
      if (xc.dtype() == DType::f32) {
        float* p = gb.f32_mut();
        for (int64_t i = 0; i < r; ++i) kern::add<float>(dout, p, g.f32() + i * dout, p);
      } else {
        double* p = gb.f64_mut();
        for (int64_t i = 0; i < r; ++i) kern::add<double>(dout, p, g.f64() + i * dout, p);
      }
      s.add(2, gb);
    }
  });
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& b, Tape* tape) {
  if (b.ndim() != 1 || b.dim(0) != x.dim(-1)) {
    throw ShapeError("add_bias: bias " + shape_str(b.shape()) + " vs input " + shape_str(x.shape()));
  }
  const int64_t r = rows_of(x), d = x.dim(-1);
  Tensor out = x.clone();
  if (x.dtype() == DType::f32) {
    float* o = out.f32_mut();
    for (int64_t i = 0; i < r; ++i) kern::add<float>(d, o + i * d, b.f32(), o + i * d);
  } else {
    double* o = out.f64_mut();
    for (int64_t i = 0; i < r; ++i) kern::add<double>(d, o + i * d, b.f64(), o + i * d);
  }
  out.node = maybe_record(tape, {x.node, b.node}, [r, d](const Tensor& g, Tape::Sink& s) {
    s.add(0, g);
    if (s.needs(1)) {
      Tensor gb = Tensor::zeros({d}, g.dtype());
      if (g.dtype() == DType::f32) {
        float* p = gb.f32_mut();
        for (int64_t i = 0; i < r; ++i) kern::add<float>(d, p, g.f32() + i * d, p);
      } else {
        double* p = gb.f64_mut();
        for (int64_t i = 0; i < r; ++i) kern::add<double>(d, p, g.f64() + i * d, p);
      }
      s.add(1, gb);
    }
  });
  return out;
}

// ------------------------------------------------------------------- softmax

namespace {
template <class T>
void softmax_slices(const T* x, T* y, int64_t outer, int64_t len, int64_t inner) {
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t i = 0; i < inner; ++i) {
      const T* xs = x + o * len * inner + i;
      T* ys = y + o * len * inner + i;
      double m = -std::numeric_limits<double>::infinity();
      for (int64_t j = 0; j < len; ++j) m = std::max(m, static_cast<double>(xs[j * inner]));
      double sum = 0.0;
      for (int64_t j = 0; j < len; ++j) {
        const double e = std::exp(static_cast<double>(xs[j * inner]) - m);
        ys[j * inner] = static_cast<T>(e);
        sum += e;
      }
      const double inv = 1.0 / sum;
      for (int64_t j = 0; j < len; ++j) ys[j * inner] = static_cast<T>(static_cast<double>(ys[j * inner]) * inv);
    }
  }
}

template <class T>
void softmax_back(const T* s, const T* g, T* gx, int64_t outer, int64_t len, int64_t inner) {
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t i = 0; i < inner; ++i) {
      const T* ss = s + o * len * inner + i;
      const T* gs = g + o * len * inner + i;
      T* os = gx + o * len * inner + i;
      double acc = 0.0;
      for (int64_t j = 0; j < len; ++j) acc += static_cast<double>(gs[j * inner]) * static_cast<double>(ss[j * inner]);
      for (int64_t j = 0; j < len; ++j) {
        os[j * inner] = static_cast<T>(static_cast<double>(ss[j * inner]) * (static_cast<double>(gs[j * inner]) - acc));
      }
    }
  }
}
}  // namespace

Tensor softmax(const Tensor& x, int axis, Tape* tape) {
  const int nd = x.ndim();
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd) throw ShapeError("softmax: axis out of range for " + shape_str(x.shape()));
  if (!all_finite(x)) throw NumericError("softmax: non-finite input");
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < nd; ++i) inner *= x.dim(i);
  const int64_t len = x.dim(axis);
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  if (x.dtype() == DType::f32) softmax_slices<float>(x.f32(), out.f32_mut(), outer, len, inner);
  else softmax_slices<double>(x.f64(), out.f64_mut(), outer, len, inner);
  Tensor saved = out;
  out.node = maybe_record(tape, {x.node}, [saved, outer, len, inner](const Tensor& g, Tape::Sink& s) {
    Tensor gx = Tensor::zeros(saved.shape(), saved.dtype());
    if (saved.dtype() == DType::f32) softmax_back<float>(saved.f32(), g.f32(), gx.f32_mut(), outer, len, inner);
    else softmax_back<double>(saved.f64(), g.f64(), gx.f64_mut(), outer, len, inner);
    s.add(0, gx);
  });
  return out;
}

// ---------------------------------------------------------------- layer norm

namespace {
template <class T>
void layer_norm_fwd(const T* x, const T* gain, const T* bias, T* y, T* xhat, double* inv_std,
                    int64_t rows, int64_t d, double eps) {
  for (int64_t r = 0; r < rows; ++r) {
    const T* xr = x + r * d;
    double mean = 0.0;
    for (int64_t j = 0; j < d; ++j) mean += static_cast<double>(xr[j]);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      const double c = static_cast<double>(xr[j]) - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (int64_t j = 0; j < d; ++j) {
      const double xh = (static_cast<double>(xr[j]) - mean) * inv;
      xhat[r * d + j] = static_cast<T>(xh);
      y[r * d + j] = static_cast<T>(xh * static_cast<double>(gain[j]) + static_cast<double>(bias[j]));
    }
  }
}
}  // namespace

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps, Tape* tape) {
  const int64_t d = x.dim(-1);
  if (gain.ndim() != 1 || gain.dim(0) != d || bias.ndim() != 1 || bias.dim(0) != d) {
    throw ShapeError("layer_norm: gain/bias must be [" + std::to_string(d) + "]");
  }
  if (eps <= 0.0) throw ConfigError("layer_norm: eps must be > 0");
  const int64_t rows = rows_of(x);
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  Tensor xhat = Tensor::zeros(x.shape(), x.dtype());
  std::vector<double> inv_std(static_cast<size_t>(rows));
  if (x.dtype() == DType::f32) {
    std::vector<double> tmp(static_cast<size_t>(rows));
    layer_norm_fwd<float>(x.f32(), gain.f32(), bias.f32(), out.f32_mut(), xhat.f32_mut(), tmp.data(), rows, d, eps);
    inv_std = std::move(tmp);
  } else {
    layer_norm_fwd<double>(x.f64(), gain.f64(), bias.f64(), out.f64_mut(), xhat.f64_mut(), inv_std.data(), rows, d, eps);
  }
  Tensor gc = gain;
  out.node = maybe_record(tape, {x.node, gain.node, bias.node},
                          [xhat, gc, inv_std, rows, d](const Tensor& g, Tape::Sink& s) {
    const DType dt = xhat.dtype();
    auto run = [&](auto tag) {
      using T = decltype(tag);
      const T* xh = ro<T>(xhat);
      const T* gp = ro<T>(g);
      const T* gainp = ro<T>(gc);
      if (s.needs(0)) {
        Tensor gx = Tensor::zeros(xhat.shape(), dt);
        T* gxp = rw<T>(gx);
        for (int64_t r = 0; r < rows; ++r) {
          // dx = inv * (gh - mean(gh) - xhat * mean(gh * xhat)), gh = g * gain
          double mean_gh = 0.0, mean_ghx = 0.0;
          for (int64_t j = 0; j < d; ++j) {
            const double gh = static_cast<double>(gp[r * d + j]) * static_cast<double>(gainp[j]);
            mean_gh += gh;
            mean_ghx += gh * static_cast<double>(xh[r * d + j]);
          }
          mean_gh /= static_cast<double>(d);
          mean_ghx /= static_cast<double>(d);
          const double inv = inv_std[static_cast<size_t>(r)];
          for (int64_t j = 0; j < d; ++j) {
            const double gh = static_cast<double>(gp[r * d + j]) * static_cast<double>(gainp[j]);
            gxp[r * d + j] = static_cast<T>(inv * (gh - mean_gh - static_cast<double>(xh[r * d + j]) * mean_ghx));
          }
        }
        s.add(0, gx);
      }
      if (s.needs(1)) {
        Tensor gg = Tensor::zeros({d}, dt);
        T* ggp = rw<T>(gg);
        for (int64_t r = 0; r < rows; ++r) {
          for (int64_t j = 0; j < d; ++j) ggp[j] += gp[r * d + j] * xh[r * d + j];
        }
        s.add(1, gg);
      }
      if (s.needs(2)) {
        Tensor gb = Tensor::zeros({d}, dt);
        T* gbp = rw<T>(gb);
        for (int64_t r = 0; r < rows; ++r) {
          for (int64_t j = 0; j < d; ++j) gbp[j] += gp[r * d + j];
        }
        s.add(2, gb);
      }
    };
    if (dt == DType::f32) run(float{});
    else run(double{});
  });
  return out;
}

// ----------------------------------------------------------------- attention

namespace {

// Per-thread scratch for the exact reductions inside attention.
std::vector<double>& attn_scratch() {
  thread_local std::vector<double> buf;
  return buf;
}

template <class T>
void attention_forward(const T* q, const T* k, const T* v, const T* mask, T* w, T* out,
                       int64_t b_count, int64_t tq, int64_t tk, int64_t d, int64_t heads) {
  const int64_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const int64_t bh = b_count * heads;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (bh > 1)
#endif
  for (int64_t idx = 0; idx < bh; ++idx) {
    const int64_t b = idx / heads, h = idx % heads;
    const int64_t hoff = h * dh;
    T* wbh = w + ((b * heads + h) * tq) * tk;
    std::vector<double>& scratch = attn_scratch();
    scratch.resize(static_cast<size_t>(tk));
    for (int64_t i = 0; i < tq; ++i) {
      const T* qi = q + (b * tq + i) * d + hoff;
      T* wi = wbh + i * tk;
      double m = -std::numeric_limits<double>::infinity();
      for (int64_t j = 0; j < tk; ++j) {
        double sc = static_cast<double>(kern::dot<T>(dh, qi, k + (b * tk + j) * d + hoff)) * inv_sqrt;
        if (mask && !(static_cast<double>(mask[b * tk + j]) > 0.5)) sc += kMaskFill;
        scratch[static_cast<size_t>(j)] = sc;
        m = std::max(m, sc);
      }
      for (int64_t j = 0; j < tk; ++j) {
        // exp in the working dtype so both backends agree bit-for-bit
        wi[j] = static_cast<T>(std::exp(static_cast<T>(scratch[static_cast<size_t>(j)] - m)));
      }
      for (int64_t j = 0; j < tk; ++j) scratch[static_cast<size_t>(j)] = static_cast<double>(wi[j]);
      const double denom = perm_invariant_sum(scratch.data(), static_cast<size_t>(tk));
      const T invd = static_cast<T>(1.0 / denom);
      for (int64_t j = 0; j < tk; ++j) wi[j] = static_cast<T>(wi[j] * invd);
      // out[i, hoff+c] = exact sum over j of w_ij * v_j
      T* oi = out + (b * tq + i) * d + hoff;
      for (int64_t c = 0; c < dh; ++c) {
        for (int64_t j = 0; j < tk; ++j) {
          scratch[static_cast<size_t>(j)] =
              static_cast<double>(static_cast<T>(wi[j] * v[(b * tk + j) * d + hoff + c]));
        }
        oi[c] = static_cast<T>(perm_invariant_sum(scratch.data(), static_cast<size_t>(tk)));
      }
    }
  }
}

template <class T>
void attention_backward(const T* q, const T* k, const T* v, const T* w, const T* g,
                        T* gq, T* gk, T* gv, int64_t b_count, int64_t tq, int64_t tk,
                        int64_t d, int64_t heads) {
  const int64_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const int64_t bh = b_count * heads;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (bh > 1)
#endif
  for (int64_t idx = 0; idx < bh; ++idx) {
    const int64_t b = idx / heads, h = idx % heads;
    const int64_t hoff = h * dh;
    const T* wbh = w + ((b * heads + h) * tq) * tk;
    std::vector<double>& ds = attn_scratch();
    ds.resize(static_cast<size_t>(tk));
    for (int64_t i = 0; i < tq; ++i) {
      const T* wi = wbh + i * tk;
      const T* gi = g + (b * tq + i) * d + hoff;
      // dv_j += w_ij * g_i  (head slice)
      for (int64_t j = 0; j < tk; ++j) {
        if (wi[j] != T(0)) {
          kern::axpy<T>(dh, wi[j], gi, gv + (b * tk + j) * d + hoff);
        }
      }
      // ds_ij = w_ij * (dot(g_i, v_j) - sum_l w_il dot(g_i, v_l))
      double corr = 0.0;
      for (int64_t j = 0; j < tk; ++j) {
        const double dwij = static_cast<double>(kern::dot<T>(dh, gi, v + (b * tk + j) * d + hoff));
        ds[static_cast<size_t>(j)] = dwij;
        corr += static_cast<double>(wi[j]) * dwij;
      }
      T* gqi = gq + (b * tq + i) * d + hoff;
      for (int64_t j = 0; j < tk; ++j) {
        const double dsij = static_cast<double>(wi[j]) * (ds[static_cast<size_t>(j)] - corr) * inv_sqrt;
        if (dsij != 0.0) {
          kern::axpy<T>(dh, static_cast<T>(dsij), k + (b * tk + j) * d + hoff, gqi);
          kern::axpy<T>(dh, static_cast<T>(dsij), q + (b * tq + i) * d + hoff, gk + (b * tk + j) * d + hoff);
        }
      }
    }
  }
}

}  // namespace

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                            const Tensor* key_mask, Tape* tape) {
  if (q.ndim() != 3 || k.ndim() != 3 || v.ndim() != 3) {
    throw ShapeError("attention: q/k/v must be rank 3 (batch, tokens, width)");
  }
  const int64_t b = q.dim(0), tq = q.dim(1), d = q.dim(2), tk = k.dim(1);
  if (k.dim(0) != b || v.dim(0) != b || k.dim(2) != d || v.dim(2) != d || v.dim(1) != tk) {
    throw ShapeError("attention: mismatched q " + shape_str(q.shape()) + ", k " + shape_str(k.shape()) +
                     ", v " + shape_str(v.shape()));
  }
  if (heads < 1 || d % heads != 0) {
    throw ConfigError("attention: width " + std::to_string(d) + " not divisible by heads " + std::to_string(heads));
  }
  if (key_mask && (key_mask->ndim() != 2 || key_mask->dim(0) != b || key_mask->dim(1) != tk)) {
    throw ShapeError("attention: key_mask must be [batch, keys]");
  }
  Tensor out = Tensor::zeros(q.shape(), q.dtype());
  Tensor w = Tensor::zeros({b, static_cast<int64_t>(heads), tq, tk}, q.dtype());
  if (q.dtype() == DType::f32) {
    attention_forward<float>(q.f32(), k.f32(), v.f32(), key_mask ? key_mask->f32() : nullptr,
                             w.f32_mut(), out.f32_mut(), b, tq, tk, d, heads);
  } else {
    attention_forward<double>(q.f64(), k.f64(), v.f64(), key_mask ? key_mask->f64() : nullptr,
                              w.f64_mut(), out.f64_mut(), b, tq, tk, d, heads);
  }
  Tensor qc = q, kc = k, vc = v;
  out.node = maybe_record(tape, {q.node, k.node, v.node},
                          [qc, kc, vc, w, b, tq, tk, d, heads](const Tensor& g, Tape::Sink& s) {
    Tensor gq = Tensor::zeros(qc.shape(), qc.dtype());
    Tensor gk = Tensor::zeros(kc.shape(), kc.dtype());
    Tensor gv = Tensor::zeros(vc.shape(), vc.dtype());
    if (qc.dtype() == DType::f32) {
      attention_backward<float>(qc.f32(), kc.f32(), vc.f32(), w.f32(), g.f32(),
                                gq.f32_mut(), gk.f32_mut(), gv.f32_mut(), b, tq, tk, d, heads);
    } else {
      attention_backward<double>(qc.f64(), kc.f64(), vc.f64(), w.f64(), g.f64(),
                                 gq.f64_mut(), gk.f64_mut(), gv.f64_mut(), b, tq, tk, d, heads);
    }
    s.add(0, gq);
    s.add(1, gk);
    s.add(2, gv);
  });
  return out;
}

// ------------------------------------------------------------ gather / select

Tensor gather_rows(const Tensor& table, const std::vector<int>& ids, Tape* tape) {
  if (table.ndim() != 2) throw ShapeError("gather_rows: table must be rank 2");
  const int64_t v = table.dim(0), d = table.dim(1);
  for (int id : ids) {
    if (id < 0 || id >= v) throw RangeError("gather_rows: id " + std::to_string(id) + " out of range [0, " + std::to_string(v) + ")");
  }
  const int64_t r = static_cast<int64_t>(ids.size());
  Tensor out = Tensor::zeros({r, d}, table.dtype());
  if (table.dtype() == DType::f32) {
    float* o = out.f32_mut();
    const float* t = table.f32();
    for (int64_t i = 0; i < r; ++i) std::copy_n(t + static_cast<int64_t>(ids[static_cast<size_t>(i)]) * d, d, o + i * d);
  } else {
    double* o = out.f64_mut();
    const double* t = table.f64();
    for (int64_t i = 0; i < r; ++i) std::copy_n(t + static_cast<int64_t>(ids[static_cast<size_t>(i)]) * d, d, o + i * d);
  }
  out.node = maybe_record(tape, {table.node}, [ids, v, d, r, dt = table.dtype()](const Tensor& g, Tape::Sink& s) {
    Tensor gt = Tensor::zeros({v, d}, dt);
    if (dt == DType::f32) {
      float* p = gt.f32_mut();
      for (int64_t i = 0; i < r; ++i) kern::add<float>(d, p + static_cast<int64_t>(ids[static_cast<size_t>(i)]) * d, g.f32() + i * d, p + static_cast<int64_t>(ids[static_cast<size_t>(i)]) * d);
    } else {
      double* p = gt.f64_mut();
      for (int64_t i = 0; i < r; ++i) kern::add<double>(d, p + static_cast<int64_t>(ids[static_cast<size_t>(i)]) * d, g.f64() + i * d, p + static_cast<int64_t>(ids[static_cast<size_t>(i)]) * d);
    }
    s.add(0, gt);
  });
  return out;
}

Tensor index_select_tokens(const Tensor& x, const std::vector<std::vector<int>>& idx, Tape* tape) {
  if (x.ndim() != 3) throw ShapeError("index_select_tokens: input must be rank 3");
  const int64_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
  if (static_cast<int64_t>(idx.size()) != b) throw ContractError("index_select_tokens: need one index list per batch item");
  const int64_t tsel = static_cast<int64_t>(idx[0].size());
  for (const auto& list : idx) {
    if (static_cast<int64_t>(list.size()) != tsel) throw ContractError("index_select_tokens: ragged index lists");
    for (int i : list) {
      if (i < 0 || i >= t) throw ContractError("index_select_tokens: index out of range");
    }
  }
  Tensor out = Tensor::zeros({b, tsel, d}, x.dtype());
  for (int64_t bi = 0; bi < b; ++bi) {
    for (int64_t ti = 0; ti < tsel; ++ti) {
      const int64_t src = (bi * t + idx[static_cast<size_t>(bi)][static_cast<size_t>(ti)]) * d;
      const int64_t dst = (bi * tsel + ti) * d;
      if (x.dtype() == DType::f32) std::copy_n(x.f32() + src, d, out.f32_mut() + dst);
      else std::copy_n(x.f64() + src, d, out.f64_mut() + dst);
    }
  }
  out.node = maybe_record(tape, {x.node}, [idx, b, t, tsel, d, dt = x.dtype()](const Tensor& g, Tape::Sink& s) {
    Tensor gx = Tensor::zeros({b, t, d}, dt);
    for (int64_t bi = 0; bi < b; ++bi) {
      for (int64_t ti = 0; ti < tsel; ++ti) {
        const int64_t dst = (bi * t + idx[static_cast<size_t>(bi)][static_cast<size_t>(ti)]) * d;
        const int64_t src = (bi * tsel + ti) * d;
        if (dt == DType::f32) kern::add<float>(d, gx.f32() + dst, g.f32() + src, gx.f32_mut() + dst);
        else kern::add<double>(d, gx.f64() + dst, g.f64() + src, gx.f64_mut() + dst);
      }
    }
    s.add(0, gx);
  });
  return out;
}

Tensor add_bcast0(const Tensor& x, const Tensor& p, Tape* tape) {
  if (x.ndim() != 3 || p.ndim() != 2 || x.dim(1) != p.dim(0) || x.dim(2) != p.dim(1)) {
    throw ShapeError("add_bcast0: x " + shape_str(x.shape()) + " vs p " + shape_str(p.shape()));
  }
  const int64_t b = x.dim(0), n = p.numel();
  Tensor out = x.clone();
  if (x.dtype() == DType::f32) {
    float* o = out.f32_mut();
    for (int64_t bi = 0; bi < b; ++bi) kern::add<float>(n, o + bi * n, p.f32(), o + bi * n);
  } else {
    double* o = out.f64_mut();
    for (int64_t bi = 0; bi < b; ++bi) kern::add<double>(n, o + bi * n, p.f64(), o + bi * n);
  }
  out.node = maybe_record(tape, {x.node, p.node}, [b, n, shape = p.shape()](const Tensor& g, Tape::Sink& s) {
    s.add(0, g);
    if (s.needs(1)) {
      Tensor gp = Tensor::zeros(shape, g.dtype());
      if (g.dtype() == DType::f32) {
        float* pp = gp.f32_mut();
        for (int64_t bi = 0; bi < b; ++bi) kern::add<float>(n, pp, g.f32() + bi * n, pp);
      } else {
        double* pp = gp.f64_mut();
        for (int64_t bi = 0; bi < b; ++bi) kern::add<double>(n, pp, g.f64() + bi * n, pp);
      }
      s.add(1, gp);
    }
  });
  return out;
}

Tensor broadcast_rows(const Tensor& row, int64_t batch, Tape* tape) {
  if (batch < 1) throw ShapeError("broadcast_rows: batch must be >= 1");
  Tensor r2 = row.ndim() == 1 ? row.reshaped({1, row.dim(0)}) : row;
  if (r2.ndim() != 2) throw ShapeError("broadcast_rows: row must be rank 1 or 2");
  r2.node = row.node;  // reshaped() drops it
  const int64_t s_ = r2.dim(0), d = r2.dim(1), n = r2.numel();
  Tensor out = Tensor::zeros({batch, s_, d}, row.dtype());
  for (int64_t bi = 0; bi < batch; ++bi) {
    if (row.dtype() == DType::f32) std::copy_n(r2.f32(), n, out.f32_mut() + bi * n);
    else std::copy_n(r2.f64(), n, out.f64_mut() + bi * n);
  }
  out.node = maybe_record(tape, {row.node}, [batch, n, shape = row.shape()](const Tensor& g, Tape::Sink& s) {
    Tensor gr = Tensor::zeros(shape, g.dtype());
    if (g.dtype() == DType::f32) {
      float* p = gr.f32_mut();
      for (int64_t bi = 0; bi < batch; ++bi) kern::add<float>(n, p, g.f32() + bi * n, p);
    } else {
      double* p = gr.f64_mut();
      for (int64_t bi = 0; bi < batch; ++bi) kern::add<double>(n, p, g.f64() + bi * n, p);
    }
    s.add(0, gr);
  });
  return out;
}

Tensor concat_axis1(const Tensor& a, const Tensor& b, Tape* tape) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dtype() != b.dtype()) {
    throw ShapeError("concat_axis1: incompatible " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const int64_t bb = a.dim(0), ta = a.dim(1), tb = b.dim(1), d = a.dim(2);
  Tensor out = Tensor::zeros({bb, ta + tb, d}, a.dtype());
  for (int64_t bi = 0; bi < bb; ++bi) {
    if (a.dtype() == DType::f32) {
      std::copy_n(a.f32() + bi * ta * d, ta * d, out.f32_mut() + bi * (ta + tb) * d);
      std::copy_n(b.f32() + bi * tb * d, tb * d, out.f32_mut() + bi * (ta + tb) * d + ta * d);
    } else {
      std::copy_n(a.f64() + bi * ta * d, ta * d, out.f64_mut() + bi * (ta + tb) * d);
      std::copy_n(b.f64() + bi * tb * d, tb * d, out.f64_mut() + bi * (ta + tb) * d + ta * d);
    }
  }
  out.node = maybe_record(tape, {a.node, b.node}, [bb, ta, tb, d](const Tensor& g, Tape::Sink& s) {
    if (s.needs(0)) s.add(0, slice_axis1(g, 0, ta));
    if (s.needs(1)) s.add(1, slice_axis1(g, ta, tb));
  });
  return out;
}

Tensor slice_axis1(const Tensor& x, int64_t start, int64_t len, Tape* tape) {
  if (x.ndim() != 3) throw ShapeError("slice_axis1: input must be rank 3");
  const int64_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
  if (start < 0 || len < 1 || start + len > t) {
    throw RangeError("slice_axis1: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                     ") outside " + shape_str(x.shape()));
  }
  Tensor out = Tensor::zeros({b, len, d}, x.dtype());
  for (int64_t bi = 0; bi < b; ++bi) {
    const int64_t src = (bi * t + start) * d, dst = bi * len * d;
    if (x.dtype() == DType::f32) std::copy_n(x.f32() + src, len * d, out.f32_mut() + dst);
    else std::copy_n(x.f64() + src, len * d, out.f64_mut() + dst);
  }
  out.node = maybe_record(tape, {x.node}, [b, t, d, start, len](const Tensor& g, Tape::Sink& s) {
    Tensor gx = Tensor::zeros({b, t, d}, g.dtype());
    for (int64_t bi = 0; bi < b; ++bi) {
      const int64_t dst = (bi * t + start) * d, src = bi * len * d;
      if (g.dtype() == DType::f32) std::copy_n(g.f32() + src, len * d, gx.f32_mut() + dst);
      else std::copy_n(g.f64() + src, len * d, gx.f64_mut() + dst);
    }
    s.add(0, gx);
  });
  return out;
}

Tensor concat_last(const Tensor& a, const Tensor& b, Tape* tape) {
  if (a.ndim() != b.ndim() || a.dtype() != b.dtype()) throw ShapeError("concat_last: rank/dtype mismatch");
  for (int i = 0; i + 1 < a.ndim(); ++i) {
    if (a.dim(i) != b.dim(i)) throw ShapeError("concat_last: leading dims differ");
  }
  const int64_t r = rows_of(a), da = a.dim(-1), db = b.dim(-1);
  std::vector<int64_t> shape = a.shape();
  shape.back() = da + db;
  Tensor out = Tensor::zeros(shape, a.dtype());
  for (int64_t i = 0; i < r; ++i) {
    if (a.dtype() == DType::f32) {
      std::copy_n(a.f32() + i * da, da, out.f32_mut() + i * (da + db));
      std::copy_n(b.f32() + i * db, db, out.f32_mut() + i * (da + db) + da);
    } else {
      std::copy_n(a.f64() + i * da, da, out.f64_mut() + i * (da + db));
      std::copy_n(b.f64() + i * db, db, out.f64_mut() + i * (da + db) + da);
    }
  }
  out.node = maybe_record(tape, {a.node, b.node},
                          [r, da, db, sa = a.shape(), sb = b.shape()](const Tensor& g, Tape::Sink& s) {
    if (s.needs(0)) {
      Tensor ga = Tensor::zeros(sa, g.dtype());
      for (int64_t i = 0; i < r; ++i) {
        if (g.dtype() == DType::f32) std::copy_n(g.f32() + i * (da + db), da, ga.f32_mut() + i * da);
        else std::copy_n(g.f64() + i * (da + db), da, ga.f64_mut() + i * da);
      }
      s.add(0, ga);
    }
    if (s.needs(1)) {
      Tensor gb = Tensor::zeros(sb, g.dtype());
      for (int64_t i = 0; i < r; ++i) {
        if (g.dtype() == DType::f32) std::copy_n(g.f32() + i * (da + db) + da, db, gb.f32_mut() + i * db);
        else std::copy_n(g.f64() + i * (da + db) + da, db, gb.f64_mut() + i * db);
      }
      s.add(1, gb);
    }
  });
  return out;
}

Tensor mean_axis1(const Tensor& x, Tape* tape) {
  if (x.ndim() != 3) throw ShapeError("mean_axis1: input must be rank 3");
  const int64_t b = x.dim(0), k = x.dim(1), d = x.dim(2);
  Tensor out = Tensor::zeros({b, d}, x.dtype());
  const double inv = 1.0 / static_cast<double>(k);
  for (int64_t bi = 0; bi < b; ++bi) {
    for (int64_t ki = 0; ki < k; ++ki) {
      if (x.dtype() == DType::f32) kern::axpy<float>(d, static_cast<float>(inv), x.f32() + (bi * k + ki) * d, out.f32_mut() + bi * d);
      else kern::axpy<double>(d, inv, x.f64() + (bi * k + ki) * d, out.f64_mut() + bi * d);
    }
  }
  out.node = maybe_record(tape, {x.node}, [b, k, d, inv](const Tensor& g, Tape::Sink& s) {
    Tensor gx = Tensor::zeros({b, k, d}, g.dtype());
    for (int64_t bi = 0; bi < b; ++bi) {
      for (int64_t ki = 0; ki < k; ++ki) {
        if (g.dtype() == DType::f32) kern::axpy<float>(d, static_cast<float>(inv), g.f32() + bi * d, gx.f32_mut() + (bi * k + ki) * d);
        else kern::axpy<double>(d, inv, g.f64() + bi * d, gx.f64_mut() + (bi * k + ki) * d);
      }
    }
    s.add(0, gx);
  });
  return out;
}

Tensor l2_normalize_rows(const Tensor& x, Tape* tape) {
  const int64_t r = rows_of(x), d = x.dim(-1);
  constexpr double kEps = 1e-12;
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  std::vector<double> norms(static_cast<size_t>(r));
  for (int64_t i = 0; i < r; ++i) {
    double n2 = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      const double xv = x.at(i * d + j);
      n2 += xv * xv;
    }
    const double n = std::sqrt(n2);
    norms[static_cast<size_t>(i)] = n;
    const double inv = 1.0 / (n + kEps);
    for (int64_t j = 0; j < d; ++j) out.set(i * d + j, x.at(i * d + j) * inv);
  }
  Tensor xc = x;
  out.node = maybe_record(tape, {x.node}, [xc, norms, r, d](const Tensor& g, Tape::Sink& s) {
    Tensor gx = Tensor::zeros(xc.shape(), xc.dtype());
    for (int64_t i = 0; i < r; ++i) {
      const double n = norms[static_cast<size_t>(i)];
      const double sfac = n + kEps;
      double xg = 0.0;
      for (int64_t j = 0; j < d; ++j) xg += xc.at(i * d + j) * g.at(i * d + j);
      const double coef = n > 1e-300 ? xg / (n * sfac * sfac) : 0.0;
      for (int64_t j = 0; j < d; ++j) {
        gx.set(i * d + j, g.at(i * d + j) / sfac - xc.at(i * d + j) * coef);
      }
    }
    s.add(0, gx);
  });
  return out;
}

// -------------------------------------------------------------------- losses

Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& labels, Tape* tape) {
  const int64_t c = logits.dim(-1), r = rows_of(logits);
  if (static_cast<int64_t>(labels.size()) != r) {
    throw LabelError("cross_entropy_rows: " + std::to_string(labels.size()) + " labels for " + std::to_string(r) + " rows");
  }
  for (int lb : labels) {
    if (lb < 0 || lb >= c) throw LabelError("cross_entropy_rows: label " + std::to_string(lb) + " out of range");
  }
  Tensor probs = Tensor::zeros({r, c}, logits.dtype());
  std::vector<double> ce(static_cast<size_t>(r));
  for (int64_t i = 0; i < r; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (int64_t j = 0; j < c; ++j) m = std::max(m, logits.at(i * c + j));
    double sum = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      const double e = std::exp(logits.at(i * c + j) - m);
      probs.set(i * c + j, e);
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (int64_t j = 0; j < c; ++j) probs.set(i * c + j, probs.at(i * c + j) * inv);
    ce[static_cast<size_t>(i)] = std::log(sum) - (logits.at(i * c + labels[static_cast<size_t>(i)]) - m);
  }
  // permutation-invariant mean over rows
  const double mean = perm_invariant_sum(ce.data(), ce.size()) / static_cast<double>(r);
  Tensor out = Tensor::scalar_of(mean, logits.dtype());
  out.node = maybe_record(tape, {logits.node},
                          [probs, labels, r, c, shape = logits.shape()](const Tensor& g, Tape::Sink& s) {
    const double gs = g.at(0) / static_cast<double>(r);
    Tensor gl = Tensor::zeros(shape, probs.dtype());
    for (int64_t i = 0; i < r; ++i) {
      for (int64_t j = 0; j < c; ++j) {
        const double onehot = (j == labels[static_cast<size_t>(i)]) ? 1.0 : 0.0;
        gl.set(i * c + j, (probs.at(i * c + j) - onehot) * gs);
      }
    }
    s.add(0, gl);
  });
  return out;
}

Tensor sum_all(const Tensor& x, Tape* tape) {
  double acc = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) acc += x.at(i);
  Tensor out = Tensor::scalar_of(acc, x.dtype());
  out.node = maybe_record(tape, {x.node}, [shape = x.shape(), dt = x.dtype()](const Tensor& g, Tape::Sink& s) {
    s.add(0, Tensor::full(shape, g.at(0), dt));
  });
  return out;
}

// -------------------------------------------------------------- cube extract

Tensor cube_extract(const Tensor& frames, int p, int tubelet, Tape* tape) {
  if (frames.ndim() != 5 || frames.dim(4) != 3) {
    throw ShapeError("cube_extract: frames must be (B, M, H, W, 3), got " + shape_str(frames.shape()));
  }
  const int64_t b = frames.dim(0), m = frames.dim(1), h = frames.dim(2), w = frames.dim(3);
  if (tubelet < 1 || m % tubelet != 0) throw ConfigError("cube_extract: frame count " + std::to_string(m) + " not divisible by tubelet " + std::to_string(tubelet));
  if (p < 1 || h % p != 0 || w % p != 0) {
    throw ConfigError("cube_extract: resolution " + std::to_string(h) + "x" + std::to_string(w) +
                      " not divisible by patch size " + std::to_string(p));
  }
  const int64_t st = m / tubelet, gh = h / p, gw = w / p;
  const int64_t s_count = st * gh * gw;
  const int64_t cube_dim = static_cast<int64_t>(tubelet) * p * p * 3;
  Tensor out = Tensor::zeros({b, s_count, cube_dim}, frames.dtype());

  auto src_index = [&](int64_t bi, int64_t fr, int64_t y, int64_t x, int64_t ch) {
    return (((bi * m + fr) * h + y) * w + x) * 3 + ch;
  };
  auto fill = [&](auto* dst, const auto* src) {
    for (int64_t bi = 0; bi < b; ++bi) {
      int64_t s = 0;
      for (int64_t ts = 0; ts < st; ++ts) {
        for (int64_t ry = 0; ry < gh; ++ry) {
          for (int64_t rx = 0; rx < gw; ++rx, ++s) {
            int64_t o = (bi * s_count + s) * cube_dim;
            for (int64_t f = 0; f < tubelet; ++f) {
              for (int64_t y = 0; y < p; ++y) {
                for (int64_t x = 0; x < p; ++x) {
                  for (int64_t ch = 0; ch < 3; ++ch) {
                    dst[o++] = src[src_index(bi, ts * tubelet + f, ry * p + y, rx * p + x, ch)];
                  }
                }
              }
            }
          }
        }
      }
    }
  };
  if (frames.dtype() == DType::f32) fill(out.f32_mut(), frames.f32());
  else fill(out.f64_mut(), frames.f64());

  out.node = maybe_record(tape, {frames.node},
                          [b, m, h, w, p, tubelet, st, gh, gw, s_count, cube_dim,
                           shape = frames.shape()](const Tensor& g, Tape::Sink& s) {
    Tensor gf = Tensor::zeros(shape, g.dtype());
    auto dst_index = [&](int64_t bi, int64_t fr, int64_t y, int64_t x, int64_t ch) {
      return (((bi * m + fr) * h + y) * w + x) * 3 + ch;
    };
    auto unfill = [&](auto* dst, const auto* src) {
      for (int64_t bi = 0; bi < b; ++bi) {
        int64_t sc = 0;
        for (int64_t ts = 0; ts < st; ++ts) {
          for (int64_t ry = 0; ry < gh; ++ry) {
            for (int64_t rx = 0; rx < gw; ++rx, ++sc) {
              int64_t o = (bi * s_count + sc) * cube_dim;
              for (int64_t f = 0; f < tubelet; ++f) {
                for (int64_t y = 0; y < p; ++y) {
                  for (int64_t x = 0; x < p; ++x) {
                    for (int64_t ch = 0; ch < 3; ++ch) {
                      dst[dst_index(bi, ts * tubelet + f, ry * p + y, rx * p + x, ch)] = src[o++];
                    }
                  }
                }
              }
            }
          }
        }
      }
    };
    if (g.dtype() == DType::f32) unfill(gf.f32_mut(), g.f32());
    else unfill(gf.f64_mut(), g.f64());
    s.add(0, gf);
  });
  return out;
}

// ---------------------------------------------------------------- finite diff

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
  if (h <= 0.0) throw ConfigError("finite_diff_grad: h must be > 0");
  Tensor grad = Tensor::zeros(x.shape(), DType::f64);
  for (int64_t i = 0; i < x.numel(); ++i) {
    Tensor xp = x.clone();
    xp.set(i, x.at(i) + h);
    Tensor xm = x.clone();
    xm.set(i, x.at(i) - h);
    grad.set(i, (f(xp) - f(xm)) / (2.0 * h));
  }
  return grad;
}

bool all_finite(const Tensor& x) {
  for (int64_t i = 0; i < x.numel(); ++i) {
    if (!std::isfinite(x.at(i))) return false;
  }
  return true;
}

std::vector<int> argmax_rows(const Tensor& x) {
  const int64_t c = x.dim(-1), r = rows_of(x);
  std::vector<int> out(static_cast<size_t>(r));
  for (int64_t i = 0; i < r; ++i) {
    int best = 0;
    double bv = x.at(i * c);
    for (int64_t j = 1; j < c; ++j) {
      const double v = x.at(i * c + j);
      if (v > bv) { bv = v; best = static_cast<int>(j); }
    }
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

}  // namespace tvts::ops
