#include "tvts/adamw.hpp"

#include <cmath>

#include "tvts/common.hpp"
#include "tvts/kernels.hpp"

namespace tvts {

void ParamSet::add(const std::string& name, Tensor* t) {
  for (const auto& [n, _] : items_) {
    if (n == name) throw ContractError("duplicate parameter name '" + name + "'");
  }
  items_.emplace_back(name, t);
}

void ParamSet::track_all(Tape& tape) {
  for (auto& [_, t] : items_) tape.track(*t);
}

Tensor* ParamSet::find(const std::string& name) {
  for (auto& [n, t] : items_) {
    if (n == name) return t;
  }
  return nullptr;
}

uint64_t ParamSet::fingerprint() const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [name, t] : items_) {
    h = fnv1a64(name.data(), name.size(), h);
    if (t->dtype() == DType::f32) h = fnv1a64(t->f32(), static_cast<size_t>(t->numel()) * 4, h);
    else h = fnv1a64(t->f64(), static_cast<size_t>(t->numel()) * 8, h);
  }
  return h;
}

int64_t ParamSet::total_elements() const {
  int64_t n = 0;
  for (const auto& [_, t] : items_) n += t->numel();
  return n;
}

namespace {
template <class T>
void adamw_update(T* w, const T* g, T* m, T* v, int64_t n, double lr, double b1, double b2,
                  double eps, double wd, double bc1, double bc2) {
  for (int64_t i = 0; i < n; ++i) {
    const double gi = static_cast<double>(g[i]);
    const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
    const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double mhat = mi / bc1;
    const double vhat = vi / bc2;
    double wi = static_cast<double>(w[i]);
    wi -= lr * wd * wi;                              // decoupled decay
    wi -= lr * mhat / (std::sqrt(vhat) + eps);
    w[i] = static_cast<T>(wi);
  }
}
}  // namespace

void AdamW::step(ParamSet& params, const GradMap& grads, double lr_scale) {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  const double lr = cfg_.lr * lr_scale;
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& w = params.tensor(i);
    const auto it = w.tracked() ? grads.find(w.node) : grads.end();
    const std::string& name = params.name(i);
    auto& m = m_[name];
    auto& v = v_[name];
    if (!m.defined()) m = Tensor::zeros(w.shape(), w.dtype());
    if (!v.defined()) v = Tensor::zeros(w.shape(), w.dtype());
    if (m.shape() != w.shape() || v.shape() != w.shape()) {
      throw ShapeError("AdamW state shape mismatch for '" + name + "'");
    }
    // No gradient this step: moments still decay, decoupled decay still applies.
    Tensor zero;
    const Tensor& g = it != grads.end() ? it->second : (zero = Tensor::zeros(w.shape(), w.dtype()));
    if (w.dtype() == DType::f32) {
      adamw_update<float>(w.f32_mut(), g.f32(), m.f32_mut(), v.f32_mut(), w.numel(), lr,
                          cfg_.beta1, cfg_.beta2, cfg_.eps, cfg_.weight_decay, bc1, bc2);
    } else {
      adamw_update<double>(w.f64_mut(), g.f64(), m.f64_mut(), v.f64_mut(), w.numel(), lr,
                           cfg_.beta1, cfg_.beta2, cfg_.eps, cfg_.weight_decay, bc1, bc2);
    }
  }
}

double grad_global_norm(const ParamSet& params, const GradMap& grads) {
  double acc = 0.0;
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor& w = params.tensor(i);
    if (!w.tracked()) continue;
    const auto it = grads.find(w.node);
    if (it == grads.end()) continue;
    const Tensor& g = it->second;
    for (int64_t j = 0; j < g.numel(); ++j) {
      const double x = g.at(j);
      acc += x * x;
    }
  }
  return std::sqrt(acc);
}

void clip_grads(ParamSet& params, GradMap& grads, double max_norm) {
  const double norm = grad_global_norm(params, grads);
  if (norm <= max_norm || norm == 0.0) return;
  const double f = max_norm / (norm + 1e-12);
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor& w = params.tensor(i);
    if (!w.tracked()) continue;
    auto it = grads.find(w.node);
    if (it == grads.end()) continue;
    Tensor& g = it->second;
    if (g.dtype() == DType::f32) kern::scale<float>(g.numel(), static_cast<float>(f), g.f32(), g.f32_mut());
    else kern::scale<double>(g.numel(), f, g.f64(), g.f64_mut());
  }
}

}  // namespace tvts
