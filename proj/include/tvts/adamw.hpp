#pragma once

#include <map>
#include <string>
#include <vector>

#include "tvts/tape.hpp"
#include "tvts/tensor.hpp"

namespace tvts {

// Named references to every trainable tensor of a model tree. The order is
// registration order and is part of the determinism contract (checkpoint
// layout, optimizer sweep order).
class ParamSet {
 public:
  void add(const std::string& name, Tensor* t);
  void track_all(Tape& tape);

  size_t size() const { return items_.size(); }
  const std::string& name(size_t i) const { return items_[i].first; }
  Tensor& tensor(size_t i) { return *items_[i].second; }
  const Tensor& tensor(size_t i) const { return *items_[i].second; }
  Tensor* find(const std::string& name);

  // FNV-1a over raw little-endian payloads in registration order; used by the
  // frozen-encoder guarantee of the linear probe.
  uint64_t fingerprint() const;
  int64_t total_elements() const;

 private:
  std::vector<std::pair<std::string, Tensor*>> items_;
};

struct AdamWConfig {
  double lr = 1e-4;        // paper pre-train default
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// AdamW with decoupled weight decay: the decay term scales the parameter
// directly and never touches the moment estimates.
class AdamW {
 public:
  explicit AdamW(const AdamWConfig& cfg) : cfg_(cfg) {}

  // lr_scale multiplies cfg.lr (warmup); grad lookup is by tape node id.
  void step(ParamSet& params, const GradMap& grads, double lr_scale = 1.0);

  int64_t step_count() const { return step_; }
  void set_step_count(int64_t t) { step_ = t; }

  // Moment buffers keyed by parameter name, exposed for checkpointing.
  std::map<std::string, Tensor>& first_moments() { return m_; }
  std::map<std::string, Tensor>& second_moments() { return v_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
  int64_t step_ = 0;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
};

// Global L2 norm of all gradients in the map (diagnostics, clipping).
double grad_global_norm(const ParamSet& params, const GradMap& grads);
// Scales every gradient in-place so the global norm is at most max_norm.
void clip_grads(ParamSet& params, GradMap& grads, double max_norm);

}  // namespace tvts
