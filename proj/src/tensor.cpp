#include "tvts/tensor.hpp"

#include <algorithm>

namespace tvts {

DType dtype_parse(const std::string& s) {
  if (s == "f32" || s == "float32") return DType::f32;
  if (s == "f64" || s == "float64") return DType::f64;
  throw ConfigError("unknown dtype '" + s + "' (expected f32 or f64)");
}

void Tensor::check_shape(const std::vector<int64_t>& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
  for (int64_t e : shape) {
    if (e < 1) throw ShapeError("tensor extents must be >= 1, got " + shape_str(shape));
  }
}

Tensor Tensor::zeros(std::vector<int64_t> shape, DType dt) {
  check_shape(shape);
  Tensor t;
  t.shape_ = std::move(shape);
  t.numel_ = 1;
  for (int64_t e : t.shape_) t.numel_ *= e;
  t.dtype_ = dt;
  if (dt == DType::f32) t.f32_ = std::make_shared<std::vector<float>>(static_cast<size_t>(t.numel_), 0.0f);
  else t.f64_ = std::make_shared<std::vector<double>>(static_cast<size_t>(t.numel_), 0.0);
  return t;
}

Tensor Tensor::full(std::vector<int64_t> shape, double v, DType dt) {
  Tensor t = zeros(std::move(shape), dt);
  if (dt == DType::f32) std::fill(t.f32_->begin(), t.f32_->end(), static_cast<float>(v));
  else std::fill(t.f64_->begin(), t.f64_->end(), v);
  return t;
}

Tensor Tensor::from(std::vector<int64_t> shape, const std::vector<double>& vals, DType dt) {
  Tensor t = zeros(std::move(shape), dt);
  if (static_cast<int64_t>(vals.size()) != t.numel_) {
    throw ShapeError("value count " + std::to_string(vals.size()) + " does not fill shape " + shape_str(t.shape_));
  }
  for (int64_t i = 0; i < t.numel_; ++i) t.set(i, vals[static_cast<size_t>(i)]);
  return t;
}

Tensor Tensor::scalar_of(double v, DType dt) { return full({1}, v, dt); }

Tensor Tensor::randn(std::vector<int64_t> shape, double stddev, Rng& rng, DType dt) {
  Tensor t = zeros(std::move(shape), dt);
  for (int64_t i = 0; i < t.numel_; ++i) t.set(i, rng.normal() * stddev);
  return t;
}

Tensor Tensor::trunc_normal(std::vector<int64_t> shape, double stddev, Rng& rng, DType dt) {
  Tensor t = zeros(std::move(shape), dt);
  for (int64_t i = 0; i < t.numel_; ++i) t.set(i, rng.trunc_normal(stddev));
  return t;
}

int64_t Tensor::dim(int i) const {
  const int n = ndim();
  if (i < 0) i += n;
  if (i < 0 || i >= n) throw ShapeError("dim index out of range for shape " + shape_str(shape_));
  return shape_[static_cast<size_t>(i)];
}

const float* Tensor::f32() const {
  if (dtype_ != DType::f32 || !f32_) throw ContractError("tensor is not f32-backed");
  return f32_->data();
}
const double* Tensor::f64() const {
  if (dtype_ != DType::f64 || !f64_) throw ContractError("tensor is not f64-backed");
  return f64_->data();
}

float* Tensor::f32_mut() {
  if (dtype_ != DType::f32 || !f32_) throw ContractError("tensor is not f32-backed");
  if (f32_.use_count() > 1) f32_ = std::make_shared<std::vector<float>>(*f32_);
  return f32_->data();
}
double* Tensor::f64_mut() {
  if (dtype_ != DType::f64 || !f64_) throw ContractError("tensor is not f64-backed");
  if (f64_.use_count() > 1) f64_ = std::make_shared<std::vector<double>>(*f64_);
  return f64_->data();
}

double Tensor::at(int64_t flat) const {
  if (flat < 0 || flat >= numel_) throw RangeError("flat index out of range");
  return dtype_ == DType::f32 ? static_cast<double>((*f32_)[static_cast<size_t>(flat)])
                              : (*f64_)[static_cast<size_t>(flat)];
}

void Tensor::set(int64_t flat, double v) {
  if (flat < 0 || flat >= numel_) throw RangeError("flat index out of range");
  if (dtype_ == DType::f32) f32_mut()[flat] = static_cast<float>(v);
  else f64_mut()[flat] = v;
}

double Tensor::scalar() const {
  if (numel_ != 1) throw ContractError("scalar() on tensor of shape " + shape_str(shape_));
  return at(0);
}

std::vector<double> Tensor::to_vector() const {
  std::vector<double> out(static_cast<size_t>(numel_));
  for (int64_t i = 0; i < numel_; ++i) out[static_cast<size_t>(i)] = at(i);
  return out;
}

Tensor Tensor::clone() const {
  Tensor t = *this;
  t.node = -1;
  if (f32_) t.f32_ = std::make_shared<std::vector<float>>(*f32_);
  if (f64_) t.f64_ = std::make_shared<std::vector<double>>(*f64_);
  return t;
}

Tensor Tensor::astype(DType dt) const {
  if (dt == dtype_) return clone();
  Tensor t = zeros(shape_, dt);
  for (int64_t i = 0; i < numel_; ++i) t.set(i, at(i));
  return t;
}

Tensor Tensor::reshaped(std::vector<int64_t> shape) const {
  check_shape(shape);
  int64_t n = 1;
  for (int64_t e : shape) n *= e;
  if (n != numel_) {
    throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(shape) + " changes element count");
  }
  Tensor t = *this;  // shares buffer
  t.shape_ = std::move(shape);
  t.node = -1;
  return t;
}

}  // namespace tvts
