#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tvts/common.hpp"
#include "tvts/rng.hpp"

namespace tvts {

enum class DType : uint8_t { f32 = 0, f64 = 1 };

inline size_t dtype_size(DType d) { return d == DType::f32 ? 4 : 8; }
inline const char* dtype_name(DType d) { return d == DType::f32 ? "f32" : "f64"; }
DType dtype_parse(const std::string& s);

// Dense row-major tensor. Value semantics with a shared immutable buffer;
// mutation goes through *_mut() which copies when the buffer is shared.
// `node` is per-step autodiff metadata assigned by a Tape.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int64_t> shape, DType dt = DType::f64);
  static Tensor full(std::vector<int64_t> shape, double v, DType dt = DType::f64);
  static Tensor from(std::vector<int64_t> shape, const std::vector<double>& vals, DType dt = DType::f64);
  static Tensor scalar_of(double v, DType dt = DType::f64);
  static Tensor randn(std::vector<int64_t> shape, double stddev, Rng& rng, DType dt = DType::f64);
  static Tensor trunc_normal(std::vector<int64_t> shape, double stddev, Rng& rng, DType dt = DType::f64);

  bool defined() const { return f32_ != nullptr || f64_ != nullptr; }
  const std::vector<int64_t>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const;  // negative indices count from the back
  int64_t numel() const { return numel_; }
  DType dtype() const { return dtype_; }

  const float* f32() const;
  const double* f64() const;
  float* f32_mut();
  double* f64_mut();

  double at(int64_t flat) const;
  void set(int64_t flat, double v);
  double scalar() const;  // requires numel() == 1
  std::vector<double> to_vector() const;

  Tensor clone() const;
  Tensor astype(DType dt) const;
  // Raw view with a new shape over the same buffer (no tape involvement;
  // the differentiable version lives in ops).
  Tensor reshaped(std::vector<int64_t> shape) const;

  bool tracked() const { return node >= 0; }
  int node = -1;

 private:
  static void check_shape(const std::vector<int64_t>& shape);

  std::vector<int64_t> shape_;
  int64_t numel_ = 0;
  DType dtype_ = DType::f64;
  std::shared_ptr<std::vector<float>> f32_;
  std::shared_ptr<std::vector<double>> f64_;
};

}  // namespace tvts
