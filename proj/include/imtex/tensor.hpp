#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "imtex/common.hpp"

namespace imtex {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

// Dense row-major tensor. Plain value semantics; all views are copies.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(shape_numel(shape)), T(0));
  }
  Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {}

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor full(Shape s, T v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor scalar(T v) { return Tensor({1}, {v}); }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  std::int64_t dim(int i) const {
    return shape[static_cast<std::size_t>(i < 0 ? shape.size() + i : i)];
  }
  int ndim() const { return static_cast<int>(shape.size()); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using ShapeFn = Shape;

// Blocked matrix product kernels over raw row-major buffers.
//   C[n,m] (+)= A[n,k] * B[k,m]          (accumulate into C)
// The "fast" kernel uses an ikj loop order; the naive kernel uses ijk.
// They differ only in summation order, which the compile hook exploits.
template <typename T>
void matmul_naive(const T* a, const T* b, T* c, std::int64_t n, std::int64_t k,
                  std::int64_t m) {
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < m; ++j) {
      T acc = 0;
      for (std::int64_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * m + j];
      c[i * m + j] += acc;
    }
}

template <typename T>
void matmul_ikj(const T* a, const T* b, T* c, std::int64_t n, std::int64_t k,
                std::int64_t m) {
  for (std::int64_t i = 0; i < n; ++i) {
    T* crow = c + i * m;
    for (std::int64_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      const T* brow = b + p * m;
      for (std::int64_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[n,m] (+)= A[n,k] * B[m,k]^T
template <typename T>
void matmul_bt(const T* a, const T* b, T* c, std::int64_t n, std::int64_t k,
               std::int64_t m) {
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < m; ++j) {
      const T* arow = a + i * k;
      const T* brow = b + j * k;
      T acc = 0;
      for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * m + j] += acc;
    }
}

// C[n,m] (+)= A[k,n]^T * B[k,m]
template <typename T>
void matmul_at(const T* a, const T* b, T* c, std::int64_t n, std::int64_t k,
               std::int64_t m) {
  for (std::int64_t p = 0; p < k; ++p) {
    const T* arow = a + p * n;
    const T* brow = b + p * m;
    for (std::int64_t i = 0; i < n; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* crow = c + i * m;
      for (std::int64_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace imtex
