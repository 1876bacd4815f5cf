/*
 * Copyright 2026 The jattn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "jattn/core/errors.hpp"

namespace jattn {

// Dense row-major tensor of doubles. Most of the model code uses rank 2;
// higher ranks appear only as storage for clip/positional volumes.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s)
      : shape(std::move(s)), data(numel_of(shape), 0.0) {}
  Tensor(std::initializer_list<std::size_t> s)
      : Tensor(std::vector<std::size_t>(s)) {}

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

  static Tensor full(std::vector<std::size_t> s, double v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  static Tensor row(const std::vector<double>& v) {
    Tensor t({1, v.size()});
    t.data = v;
    return t;
  }

  std::size_t numel() const { return data.size(); }
  bool empty() const { return data.empty(); }

  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i)
      os << (i ? "," : "") << shape[i];
    os << ")";
    return os.str();
  }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                     " vs " + b.shape_str());
}

// c (n x m) = a (n x k) * b (k x m); accumulates when acc is true.
inline void matmul_nn(const Tensor& a, const Tensor& b, Tensor& c, bool acc = false) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k)
    throw ShapeError("matmul: inner dims " + a.shape_str() + " * " + b.shape_str());
  if (!acc) {
    c = Tensor({n, m});
  }
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* pc = c.data.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * m;
      double* crow = pc + i * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// c (n x m) = a (n x k) * b^T, where b is (m x k).
inline void matmul_nt(const Tensor& a, const Tensor& b, Tensor& c, bool acc = false) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  if (b.cols() != k)
    throw ShapeError("matmul_nt: inner dims " + a.shape_str() + " * " + b.shape_str() + "^T");
  if (!acc) c = Tensor({n, m});
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* pc = c.data.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = pa + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = pb + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      pc[i * m + j] = acc ? pc[i * m + j] + s : s;
    }
  }
}

// c (k x m) = a^T * b, where a is (n x k) and b is (n x m).
inline void matmul_tn(const Tensor& a, const Tensor& b, Tensor& c, bool acc = false) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != n)
    throw ShapeError("matmul_tn: inner dims " + a.shape_str() + "^T * " + b.shape_str());
  if (!acc) c = Tensor({k, m});
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* pc = c.data.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = pa + i * k;
    const double* brow = pb + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = pc + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace jattn
