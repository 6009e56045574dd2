/*
 * Licensed to the Apache Software Foundation (ASF) under one
 * or more contributor license agreements.  See the NOTICE file
 * distributed with this work for additional information
 * regarding copyright ownership.  The ASF licenses this file
 * to you under the Apache License, Version 2.0 (the
 * "License"); you may not use this file except in compliance
 * with the License.  You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing,
 * software distributed under the License is distributed on an
 * "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
 * KIND, either express or implied.  See the License for the
 * specific language governing permissions and limitations
 * under the License.
 */

/*!
 * \file kernels.cc
 * \brief Row kernels for the primitive op set.
 */
#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "kgc/error.h"
#include "kgc/tensor.h"

namespace kgc {

int64_t shape_elements(const Shape& s) {
  if (s.size() > 3) throw ShapeError("tensor rank " + std::to_string(s.size()) + " exceeds 3");
  int64_t n = 1;
  for (int64_t d : s) {
    if (d < 0) throw ShapeError("negative dimension in " + shape_str(s));
    n *= d;
  }
  return n;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(shape_elements(shape_), fill) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (static_cast<int64_t>(data_.size()) != shape_elements(shape_)) {
    throw ShapeError("tensor of shape " + shape_str(shape_) + " given " + std::to_string(data_.size()) + " elements");
  }
}

template class Tensor<float>;
template class Tensor<double>;

namespace {

int64_t row_width(const Shape& s) {
  if (s.size() < 2) return s.empty() ? 1 : s[0];
  int64_t n = 1;
  for (size_t i = 1; i < s.size(); ++i) n *= s[i];
  return n;
}

constexpr int64_t kColBlock = 32;

// o = x * w for one row, k x n weights. Columns are processed in register-resident blocks and every
// accumulation is an explicit fma, so the result does not depend on how the loop is vectorized.
template <typename T>
void matmul_row(const T* __restrict x, const T* __restrict w, T* __restrict o, int64_t k, int64_t n) {
  int64_t jb = 0;
  for (; jb + kColBlock <= n; jb += kColBlock) {
    T acc[kColBlock] = {};
    for (int64_t i = 0; i < k; ++i) {
      const T xi = x[i];
      const T* __restrict wi = w + i * n + jb;
      for (int64_t j = 0; j < kColBlock; ++j) acc[j] = std::fma(xi, wi[j], acc[j]);
    }
    std::copy(acc, acc + kColBlock, o + jb);
  }
  if (jb < n) {
    std::fill(o + jb, o + n, T(0));
    for (int64_t i = 0; i < k; ++i) {
      const T xi = x[i];
      const T* __restrict wi = w + i * n;
      for (int64_t j = jb; j < n; ++j) o[j] = std::fma(xi, wi[j], o[j]);
    }
  }
}

// Exponentials go through an aligned scratch array so the split between vector and scalar
// evaluation depends only on the length, never on the caller's buffer address.
template <typename T>
Eigen::Array<T, Eigen::Dynamic, 1>& exp_buffer(int64_t n) {
  thread_local Eigen::Array<T, Eigen::Dynamic, 1> buf;
  if (buf.size() != n) buf.resize(n);
  return buf;
}

}  // namespace

template <typename T>
KernelCall<T> plan_kernel(OpKind kind, std::span<const Shape> in, const OpAttrs& attrs) {
  const Shape out = infer_shape(kind, in, attrs);
  KernelCall<T> c;
  c.kind = kind;
  c.scalar = attrs.scalar;
  c.args.resize(in.size());
  c.out_stride = row_width(out);
  switch (kind) {
    case OpKind::kMatMul:
      c.k = in[0][1];
      c.n = out[1];
      c.args[0].stride = c.k;
      if (attrs.edge >= 0) c.slab = c.k * c.n;
      break;
    case OpKind::kAdd:
      c.n = row_width(in[0]);
      c.args[0].stride = c.n;
      if (attrs.edge >= 0) {
        c.slab = c.n;
      } else if (in[1] == in[0]) {
        c.args[1].stride = c.n;
      }
      break;
    case OpKind::kRelu:
    case OpKind::kReciprocal:
    case OpKind::kClampMin:
      c.n = row_width(in[0]);
      c.args[0].stride = c.n;
      break;
    case OpKind::kSoftmax:
      if (in.size() == 1) {
        c.width = row_width(in[0]);
        c.n = in[0].back();
        c.args[0].stride = c.width;
      } else {
        c.k = in[0][1];
        c.n = static_cast<int64_t>(in.size());
        for (auto& a : c.args) a.stride = c.k;
      }
      break;
    case OpKind::kWeightedSum:
      c.k = in[0][1];
      c.n = in[0][2];
      c.args[0].stride = c.k * c.n;
      for (size_t i = 1; i < in.size(); ++i) c.args[i].stride = c.k;
      break;
    case OpKind::kStack:
      c.k = in[0][1];
      c.n = static_cast<int64_t>(in.size());
      for (auto& a : c.args) a.stride = c.k;
      break;
    default:
      throw ShapeError(std::string(to_string(kind)) + ": not a primitive kind");
  }
  return c;
}

template <typename T>
void run_rows(const KernelCall<T>& c, int64_t r0, int64_t r1) {
  switch (c.kind) {
    case OpKind::kMatMul:
      for (int64_t r = r0; r < r1; ++r) {
        const T* w = c.args[1].data + (c.selector ? c.selector[r] * c.slab : 0);
        matmul_row(c.args[0].data + r * c.args[0].stride, w, c.out + r * c.out_stride, c.k, c.n);
      }
      break;
    case OpKind::kAdd:
      for (int64_t r = r0; r < r1; ++r) {
        const T* x = c.args[0].data + r * c.args[0].stride;
        const T* y = c.args[1].data + (c.selector ? c.selector[r] * c.slab : r * c.args[1].stride);
        T* o = c.out + r * c.out_stride;
        for (int64_t j = 0; j < c.n; ++j) o[j] = x[j] + y[j];
      }
      break;
    case OpKind::kRelu:
      for (int64_t r = r0; r < r1; ++r) {
        const T* x = c.args[0].data + r * c.args[0].stride;
        T* o = c.out + r * c.out_stride;
        for (int64_t j = 0; j < c.n; ++j) o[j] = x[j] > T(0) ? x[j] : T(0);
      }
      break;
    case OpKind::kReciprocal:
      for (int64_t r = r0; r < r1; ++r) {
        const T* x = c.args[0].data + r * c.args[0].stride;
        T* o = c.out + r * c.out_stride;
        for (int64_t j = 0; j < c.n; ++j) o[j] = T(1) / x[j];
      }
      break;
    case OpKind::kClampMin: {
      const T lo = static_cast<T>(c.scalar);
      for (int64_t r = r0; r < r1; ++r) {
        const T* x = c.args[0].data + r * c.args[0].stride;
        T* o = c.out + r * c.out_stride;
        for (int64_t j = 0; j < c.n; ++j) o[j] = x[j] < lo ? lo : x[j];
      }
      break;
    }
    case OpKind::kSoftmax:
      if (c.args.size() == 1) {
        auto& e = exp_buffer<T>(c.n);
        for (int64_t r = r0; r < r1; ++r) {
          const T* x = c.args[0].data + r * c.args[0].stride;
          T* o = c.out + r * c.out_stride;
          for (int64_t s = 0; s < c.width; s += c.n) {
            const T m = *std::max_element(x + s, x + s + c.n);
            for (int64_t j = 0; j < c.n; ++j) e[j] = x[s + j] - m;
            e = e.exp();
            T sum = 0;
            for (int64_t j = 0; j < c.n; ++j) sum += e[j];
            for (int64_t j = 0; j < c.n; ++j) o[s + j] = e[j] / sum;
          }
        }
      } else {
        // Output is [k, n]: for every feature, a distribution over the n branches.
        auto& e = exp_buffer<T>(c.n * c.k);
        for (int64_t r = r0; r < r1; ++r) {
          T* o = c.out + r * c.out_stride;
          for (int64_t f = 0; f < c.k; ++f) {
            T m = c.args[0].data[r * c.args[0].stride + f];
            for (int64_t i = 1; i < c.n; ++i) m = std::max(m, c.args[i].data[r * c.args[i].stride + f]);
            for (int64_t i = 0; i < c.n; ++i) e[f * c.n + i] = c.args[i].data[r * c.args[i].stride + f] - m;
          }
          e = e.exp();
          for (int64_t f = 0; f < c.k; ++f) {
            T sum = 0;
            for (int64_t i = 0; i < c.n; ++i) sum += e[f * c.n + i];
            for (int64_t i = 0; i < c.n; ++i) o[f * c.n + i] = e[f * c.n + i] / sum;
          }
        }
      }
      break;
    case OpKind::kWeightedSum:
      for (int64_t r = r0; r < r1; ++r) {
        const T* w = c.args[0].data + r * c.args[0].stride;
        T* o = c.out + r * c.out_stride;
        for (int64_t f = 0; f < c.k; ++f) {
          T acc = 0;
          for (int64_t i = 0; i < c.n; ++i) acc = std::fma(w[f * c.n + i], c.args[i + 1].data[r * c.args[i + 1].stride + f], acc);
          o[f] = acc;
        }
      }
      break;
    case OpKind::kStack:
      for (int64_t r = r0; r < r1; ++r) {
        T* o = c.out + r * c.out_stride;
        for (int64_t i = 0; i < c.n; ++i) {
          const T* x = c.args[i].data + r * c.args[i].stride;
          std::copy(x, x + c.k, o + i * c.k);
        }
      }
      break;
    default:
      throw ShapeError(std::string(to_string(c.kind)) + ": not a primitive kind");
  }
}

template <typename T>
Tensor<T> run_kernel(OpKind kind, std::span<const Tensor<T>> inputs, const OpAttrs& attrs,
                     std::span<const int32_t> selector) {
  std::vector<Shape> shapes;
  for (const auto& t : inputs) shapes.push_back(t.shape());
  KernelCall<T> c = plan_kernel<T>(kind, shapes, attrs);
  Tensor<T> out(infer_shape(kind, shapes, attrs));
  for (size_t i = 0; i < inputs.size(); ++i) c.args[i].data = inputs[i].data();
  c.out = out.data();
  const int64_t rows = out.rows();
  if (c.slab > 0) {
    const Shape& w = shapes[1];
    if (static_cast<int64_t>(selector.size()) != rows) {
      throw BindingError(std::string(to_string(kind)) + ": relation selector has " + std::to_string(selector.size()) +
                         " entries for " + std::to_string(rows) + " rows");
    }
    for (int32_t s : selector) {
      if (s < 0 || s >= w[0]) throw BindingError(std::string(to_string(kind)) + ": relation selector out of range");
    }
    c.selector = selector.data();
  }
  run_rows(c, 0, rows);
  return out;
}

template KernelCall<float> plan_kernel<float>(OpKind, std::span<const Shape>, const OpAttrs&);
template KernelCall<double> plan_kernel<double>(OpKind, std::span<const Shape>, const OpAttrs&);
template void run_rows<float>(const KernelCall<float>&, int64_t, int64_t);
template void run_rows<double>(const KernelCall<double>&, int64_t, int64_t);
template Tensor<float> run_kernel<float>(OpKind, std::span<const Tensor<float>>, const OpAttrs&, std::span<const int32_t>);
template Tensor<double> run_kernel<double>(OpKind, std::span<const Tensor<double>>, const OpAttrs&, std::span<const int32_t>);

}  // namespace kgc
