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
 * \file kgc/tensor.h
 * \brief Dense row-major tensors of rank 1 to 3 and the primitive kernels that operate on them.
 */
#ifndef KGC_TENSOR_H_
#define KGC_TENSOR_H_

#include <cstdint>
#include <span>
#include <vector>

#include "kgc/graph.h"

namespace kgc {

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> data);

  const Shape& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  /*! \brief Leading dimension for rank >= 2, else 1. */
  int64_t rows() const { return shape_.size() >= 2 ? shape_[0] : 1; }
  /*! \brief Elements per leading-dimension row. */
  int64_t row_size() const { return rows() == 0 ? 0 : size() / rows(); }
  int64_t bytes() const { return size() * static_cast<int64_t>(sizeof(T)); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T* row(int64_t r) { return data_.data() + r * row_size(); }
  const T* row(int64_t r) const { return data_.data() + r * row_size(); }
  T& operator[](int64_t i) { return data_[i]; }
  const T& operator[](int64_t i) const { return data_[i]; }
  const std::vector<T>& values() const { return data_; }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

/*! \brief Element count of a concrete shape. Throws ShapeError on negative dims or rank > 3. */
int64_t shape_elements(const Shape& s);

/*! \brief Operand of a row kernel. `stride` 0 broadcasts one row to every batch row. */
template <typename T>
struct RowOperand {
  const T* data = nullptr;
  int64_t stride = 0;
};

/*!
 * \brief A primitive op bound to concrete buffers, executable over any row range.
 *
 * `selector` (one relation id per batch row) picks the slab of relation-indexed weights; `slab` is
 * the slab size in elements. Both modes of the engine run the same calls, so results agree bit for
 * bit.
 */
template <typename T>
struct KernelCall {
  OpKind kind;
  double scalar = 0.0;
  std::vector<RowOperand<T>> args;
  T* out = nullptr;
  int64_t out_stride = 0;
  /*! \brief matmul: k x n. add/unary: n. softmax: segment length n over `width`. */
  int64_t k = 0, n = 0, width = 0;
  const int32_t* selector = nullptr;
  int64_t slab = 0;
};

/*! \brief Build a call for op `kind` given concrete input shapes. Pointers are filled by the caller. */
template <typename T>
KernelCall<T> plan_kernel(OpKind kind, std::span<const Shape> inputs, const OpAttrs& attrs);

template <typename T>
void run_rows(const KernelCall<T>& call, int64_t r0, int64_t r1);

/*!
 * \brief Evaluate one primitive op on whole tensors.
 * \param selector relation id per row for relation-indexed weights (attrs.edge >= 0).
 * \throws ShapeError when shapes do not conform.
 */
template <typename T>
Tensor<T> run_kernel(OpKind kind, std::span<const Tensor<T>> inputs, const OpAttrs& attrs = {},
                     std::span<const int32_t> selector = {});

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace kgc

#endif  // KGC_TENSOR_H_
