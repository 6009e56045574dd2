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
 * \file kgc/engine.h
 * \brief Dual-mode execution of primitive graphs (one dispatch per primitive) and fused graphs (one
 *  dispatch per fused op), with launch, memory and wall-clock counters.
 */
#ifndef KGC_ENGINE_H_
#define KGC_ENGINE_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kgc/graph.h"
#include "kgc/json.h"
#include "kgc/tensor.h"

namespace kgc {

enum class ExecMode { kUnfused, kFused };
const char* to_string(ExecMode m);
ExecMode exec_mode_from_string(std::string_view s);

/*!
 * \brief External inputs of a graph, keyed by value-node name so one binding serves both the
 *  primitive and the fused form of a query.
 *
 * `selectors[e]` holds the relation id of query edge `e` for every batch row.
 */
template <typename T>
struct Bindings {
  std::map<std::string, Tensor<T>> values;
  std::map<int32_t, std::vector<int32_t>> selectors;
};

struct ExecOptions {
  /*! \brief Worker threads splitting batch rows inside each dispatch. */
  int threads = 1;
  /*! \brief Rows per tile in fused mode; 0 sizes tiles to about 1 MiB of row data. */
  int64_t tile_rows = 0;
};

struct ExecutionStats {
  int64_t kernel_launches = 0;
  /*! \brief Bytes of every materialized non-answer op output. */
  int64_t interm_bytes = 0;
  /*! \brief Maximum bytes of engine-allocated buffers live at once (bound inputs excluded). */
  int64_t peak_bytes = 0;
  int64_t wall_ns = 0;
  /*! \brief Non-finite elements in the answer. */
  int64_t nonfinite = 0;

  Json to_json() const;
};

template <typename T>
struct ExecResult {
  std::map<std::string, Tensor<T>> outputs;
  ExecutionStats stats;
  const Tensor<T>& answer() const { return outputs.begin()->second; }
};

/*!
 * \brief Run `g` over the bound batch.
 * \throws UsageError if the graph level does not match `mode`.
 * \throws BindingError for a missing or malformed input.
 */
template <typename T>
ExecResult<T> execute(const ComputationGraph& g, const Bindings<T>& inputs, ExecMode mode, const ExecOptions& opts = {});

extern template ExecResult<float> execute<float>(const ComputationGraph&, const Bindings<float>&, ExecMode, const ExecOptions&);
extern template ExecResult<double> execute<double>(const ComputationGraph&, const Bindings<double>&, ExecMode, const ExecOptions&);

}  // namespace kgc

#endif  // KGC_ENGINE_H_
