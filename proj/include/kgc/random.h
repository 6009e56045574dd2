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
 * \file kgc/random.h
 * \brief Platform-stable sampling helpers on top of std::mt19937_64.
 *
 * The standard distributions are implementation-defined, so seeded outputs would differ across
 * standard libraries. Everything that must be reproducible goes through these helpers.
 */
#ifndef KGC_RANDOM_H_
#define KGC_RANDOM_H_

#include <cstdint>
#include <random>

namespace kgc {

using Rng = std::mt19937_64;

/*! \brief Uniform integer in [0, n) by rejection sampling. n must be > 0. */
inline uint64_t uniform_index(Rng& rng, uint64_t n) {
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/*! \brief Uniform double in [0, 1) with 53 random bits. */
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

}  // namespace kgc

#endif  // KGC_RANDOM_H_
