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
 * \file kgc/error.h
 * \brief Exception types raised by the compiler and runtime.
 */
#ifndef KGC_ERROR_H_
#define KGC_ERROR_H_

#include <stdexcept>
#include <string>

namespace kgc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define KGC_DEFINE_ERROR(Name)          \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  }

KGC_DEFINE_ERROR(ParseError);
KGC_DEFINE_ERROR(ResolutionError);
KGC_DEFINE_ERROR(IntegrityError);
KGC_DEFINE_ERROR(BoundsError);
KGC_DEFINE_ERROR(StructureError);
KGC_DEFINE_ERROR(GenerationError);
KGC_DEFINE_ERROR(TemplateError);
KGC_DEFINE_ERROR(ExpansionError);
KGC_DEFINE_ERROR(FusionError);
KGC_DEFINE_ERROR(ShapeError);
KGC_DEFINE_ERROR(BindingError);
KGC_DEFINE_ERROR(UsageError);
KGC_DEFINE_ERROR(DomainError);
KGC_DEFINE_ERROR(IOError);

#undef KGC_DEFINE_ERROR

}  // namespace kgc

#endif  // KGC_ERROR_H_
