// Copyright 2026 The Divdec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DIVDEC_ERROR_HPP_
#define DIVDEC_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace divdec {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid decoding or model parameters (out-of-range p, k, beam size, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Planned-target text that cannot be parsed back into a plan, or a sampled
// plan that never terminated.
class MalformedPlanError : public Error {
 public:
  using Error::Error;
};

// A metric queried outside its domain (too few samples, zero rank variance).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// Corpus / model / prediction files that do not parse; message carries the
// offending path and line.
class CorpusError : public Error {
 public:
  using Error::Error;
};

// A restricted beam whose every live hypothesis lost all probability mass.
class EmptyBeamError : public Error {
 public:
  using Error::Error;
};

}  // namespace divdec

#endif  // DIVDEC_ERROR_HPP_
