// uasr/common.h

// Copyright 2026  The uasr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef UASR_COMMON_H_
#define UASR_COMMON_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace uasr {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string &what) : std::runtime_error(what) {}
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: NaN/Inf where finite values are required, undefined
/// statistics, exhausted search beams.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Random source with platform-independent draws.  The standard
/// distributions are implementation defined, so uniform and normal variates
/// are derived here directly from the 64-bit Mersenne twister output.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).  Rejection sampling, no modulo bias.
  uint64_t uniform_int(uint64_t n);

  /// Standard normal via Box-Muller.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Stage identifiers for seed derivation.  A run has one global seed; every
/// randomized stage draws from derive_seed(global, stage, index).
enum class SeedStage : uint64_t {
  kSynthetic = 1,
  kSplit = 2,
  kAugment = 3,
  kGanTrain = 4,
  kGanInit = 5,
  kSampling = 6,
};

/// splitmix64 over (global, stage, index).  Stable across releases; run
/// directories depend on it.
uint64_t derive_seed(uint64_t global, SeedStage stage, uint64_t index = 0);

}  // namespace uasr

#endif  // UASR_COMMON_H_
