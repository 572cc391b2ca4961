// uasr/nnet.h

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

// Small hand-differentiated layers: dense, multi-kernel 1-D convolution,
// row softmax, Adam and a finite-difference checker.  Everything is double
// precision.  Layers are plain values; forward calls return a context that
// the matching backward call consumes.

#ifndef UASR_NNET_H_
#define UASR_NNET_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uasr/common.h"
#include "uasr/tensor.h"

namespace uasr {

enum class Activation : uint32_t { kLinear = 0, kRelu = 1, kSoftmaxRows = 2 };

/// Parameters as a flat list of tensors, in a fixed per-network order.
using ParamRefs = std::vector<Tensor2 *>;
using ConstParamRefs = std::vector<const Tensor2 *>;

/// Zero tensors shaped like the given parameters.
std::vector<Tensor2> zeros_like(const ConstParamRefs &params);

// ---------------------------------------------------------------------------
// Dense

struct DenseLayer {
  Tensor2 weight;  // in x out
  Tensor2 bias;    // 1 x out
  Activation activation = Activation::kLinear;

  std::size_t in_dim() const { return weight.rows(); }
  std::size_t out_dim() const { return weight.cols(); }

  /// Glorot-uniform weights, zero bias.
  static DenseLayer init(std::size_t in, std::size_t out, Activation act,
                         Rng &rng);
};

struct DenseContext {
  Tensor2 input;
  Tensor2 output;  // post-activation
};

struct DenseResult {
  Tensor2 output;
  DenseContext context;
};

struct DenseGrads {
  Tensor2 weight;
  Tensor2 bias;
};

DenseResult dense_apply(const DenseLayer &layer, const Tensor2 &input);

/// Returns dLoss/dinput; accumulates parameter gradients into *grads when
/// non-null (grads must be shaped like the layer, e.g. from zero_grads).
Tensor2 dense_backward(const DenseLayer &layer, const DenseContext &ctx,
                       const Tensor2 &grad_output, DenseGrads *grads);

DenseGrads zero_grads(const DenseLayer &layer);

// ---------------------------------------------------------------------------
// Multi-kernel 1-D convolution

/// One filter bank.  weight row (j * in_channels + i) holds the taps for
/// input channel i at offset j - width / 2.
struct ConvBank {
  int width = 1;
  Tensor2 weight;  // (width * in) x out
  Tensor2 bias;    // 1 x out

  std::size_t out_channels() const { return weight.cols(); }
};

/// Same-length zero-padded convolution with several banks of odd width;
/// bank outputs are concatenated along the channel axis.
struct MultiKernelConv1d {
  std::size_t in_channels = 0;
  std::vector<ConvBank> banks;

  std::size_t out_channels() const;

  static MultiKernelConv1d init(std::size_t in_channels,
                                const std::vector<int> &widths,
                                std::size_t channels_per_bank, Rng &rng);
};

struct ConvGrads {
  std::vector<Tensor2> weight;
  std::vector<Tensor2> bias;
};

ConvGrads zero_grads(const MultiKernelConv1d &layer);

struct ConvResult {
  Tensor2 output;  // time x out_channels
  Tensor2 input;   // context for backward
};

ConvResult conv1d_apply(const MultiKernelConv1d &layer, const Tensor2 &input);

/// Forward pass; with_bias = false gives the linear part only.
Tensor2 conv1d_forward(const MultiKernelConv1d &layer, const Tensor2 &input,
                       bool with_bias = true);

/// Transpose of the linear part: maps an output gradient to the input.
Tensor2 conv1d_input_grad(const MultiKernelConv1d &layer,
                          const Tensor2 &grad_output);

/// Accumulates weight (and optionally bias) gradients for the given input /
/// output gradient pair.
void conv1d_param_grad(const MultiKernelConv1d &layer, const Tensor2 &input,
                       const Tensor2 &grad_output, ConvGrads *grads,
                       bool include_bias = true);

// ---------------------------------------------------------------------------
// Element-wise and row ops

/// Row-wise softmax with max subtraction.
Tensor2 softmax_rows(const Tensor2 &t);

/// Backward through a row softmax given its output y.
Tensor2 softmax_rows_backward(const Tensor2 &y, const Tensor2 &grad_output);

inline constexpr double kLeakySlope = 0.01;

Tensor2 leaky_relu(const Tensor2 &t, double slope = kLeakySlope);
/// Slope mask: 1 where t > 0, else slope.
Tensor2 leaky_relu_slopes(const Tensor2 &preact, double slope = kLeakySlope);

// ---------------------------------------------------------------------------
// Adam

struct AdamOptions {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::vector<Tensor2> m;
  std::vector<Tensor2> v;
  uint64_t step_count = 0;

  AdamState() = default;
  AdamState(const AdamOptions &opts, const ConstParamRefs &params);
};

/// Bias-corrected Adam update; increments step_count.
void adam_step(AdamState &state, const ParamRefs &params,
               std::span<const Tensor2> grads);

// ---------------------------------------------------------------------------
// Finite-difference gradient check

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;   // index into the parameter list
  std::size_t worst_entry = 0;   // flat index inside that tensor
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

/// Compares analytic gradients with central differences, one parameter entry
/// at a time.  Relative error is |a - n| / max(|a|, |n|, abs_floor).
/// fourth_order uses the five-point stencil, which tolerates a larger step
/// and so loses less to roundoff.
GradCheckReport gradient_check(const std::function<double()> &loss,
                               const ParamRefs &params,
                               std::span<const Tensor2> analytic,
                               double tolerance, double step = 1e-5,
                               double abs_floor = 1e-6,
                               bool fourth_order = false);

// ---------------------------------------------------------------------------
// Checkpoints
//
// Binary layout: the 7 bytes "UASR-NN", a version byte, u32 meta count,
// u32 meta values, u32 tensor count, then per tensor u32 rows, u32 cols and
// rows * cols little-endian IEEE-754 doubles.

inline constexpr uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  std::vector<uint32_t> meta;
  std::vector<Tensor2> tensors;

  friend bool operator==(const Checkpoint &, const Checkpoint &) = default;
};

std::string serialize_checkpoint(const Checkpoint &ckpt);
Checkpoint deserialize_checkpoint(const std::string &bytes);
void save_checkpoint(const std::string &path, const Checkpoint &ckpt);
Checkpoint load_checkpoint(const std::string &path);

}  // namespace uasr

#endif  // UASR_NNET_H_
