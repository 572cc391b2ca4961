// src/nnet.cc

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

#include "uasr/nnet.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace uasr {

std::vector<Tensor2> zeros_like(const ConstParamRefs &params) {
  std::vector<Tensor2> out;
  out.reserve(params.size());
  for (const Tensor2 *p : params) out.emplace_back(p->rows(), p->cols());
  return out;
}

namespace {

void glorot_fill(Tensor2 &w, double fan_in, double fan_out, Rng &rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (double &v : w.data()) v = rng.uniform(-limit, limit);
}

void check_finite(const Tensor2 &t, const char *where) {
  if (!t.all_finite())
    throw NumericError(std::string(where) + ": non-finite value");
}

}  // namespace

// ---------------------------------------------------------------------------
// Dense

DenseLayer DenseLayer::init(std::size_t in, std::size_t out, Activation act,
                            Rng &rng) {
  DenseLayer layer{Tensor2(in, out), Tensor2(1, out), act};
  glorot_fill(layer.weight, static_cast<double>(in), static_cast<double>(out),
              rng);
  return layer;
}

DenseGrads zero_grads(const DenseLayer &layer) {
  return {Tensor2(layer.weight.rows(), layer.weight.cols()),
          Tensor2(1, layer.bias.cols())};
}

DenseResult dense_apply(const DenseLayer &layer, const Tensor2 &input) {
  if (input.cols() != layer.in_dim())
    throw ShapeError("dense_apply: input has " + std::to_string(input.cols()) +
                     " columns, layer expects " +
                     std::to_string(layer.in_dim()));
  Tensor2 z = matmul(input, layer.weight);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias(0, c);
  }
  switch (layer.activation) {
    case Activation::kLinear:
      break;
    case Activation::kRelu:
      for (double &v : z.data()) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::kSoftmaxRows:
      z = softmax_rows(z);
      break;
  }
  check_finite(z, "dense_apply");
  DenseResult res;
  res.output = z;
  res.context.input = input;
  res.context.output = std::move(z);
  return res;
}

Tensor2 dense_backward(const DenseLayer &layer, const DenseContext &ctx,
                       const Tensor2 &grad_output, DenseGrads *grads) {
  if (grad_output.rows() != ctx.output.rows() ||
      grad_output.cols() != ctx.output.cols())
    throw ShapeError("dense_backward: gradient shape mismatch");
  Tensor2 gz;
  switch (layer.activation) {
    case Activation::kLinear:
      gz = grad_output;
      break;
    case Activation::kRelu:
      gz = grad_output;
      for (std::size_t i = 0; i < gz.size(); ++i)
        if (!(ctx.output.data()[i] > 0.0)) gz.data()[i] = 0.0;
      break;
    case Activation::kSoftmaxRows:
      gz = softmax_rows_backward(ctx.output, grad_output);
      break;
  }
  if (grads) {
    grads->weight += matmul_tn(ctx.input, gz);
    for (std::size_t r = 0; r < gz.rows(); ++r)
      for (std::size_t c = 0; c < gz.cols(); ++c) grads->bias(0, c) += gz(r, c);
  }
  return matmul_nt(gz, layer.weight);
}

// ---------------------------------------------------------------------------
// Convolution

std::size_t MultiKernelConv1d::out_channels() const {
  std::size_t n = 0;
  for (const auto &b : banks) n += b.out_channels();
  return n;
}

MultiKernelConv1d MultiKernelConv1d::init(std::size_t in_channels,
                                          const std::vector<int> &widths,
                                          std::size_t channels_per_bank,
                                          Rng &rng) {
  MultiKernelConv1d layer;
  layer.in_channels = in_channels;
  for (int w : widths) {
    if (w < 1 || w % 2 == 0)
      throw ConfigError("conv kernel widths must be odd and positive");
    ConvBank bank{w, Tensor2(w * in_channels, channels_per_bank),
                  Tensor2(1, channels_per_bank)};
    glorot_fill(bank.weight, static_cast<double>(w * in_channels),
                static_cast<double>(w * channels_per_bank), rng);
    layer.banks.push_back(std::move(bank));
  }
  return layer;
}

ConvGrads zero_grads(const MultiKernelConv1d &layer) {
  ConvGrads g;
  for (const auto &b : layer.banks) {
    g.weight.emplace_back(b.weight.rows(), b.weight.cols());
    g.bias.emplace_back(1, b.bias.cols());
  }
  return g;
}

Tensor2 conv1d_forward(const MultiKernelConv1d &layer, const Tensor2 &input,
                       bool with_bias) {
  if (input.cols() != layer.in_channels)
    throw ShapeError("conv1d: input has " + std::to_string(input.cols()) +
                     " channels, layer expects " +
                     std::to_string(layer.in_channels));
  const std::size_t t_len = input.rows(), in = layer.in_channels;
  Tensor2 out(t_len, layer.out_channels());
  std::size_t col0 = 0;
  for (const auto &bank : layer.banks) {
    const std::size_t n_out = bank.out_channels();
    const long half = bank.width / 2;
    for (std::size_t t = 0; t < t_len; ++t) {
      double *o = out.row(t).data() + col0;
      if (with_bias)
        for (std::size_t c = 0; c < n_out; ++c) o[c] = bank.bias(0, c);
      for (int j = 0; j < bank.width; ++j) {
        const long s = static_cast<long>(t) + j - half;
        if (s < 0 || s >= static_cast<long>(t_len)) continue;
        const double *x = input.row(s).data();
        for (std::size_t i = 0; i < in; ++i) {
          const double xi = x[i];
          if (xi == 0.0) continue;
          const double *w = bank.weight.row(j * in + i).data();
          for (std::size_t c = 0; c < n_out; ++c) o[c] += xi * w[c];
        }
      }
    }
    col0 += n_out;
  }
  return out;
}

ConvResult conv1d_apply(const MultiKernelConv1d &layer, const Tensor2 &input) {
  ConvResult res{conv1d_forward(layer, input, true), input};
  check_finite(res.output, "conv1d_apply");
  return res;
}

Tensor2 conv1d_input_grad(const MultiKernelConv1d &layer,
                          const Tensor2 &grad_output) {
  if (grad_output.cols() != layer.out_channels())
    throw ShapeError("conv1d_input_grad: gradient has wrong channel count");
  const std::size_t t_len = grad_output.rows(), in = layer.in_channels;
  Tensor2 gin(t_len, in);
  std::size_t col0 = 0;
  for (const auto &bank : layer.banks) {
    const std::size_t n_out = bank.out_channels();
    const long half = bank.width / 2;
    for (std::size_t t = 0; t < t_len; ++t) {
      const double *g = grad_output.row(t).data() + col0;
      for (int j = 0; j < bank.width; ++j) {
        const long s = static_cast<long>(t) + j - half;
        if (s < 0 || s >= static_cast<long>(t_len)) continue;
        double *gi = gin.row(s).data();
        for (std::size_t i = 0; i < in; ++i) {
          const double *w = bank.weight.row(j * in + i).data();
          double acc = 0.0;
          for (std::size_t c = 0; c < n_out; ++c) acc += g[c] * w[c];
          gi[i] += acc;
        }
      }
    }
    col0 += n_out;
  }
  return gin;
}

void conv1d_param_grad(const MultiKernelConv1d &layer, const Tensor2 &input,
                       const Tensor2 &grad_output, ConvGrads *grads,
                       bool include_bias) {
  if (input.rows() != grad_output.rows() || input.cols() != layer.in_channels ||
      grad_output.cols() != layer.out_channels())
    throw ShapeError("conv1d_param_grad: shape mismatch");
  const std::size_t t_len = input.rows(), in = layer.in_channels;
  std::size_t col0 = 0;
  for (std::size_t b = 0; b < layer.banks.size(); ++b) {
    const auto &bank = layer.banks[b];
    Tensor2 &gw = grads->weight[b];
    Tensor2 &gb = grads->bias[b];
    const std::size_t n_out = bank.out_channels();
    const long half = bank.width / 2;
    for (std::size_t t = 0; t < t_len; ++t) {
      const double *g = grad_output.row(t).data() + col0;
      if (include_bias)
        for (std::size_t c = 0; c < n_out; ++c) gb(0, c) += g[c];
      for (int j = 0; j < bank.width; ++j) {
        const long s = static_cast<long>(t) + j - half;
        if (s < 0 || s >= static_cast<long>(t_len)) continue;
        const double *x = input.row(s).data();
        for (std::size_t i = 0; i < in; ++i) {
          const double xi = x[i];
          if (xi == 0.0) continue;
          double *w = gw.row(j * in + i).data();
          for (std::size_t c = 0; c < n_out; ++c) w[c] += xi * g[c];
        }
      }
    }
    col0 += n_out;
  }
}

// ---------------------------------------------------------------------------
// Row ops

Tensor2 softmax_rows(const Tensor2 &t) {
  Tensor2 out(t.rows(), t.cols());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto in = t.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      z += o[c];
    }
    for (double &v : o) v /= z;
  }
  return out;
}

Tensor2 softmax_rows_backward(const Tensor2 &y, const Tensor2 &grad_output) {
  Tensor2 gz(y.rows(), y.cols());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto yr = y.row(r);
    auto gr = grad_output.row(r);
    double dot = 0.0;
    for (std::size_t c = 0; c < yr.size(); ++c) dot += yr[c] * gr[c];
    for (std::size_t c = 0; c < yr.size(); ++c)
      gz(r, c) = yr[c] * (gr[c] - dot);
  }
  return gz;
}

Tensor2 leaky_relu(const Tensor2 &t, double slope) {
  Tensor2 out = t;
  for (double &v : out.data())
    if (!(v > 0.0)) v *= slope;
  return out;
}

Tensor2 leaky_relu_slopes(const Tensor2 &preact, double slope) {
  Tensor2 out(preact.rows(), preact.cols());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = preact.data()[i] > 0.0 ? 1.0 : slope;
  return out;
}

// ---------------------------------------------------------------------------
// Adam

AdamState::AdamState(const AdamOptions &opts, const ConstParamRefs &params)
    : options(opts), m(zeros_like(params)), v(zeros_like(params)) {}

void adam_step(AdamState &state, const ParamRefs &params,
               std::span<const Tensor2> grads) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ShapeError("adam_step: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i]->size() != grads[i].size() ||
        params[i]->size() != state.m[i].size())
      throw ShapeError("adam_step: shape mismatch at parameter " +
                       std::to_string(i));
  const auto &o = state.options;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g[k];
      v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p[k] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Gradient check

GradCheckReport gradient_check(const std::function<double()> &loss,
                               const ParamRefs &params,
                               std::span<const Tensor2> analytic,
                               double tolerance, double step,
                               double abs_floor, bool fourth_order) {
  if (params.size() != analytic.size())
    throw ShapeError("gradient_check: parameter/gradient count mismatch");
  GradCheckReport rep;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    if (p.size() != analytic[i].size())
      throw ShapeError("gradient_check: shape mismatch");
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double orig = p[k];
      auto at = [&](double delta) {
        p[k] = orig + delta;
        const double v = loss();
        p[k] = orig;
        return v;
      };
      const double numeric =
          fourth_order
              ? (8.0 * (at(step) - at(-step)) - (at(2.0 * step) - at(-2.0 * step))) /
                    (12.0 * step)
              : (at(step) - at(-step)) / (2.0 * step);
      const double a = analytic[i].data()[k];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++rep.checked;
      if (rel > rep.max_rel_error || !std::isfinite(rel)) {
        rep.max_rel_error = rel;
        rep.worst_param = i;
        rep.worst_entry = k;
        rep.worst_analytic = a;
        rep.worst_numeric = numeric;
      }
    }
  }
  rep.passed = rep.max_rel_error <= tolerance;
  return rep;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[7] = {'U', 'A', 'S', 'R', '-', 'N', 'N'};

void put_u32(std::string &out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string &out, double d) {
  const uint64_t v = std::bit_cast<uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string &bytes) : bytes_(bytes) {}
  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(bytes_[pos_++]);
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<uint8_t>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  double f64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(static_cast<uint8_t>(bytes_[pos_++])) << (8 * i);
    return std::bit_cast<double>(v);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw ParseError("checkpoint truncated");
  }
  const std::string &bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint &ckpt) {
  std::string out(kMagic, sizeof(kMagic));
  out.push_back(static_cast<char>(kCheckpointVersion));
  put_u32(out, static_cast<uint32_t>(ckpt.meta.size()));
  for (uint32_t m : ckpt.meta) put_u32(out, m);
  put_u32(out, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto &t : ckpt.tensors) {
    put_u32(out, static_cast<uint32_t>(t.rows()));
    put_u32(out, static_cast<uint32_t>(t.cols()));
    for (double v : t.data()) put_f64(out, v);
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string &bytes) {
  if (bytes.size() < sizeof(kMagic) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw ParseError("not a UASR-NN checkpoint (bad magic)");
  Reader r(bytes);
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.u8();
  const uint8_t version = r.u8();
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  const uint32_t n_meta = r.u32();
  for (uint32_t i = 0; i < n_meta; ++i) ckpt.meta.push_back(r.u32());
  const uint32_t n_tensors = r.u32();
  for (uint32_t i = 0; i < n_tensors; ++i) {
    const uint32_t rows = r.u32(), cols = r.u32();
    Tensor2 t(rows, cols);
    for (double &v : t.data()) v = r.f64();
    ckpt.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw ParseError("checkpoint has trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::string &path, const Checkpoint &ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  const std::string bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace uasr
