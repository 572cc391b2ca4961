// src/gan.cc

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

#include "uasr/gan.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <sstream>
#include <utility>

#include "uasr/io.h"

namespace uasr {

// ---------------------------------------------------------------------------
// Generator

Generator Generator::init(std::size_t feat_dim, int num_phonemes,
                          const std::vector<std::size_t> &hidden,
                          int context_window, Rng &rng) {
  if (feat_dim < 1) throw ConfigError("generator: feature dimension must be >= 1");
  if (num_phonemes < 2) throw ConfigError("generator: need at least 2 phonemes");
  if (context_window < 1 || context_window % 2 == 0)
    throw ConfigError("generator: context window must be odd and positive");
  Generator g;
  g.context_window = context_window;
  g.feat_dim = feat_dim;
  g.num_phonemes = num_phonemes;
  std::size_t in = feat_dim * context_window;
  for (std::size_t h : hidden) {
    if (h < 1) throw ConfigError("generator: hidden layer of size 0");
    g.layers.push_back(DenseLayer::init(in, h, Activation::kRelu, rng));
    in = h;
  }
  g.layers.push_back(
      DenseLayer::init(in, num_phonemes, Activation::kSoftmaxRows, rng));
  return g;
}

ParamRefs Generator::params() {
  ParamRefs out;
  for (auto &l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

ConstParamRefs Generator::params() const {
  ConstParamRefs out;
  for (const auto &l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

Checkpoint Generator::to_checkpoint() const {
  Checkpoint c;
  c.meta = {static_cast<uint32_t>(context_window), static_cast<uint32_t>(feat_dim),
            static_cast<uint32_t>(num_phonemes),
            static_cast<uint32_t>(layers.size())};
  for (const auto &l : layers) {
    c.meta.push_back(static_cast<uint32_t>(l.activation));
    c.tensors.push_back(l.weight);
    c.tensors.push_back(l.bias);
  }
  return c;
}

Generator Generator::from_checkpoint(const Checkpoint &c) {
  if (c.meta.size() < 4 || c.meta.size() != 4 + c.meta[3] ||
      c.tensors.size() != 2 * c.meta[3] || c.meta[3] == 0)
    throw ParseError("generator checkpoint: inconsistent layout");
  Generator g;
  g.context_window = static_cast<int>(c.meta[0]);
  g.feat_dim = c.meta[1];
  g.num_phonemes = static_cast<int>(c.meta[2]);
  std::size_t in = g.feat_dim * g.context_window;
  for (uint32_t i = 0; i < c.meta[3]; ++i) {
    const uint32_t act = c.meta[4 + i];
    if (act > static_cast<uint32_t>(Activation::kSoftmaxRows))
      throw ParseError("generator checkpoint: unknown activation");
    DenseLayer l{c.tensors[2 * i], c.tensors[2 * i + 1],
                 static_cast<Activation>(act)};
    if (l.weight.rows() != in || l.bias.rows() != 1 ||
        l.bias.cols() != l.weight.cols())
      throw ParseError("generator checkpoint: layer shape mismatch");
    in = l.weight.cols();
    g.layers.push_back(std::move(l));
  }
  if (in != static_cast<std::size_t>(g.num_phonemes) ||
      g.layers.back().activation != Activation::kSoftmaxRows)
    throw ParseError("generator checkpoint: bad output layer");
  return g;
}

Tensor2 context_inputs(const Utterance &u, std::span<const std::size_t> frames,
                       int context_window) {
  const std::size_t d = u.dim(), t_len = u.num_frames();
  const long half = context_window / 2;
  Tensor2 out(frames.size(), d * context_window);
  for (std::size_t r = 0; r < frames.size(); ++r) {
    double *o = out.row(r).data();
    for (long k = -half; k <= half; ++k) {
      const long src = std::clamp<long>(static_cast<long>(frames[r]) + k, 0,
                                        static_cast<long>(t_len) - 1);
      auto x = u.features.row(src);
      std::copy(x.begin(), x.end(), o + (k + half) * d);
    }
  }
  return out;
}

GeneratorPass generator_forward(const Generator &g, const Tensor2 &inputs) {
  GeneratorPass pass;
  const Tensor2 *x = &inputs;
  for (const auto &l : g.layers) {
    auto res = dense_apply(l, *x);
    pass.contexts.push_back(std::move(res.context));
    x = &pass.contexts.back().output;
  }
  pass.output = pass.contexts.back().output;
  return pass;
}

void generator_backward(const Generator &g, const GeneratorPass &pass,
                        const Tensor2 &grad_output, std::vector<Tensor2> *grads) {
  Tensor2 grad = grad_output;
  for (std::size_t i = g.layers.size(); i-- > 0;) {
    DenseGrads dg{std::move((*grads)[2 * i]), std::move((*grads)[2 * i + 1])};
    grad = dense_backward(g.layers[i], pass.contexts[i], grad, &dg);
    (*grads)[2 * i] = std::move(dg.weight);
    (*grads)[2 * i + 1] = std::move(dg.bias);
  }
}

Tensor2 classify_frames(const Generator &g, const Utterance &u) {
  if (u.dim() != g.feat_dim)
    throw ShapeError("classify_frames: generator expects dimension " +
                     std::to_string(g.feat_dim) + ", utterance '" + u.id +
                     "' has " + std::to_string(u.dim()));
  std::vector<std::size_t> frames(u.num_frames());
  for (std::size_t t = 0; t < frames.size(); ++t) frames[t] = t;
  return generator_forward(g, context_inputs(u, frames, g.context_window)).output;
}

std::vector<int> frame_argmax(const Tensor2 &y) {
  std::vector<int> out(y.rows());
  for (std::size_t t = 0; t < y.rows(); ++t) {
    auto r = y.row(t);
    out[t] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

std::vector<std::size_t> sample_segment_frames(const Segmentation &s, Rng &rng) {
  std::vector<std::size_t> out(s.num_segments());
  for (std::size_t l = 0; l < out.size(); ++l)
    out[l] = s.begin(l) + rng.uniform_int(s.length(l));
  return out;
}

GeneratedSequence sample_segments(const Tensor2 &y, const Segmentation &s,
                                  Rng &rng) {
  if (s.num_frames() != y.rows())
    throw ShapeError("sample_segments: segmentation does not cover the frames");
  GeneratedSequence g;
  g.sampled_frames = sample_segment_frames(s, rng);
  g.rows = Tensor2(g.sampled_frames.size(), y.cols());
  for (std::size_t l = 0; l < g.sampled_frames.size(); ++l) {
    auto src = y.row(g.sampled_frames[l]);
    std::copy(src.begin(), src.end(), g.rows.row(l).begin());
  }
  return g;
}

// ---------------------------------------------------------------------------
// Discriminator

Discriminator Discriminator::init(int num_phonemes, const std::vector<int> &widths1,
                                  std::size_t channels1,
                                  const std::vector<int> &widths2,
                                  std::size_t channels2, Rng &rng) {
  if (num_phonemes < 2) throw ConfigError("discriminator: need at least 2 phonemes");
  if (widths1.empty() || widths2.empty() || channels1 < 1 || channels2 < 1)
    throw ConfigError("discriminator: empty layer");
  Discriminator d;
  d.layer1 = MultiKernelConv1d::init(num_phonemes, widths1, channels1, rng);
  d.layer2 = MultiKernelConv1d::init(d.layer1.out_channels(), widths2, channels2, rng);
  const std::size_t c2 = d.layer2.out_channels();
  d.head_weight = Tensor2(1, c2);
  const double limit = std::sqrt(6.0 / (c2 + 1.0));
  for (double &v : d.head_weight.data()) v = rng.uniform(-limit, limit);
  d.head_bias = Tensor2(1, 1);
  return d;
}

ParamRefs Discriminator::params() {
  ParamRefs out;
  for (auto *layer : {&layer1, &layer2})
    for (auto &b : layer->banks) {
      out.push_back(&b.weight);
      out.push_back(&b.bias);
    }
  out.push_back(&head_weight);
  out.push_back(&head_bias);
  return out;
}

ConstParamRefs Discriminator::params() const {
  ConstParamRefs out;
  for (const auto *layer : {&layer1, &layer2})
    for (const auto &b : layer->banks) {
      out.push_back(&b.weight);
      out.push_back(&b.bias);
    }
  out.push_back(&head_weight);
  out.push_back(&head_bias);
  return out;
}

Checkpoint Discriminator::to_checkpoint() const {
  Checkpoint c;
  c.meta.push_back(static_cast<uint32_t>(layer1.in_channels));
  for (const auto *layer : {&layer1, &layer2}) {
    c.meta.push_back(static_cast<uint32_t>(layer->banks.size()));
    for (const auto &b : layer->banks) c.meta.push_back(b.width);
  }
  for (const Tensor2 *p : params()) c.tensors.push_back(*p);
  return c;
}

Discriminator Discriminator::from_checkpoint(const Checkpoint &c) {
  auto bad = [] { return ParseError("discriminator checkpoint: inconsistent layout"); };
  std::size_t pos = 0;
  auto next = [&]() -> uint32_t {
    if (pos >= c.meta.size()) throw bad();
    return c.meta[pos++];
  };
  Discriminator d;
  std::size_t in = next(), tensor = 0;
  for (auto *layer : {&d.layer1, &d.layer2}) {
    layer->in_channels = in;
    const uint32_t n_banks = next();
    if (n_banks == 0) throw bad();
    for (uint32_t b = 0; b < n_banks; ++b) {
      ConvBank bank;
      bank.width = static_cast<int>(next());
      if (tensor + 2 > c.tensors.size()) throw bad();
      bank.weight = c.tensors[tensor++];
      bank.bias = c.tensors[tensor++];
      if (bank.width < 1 || bank.width % 2 == 0 ||
          bank.weight.rows() != bank.width * in || bank.bias.rows() != 1 ||
          bank.bias.cols() != bank.weight.cols())
        throw bad();
      layer->banks.push_back(std::move(bank));
    }
    in = layer->out_channels();
  }
  if (pos != c.meta.size() || tensor + 2 != c.tensors.size()) throw bad();
  d.head_weight = c.tensors[tensor];
  d.head_bias = c.tensors[tensor + 1];
  if (d.head_weight.rows() != 1 || d.head_weight.cols() != in ||
      d.head_bias.rows() != 1 || d.head_bias.cols() != 1)
    throw bad();
  return d;
}

Tensor2 one_hot_rows(const PhonemeSequence &seq, int num_phonemes) {
  Tensor2 out(seq.size(), num_phonemes);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq[i] < 0 || seq[i] >= num_phonemes)
      throw ShapeError("one_hot_rows: phoneme id outside inventory");
    out(i, seq[i]) = 1.0;
  }
  return out;
}

Tensor2 pad_rows(const Tensor2 &rows, std::size_t max_len) {
  if (rows.rows() > max_len)
    throw ShapeError("sequence of length " + std::to_string(rows.rows()) +
                     " exceeds max_seq_len " + std::to_string(max_len));
  Tensor2 out(max_len, rows.cols());
  std::copy(rows.data().begin(), rows.data().end(), out.data().begin());
  return out;
}

namespace {

// Index of the first layer-2 parameter, and of the head weight.
std::size_t layer2_offset(const Discriminator &d) { return 2 * d.layer1.banks.size(); }
std::size_t head_offset(const Discriminator &d) {
  return layer2_offset(d) + 2 * d.layer2.banks.size();
}

void conv_param_grad_into(const MultiKernelConv1d &layer, const Tensor2 &input,
                          const Tensor2 &grad_output, std::vector<Tensor2> *grads,
                          std::size_t offset, bool include_bias) {
  ConvGrads cg;
  for (std::size_t b = 0; b < layer.banks.size(); ++b) {
    cg.weight.push_back(std::move((*grads)[offset + 2 * b]));
    cg.bias.push_back(std::move((*grads)[offset + 2 * b + 1]));
  }
  conv1d_param_grad(layer, input, grad_output, &cg, include_bias);
  for (std::size_t b = 0; b < layer.banks.size(); ++b) {
    (*grads)[offset + 2 * b] = std::move(cg.weight[b]);
    (*grads)[offset + 2 * b + 1] = std::move(cg.bias[b]);
  }
}

Tensor2 hadamard(const Tensor2 &a, const Tensor2 &b) {
  Tensor2 out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
  return out;
}

// dD/dA2 scaled: s2 * w / n, and the layer-1 output gradient s1 * C2^T E2.
void output_grads(const Discriminator &d, const CriticPass &pass, double scale,
                  Tensor2 *e2, Tensor2 *e1) {
  const double k = scale / static_cast<double>(pass.valid_len);
  *e2 = pass.slope2;
  for (std::size_t t = 0; t < e2->rows(); ++t) {
    auto r = e2->row(t);
    for (std::size_t c = 0; c < r.size(); ++c) r[c] *= d.head_weight(0, c) * k;
  }
  *e1 = hadamard(pass.slope1, conv1d_input_grad(d.layer2, *e2));
}

}  // namespace

CriticPass critic_forward(const Discriminator &d, const Tensor2 &p,
                          std::size_t valid_len) {
  if (p.cols() != d.layer1.in_channels)
    throw ShapeError("discriminate: input has " + std::to_string(p.cols()) +
                     " columns, expected " + std::to_string(d.layer1.in_channels));
  if (valid_len < 1 || valid_len > p.rows())
    throw ShapeError("discriminate: valid length " + std::to_string(valid_len) +
                     " outside [1, " + std::to_string(p.rows()) + "]");
  CriticPass pass;
  pass.padded_len = p.rows();
  pass.valid_len = valid_len;
  pass.input = p.row_range(0, valid_len);
  Tensor2 h1 = conv1d_forward(d.layer1, pass.input, true);
  pass.slope1 = leaky_relu_slopes(h1);
  pass.act1 = hadamard(h1, pass.slope1);
  Tensor2 h2 = conv1d_forward(d.layer2, pass.act1, true);
  pass.slope2 = leaky_relu_slopes(h2);
  pass.act2 = hadamard(h2, pass.slope2);
  double v = 0.0;
  for (std::size_t c = 0; c < pass.act2.cols(); ++c) {
    double m = 0.0;
    for (std::size_t t = 0; t < valid_len; ++t) m += pass.act2(t, c);
    v += d.head_weight(0, c) * m;
  }
  pass.value = v / static_cast<double>(valid_len) + d.head_bias(0, 0);
  if (!std::isfinite(pass.value))
    throw NumericError("discriminate: non-finite output");
  return pass;
}

Tensor2 critic_backward(const Discriminator &d, const CriticPass &pass,
                        double scale, std::vector<Tensor2> *grads) {
  Tensor2 e2, e1;
  output_grads(d, pass, scale, &e2, &e1);
  if (grads) {
    const std::size_t h = head_offset(d);
    const double k = scale / static_cast<double>(pass.valid_len);
    for (std::size_t c = 0; c < pass.act2.cols(); ++c) {
      double m = 0.0;
      for (std::size_t t = 0; t < pass.valid_len; ++t) m += pass.act2(t, c);
      (*grads)[h](0, c) += k * m;
    }
    (*grads)[h + 1](0, 0) += scale;
    conv_param_grad_into(d.layer2, pass.act1, e2, grads, layer2_offset(d), true);
    conv_param_grad_into(d.layer1, pass.input, e1, grads, 0, true);
  }
  Tensor2 g = conv1d_input_grad(d.layer1, e1);
  return pad_rows(g, pass.padded_len);
}

double discriminate(const Discriminator &d, const Tensor2 &p,
                    std::size_t valid_len) {
  return critic_forward(d, p, valid_len).value;
}

Tensor2 interpolate_pair(const Tensor2 &real_padded, const Tensor2 &gen_padded,
                         double u) {
  if (real_padded.rows() != gen_padded.rows() ||
      real_padded.cols() != gen_padded.cols())
    throw ShapeError("interpolate_pair: padded shapes differ");
  Tensor2 out(real_padded.rows(), real_padded.cols());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = u * real_padded.data()[i] + (1.0 - u) * gen_padded.data()[i];
  return out;
}

double penalty_term(const Discriminator &d, const Tensor2 &p,
                    std::size_t valid_len, double scale,
                    std::vector<Tensor2> *grads) {
  const CriticPass pass = critic_forward(d, p, valid_len);
  Tensor2 e2, e1;
  output_grads(d, pass, 1.0, &e2, &e1);
  const Tensor2 g = conv1d_input_grad(d.layer1, e1);
  const double norm = frobenius_norm(g);
  const double term = (norm - 1.0) * (norm - 1.0);
  if (!grads || norm == 0.0) return term;

  // d/dtheta of (|G| - 1)^2 = <R, dG/dtheta> with R = 2 (|G| - 1) G / |G|.
  // The leaky-ReLU masks are locally constant, so G is linear in each of
  // W1, W2 and the head weight, and biases do not enter it.
  Tensor2 r = g;
  r *= scale * 2.0 * (norm - 1.0) / norm;
  conv_param_grad_into(d.layer1, r, e1, grads, 0, false);
  const Tensor2 q1 = hadamard(pass.slope1, conv1d_forward(d.layer1, r, false));
  conv_param_grad_into(d.layer2, q1, e2, grads, layer2_offset(d), false);
  const Tensor2 f2 = conv1d_forward(d.layer2, q1, false);
  Tensor2 &gw = (*grads)[head_offset(d)];
  const double inv_n = 1.0 / static_cast<double>(valid_len);
  for (std::size_t t = 0; t < f2.rows(); ++t)
    for (std::size_t c = 0; c < f2.cols(); ++c)
      gw(0, c) += f2(t, c) * pass.slope2(t, c) * inv_n;
  return term;
}

double gradient_penalty(const Discriminator &d, const std::vector<Tensor2> &inter,
                        const std::vector<std::size_t> &valid_lens, double scale,
                        std::vector<Tensor2> *grads) {
  if (inter.empty()) throw ShapeError("gradient_penalty: empty batch");
  if (inter.size() != valid_lens.size())
    throw ShapeError("gradient_penalty: batch/length count mismatch");
  const double k = static_cast<double>(inter.size());
  double total = 0.0;
  for (std::size_t i = 0; i < inter.size(); ++i)
    total += penalty_term(d, inter[i], valid_lens[i], scale / k, grads);
  return total / k;
}

DiscriminatorLoss discriminator_loss(const Discriminator &d,
                                     const std::vector<Tensor2> &gen,
                                     const std::vector<Tensor2> &real,
                                     double alpha, std::span<const double> u,
                                     std::size_t max_seq_len,
                                     std::vector<Tensor2> *grads) {
  if (gen.empty() || real.empty()) throw ShapeError("discriminator_loss: empty batch");
  if (gen.size() != real.size() || u.size() != gen.size())
    throw ShapeError("discriminator_loss: batch sizes differ");
  const double k = static_cast<double>(gen.size());
  DiscriminatorLoss loss;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    const Tensor2 gp = pad_rows(gen[i], max_seq_len);
    const Tensor2 rp = pad_rows(real[i], max_seq_len);
    const CriticPass pg = critic_forward(d, gp, gen[i].rows());
    const CriticPass pr = critic_forward(d, rp, real[i].rows());
    loss.mean_gen += pg.value / k;
    loss.mean_real += pr.value / k;
    if (grads) {
      critic_backward(d, pg, 1.0 / k, grads);
      critic_backward(d, pr, -1.0 / k, grads);
    }
    const Tensor2 inter = interpolate_pair(rp, gp, u[i]);
    loss.penalty += penalty_term(d, inter, std::max(gen[i].rows(), real[i].rows()),
                                 alpha / k, grads) /
                    k;
  }
  loss.value = loss.mean_gen - loss.mean_real + alpha * loss.penalty;
  return loss;
}

std::vector<FramePair> sample_intra_pairs(const Segmentation &s,
                                          int pairs_per_segment, Rng &rng) {
  std::vector<FramePair> out;
  for (std::size_t l = 0; l < s.num_segments(); ++l) {
    const std::size_t n = s.length(l);
    if (n < 2) continue;
    for (int k = 0; k < pairs_per_segment; ++k) {
      const std::size_t i = rng.uniform_int(n);
      std::size_t j = rng.uniform_int(n - 1);
      if (j >= i) ++j;
      out.push_back({s.begin(l) + i, s.begin(l) + j});
    }
  }
  return out;
}

double intra_segment_loss(const std::vector<Tensor2> &y,
                          const std::vector<std::vector<FramePair>> &pairs,
                          std::vector<Tensor2> *grads) {
  if (y.empty()) throw ShapeError("intra_segment_loss: empty batch");
  if (y.size() != pairs.size())
    throw ShapeError("intra_segment_loss: batch/pair count mismatch");
  const double k = static_cast<double>(y.size());
  if (grads && grads->size() != y.size()) {
    grads->clear();
    for (const auto &m : y) grads->emplace_back(m.rows(), m.cols());
  }
  double total = 0.0;
  for (std::size_t b = 0; b < y.size(); ++b)
    for (const auto &[i, j] : pairs[b]) {
      if (i >= y[b].rows() || j >= y[b].rows())
        throw ShapeError("intra_segment_loss: frame index out of range");
      auto yi = y[b].row(i), yj = y[b].row(j);
      for (std::size_t c = 0; c < yi.size(); ++c) {
        const double diff = yi[c] - yj[c];
        total += diff * diff;
        if (grads) {
          (*grads)[b](i, c) += 2.0 * diff / k;
          (*grads)[b](j, c) -= 2.0 * diff / k;
        }
      }
    }
  return total / k;
}

double generator_loss(const Discriminator &d, const std::vector<Tensor2> &gen,
                      double l_intra, double lambda,
                      std::vector<Tensor2> *grad_gen) {
  if (gen.empty()) throw ShapeError("generator_loss: empty batch");
  const double k = static_cast<double>(gen.size());
  double mean = 0.0;
  if (grad_gen) grad_gen->clear();
  for (const auto &g : gen) {
    const CriticPass pass = critic_forward(d, g, g.rows());
    mean += pass.value / k;
    if (grad_gen) grad_gen->push_back(critic_backward(d, pass, -1.0 / k, nullptr));
  }
  return -mean + lambda * l_intra;
}

// ---------------------------------------------------------------------------
// Training

void GanConfig::validate() const {
  auto need = [](bool ok, const char *what) {
    if (!ok) throw ConfigError(std::string("gan: ") + what);
  };
  need(lambda >= 0.0 && std::isfinite(lambda), "lambda must be >= 0");
  need(alpha >= 0.0 && std::isfinite(alpha), "alpha must be >= 0");
  need(batch_size >= 1, "batch_size must be >= 1");
  need(d_steps_per_g_step >= 1, "d_steps must be >= 1");
  need(lr_g > 0.0 && lr_d > 0.0, "learning rates must be positive");
  need(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 &&
           adam_beta2 < 1.0,
       "Adam betas must be in [0, 1)");
  need(pairs_per_segment >= 1, "pairs_per_segment must be >= 1");
  need(epochs >= 0, "epochs must be >= 0");
  need(context_window >= 1 && context_window % 2 == 1,
       "context window must be odd and positive");
  need(d_channels1 >= 1 && d_channels2 >= 1, "discriminator channels must be >= 1");
  need(!d_widths1.empty() && !d_widths2.empty(), "discriminator widths missing");
}

std::string GanTrace::to_text() const {
  std::ostringstream out;
  for (const auto &r : records)
    out << r.step << ' ' << (r.discriminator ? "loss_D" : "loss_G") << ' '
        << format_double(r.value) << ' ' << format_double(r.wall_ms) << '\n';
  return out.str();
}

std::size_t length_percentile(const std::vector<PhonemeSequence> &seqs,
                              double pct) {
  if (seqs.empty()) throw ConfigError("length_percentile: no sequences");
  std::vector<std::size_t> len;
  for (const auto &s : seqs) len.push_back(s.size());
  std::sort(len.begin(), len.end());
  const double rank = std::ceil(pct / 100.0 * static_cast<double>(len.size()));
  const std::size_t idx = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::max(rank, 1.0)) - 1, 0, len.size() - 1);
  return len[idx];
}

// ---------------------------------------------------------------------------
// Length-matched text

LengthSampler::LengthSampler(const TextCorpus &corpus,
                             const std::vector<std::size_t> &indices)
    : corpus_(&corpus) {
  for (std::size_t i : indices) by_len_[corpus.sequences.at(i).size()].push_back(i);
}

bool LengthSampler::draw(std::size_t len, Rng &rng, PhonemeSequence *out) const {
  if (auto it = by_len_.find(len); it != by_len_.end()) {
    *out = corpus_->sequences[it->second[rng.uniform_int(it->second.size())]];
    return true;
  }
  std::size_t longer = 0;
  for (auto it = by_len_.upper_bound(len); it != by_len_.end(); ++it)
    longer += it->second.size();
  if (longer == 0) return false;
  std::size_t pick = rng.uniform_int(longer);
  auto it = by_len_.upper_bound(len);
  while (pick >= it->second.size()) pick -= (it++)->second.size();
  const auto &seq = corpus_->sequences[it->second[pick]];
  const std::size_t start = rng.uniform_int(seq.size() - len + 1);
  out->assign(seq.begin() + start, seq.begin() + start + len);
  return true;
}

namespace {

// Endless reshuffled pass over a fixed index set.
class Stream {
 public:
  Stream(std::vector<std::size_t> items, Rng &rng)
      : items_(std::move(items)), rng_(rng) {
    shuffle();
  }
  std::size_t next() {
    if (pos_ == items_.size()) shuffle();
    return items_[pos_++];
  }

 private:
  void shuffle() {
    for (std::size_t i = items_.size(); i > 1; --i)
      std::swap(items_[i - 1], items_[rng_.uniform_int(i)]);
    pos_ = 0;
  }
  std::vector<std::size_t> items_;
  Rng &rng_;
  std::size_t pos_ = 0;
};

std::vector<Tensor2> as_zeros(const ConstParamRefs &p) { return zeros_like(p); }

}  // namespace

double generator_objective(const Generator &g, const Discriminator &d,
                           const GeneratorBatch &batch, double lambda,
                           std::vector<Tensor2> *grads) {
  const std::size_t k = batch.utts.size();
  if (k == 0) throw ShapeError("generator_objective: empty batch");
  if (batch.sampled.size() != k || batch.pairs.size() != k)
    throw ShapeError("generator_objective: batch fields differ in size");
  // Full forward over each utterance, since the intra loss reaches frames
  // other than the sampled ones.  All frames go through one stacked pass.
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const Utterance *u : batch.utts) {
    offsets.push_back(total);
    total += u->num_frames();
  }
  Tensor2 x(total, g.feat_dim * g.context_window);
  for (std::size_t b = 0; b < k; ++b) {
    std::vector<std::size_t> frames(batch.utts[b]->num_frames());
    for (std::size_t t = 0; t < frames.size(); ++t) frames[t] = t;
    const Tensor2 part = context_inputs(*batch.utts[b], frames, g.context_window);
    std::copy(part.data().begin(), part.data().end(), x.row(offsets[b]).begin());
  }
  const GeneratorPass pass = generator_forward(g, x);
  std::vector<Tensor2> ys, gen;
  for (std::size_t b = 0; b < k; ++b) {
    ys.push_back(pass.output.row_range(offsets[b], offsets[b] + batch.utts[b]->num_frames()));
    Tensor2 rows(batch.sampled[b].size(), g.num_phonemes);
    for (std::size_t l = 0; l < batch.sampled[b].size(); ++l) {
      auto src = ys[b].row(batch.sampled[b][l]);
      std::copy(src.begin(), src.end(), rows.row(l).begin());
    }
    gen.push_back(std::move(rows));
  }
  std::vector<Tensor2> grad_y, grad_gen;
  const double l_intra = intra_segment_loss(ys, batch.pairs, grads ? &grad_y : nullptr);
  const double loss = generator_loss(d, gen, l_intra, lambda, grads ? &grad_gen : nullptr);
  if (!grads) return loss;
  Tensor2 grad_out(pass.output.rows(), pass.output.cols());
  for (std::size_t b = 0; b < k; ++b) {
    for (std::size_t t = 0; t < grad_y[b].rows(); ++t) {
      auto dst = grad_out.row(offsets[b] + t);
      auto src = grad_y[b].row(t);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = lambda * src[c];
    }
    for (std::size_t l = 0; l < batch.sampled[b].size(); ++l) {
      auto dst = grad_out.row(offsets[b] + batch.sampled[b][l]);
      auto src = grad_gen[b].row(l);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
  }
  generator_backward(g, pass, grad_out, grads);
  return loss;
}

GanModel train_gan(const std::vector<Utterance> &utts,
                   const std::vector<Segmentation> &segs,
                   const TextCorpus &real, const TextCorpus &augmented,
                   int num_phonemes, const GanConfig &cfg, GanTrace *trace,
                   const Generator *warm_start) {
  cfg.validate();
  if (utts.empty()) throw ConfigError("train_gan: empty acoustic corpus");
  if (real.sequences.empty()) throw ConfigError("train_gan: empty text corpus");
  if (segs.size() != utts.size())
    throw ConfigError("train_gan: need one segmentation per utterance");
  real.validate(num_phonemes);
  augmented.validate(num_phonemes);
  const std::size_t dim = utts[0].dim();
  for (std::size_t i = 0; i < utts.size(); ++i) {
    if (utts[i].dim() != dim) throw ShapeError("train_gan: inconsistent feature dims");
    if (segs[i].num_frames() != utts[i].num_frames())
      throw ShapeError("train_gan: segmentation of '" + utts[i].id +
                       "' does not match its frames");
  }

  GanTrace local;
  local.max_seq_len =
      cfg.max_seq_len > 0 ? cfg.max_seq_len : length_percentile(real.sequences, 95.0);
  const std::size_t max_len = local.max_seq_len;
  std::vector<std::size_t> ac_idx, real_idx, aug_idx;
  for (std::size_t i = 0; i < utts.size(); ++i)
    if (segs[i].num_segments() <= max_len) ac_idx.push_back(i);
  for (std::size_t i = 0; i < real.sequences.size(); ++i)
    if (real.sequences[i].size() <= max_len) real_idx.push_back(i);
  for (std::size_t i = 0; i < augmented.sequences.size(); ++i)
    if (augmented.sequences[i].size() <= max_len) aug_idx.push_back(i);
  local.excluded_acoustic = utts.size() - ac_idx.size();
  local.excluded_real = real.sequences.size() + augmented.sequences.size() -
                        real_idx.size() - aug_idx.size();
  if (ac_idx.empty() || real_idx.empty())
    throw ConfigError("train_gan: no sequences within max_seq_len " +
                      std::to_string(max_len));

  Rng init_rng(derive_seed(cfg.seed, SeedStage::kGanInit));
  Rng rng(derive_seed(cfg.seed, SeedStage::kGanTrain));
  GanModel model;
  if (warm_start) {
    if (warm_start->feat_dim != dim || warm_start->num_phonemes != num_phonemes)
      throw ConfigError("train_gan: warm-start generator does not match the data");
    model.generator = *warm_start;
  } else {
    model.generator =
        Generator::init(dim, num_phonemes, cfg.hidden, cfg.context_window, init_rng);
  }
  model.discriminator = Discriminator::init(num_phonemes, cfg.d_widths1,
                                            cfg.d_channels1, cfg.d_widths2,
                                            cfg.d_channels2, init_rng);
  Generator &g = model.generator;
  Discriminator &d = model.discriminator;
  AdamOptions g_opts{cfg.lr_g, cfg.adam_beta1, cfg.adam_beta2, 1e-8};
  AdamOptions d_opts{cfg.lr_d, cfg.adam_beta1, cfg.adam_beta2, 1e-8};
  AdamState g_adam(g_opts, std::as_const(g).params());
  AdamState d_adam(d_opts, std::as_const(d).params());

  Stream ac_stream(ac_idx, rng), real_stream(real_idx, rng);
  std::unique_ptr<Stream> aug_stream;
  if (!aug_idx.empty()) aug_stream = std::make_unique<Stream>(aug_idx, rng);
  const LengthSampler real_by_len(real, real_idx), aug_by_len(augmented, aug_idx);

  const std::size_t k = cfg.batch_size;
  const std::size_t cycles =
      static_cast<std::size_t>(cfg.epochs) * ((ac_idx.size() + k - 1) / k);
  const auto t0 = std::chrono::steady_clock::now();
  uint64_t step = 0;
  auto record = [&](bool is_d, double value) {
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    local.records.push_back({++step, is_d, value, ms});
  };

  // Generator inputs for a batch, stacked; offsets[b] is utterance b's first row.
  auto stack_inputs = [&](const std::vector<std::size_t> &batch,
                          const std::vector<std::vector<std::size_t>> &frames,
                          std::vector<std::size_t> *offsets) {
    std::size_t total = 0;
    offsets->clear();
    for (const auto &f : frames) {
      offsets->push_back(total);
      total += f.size();
    }
    Tensor2 x(total, dim * g.context_window);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      Tensor2 part = context_inputs(utts[batch[b]], frames[b], g.context_window);
      std::copy(part.data().begin(), part.data().end(),
                x.row((*offsets)[b]).begin());
    }
    return x;
  };

  for (std::size_t cycle = 0; cycle < cycles; ++cycle) {
    for (int ds = 0; ds < cfg.d_steps_per_g_step; ++ds) {
      std::vector<std::size_t> batch(k);
      std::vector<std::vector<std::size_t>> frames(k);
      for (std::size_t b = 0; b < k; ++b) {
        batch[b] = ac_stream.next();
        frames[b] = sample_segment_frames(segs[batch[b]], rng);
      }
      std::vector<std::size_t> offsets;
      const Tensor2 y = generator_forward(g, stack_inputs(batch, frames, &offsets)).output;
      std::vector<Tensor2> gen, reals;
      for (std::size_t b = 0; b < k; ++b)
        gen.push_back(y.row_range(offsets[b], offsets[b] + frames[b].size()));
      for (std::size_t b = 0; b < k; ++b) {
        const bool use_aug = aug_stream && b >= k / 2;
        if (cfg.match_lengths) {
          // The generator cannot change sequence lengths, so lengths are
          // matched and the critic gets no length signal to exploit.
          PhonemeSequence seq;
          const std::size_t len = gen[b].rows();
          if (!(use_aug && aug_by_len.draw(len, rng, &seq)) &&
              !real_by_len.draw(len, rng, &seq))
            throw ConfigError("train_gan: no text sequence of length >= " +
                              std::to_string(len));
          reals.push_back(one_hot_rows(seq, num_phonemes));
          continue;
        }
        const auto &seq = use_aug ? augmented.sequences[aug_stream->next()]
                                  : real.sequences[real_stream.next()];
        reals.push_back(one_hot_rows(seq, num_phonemes));
      }
      std::vector<double> u(k);
      for (double &v : u) v = rng.uniform();
      std::vector<Tensor2> grads = as_zeros(std::as_const(d).params());
      const DiscriminatorLoss loss =
          discriminator_loss(d, gen, reals, cfg.alpha, u, max_len, &grads);
      adam_step(d_adam, d.params(), grads);
      record(true, loss.value);
    }

    // Generator step.
    GeneratorBatch gb;
    for (std::size_t b = 0; b < k; ++b) {
      const std::size_t idx = ac_stream.next();
      gb.utts.push_back(&utts[idx]);
      gb.sampled.push_back(sample_segment_frames(segs[idx], rng));
      gb.pairs.push_back(sample_intra_pairs(segs[idx], cfg.pairs_per_segment, rng));
    }
    std::vector<Tensor2> grads = as_zeros(std::as_const(g).params());
    const double lg = generator_objective(g, d, gb, cfg.lambda, &grads);
    adam_step(g_adam, g.params(), grads);
    record(false, lg);
  }
  if (trace) *trace = std::move(local);
  return model;
}

// ---------------------------------------------------------------------------
// Inference

PhonemeSequence infer_segment_vote(const Tensor2 &y, const Segmentation &s) {
  if (s.num_frames() != y.rows())
    throw ShapeError("infer_segment_vote: segmentation does not cover the frames");
  const std::vector<int> arg = frame_argmax(y);
  PhonemeSequence out;
  for (std::size_t l = 0; l < s.num_segments(); ++l) {
    int best_id = -1;
    double best_p = -1.0;
    for (std::size_t t = s.begin(l); t < s.end(l); ++t) {
      const double p = y(t, arg[t]);
      if (p > best_p || (p == best_p && arg[t] < best_id)) {
        best_p = p;
        best_id = arg[t];
      }
    }
    out.push_back(best_id);
  }
  return out;
}

std::vector<PhonemeSequence> transcribe_corpus(
    const Generator &g, const std::vector<Utterance> &utts,
    const std::vector<Segmentation> &segs, TranscribeMode mode,
    const NGramLm *lm, const DecodeConfig &decode, double self_loop) {
  std::vector<PhonemeSequence> out;
  out.reserve(utts.size());
  if (mode == TranscribeMode::kSegmentVote) {
    if (segs.size() != utts.size())
      throw ConfigError("transcribe: segment-vote mode needs one segmentation per utterance");
    for (std::size_t i = 0; i < utts.size(); ++i)
      out.push_back(infer_segment_vote(classify_frames(g, utts[i]), segs[i]));
    return out;
  }
  if (!lm) throw ConfigError("transcribe: hmm-decode mode needs a language model");
  const HmmTopology topo{g.num_phonemes, 1, self_loop};
  for (const auto &u : utts) {
    Tensor2 e = classify_frames(g, u);
    for (double &v : e.data()) v = std::log(std::max(v, 1e-300));
    try {
      out.push_back(decode_viterbi_lm_scores(topo, e, *lm, decode).phonemes);
    } catch (const NumericError &err) {
      throw NumericError("utterance '" + u.id + "': " + err.what());
    }
  }
  return out;
}

}  // namespace uasr
