// tests/oracles.h

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

// Straightforward re-implementations used as test oracles.  Nothing here
// calls into the library's numeric code; inputs are plain nested vectors.

#ifndef UASR_TESTS_ORACLES_H_
#define UASR_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "uasr/gan.h"
#include "uasr/hmm.h"
#include "uasr/ngram.h"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const uasr::Tensor2 &t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
  return m;
}

inline double lrelu(double x) { return x > 0 ? x : 0.01 * x; }
inline double lrelu_d(double x) { return x > 0 ? 1.0 : 0.01; }

// Same-length convolution, written per output element.
inline Mat conv(const uasr::MultiKernelConv1d &layer, const Mat &x) {
  const long t_len = static_cast<long>(x.size());
  const std::size_t in = layer.in_channels;
  Mat out(x.size());
  for (long t = 0; t < t_len; ++t) {
    for (const auto &bank : layer.banks) {
      for (std::size_t c = 0; c < bank.weight.cols(); ++c) {
        double acc = bank.bias(0, c);
        for (int j = 0; j < bank.width; ++j) {
          const long s = t + j - bank.width / 2;
          if (s < 0 || s >= t_len) continue;
          for (std::size_t i = 0; i < in; ++i) acc += bank.weight(j * in + i, c) * x[s][i];
        }
        out[t].push_back(acc);
      }
    }
  }
  return out;
}

// Transpose of the linear part of conv, per input element.
inline Mat conv_t(const uasr::MultiKernelConv1d &layer, const Mat &g) {
  const long t_len = static_cast<long>(g.size());
  const std::size_t in = layer.in_channels;
  Mat out(g.size(), std::vector<double>(in, 0.0));
  for (long s = 0; s < t_len; ++s)
    for (std::size_t i = 0; i < in; ++i) {
      double acc = 0.0;
      std::size_t col0 = 0;
      for (const auto &bank : layer.banks) {
        for (int j = 0; j < bank.width; ++j) {
          const long t = s - j + bank.width / 2;
          if (t < 0 || t >= t_len) continue;
          for (std::size_t c = 0; c < bank.weight.cols(); ++c)
            acc += bank.weight(j * in + i, c) * g[t][col0 + c];
        }
        col0 += bank.weight.cols();
      }
      out[s][i] = acc;
    }
  return out;
}

struct Critic {
  double value;
  Mat input_grad;  // n x M
};

inline Critic critic(const uasr::Discriminator &d, const Mat &p, std::size_t n) {
  Mat x(p.begin(), p.begin() + n);
  Mat h1 = conv(d.layer1, x), a1 = h1;
  for (auto &r : a1)
    for (double &v : r) v = lrelu(v);
  Mat h2 = conv(d.layer2, a1);
  double value = d.head_bias(0, 0);
  Mat g2 = h2;
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < h2[t].size(); ++c) {
      value += d.head_weight(0, c) * lrelu(h2[t][c]) / static_cast<double>(n);
      g2[t][c] = d.head_weight(0, c) / static_cast<double>(n) * lrelu_d(h2[t][c]);
    }
  Mat g1 = conv_t(d.layer2, g2);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < g1[t].size(); ++c) g1[t][c] *= lrelu_d(h1[t][c]);
  return {value, conv_t(d.layer1, g1)};
}

inline Mat pad(const Mat &m, std::size_t len, std::size_t cols) {
  Mat out(len, std::vector<double>(cols, 0.0));
  for (std::size_t t = 0; t < m.size(); ++t) out[t] = m[t];
  return out;
}

inline double penalty(const uasr::Discriminator &d, const Mat &p, std::size_t n) {
  const Critic c = critic(d, p, n);
  double sq = 0.0;
  for (const auto &r : c.input_grad)
    for (double v : r) sq += v * v;
  const double norm = std::sqrt(sq);
  return (norm - 1.0) * (norm - 1.0);
}

inline double discriminator_loss(const uasr::Discriminator &d,
                                 const std::vector<Mat> &gen,
                                 const std::vector<Mat> &real, double alpha,
                                 const std::vector<double> &u, std::size_t max_len) {
  const std::size_t k = gen.size(), m = gen[0][0].size();
  double sum_gen = 0.0, sum_real = 0.0, sum_gp = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sum_gen += critic(d, pad(gen[i], max_len, m), gen[i].size()).value;
    sum_real += critic(d, pad(real[i], max_len, m), real[i].size()).value;
    const Mat g = pad(gen[i], max_len, m), r = pad(real[i], max_len, m);
    Mat inter(max_len, std::vector<double>(m));
    for (std::size_t t = 0; t < max_len; ++t)
      for (std::size_t c = 0; c < m; ++c) inter[t][c] = u[i] * r[t][c] + (1 - u[i]) * g[t][c];
    sum_gp += penalty(d, inter, std::max(gen[i].size(), real[i].size()));
  }
  return sum_gen / k - sum_real / k + alpha * sum_gp / k;
}

inline double intra_loss(const std::vector<Mat> &y,
                         const std::vector<std::vector<uasr::FramePair>> &pairs) {
  double total = 0.0;
  for (std::size_t b = 0; b < y.size(); ++b)
    for (const auto &pr : pairs[b])
      for (std::size_t c = 0; c < y[b][pr[0]].size(); ++c)
        total += std::pow(y[b][pr[0]][c] - y[b][pr[1]][c], 2);
  return total / static_cast<double>(y.size());
}

inline double generator_loss(const uasr::Discriminator &d, const std::vector<Mat> &gen,
                             double l_intra, double lambda) {
  double sum = 0.0;
  for (const auto &g : gen) sum += critic(d, g, g.size()).value;
  return -sum / static_cast<double>(gen.size()) + lambda * l_intra;
}

// Unit-cost edit distance, textbook recurrence.
inline std::size_t edit_distance(const std::vector<int> &a, const std::vector<int> &b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      d[i][j] = std::min({sub, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  return d[a.size()][b.size()];
}

// Best path over every state sequence of the expanded chain, by enumeration
// of per-frame state assignments.  Returns -inf if none is valid.
inline double brute_force_align(const uasr::HmmTopology &topo, const uasr::Tensor2 &em,
                                const std::vector<int> &trans) {
  const std::size_t t_len = em.rows();
  const std::size_t n = trans.size() * topo.states_per_phoneme;
  double best = -std::numeric_limits<double>::infinity();
  // Each path is a non-decreasing chain position sequence from 0 to n-1
  // with steps of 0 or 1: choose which frames advance.
  if (t_len < n) return best;
  for (unsigned mask = 0; mask < (1u << (t_len - 1)); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != n - 1) continue;
    std::size_t j = 0;
    double s = em(0, topo.state_index(trans[0], 0));
    for (std::size_t t = 1; t < t_len; ++t) {
      const bool adv = (mask >> (t - 1)) & 1u;
      if (adv) ++j;
      s += adv ? std::log(1 - topo.self_loop) : std::log(topo.self_loop);
      s += em(t, topo.state_index(trans[j / topo.states_per_phoneme],
                                  static_cast<int>(j % topo.states_per_phoneme)));
    }
    best = std::max(best, s);
  }
  return best;
}

}  // namespace oracle

#endif  // UASR_TESTS_ORACLES_H_
