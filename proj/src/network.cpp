/* Copyright 2026 The Forge Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "forge/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "forge/error.hpp"
#include "forge/hash.hpp"

namespace forge {

int argmax(std::span<const float> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = static_cast<int>(i);
  return best;
}

float cross_entropy(std::span<const float> logits, int y, std::span<float> dlogits) {
  const float m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (float v : logits) sum += std::exp(static_cast<double>(v - m));
  const double log_z = std::log(sum) + m;
  if (!dlogits.empty()) {
    for (std::size_t k = 0; k < logits.size(); ++k) {
      dlogits[k] = static_cast<float>(std::exp(logits[k] - log_z));
    }
    dlogits[y] -= 1.0f;
  }
  return static_cast<float>(log_z - logits[y]);
}

std::vector<float> Classifier::logits(std::span<const float> x) const {
  std::vector<float> out(static_cast<std::size_t>(num_classes()));
  logits(x, out);
  return out;
}

int Classifier::predict(std::span<const float> x) const { return argmax(logits(x)); }

float Classifier::loss(std::span<const float> x, int y) const { return cross_entropy(logits(x), y); }

// ---------------------------------------------------------------------------
// ArchSpec

std::string ArchSpec::id() const {
  std::ostringstream os;
  os << "cnn:";
  for (std::size_t i = 0; i < conv_channels.size(); ++i) os << (i ? "," : "") << conv_channels[i];
  if (leak != 0.0f) os << "/leak=" << leak;
  return os.str();
}

ArchSpec ArchSpec::parse(const std::string& id, ImageShape input, int classes) {
  if (id.rfind("cnn:", 0) != 0) throw ValidationError("unknown architecture '" + id + "'");
  ArchSpec arch;
  arch.input = input;
  arch.classes = classes;
  arch.conv_channels.clear();
  std::string body = id.substr(4);
  if (const auto slash = body.find('/'); slash != std::string::npos) {
    const std::string opt = body.substr(slash + 1);
    if (opt.rfind("leak=", 0) != 0) throw ValidationError("unknown architecture option '" + opt + "'");
    try {
      arch.leak = std::stof(opt.substr(5));
    } catch (const std::exception&) {
      throw ValidationError("bad leak value in architecture '" + id + "'");
    }
    body.resize(slash);
  }
  std::istringstream is(body);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    try {
      arch.conv_channels.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw ValidationError("bad channel count in architecture '" + id + "'");
    }
  }
  arch.validate();
  return arch;
}

void ArchSpec::validate() const {
  if (classes < 2) throw ValidationError("a classifier needs at least two classes");
  if (!(leak >= 0.0f && leak < 1.0f)) throw ValidationError("activation leak must lie in [0,1)");
  if (conv_channels.empty() || conv_channels.size() > 4) {
    throw ValidationError("architecture needs 1 to 4 conv blocks");
  }
  int h = input.height, w = input.width;
  for (int c : conv_channels) {
    if (c <= 0) throw ValidationError("conv channel counts must be positive");
    if (h < 2 || w < 2) throw DimensionError("input too small for the number of pooling stages");
    h /= 2;
    w /= 2;
  }
  if (!mean.empty() && mean.size() != static_cast<std::size_t>(input.channels)) {
    throw DimensionError("normalization mean needs one value per channel");
  }
  if (!inv_std.empty() && inv_std.size() != static_cast<std::size_t>(input.channels)) {
    throw DimensionError("normalization scale needs one value per channel");
  }
}

// ---------------------------------------------------------------------------
// Network

struct Network::Workspace {
  std::vector<float> input;                  // normalized input
  std::vector<std::vector<float>> conv;      // post-activation conv output per block
  std::vector<std::vector<float>> pooled;    // pooled output per block
  std::vector<std::vector<std::uint32_t>> argmax;  // pool source index into conv
  std::vector<float> logits;
  int label = 0;
};

Network::Network(ArchSpec arch) : arch_(std::move(arch)) {
  arch_.validate();
  if (arch_.mean.empty()) arch_.mean.assign(arch_.input.channels, 0.5f);
  if (arch_.inv_std.empty()) arch_.inv_std.assign(arch_.input.channels, 4.0f);

  std::size_t offset = 0;
  int in_c = arch_.input.channels, h = arch_.input.height, w = arch_.input.width;
  for (int out_c : arch_.conv_channels) {
    Block b{in_c, out_c, h, w, offset, 0};
    offset += static_cast<std::size_t>(out_c) * in_c * 9;
    b.bias_offset = offset;
    offset += out_c;
    blocks_.push_back(b);
    in_c = out_c;
    h /= 2;
    w /= 2;
  }
  feature_size_ = static_cast<std::size_t>(in_c) * h * w;
  head_weight_offset_ = offset;
  offset += feature_size_ * arch_.classes;
  head_bias_offset_ = offset;
  offset += arch_.classes;
  params_.assign(offset, 0.0f);
}

void Network::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::fill(params_.begin(), params_.end(), 0.0f);
  for (const auto& b : blocks_) {
    const float bound = std::sqrt(6.0f / static_cast<float>(b.in_channels * 9));
    std::uniform_real_distribution<float> dist(-bound, bound);
    const std::size_t n = static_cast<std::size_t>(b.out_channels) * b.in_channels * 9;
    for (std::size_t i = 0; i < n; ++i) params_[b.weight_offset + i] = dist(rng);
  }
  const float bound = std::sqrt(3.0f / static_cast<float>(feature_size_));
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (std::size_t i = 0; i < feature_size_ * arch_.classes; ++i) {
    params_[head_weight_offset_ + i] = dist(rng);
  }
}

namespace {

void conv3x3_forward(const float* in, int ic, int h, int w, const float* weight, const float* bias,
                     int oc, float* out) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int o = 0; o < oc; ++o) {
    float* dst_plane = out + o * plane;
    std::fill(dst_plane, dst_plane + plane, bias[o]);
    for (int c = 0; c < ic; ++c) {
      const float* src_plane = in + c * plane;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const float wv = weight[((o * ic + c) * 3 + ky) * 3 + kx];
          const int x0 = kx == 0 ? 1 : 0;
          const int x1 = kx == 2 ? w - 1 : w;
          for (int y = 0; y < h; ++y) {
            const int iy = y + ky - 1;
            if (iy < 0 || iy >= h) continue;
            const float* src = src_plane + iy * w + (kx - 1);
            float* dst = dst_plane + y * w;
            for (int x = x0; x < x1; ++x) dst[x] += wv * src[x];
          }
        }
      }
    }
  }
}

// `dout` is the gradient w.r.t. the pre-activation conv output. Either of
// `dweight`/`din` may be null.
void conv3x3_backward(const float* in, int ic, int h, int w, const float* weight, int oc,
                      const float* dout, float* dweight, float* dbias, float* din) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int o = 0; o < oc; ++o) {
    const float* g_plane = dout + o * plane;
    if (dbias) {
      float s = 0.0f;
      for (std::size_t i = 0; i < plane; ++i) s += g_plane[i];
      dbias[o] += s;
    }
    for (int c = 0; c < ic; ++c) {
      const float* src_plane = in + c * plane;
      float* din_plane = din ? din + c * plane : nullptr;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const std::size_t widx = static_cast<std::size_t>(((o * ic + c) * 3 + ky) * 3 + kx);
          const float wv = weight[widx];
          const int x0 = kx == 0 ? 1 : 0;
          const int x1 = kx == 2 ? w - 1 : w;
          float acc = 0.0f;
          for (int y = 0; y < h; ++y) {
            const int iy = y + ky - 1;
            if (iy < 0 || iy >= h) continue;
            const float* g = g_plane + y * w;
            if (dweight) {
              const float* src = src_plane + iy * w + (kx - 1);
              for (int x = x0; x < x1; ++x) acc += g[x] * src[x];
            }
            if (din_plane) {
              float* dst = din_plane + iy * w + (kx - 1);
              for (int x = x0; x < x1; ++x) dst[x] += wv * g[x];
            }
          }
          if (dweight) dweight[widx] += acc;
        }
      }
    }
  }
}

}  // namespace

void Network::forward(std::span<const float> x, Workspace& ws) const {
  if (x.size() != input_size()) {
    throw DimensionError("network expects " + std::to_string(input_size()) + " inputs, got " +
                         std::to_string(x.size()));
  }
  const int C = arch_.input.channels;
  const std::size_t plane = static_cast<std::size_t>(arch_.input.height) * arch_.input.width;
  ws.input.resize(x.size());
  for (int c = 0; c < C; ++c) {
    const float m = arch_.mean[c], s = arch_.inv_std[c];
    for (std::size_t i = 0; i < plane; ++i) ws.input[c * plane + i] = (x[c * plane + i] - m) * s;
  }

  ws.conv.resize(blocks_.size());
  ws.pooled.resize(blocks_.size());
  ws.argmax.resize(blocks_.size());
  const float* in = ws.input.data();
  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
    const Block& b = blocks_[bi];
    const std::size_t p = static_cast<std::size_t>(b.height) * b.width;
    auto& conv = ws.conv[bi];
    conv.resize(p * b.out_channels);
    conv3x3_forward(in, b.in_channels, b.height, b.width, params_.data() + b.weight_offset,
                    params_.data() + b.bias_offset, b.out_channels, conv.data());
    const float leak = arch_.leak;
    for (auto& v : conv) v = v > 0.0f ? v : leak * v;

    const int ph = b.height / 2, pw = b.width / 2;
    auto& pooled = ws.pooled[bi];
    auto& idx = ws.argmax[bi];
    pooled.resize(static_cast<std::size_t>(ph) * pw * b.out_channels);
    idx.resize(pooled.size());
    std::size_t k = 0;
    for (int o = 0; o < b.out_channels; ++o) {
      const std::size_t base = o * p;
      for (int y = 0; y < ph; ++y) {
        for (int xx = 0; xx < pw; ++xx, ++k) {
          std::size_t best = base + (2 * y) * b.width + 2 * xx;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const std::size_t cand = base + (2 * y + dy) * b.width + 2 * xx + dx;
              if (conv[cand] > conv[best]) best = cand;
            }
          pooled[k] = conv[best];
          idx[k] = static_cast<std::uint32_t>(best);
        }
      }
    }
    in = pooled.data();
  }

  const float* feat = ws.pooled.back().data();
  ws.logits.resize(arch_.classes);
  for (int k = 0; k < arch_.classes; ++k) {
    const float* wk = params_.data() + head_weight_offset_ + k * feature_size_;
    float s = params_[head_bias_offset_ + k];
    for (std::size_t f = 0; f < feature_size_; ++f) s += wk[f] * feat[f];
    ws.logits[k] = s;
  }
}

void Network::backward(Workspace& ws, std::span<float> param_grad,
                       std::span<float> input_grad) const {
  std::vector<float> dlogits(arch_.classes);
  cross_entropy(ws.logits, ws.label, dlogits);
  const bool want_params = !param_grad.empty();

  const float* feat = ws.pooled.back().data();
  std::vector<float> dpooled(feature_size_, 0.0f);
  for (int k = 0; k < arch_.classes; ++k) {
    const float g = dlogits[k];
    const float* wk = params_.data() + head_weight_offset_ + k * feature_size_;
    for (std::size_t f = 0; f < feature_size_; ++f) dpooled[f] += g * wk[f];
    if (want_params) {
      float* dwk = param_grad.data() + head_weight_offset_ + k * feature_size_;
      for (std::size_t f = 0; f < feature_size_; ++f) dwk[f] += g * feat[f];
      param_grad[head_bias_offset_ + k] += g;
    }
  }

  std::vector<float> dconv, din;
  for (std::size_t bi = blocks_.size(); bi-- > 0;) {
    const Block& b = blocks_[bi];
    const auto& conv = ws.conv[bi];
    dconv.assign(conv.size(), 0.0f);
    const auto& idx = ws.argmax[bi];
    for (std::size_t k = 0; k < idx.size(); ++k) dconv[idx[k]] += dpooled[k];
    for (std::size_t i = 0; i < conv.size(); ++i)
      if (conv[i] <= 0.0f) dconv[i] *= arch_.leak;

    const float* in = bi == 0 ? ws.input.data() : ws.pooled[bi - 1].data();
    const bool need_din = bi > 0 || !input_grad.empty();
    din.assign(need_din ? static_cast<std::size_t>(b.in_channels) * b.height * b.width : 0, 0.0f);
    conv3x3_backward(in, b.in_channels, b.height, b.width, params_.data() + b.weight_offset,
                     b.out_channels, dconv.data(),
                     want_params ? param_grad.data() + b.weight_offset : nullptr,
                     want_params ? param_grad.data() + b.bias_offset : nullptr,
                     need_din ? din.data() : nullptr);
    dpooled.swap(din);
  }

  if (!input_grad.empty()) {
    const std::size_t plane = static_cast<std::size_t>(arch_.input.height) * arch_.input.width;
    for (int c = 0; c < arch_.input.channels; ++c) {
      const float s = arch_.inv_std[c];
      for (std::size_t i = 0; i < plane; ++i) input_grad[c * plane + i] = dpooled[c * plane + i] * s;
    }
  }
}

void Network::logits(std::span<const float> x, std::span<float> out) const {
  Workspace ws;
  forward(x, ws);
  std::copy(ws.logits.begin(), ws.logits.end(), out.begin());
}

float Network::loss_and_input_gradient(std::span<const float> x, int y, std::span<float> grad) const {
  if (grad.size() != input_size()) throw DimensionError("input gradient buffer has the wrong size");
  Workspace ws;
  forward(x, ws);
  ws.label = y;
  backward(ws, {}, grad);
  return cross_entropy(ws.logits, y);
}

std::vector<float> Network::features(std::span<const float> x) const {
  Workspace ws;
  forward(x, ws);
  return ws.pooled.back();
}

float Network::accumulate_parameter_gradient(std::span<const float> x, int y,
                                             std::span<float> param_grad, int* predicted) const {
  if (param_grad.size() != params_.size()) throw DimensionError("parameter gradient buffer has the wrong size");
  Workspace ws;
  forward(x, ws);
  ws.label = y;
  backward(ws, param_grad, {});
  if (predicted) *predicted = argmax(ws.logits);
  return cross_entropy(ws.logits, y);
}

std::uint64_t Network::checksum() const {
  return fnv1a64(params_.data(), params_.size() * sizeof(float));
}

}  // namespace forge
