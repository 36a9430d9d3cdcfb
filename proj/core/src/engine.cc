// Copyright 2026 The pathlens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pathlens/engine.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "pathlens/error.h"

namespace pathlens {
namespace {

void ConvForward(const LayerNode& node, const Tensor& in, Tensor& out) {
  const Shape& is = in.shape();
  const Shape& os = out.shape();
  const int k = node.kernel;
  for (int o = 0; o < os.channels; ++o) {
    for (int y = 0; y < os.height; ++y) {
      for (int x = 0; x < os.width; ++x) {
        double sum = node.bias[o];
        for (int i = 0; i < is.channels; ++i) {
          const double* w = &node.weights[(static_cast<std::size_t>(o) * is.channels + i) * k * k];
          for (int ky = 0; ky < k; ++ky) {
            const int iy = y * node.stride - node.padding + ky;
            if (iy < 0 || iy >= is.height) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = x * node.stride - node.padding + kx;
              if (ix < 0 || ix >= is.width) continue;
              sum += w[ky * k + kx] * in.at(i, iy, ix);
            }
          }
        }
        out.at(o, y, x) = sum;
      }
    }
  }
}

void ConvBackward(const LayerNode& node, const Tensor& in, const Tensor& grad_out,
                  Tensor& grad_in, std::vector<double>* grad_w, std::vector<double>* grad_b) {
  const Shape& is = in.shape();
  const Shape& os = grad_out.shape();
  const int k = node.kernel;
  for (int o = 0; o < os.channels; ++o) {
    for (int y = 0; y < os.height; ++y) {
      for (int x = 0; x < os.width; ++x) {
        const double g = grad_out.at(o, y, x);
        if (g == 0.0) continue;
        if (grad_b) (*grad_b)[o] += g;
        for (int i = 0; i < is.channels; ++i) {
          const std::size_t base = (static_cast<std::size_t>(o) * is.channels + i) * k * k;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = y * node.stride - node.padding + ky;
            if (iy < 0 || iy >= is.height) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = x * node.stride - node.padding + kx;
              if (ix < 0 || ix >= is.width) continue;
              grad_in.at(i, iy, ix) += node.weights[base + ky * k + kx] * g;
              if (grad_w) (*grad_w)[base + ky * k + kx] += in.at(i, iy, ix) * g;
            }
          }
        }
      }
    }
  }
}

void PoolForward(const LayerNode& node, const Tensor& in, Tensor& out) {
  const Shape& os = out.shape();
  const int k = node.kernel;
  const bool is_max = node.kind == LayerKind::kMaxPool;
  for (int c = 0; c < os.channels; ++c) {
    for (int y = 0; y < os.height; ++y) {
      for (int x = 0; x < os.width; ++x) {
        double acc = is_max ? -std::numeric_limits<double>::infinity() : 0.0;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const double v = in.at(c, y * node.stride + ky, x * node.stride + kx);
            acc = is_max ? std::max(acc, v) : acc + v;
          }
        }
        out.at(c, y, x) = is_max ? acc : acc / (k * k);
      }
    }
  }
}

void PoolBackward(const LayerNode& node, const Tensor& in, const Tensor& grad_out,
                  Tensor& grad_in) {
  const Shape& os = grad_out.shape();
  const int k = node.kernel;
  for (int c = 0; c < os.channels; ++c) {
    for (int y = 0; y < os.height; ++y) {
      for (int x = 0; x < os.width; ++x) {
        const double g = grad_out.at(c, y, x);
        if (node.kind == LayerKind::kAvgPool) {
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx)
              grad_in.at(c, y * node.stride + ky, x * node.stride + kx) += g / (k * k);
          continue;
        }
        // First maximum in row-major window order receives the gradient.
        int best_y = y * node.stride;
        int best_x = x * node.stride;
        double best = in.at(c, best_y, best_x);
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const double v = in.at(c, y * node.stride + ky, x * node.stride + kx);
            if (v > best) {
              best = v;
              best_y = y * node.stride + ky;
              best_x = x * node.stride + kx;
            }
          }
        }
        grad_in.at(c, best_y, best_x) += g;
      }
    }
  }
}

void DenseForward(const LayerNode& node, const Tensor& in, Tensor& out) {
  const std::size_t features = in.size();
  const auto input = in.data();
  for (int o = 0; o < out.shape().channels; ++o) {
    const double* w = &node.weights[static_cast<std::size_t>(o) * features];
    double sum = node.bias[o];
    for (std::size_t f = 0; f < features; ++f) sum += w[f] * input[f];
    out.storage()[o] = sum;
  }
}

void DenseBackward(const LayerNode& node, const Tensor& in, const Tensor& grad_out,
                   Tensor& grad_in, std::vector<double>* grad_w, std::vector<double>* grad_b) {
  const std::size_t features = in.size();
  const auto input = in.data();
  auto gin = grad_in.data();
  for (int o = 0; o < grad_out.shape().channels; ++o) {
    const double g = grad_out.storage()[o];
    if (g == 0.0) continue;
    if (grad_b) (*grad_b)[o] += g;
    const std::size_t base = static_cast<std::size_t>(o) * features;
    for (std::size_t f = 0; f < features; ++f) {
      gin[f] += node.weights[base + f] * g;
      if (grad_w) (*grad_w)[base + f] += input[f] * g;
    }
  }
}

void SoftmaxForward(const Tensor& in, Tensor& out) {
  const auto logits = in.data();
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.storage()[i] = std::exp(logits[i] - top);
    total += out.storage()[i];
  }
  for (double& v : out.storage()) v /= total;
}

// Propagates `seed` (the gradient at `start`'s output) back to every node.
std::vector<Tensor> Backpropagate(const ModelGraph& model, const std::vector<Tensor>& acts,
                                  int start, Tensor seed, ParameterGradients* params) {
  std::vector<Tensor> grads(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) grads[i] = Tensor(acts[i].shape());
  grads[start] = std::move(seed);
  for (int i = start; i >= 0; --i) {
    const LayerNode& node = model.node(i);
    const Tensor& g = grads[i];
    switch (node.kind) {
      case LayerKind::kInput:
        break;
      case LayerKind::kConv:
        ConvBackward(node, acts[node.inputs[0]], g, grads[node.inputs[0]],
                     params ? &params->weights[i] : nullptr, params ? &params->bias[i] : nullptr);
        break;
      case LayerKind::kRelu: {
        const auto pre = acts[node.inputs[0]].data();
        auto gin = grads[node.inputs[0]].data();
        const auto gout = g.data();
        for (std::size_t k = 0; k < pre.size(); ++k) {
          if (pre[k] > 0.0) gin[k] += gout[k];
        }
        break;
      }
      case LayerKind::kMaxPool:
      case LayerKind::kAvgPool:
        PoolBackward(node, acts[node.inputs[0]], g, grads[node.inputs[0]]);
        break;
      case LayerKind::kGlobalAvgPool: {
        Tensor& gin = grads[node.inputs[0]];
        const double scale = 1.0 / static_cast<double>(gin.shape().spatial());
        for (int c = 0; c < gin.shape().channels; ++c) {
          const double gc = g.storage()[c] * scale;
          for (double& v : gin.channel(c)) v += gc;
        }
        break;
      }
      case LayerKind::kDense:
        DenseBackward(node, acts[node.inputs[0]], g, grads[node.inputs[0]],
                      params ? &params->weights[i] : nullptr, params ? &params->bias[i] : nullptr);
        break;
      case LayerKind::kAdd:
        for (int input : node.inputs) {
          auto gin = grads[input].data();
          const auto gout = g.data();
          for (std::size_t k = 0; k < gin.size(); ++k) gin[k] += gout[k];
        }
        break;
      case LayerKind::kSoftmax: {
        const auto s = acts[i].data();
        const auto gout = g.data();
        // s_k * sum_j s_j (g_k - g_j)
        auto gin = grads[node.inputs[0]].data();
        for (std::size_t k = 0; k < s.size(); ++k) {
          double centered = 0.0;
          for (std::size_t j = 0; j < s.size(); ++j) centered += s[j] * (gout[k] - gout[j]);
          gin[k] += s[k] * centered;
        }
        break;
      }
    }
  }
  return grads;
}

int Argmax(std::span<const double> values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

int LogitsNode(const ModelGraph& model) { return model.node(model.output_node()).inputs[0]; }

void CheckClass(const ModelGraph& model, int cls, std::string_view what) {
  Require(cls >= 0 && cls < model.num_classes(), ErrorCode::kOutOfRange,
          std::string(what) + " " + std::to_string(cls) + " outside [0, " +
              std::to_string(model.num_classes()) + ")",
          model.node(model.output_node()).id);
}

}  // namespace

std::vector<Tensor> RunForward(const ModelGraph& model, const Tensor& input,
                               const ActivationHook& hook) {
  Require(input.shape() == model.input_shape(), ErrorCode::kShapeMismatch,
          "input shape " + ToString(input.shape()) + " does not match " +
              ToString(model.input_shape()),
          model.node(model.input_node()).id);
  std::vector<Tensor> acts(model.size());
  for (std::size_t idx = 0; idx < model.size(); ++idx) {
    const int i = static_cast<int>(idx);
    const LayerNode& node = model.node(i);
    Tensor out(node.shape);
    switch (node.kind) {
      case LayerKind::kInput:
        out = input;
        break;
      case LayerKind::kConv:
        ConvForward(node, acts[node.inputs[0]], out);
        break;
      case LayerKind::kRelu: {
        const auto in = acts[node.inputs[0]].data();
        for (std::size_t k = 0; k < in.size(); ++k) out.storage()[k] = in[k] > 0.0 ? in[k] : 0.0;
        break;
      }
      case LayerKind::kMaxPool:
      case LayerKind::kAvgPool:
        PoolForward(node, acts[node.inputs[0]], out);
        break;
      case LayerKind::kGlobalAvgPool: {
        const Tensor& in = acts[node.inputs[0]];
        for (int c = 0; c < in.shape().channels; ++c) {
          out.storage()[c] = Sum(in.channel(c)) / static_cast<double>(in.shape().spatial());
        }
        break;
      }
      case LayerKind::kDense:
        DenseForward(node, acts[node.inputs[0]], out);
        break;
      case LayerKind::kAdd: {
        const auto a = acts[node.inputs[0]].data();
        const auto b = acts[node.inputs[1]].data();
        for (std::size_t k = 0; k < a.size(); ++k) out.storage()[k] = a[k] + b[k];
        break;
      }
      case LayerKind::kSoftmax:
        SoftmaxForward(acts[node.inputs[0]], out);
        break;
    }
    if (hook) hook(i, out);
    acts[i] = std::move(out);
  }
  return acts;
}

ActivationTrace Forward(const ModelGraph& model, const Example& example,
                        std::optional<int> target_class) {
  CheckExample(model, example);
  ActivationTrace trace;
  trace.activations = RunForward(model, example.pixels);
  trace.probabilities = trace.activations[model.output_node()].storage();
  trace.predicted_class = Argmax(trace.probabilities);
  trace.target_class = target_class.value_or(trace.predicted_class);
  CheckClass(model, trace.target_class, "target class");
  trace.p = trace.probabilities[trace.target_class];
  return trace;
}

std::vector<double> MaskedProbabilities(const ModelGraph& model, const Example& example,
                                        int layer, std::span<const double> z) {
  CheckExample(model, example);
  Require(layer >= 0 && layer < static_cast<int>(model.size()), ErrorCode::kNotFound,
          "mask layer index " + std::to_string(layer) + " out of range");
  const LayerNode& node = model.node(layer);
  Require(z.size() == static_cast<std::size_t>(node.channel_count()), ErrorCode::kShapeMismatch,
          "mask length " + std::to_string(z.size()) + " differs from channel count " +
              std::to_string(node.channel_count()),
          node.id);
  for (double v : z) {
    Require(v >= 0.0 && v <= 1.0, ErrorCode::kOutOfRange, "mask entries must lie in [0,1]",
            node.id);
  }
  auto acts = RunForward(model, example.pixels, [&](int i, Tensor& out) {
    if (i != layer) return;
    for (int c = 0; c < out.shape().channels; ++c) {
      for (double& v : out.channel(c)) v *= z[c];
    }
  });
  return std::move(acts[model.output_node()].storage());
}

double MaskedForward(const ModelGraph& model, const Example& example, int layer,
                     std::span<const double> z, int target_class) {
  CheckClass(model, target_class, "target class");
  return MaskedProbabilities(model, example, layer, z)[target_class];
}

double ComplementProbability(std::span<const double> probabilities, int target_class) {
  double rest = 0.0;
  for (std::size_t k = 0; k < probabilities.size(); ++k) {
    if (static_cast<int>(k) != target_class) rest += probabilities[k];
  }
  return rest;
}

std::vector<Tensor> BackwardFeatureGradients(const ModelGraph& model,
                                             const ActivationTrace& trace) {
  Require(trace.activations.size() == model.size(), ErrorCode::kShapeMismatch,
          "trace has " + std::to_string(trace.activations.size()) + " layers, model has " +
              std::to_string(model.size()));
  for (std::size_t i = 0; i < model.size(); ++i) {
    Require(trace.activations[i].shape() == model.node(static_cast<int>(i)).shape,
            ErrorCode::kShapeMismatch, "trace activation shape does not match the model",
            model.node(static_cast<int>(i)).id);
  }
  CheckClass(model, trace.target_class, "target class");
  Tensor seed(model.node(model.output_node()).shape);
  seed.storage()[trace.target_class] = 1.0;
  return Backpropagate(model, trace.activations, model.output_node(), std::move(seed), nullptr);
}

ActivationTrace TraceWithGradients(const ModelGraph& model, const Example& example,
                                   std::optional<int> target_class) {
  ActivationTrace trace = Forward(model, example, target_class);
  trace.gradients = BackwardFeatureGradients(model, trace);
  return trace;
}

namespace {

// dL/dlogits for L = -log softmax[label] is softmax - onehot(label).
Tensor CrossEntropyLogitGradient(const ModelGraph& model, const std::vector<Tensor>& acts,
                                 int label) {
  const int logits = LogitsNode(model);
  Tensor seed(model.node(logits).shape);
  const auto& probs = acts[model.output_node()].storage();
  for (std::size_t c = 0; c < probs.size(); ++c) seed.storage()[c] = probs[c];
  seed.storage()[label] = -ComplementProbability(probs, label);
  return seed;
}

double CrossEntropyFromLogits(std::span<const double> logits, int label) {
  const auto top = std::max_element(logits.begin(), logits.end());
  double rest = 0.0;
  for (auto it = logits.begin(); it != logits.end(); ++it) {
    if (it != top) rest += std::exp(*it - *top);
  }
  return std::log1p(rest) + *top - logits[label];
}

}  // namespace

Tensor InputGradient(const ModelGraph& model, const Example& example, int label) {
  CheckExample(model, example);
  CheckClass(model, label, "label");
  const auto acts = RunForward(model, example.pixels);
  auto grads = Backpropagate(model, acts, LogitsNode(model),
                             CrossEntropyLogitGradient(model, acts, label), nullptr);
  return std::move(grads[model.input_node()]);
}

double CrossEntropyLoss(const ModelGraph& model, const Example& example, int label) {
  CheckExample(model, example);
  CheckClass(model, label, "label");
  const auto acts = RunForward(model, example.pixels);
  return CrossEntropyFromLogits(acts[LogitsNode(model)].data(), label);
}

ParameterGradients ParameterGradients::ZerosLike(const ModelGraph& model) {
  ParameterGradients grads;
  for (const auto& node : model.nodes()) {
    grads.weights.emplace_back(node.weights.size(), 0.0);
    grads.bias.emplace_back(node.bias.size(), 0.0);
  }
  return grads;
}

void ParameterGradients::Scale(double factor) {
  for (auto& w : weights)
    for (double& v : w) v *= factor;
  for (auto& b : bias)
    for (double& v : b) v *= factor;
}

double AccumulateParameterGradients(const ModelGraph& model, const Example& example,
                                    ParameterGradients& grads) {
  CheckExample(model, example);
  CheckClass(model, example.label, "label");
  const auto acts = RunForward(model, example.pixels);
  Backpropagate(model, acts, LogitsNode(model),
                CrossEntropyLogitGradient(model, acts, example.label), &grads);
  return CrossEntropyFromLogits(acts[LogitsNode(model)].data(), example.label);
}

}  // namespace pathlens
