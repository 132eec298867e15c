#pragma once

// Finite-difference gradient oracle. Re-implements the forward pass of the
// reference architectures with plain double-precision loops (independent of
// the f32 tensor engine), then compares analytic tape gradients against
// central differences of that 64-bit path.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "nctj/model.hpp"
#include "nctj/rng.hpp"

namespace gradcheck {

using PMap = std::map<std::string, std::vector<double>>;

inline PMap extract_params(const nctj::train::Model& m) {
  PMap out;
  for (const auto& [name, p] : m.params) {
    out[name] = std::vector<double>(p.tensor.values.begin(), p.tensor.values.end());
  }
  return out;
}

// 64-bit reference forward: mean softmax cross entropy of the model's layer
// stack evaluated with the given parameter values. When `min_relu_margin` is
// given it receives the smallest |pre-activation| seen at any relu input;
// central differences are only valid when no perturbation can cross a kink.
inline double ref_loss(const nctj::train::Model& model, const PMap& params,
                       const nctj::num::Tensor& batch, const std::vector<int>& labels,
                       double* min_relu_margin = nullptr) {
  using nctj::train::LayerKind;
  const int n = batch.dim(0);
  int c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  // activations per sample, flattened CHW or plain vector for 2-D stages
  std::vector<std::vector<double>> act(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const float* src = batch.values.data() + static_cast<size_t>(i) * c * h * w;
    act[static_cast<size_t>(i)].assign(src, src + static_cast<size_t>(c) * h * w);
  }
  bool spatial = true;

  auto apply_linear = [&](const std::string& base, int out_dim) {
    const auto& wv = params.at(base + ".w");
    const auto& bv = params.at(base + ".b");
    const int in = static_cast<int>(act[0].size());
    for (auto& a : act) {
      std::vector<double> next(static_cast<size_t>(out_dim));
      for (int o = 0; o < out_dim; ++o) {
        double acc = bv[static_cast<size_t>(o)];
        for (int t = 0; t < in; ++t) acc += wv[static_cast<size_t>(o) * in + t] * a[static_cast<size_t>(t)];
        next[static_cast<size_t>(o)] = acc;
      }
      a = std::move(next);
    }
  };

  for (const auto& spec : model.feature_layers) {
    switch (spec.kind) {
      case LayerKind::Flatten:
        spatial = false;
        break;
      case LayerKind::Relu:
        for (auto& a : act) {
          for (auto& v : a) {
            if (min_relu_margin) *min_relu_margin = std::min(*min_relu_margin, std::abs(v));
            v = v > 0.0 ? v : 0.0;
          }
        }
        break;
      case LayerKind::Linear:
        apply_linear(spec.param_name, spec.out_dim);
        spatial = false;
        break;
      case LayerKind::Conv3x3: {
        const auto& kv = params.at(spec.param_name + ".w");
        const auto& bv = params.at(spec.param_name + ".b");
        const int f = spec.out_dim;
        for (auto& a : act) {
          std::vector<double> next(static_cast<size_t>(f) * h * w);
          for (int ff = 0; ff < f; ++ff) {
            for (int y = 0; y < h; ++y) {
              for (int x = 0; x < w; ++x) {
                double acc = bv[static_cast<size_t>(ff)];
                for (int ch = 0; ch < c; ++ch) {
                  for (int ky = 0; ky < 3; ++ky) {
                    int sy = y + ky - 1;
                    if (sy < 0 || sy >= h) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                      int sx = x + kx - 1;
                      if (sx < 0 || sx >= w) continue;
                      acc += kv[((static_cast<size_t>(ff) * c + ch) * 3 + ky) * 3 + kx] *
                             a[(static_cast<size_t>(ch) * h + sy) * w + sx];
                    }
                  }
                }
                next[(static_cast<size_t>(ff) * h + y) * w + x] = acc;
              }
            }
          }
          a = std::move(next);
        }
        c = f;
        break;
      }
      case LayerKind::AvgPool2: {
        const int oh = h / 2, ow = w / 2;
        for (auto& a : act) {
          std::vector<double> next(static_cast<size_t>(c) * oh * ow);
          for (int ch = 0; ch < c; ++ch) {
            for (int y = 0; y < oh; ++y) {
              for (int x = 0; x < ow; ++x) {
                double s = a[(static_cast<size_t>(ch) * h + 2 * y) * w + 2 * x] +
                           a[(static_cast<size_t>(ch) * h + 2 * y) * w + 2 * x + 1] +
                           a[(static_cast<size_t>(ch) * h + 2 * y + 1) * w + 2 * x] +
                           a[(static_cast<size_t>(ch) * h + 2 * y + 1) * w + 2 * x + 1];
                next[(static_cast<size_t>(ch) * oh + y) * ow + x] = 0.25 * s;
              }
            }
          }
          a = std::move(next);
        }
        h = oh;
        w = ow;
        break;
      }
    }
  }
  (void)spatial;
  // head + mean softmax cross entropy
  const auto& hw = params.at("head.w");
  const auto& hb = params.at("head.b");
  const int k = model.num_classes;
  const int m = static_cast<int>(act[0].size());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> logits(static_cast<size_t>(k));
    for (int o = 0; o < k; ++o) {
      double acc = hb[static_cast<size_t>(o)];
      for (int t = 0; t < m; ++t) acc += hw[static_cast<size_t>(o) * m + t] * act[static_cast<size_t>(i)][static_cast<size_t>(t)];
      logits[static_cast<size_t>(o)] = acc;
    }
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double s = 0.0;
    for (double v : logits) s += std::exp(v - mx);
    total += -(logits[static_cast<size_t>(labels[static_cast<size_t>(i)])] - mx - std::log(s));
  }
  return total / n;
}

struct Result {
  double max_rel_err = 0.0;
  int checked = 0;
};

// Analytic grads from the tape vs central differences (step h) of ref_loss.
inline Result check_model(nctj::train::Model model, const nctj::num::Tensor& batch,
                          const std::vector<int>& labels, double step = 1e-3) {
  model.params.zero_grad();
  nctj::num::Tape tape;
  auto logits = model.logits_on_tape(tape, batch);
  auto loss = tape.softmax_cross_entropy(logits, labels);
  tape.backward(loss);

  PMap base = extract_params(model);
  Result res;
  for (const auto& [name, p] : model.params) {
    for (size_t i = 0; i < p.tensor.numel(); ++i) {
      PMap plus = base, minus = base;
      plus[name][i] += step;
      minus[name][i] -= step;
      double fd = (ref_loss(model, plus, batch, labels) - ref_loss(model, minus, batch, labels)) /
                  (2.0 * step);
      double analytic = static_cast<double>(p.tensor.grad[i]);
      double denom = std::max({1e-3, std::abs(fd), std::abs(analytic)});
      res.max_rel_err = std::max(res.max_rel_err, std::abs(fd - analytic) / denom);
      ++res.checked;
    }
  }
  return res;
}

// Draw batches until every relu pre-activation sits at least `margin` away
// from its kink, so a +-step perturbation cannot change the active set.
inline nctj::num::Tensor kink_safe_batch(const nctj::train::Model& model,
                                         std::vector<int> batch_shape,
                                         const std::vector<int>& labels, nctj::RngStream& rng,
                                         double margin = 0.05) {
  PMap params = extract_params(model);
  nctj::num::Tensor best;
  double best_margin = -1.0;
  for (int attempt = 0; attempt < 200; ++attempt) {
    nctj::num::Tensor batch(batch_shape);
    for (auto& v : batch.values) v = static_cast<float>(rng.next_double());
    double m = 1e300;
    ref_loss(model, params, batch, labels, &m);
    if (m >= margin) return batch;
    if (m > best_margin) {
      best_margin = m;
      best = std::move(batch);
    }
  }
  return best;  // nothing safe found; the caller's tolerance decides
}

// Small instances of each reference architecture, one per seed.
inline Result check_mlp_seed(uint64_t seed) {
  nctj::RngStream init(seed, "gradcheck/mlp");
  auto model = nctj::train::make_mlp({1, 3, 3}, 3, 6, 4, init);
  std::vector<int> labels = {0, 1, 2, 1};
  auto batch = kink_safe_batch(model, {4, 1, 3, 3}, labels, init);
  return check_model(std::move(model), batch, labels);
}

inline Result check_cnn_seed(uint64_t seed) {
  nctj::RngStream init(seed, "gradcheck/cnn");
  auto model = nctj::train::make_cnn({2, 4, 4}, 3, 3, 4, 5, init);
  std::vector<int> labels = {2, 0, 1};
  auto batch = kink_safe_batch(model, {3, 2, 4, 4}, labels, init);
  return check_model(std::move(model), batch, labels);
}

}  // namespace gradcheck
