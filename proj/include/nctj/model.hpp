#pragma once

#include <array>
#include <string>
#include <vector>

#include "nctj/autodiff.hpp"
#include "nctj/data.hpp"
#include "nctj/optim.hpp"
#include "nctj/rng.hpp"
#include "nctj/tensor.hpp"

namespace nctj::train {

enum class LayerKind { Flatten, Linear, Conv3x3, Relu, AvgPool2 };

struct LayerSpec {
  LayerKind kind;
  int out_dim = 0;         // Linear: out features; Conv3x3: out channels
  std::string param_name;  // base name for parameterized layers, e.g. "fc1"
};

// Classifier decomposed as f(x) = head_W . g(x) + head_b. The feature path g
// is the layer list; the head is the pair ("head.w", "head.b") in params.
// Value semantics throughout: copying a Model copies its parameters.
struct Model {
  std::string arch;  // "mlp" | "cnn" | free-form for hand-built models
  std::array<int, 3> input_shape{0, 0, 0};
  int num_classes = 0;
  int feature_dim = 0;
  std::vector<LayerSpec> feature_layers;
  num::ParamSet params;

  // eval-mode forward (no recording)
  num::Tensor features(const num::Tensor& x) const;      // [N x m]
  num::Tensor logits(const num::Tensor& x) const;        // [N x K]
  num::Tensor head_logits(const num::Tensor& feats) const;

  // tape-mode forward; binds parameters (frozen ones without gradients)
  num::Tape::Var logits_on_tape(num::Tape& tape, num::Tensor batch);

  const num::Tensor& head_w() const { return params.at("head.w").tensor; }
  const num::Tensor& head_b() const { return params.at("head.b").tensor; }
};

// flatten -> linear(hidden) -> relu -> linear(feature_dim) -> relu -> head
Model make_mlp(std::array<int, 3> input_shape, int num_classes, int hidden, int feature_dim,
               RngStream& init_rng);
// conv3x3(c1) -> relu -> avgpool2 -> conv3x3(c2) -> relu -> avgpool2
//   -> flatten -> linear(feature_dim) -> head
Model make_cnn(std::array<int, 3> input_shape, int num_classes, int c1, int c2, int feature_dim,
               RngStream& init_rng);
// Hand-assembled feature path (used by fixtures): head initialized to zeros.
Model make_custom(std::array<int, 3> input_shape, int num_classes, int feature_dim,
                  std::vector<LayerSpec> layers);

// Batch assembly: rows of `indices` stacked into [N x C x H x W].
num::Tensor batch_pixels(const data::Dataset& ds, const std::vector<size_t>& indices);
num::Tensor all_pixels(const data::Dataset& ds);

// argmax predictions with lowest-index tie break, evaluated in batches.
std::vector<int> predict_labels(const Model& model, const data::Dataset& ds,
                                int batch_size = 256);
// feature matrix [N x m] for the whole dataset, evaluated in batches.
num::Tensor all_features(const Model& model, const data::Dataset& ds, int batch_size = 256);

int argmax_row(const float* row, int k);

}  // namespace nctj::train
