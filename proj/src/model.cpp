#include "nctj/model.hpp"

#include <cmath>
#include <cstring>

namespace nctj::train {

namespace {

num::Tensor kaiming_uniform(std::vector<int> shape, int fan_in, RngStream& rng) {
  num::Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / fan_in);
  for (auto& v : t.values) {
    v = static_cast<float>((rng.next_double() * 2.0 - 1.0) * bound);
  }
  return t;
}

}  // namespace

num::Tensor Model::features(const num::Tensor& x) const {
  num::Tensor h = x;
  for (const auto& spec : feature_layers) {
    switch (spec.kind) {
      case LayerKind::Flatten:
        h = num::flatten2d(h);
        break;
      case LayerKind::Relu:
        h = num::relu(h);
        break;
      case LayerKind::AvgPool2:
        h = num::avgpool2(h);
        break;
      case LayerKind::Linear:
        h = num::linear(h, params.at(spec.param_name + ".w").tensor,
                        params.at(spec.param_name + ".b").tensor);
        break;
      case LayerKind::Conv3x3:
        h = num::conv2d_3x3(h, params.at(spec.param_name + ".w").tensor,
                            params.at(spec.param_name + ".b").tensor);
        break;
    }
  }
  return h;
}

num::Tensor Model::head_logits(const num::Tensor& feats) const {
  return num::linear(feats, head_w(), head_b());
}

num::Tensor Model::logits(const num::Tensor& x) const { return head_logits(features(x)); }

num::Tape::Var Model::logits_on_tape(num::Tape& tape, num::Tensor batch) {
  num::Tape::Var h = tape.input(std::move(batch));
  for (const auto& spec : feature_layers) {
    switch (spec.kind) {
      case LayerKind::Flatten:
        h = tape.flatten(h);
        break;
      case LayerKind::Relu:
        h = tape.relu(h);
        break;
      case LayerKind::AvgPool2:
        h = tape.avgpool2(h);
        break;
      case LayerKind::Linear: {
        auto& w = params.at(spec.param_name + ".w");
        auto& b = params.at(spec.param_name + ".b");
        h = tape.linear(h, tape.param(w.tensor, !w.frozen), tape.param(b.tensor, !b.frozen));
        break;
      }
      case LayerKind::Conv3x3: {
        auto& w = params.at(spec.param_name + ".w");
        auto& b = params.at(spec.param_name + ".b");
        h = tape.conv2d(h, tape.param(w.tensor, !w.frozen), tape.param(b.tensor, !b.frozen));
        break;
      }
    }
  }
  auto& hw = params.at("head.w");
  auto& hb = params.at("head.b");
  return tape.linear(h, tape.param(hw.tensor, !hw.frozen), tape.param(hb.tensor, !hb.frozen));
}

Model make_mlp(std::array<int, 3> input_shape, int num_classes, int hidden, int feature_dim,
               RngStream& init_rng) {
  if (num_classes < 2) throw ArgumentError("make_mlp: need at least 2 classes");
  if (hidden < 1 || feature_dim < 1) throw ArgumentError("make_mlp: bad layer sizes");
  Model m;
  m.arch = "mlp";
  m.input_shape = input_shape;
  m.num_classes = num_classes;
  m.feature_dim = feature_dim;
  const int d = input_shape[0] * input_shape[1] * input_shape[2];
  m.feature_layers = {
      {LayerKind::Flatten, 0, ""},
      {LayerKind::Linear, hidden, "fc1"},
      {LayerKind::Relu, 0, ""},
      {LayerKind::Linear, feature_dim, "fc2"},
      {LayerKind::Relu, 0, ""},
  };
  m.params.add("fc1.w", kaiming_uniform({hidden, d}, d, init_rng));
  m.params.add("fc1.b", num::Tensor({hidden}));
  m.params.add("fc2.w", kaiming_uniform({feature_dim, hidden}, hidden, init_rng));
  m.params.add("fc2.b", num::Tensor({feature_dim}));
  m.params.add("head.w", kaiming_uniform({num_classes, feature_dim}, feature_dim, init_rng));
  m.params.add("head.b", num::Tensor({num_classes}));
  return m;
}

Model make_cnn(std::array<int, 3> input_shape, int num_classes, int c1, int c2, int feature_dim,
               RngStream& init_rng) {
  if (num_classes < 2) throw ArgumentError("make_cnn: need at least 2 classes");
  const int c = input_shape[0], h = input_shape[1], w = input_shape[2];
  if (h % 4 != 0 || w % 4 != 0) {
    throw ArgumentError("make_cnn: H and W must be divisible by 4 for two avgpool2 stages");
  }
  Model m;
  m.arch = "cnn";
  m.input_shape = input_shape;
  m.num_classes = num_classes;
  m.feature_dim = feature_dim;
  const int flat = c2 * (h / 4) * (w / 4);
  m.feature_layers = {
      {LayerKind::Conv3x3, c1, "conv1"},
      {LayerKind::Relu, 0, ""},
      {LayerKind::AvgPool2, 0, ""},
      {LayerKind::Conv3x3, c2, "conv2"},
      {LayerKind::Relu, 0, ""},
      {LayerKind::AvgPool2, 0, ""},
      {LayerKind::Flatten, 0, ""},
      {LayerKind::Linear, feature_dim, "fc"},
  };
  m.params.add("conv1.w", kaiming_uniform({c1, c, 3, 3}, c * 9, init_rng));
  m.params.add("conv1.b", num::Tensor({c1}));
  m.params.add("conv2.w", kaiming_uniform({c2, c1, 3, 3}, c1 * 9, init_rng));
  m.params.add("conv2.b", num::Tensor({c2}));
  m.params.add("fc.w", kaiming_uniform({feature_dim, flat}, flat, init_rng));
  m.params.add("fc.b", num::Tensor({feature_dim}));
  m.params.add("head.w", kaiming_uniform({num_classes, feature_dim}, feature_dim, init_rng));
  m.params.add("head.b", num::Tensor({num_classes}));
  return m;
}

Model make_custom(std::array<int, 3> input_shape, int num_classes, int feature_dim,
                  std::vector<LayerSpec> layers) {
  Model m;
  m.arch = "custom";
  m.input_shape = input_shape;
  m.num_classes = num_classes;
  m.feature_dim = feature_dim;
  m.feature_layers = std::move(layers);
  m.params.add("head.w", num::Tensor({num_classes, feature_dim}));
  m.params.add("head.b", num::Tensor({num_classes}));
  return m;
}

num::Tensor batch_pixels(const data::Dataset& ds, const std::vector<size_t>& indices) {
  const int c = ds.channels, h = ds.height, w = ds.width;
  num::Tensor t({static_cast<int>(indices.size()), c, h, w});
  const size_t px = ds.pixels_per_image();
  for (size_t i = 0; i < indices.size(); ++i) {
    const auto& img = ds.images[indices[i]];
    std::memcpy(t.values.data() + i * px, img.pixels.data(), px * sizeof(float));
  }
  return t;
}

num::Tensor all_pixels(const data::Dataset& ds) {
  std::vector<size_t> idx(ds.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return batch_pixels(ds, idx);
}

int argmax_row(const float* row, int k) {
  int best = 0;
  for (int j = 1; j < k; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

std::vector<int> predict_labels(const Model& model, const data::Dataset& ds, int batch_size) {
  std::vector<int> out;
  out.reserve(ds.size());
  const int k = model.num_classes;
  for (size_t start = 0; start < ds.size(); start += static_cast<size_t>(batch_size)) {
    size_t end = std::min(ds.size(), start + static_cast<size_t>(batch_size));
    std::vector<size_t> idx(end - start);
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
    num::Tensor logits = model.logits(batch_pixels(ds, idx));
    for (size_t i = 0; i < idx.size(); ++i) {
      out.push_back(argmax_row(logits.values.data() + i * static_cast<size_t>(k), k));
    }
  }
  return out;
}

num::Tensor all_features(const Model& model, const data::Dataset& ds, int batch_size) {
  const int m = model.feature_dim;
  num::Tensor feats({static_cast<int>(ds.size()), m});
  for (size_t start = 0; start < ds.size(); start += static_cast<size_t>(batch_size)) {
    size_t end = std::min(ds.size(), start + static_cast<size_t>(batch_size));
    std::vector<size_t> idx(end - start);
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
    num::Tensor f = model.features(batch_pixels(ds, idx));
    std::memcpy(feats.values.data() + start * static_cast<size_t>(m), f.values.data(),
                f.values.size() * sizeof(float));
  }
  return feats;
}

}  // namespace nctj::train
