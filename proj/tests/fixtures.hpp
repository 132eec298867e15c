#pragma once

// Shared hand-built models and datasets for metric and trainer tests.

#include <array>
#include <vector>

#include "nctj/data.hpp"
#include "nctj/etf.hpp"
#include "nctj/model.hpp"

namespace fixtures {

// g = identity (flatten only); head starts at zero.
inline nctj::train::Model identity_model(std::array<int, 3> shape, int num_classes) {
  return nctj::train::make_custom(shape, num_classes, shape[0] * shape[1] * shape[2],
                                  {{nctj::train::LayerKind::Flatten, 0, ""}});
}

inline nctj::data::Dataset dataset_from_rows(const std::vector<std::vector<float>>& rows,
                                             const std::vector<int>& labels, int num_classes,
                                             std::array<int, 3> shape) {
  nctj::data::Dataset ds;
  ds.num_classes = num_classes;
  ds.channels = shape[0];
  ds.height = shape[1];
  ds.width = shape[2];
  for (size_t i = 0; i < rows.size(); ++i) {
    nctj::data::LabeledImage img;
    img.pixels = rows[i];
    img.label = labels[i];
    img.origin_id = static_cast<int64_t>(i);
    ds.images.push_back(std::move(img));
  }
  return ds;
}

// Features sit exactly on ETF vertices (n copies per class) and the head is
// the dual ETF: every collapse metric should vanish.
struct CollapseFixture {
  nctj::train::Model model;
  nctj::data::Dataset data;
};

inline CollapseFixture perfect_collapse_fixture(int num_classes, int feature_dim,
                                                int n_per_class, uint64_t seed) {
  using namespace nctj;
  RngStream rng(seed, "etf");
  etf::EtfHead head = etf::construct_etf(num_classes, feature_dim, rng);

  // inputs are one-hot class indicators; a linear layer maps e_k to ETF row k
  const int d = num_classes;
  train::Model model = train::make_custom({1, 1, d}, num_classes, feature_dim,
                                          {{train::LayerKind::Flatten, 0, ""},
                                           {train::LayerKind::Linear, feature_dim, "embed"}});
  num::Tensor w({feature_dim, d});
  for (int j = 0; j < feature_dim; ++j) {
    for (int k = 0; k < num_classes; ++k) {
      w.values[static_cast<size_t>(j) * d + k] = static_cast<float>(head.w(k, j));
    }
  }
  model.params.add("embed.w", std::move(w));
  model.params.add("embed.b", num::Tensor({feature_dim}));
  auto& hw = model.params.at("head.w").tensor;
  for (int k = 0; k < num_classes; ++k) {
    for (int j = 0; j < feature_dim; ++j) {
      hw.values[static_cast<size_t>(k) * feature_dim + j] = static_cast<float>(head.w(k, j));
    }
  }

  std::vector<std::vector<float>> rows;
  std::vector<int> labels;
  for (int k = 0; k < num_classes; ++k) {
    std::vector<float> onehot(static_cast<size_t>(d), 0.0f);
    onehot[static_cast<size_t>(k)] = 1.0f;
    for (int i = 0; i < n_per_class; ++i) {
      rows.push_back(onehot);
      labels.push_back(k);
    }
  }
  return {std::move(model), dataset_from_rows(rows, labels, num_classes, {1, 1, d})};
}

}  // namespace fixtures
