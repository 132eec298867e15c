#include "nctj/etf.hpp"

#include <algorithm>
#include <cmath>

namespace nctj::etf {

la::MatD random_partial_orthogonal(int feature_dim, int num_classes, RngStream& rng) {
  if (num_classes < 1) throw ArgumentError("random_partial_orthogonal: need K >= 1");
  if (feature_dim < num_classes) {
    throw ArgumentError("random_partial_orthogonal: need m >= K, got m=" +
                        std::to_string(feature_dim) + " K=" + std::to_string(num_classes));
  }
  la::MatD g(feature_dim, num_classes);
  for (int i = 0; i < feature_dim; ++i) {
    for (int j = 0; j < num_classes; ++j) g(i, j) = rng.next_gaussian();
  }
  la::MatD q = la::householder_qr_thin(g).q;
  // canonical column orientation: largest-magnitude entry positive. QR
  // columns are unique up to sign, so this pins the factor exactly (and the
  // ETF gram is insensitive to column signs).
  for (int j = 0; j < num_classes; ++j) {
    int arg = 0;
    for (int i = 1; i < feature_dim; ++i) {
      if (std::abs(q(i, j)) > std::abs(q(arg, j))) arg = i;
    }
    if (q(arg, j) < 0.0) {
      for (int i = 0; i < feature_dim; ++i) q(i, j) = -q(i, j);
    }
  }
  return q;
}

EtfHead etf_from_partial_orthogonal(la::MatD p, int num_classes) {
  const int k = num_classes;
  if (k < 2) throw ArgumentError("construct_etf: need K >= 2");
  if (p.cols != k) throw DimensionError("construct_etf: P must have K columns");
  if (p.rows < k) throw ArgumentError("construct_etf: need m >= K");
  const int m = p.rows;
  const double scale = std::sqrt(static_cast<double>(k) / (k - 1));
  // W^T = scale * P (I - 11^T/K); centering is symmetric so the transpose in
  // the formula is the matrix itself.
  la::MatD w(k, m);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) {
        double center = (t == j ? 1.0 : 0.0) - 1.0 / k;
        acc += p(i, t) * center;
      }
      w(j, i) = scale * acc;
    }
  }
  EtfHead head;
  head.num_classes = k;
  head.feature_dim = m;
  head.p = std::move(p);
  head.w = std::move(w);
  return head;
}

EtfHead construct_etf(int num_classes, int feature_dim, RngStream& rng) {
  EtfHead head =
      etf_from_partial_orthogonal(random_partial_orthogonal(feature_dim, num_classes, rng),
                                  num_classes);
  head.seed = rng.master_seed();
  return head;
}

double max_etf_deviation(const EtfHead& head) {
  const int k = head.num_classes;
  la::MatD gram = la::matmul(head.w, la::transpose(head.w));
  const double scale = static_cast<double>(k) / (k - 1);
  double dev = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      double ideal = scale * ((i == j ? 1.0 : 0.0) - 1.0 / k);
      dev = std::max(dev, std::abs(gram(i, j) - ideal));
    }
  }
  for (int i = 0; i < k; ++i) {
    double n2 = gram(i, i);
    dev = std::max(dev, std::abs(std::sqrt(std::max(n2, 0.0)) - 1.0));
  }
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      double cos = gram(i, j) / std::sqrt(gram(i, i) * gram(j, j));
      dev = std::max(dev, std::abs(cos + 1.0 / (k - 1)));
    }
  }
  return dev;
}

train::Model install_and_freeze(train::Model model, const EtfHead& head) {
  auto& hw = model.params.at("head.w");
  auto& hb = model.params.at("head.b");
  if (hw.tensor.dim(0) != head.num_classes || hw.tensor.dim(1) != head.feature_dim) {
    throw ArgumentError("install_and_freeze: head shape (" + std::to_string(hw.tensor.dim(0)) +
                        "," + std::to_string(hw.tensor.dim(1)) + ") does not match ETF (" +
                        std::to_string(head.num_classes) + "," +
                        std::to_string(head.feature_dim) + ")");
  }
  for (size_t i = 0; i < hw.tensor.values.size(); ++i) {
    hw.tensor.values[i] = static_cast<float>(head.w.a[i]);
  }
  hw.tensor.grad.clear();
  hw.frozen = true;
  std::fill(hb.tensor.values.begin(), hb.tensor.values.end(), 0.0f);
  hb.tensor.grad.clear();
  hb.frozen = true;
  return model;
}

}  // namespace nctj::etf
