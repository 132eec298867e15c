#include "nctj/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nctj::nc {

namespace {

std::vector<int> dataset_labels(const data::Dataset& ds) {
  std::vector<int> labels;
  labels.reserve(ds.size());
  for (const auto& img : ds.images) labels.push_back(img.label);
  return labels;
}

std::vector<double> row_norms(const la::MatD& v) {
  std::vector<double> out(static_cast<size_t>(v.rows));
  for (int i = 0; i < v.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < v.cols; ++j) s += v(i, j) * v(i, j);
    out[static_cast<size_t>(i)] = std::sqrt(s);
  }
  return out;
}

}  // namespace

Nc1Mode nc1_mode_from_string(const std::string& s) {
  if (s == "literal_transpose") return Nc1Mode::LiteralTranspose;
  if (s == "pseudoinverse") return Nc1Mode::Pseudoinverse;
  throw ArgumentError("unknown nc1 mode '" + s + "'");
}

std::string nc1_mode_to_string(Nc1Mode m) {
  return m == Nc1Mode::LiteralTranspose ? "literal_transpose" : "pseudoinverse";
}

ClassMeanSummary class_means_from_features(const num::Tensor& features,
                                           const std::vector<int>& labels, int num_classes) {
  if (features.ndim() != 2) throw DimensionError("class_means: features must be N x m");
  const int n = features.dim(0), m = features.dim(1);
  if (static_cast<int>(labels.size()) != n) {
    throw DimensionError("class_means: feature/label count mismatch");
  }
  ClassMeanSummary s;
  s.num_classes = num_classes;
  s.feature_dim = m;
  s.mu = la::MatD(num_classes, m);
  s.counts.assign(static_cast<size_t>(num_classes), 0);
  for (int i = 0; i < n; ++i) {
    int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= num_classes) {
      throw ArgumentError("class_means: label " + std::to_string(y) + " out of range");
    }
    ++s.counts[static_cast<size_t>(y)];
    const float* row = features.values.data() + static_cast<size_t>(i) * m;
    for (int j = 0; j < m; ++j) s.mu(y, j) += static_cast<double>(row[j]);
  }
  std::vector<int> missing;
  for (int k = 0; k < num_classes; ++k) {
    if (s.counts[static_cast<size_t>(k)] == 0) missing.push_back(k);
  }
  if (!missing.empty()) {
    std::ostringstream os;
    os << "class_means: empty classes:";
    for (int k : missing) os << ' ' << k;
    throw ArgumentError(os.str());
  }
  for (int k = 0; k < num_classes; ++k) {
    double inv = 1.0 / s.counts[static_cast<size_t>(k)];
    for (int j = 0; j < m; ++j) s.mu(k, j) *= inv;
  }
  s.mu_g.assign(static_cast<size_t>(m), 0.0);
  for (int k = 0; k < num_classes; ++k) {
    for (int j = 0; j < m; ++j) s.mu_g[static_cast<size_t>(j)] += s.mu(k, j);
  }
  for (double& v : s.mu_g) v /= num_classes;
  s.centered = la::MatD(num_classes, m);
  for (int k = 0; k < num_classes; ++k) {
    for (int j = 0; j < m; ++j) s.centered(k, j) = s.mu(k, j) - s.mu_g[static_cast<size_t>(j)];
  }
  return s;
}

CovariancePair covariances_from_features(const num::Tensor& features,
                                         const std::vector<int>& labels,
                                         const ClassMeanSummary& summary) {
  const int n = features.dim(0), m = features.dim(1);
  const int k_count = summary.num_classes;
  CovariancePair cov;
  cov.sigma_w = la::MatD(m, m);
  cov.sigma_b = la::MatD(m, m);
  // per-class accumulation so each class gets its 1/|X_k| before the 1/K
  std::vector<la::MatD> per_class(static_cast<size_t>(k_count), la::MatD(m, m));
  std::vector<double> diff(static_cast<size_t>(m));
  for (int i = 0; i < n; ++i) {
    int y = labels[static_cast<size_t>(i)];
    const float* row = features.values.data() + static_cast<size_t>(i) * m;
    for (int j = 0; j < m; ++j) diff[static_cast<size_t>(j)] = static_cast<double>(row[j]) - summary.mu(y, j);
    la::MatD& acc = per_class[static_cast<size_t>(y)];
    for (int a = 0; a < m; ++a) {
      double da = diff[static_cast<size_t>(a)];
      if (da == 0.0) continue;
      for (int b = 0; b < m; ++b) acc(a, b) += da * diff[static_cast<size_t>(b)];
    }
  }
  for (int k = 0; k < k_count; ++k) {
    double scale = 1.0 / (static_cast<double>(k_count) * summary.counts[static_cast<size_t>(k)]);
    const la::MatD& acc = per_class[static_cast<size_t>(k)];
    for (size_t i = 0; i < acc.a.size(); ++i) cov.sigma_w.a[i] += scale * acc.a[i];
  }
  for (int k = 0; k < k_count; ++k) {
    for (int a = 0; a < m; ++a) {
      double ma = summary.centered(k, a);
      if (ma == 0.0) continue;
      for (int b = 0; b < m; ++b) {
        cov.sigma_b(a, b) += ma * summary.centered(k, b) / k_count;
      }
    }
  }
  return cov;
}

ClassMeanSummary class_means(const train::Model& model, const data::Dataset& ds) {
  num::Tensor feats = train::all_features(model, ds);
  return class_means_from_features(feats, dataset_labels(ds), ds.num_classes);
}

CovariancePair covariances(const train::Model& model, const data::Dataset& ds,
                           const ClassMeanSummary& summary) {
  num::Tensor feats = train::all_features(model, ds);
  return covariances_from_features(feats, dataset_labels(ds), summary);
}

double nc1(const CovariancePair& cov, Nc1Mode mode, int num_classes) {
  const la::MatD& sw = cov.sigma_w;
  if (mode == Nc1Mode::LiteralTranspose) {
    // tr(Sigma_W Sigma_B^T) is the Frobenius inner product
    double acc = 0.0;
    for (size_t i = 0; i < sw.a.size(); ++i) acc += sw.a[i] * cov.sigma_b.a[i];
    return acc / num_classes;
  }
  la::MatD pinv = la::pinv_psd(cov.sigma_b);
  return la::trace(la::matmul(sw, pinv)) / num_classes;
}

double nc2_norm(const la::MatD& v) {
  if (v.rows < 2) throw ArgumentError("nc2_norm: need at least 2 rows");
  auto norms = row_norms(v);
  double mean = 0.0;
  for (double x : norms) mean += x;
  mean /= static_cast<double>(norms.size());
  if (mean <= 0.0) throw ArgumentError("nc2_norm: degenerate input (all rows zero)");
  double var = 0.0;
  for (double x : norms) var += (x - mean) * (x - mean);
  var /= static_cast<double>(norms.size());  // population std over the K classes
  return std::sqrt(var) / mean;
}

double nc2_angle(const la::MatD& v) {
  const int k = v.rows;
  if (k < 2) throw ArgumentError("nc2_angle: need at least 2 rows");
  auto norms = row_norms(v);
  for (int i = 0; i < k; ++i) {
    if (norms[static_cast<size_t>(i)] <= 0.0) {
      throw ArgumentError("nc2_angle: degenerate input, row " + std::to_string(i) + " is zero");
    }
  }
  const double target = 1.0 / (k - 1);
  double acc = 0.0;
  int pairs = 0;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      double dot = 0.0;
      for (int c = 0; c < v.cols; ++c) dot += v(i, c) * v(j, c);
      double cos = dot / (norms[static_cast<size_t>(i)] * norms[static_cast<size_t>(j)]);
      acc += std::abs(cos + target);
      ++pairs;
    }
  }
  return acc / pairs;
}

double nc3(const la::MatD& w, const la::MatD& m) {
  if (w.rows != m.rows || w.cols != m.cols) throw DimensionError("nc3: shape mismatch");
  double wn = la::frobenius_norm(w), mn = la::frobenius_norm(m);
  if (wn <= 0.0 || mn <= 0.0) throw ArgumentError("nc3: degenerate input (zero matrix)");
  double acc = 0.0;
  for (size_t i = 0; i < w.a.size(); ++i) {
    double d = w.a[i] / wn - m.a[i] / mn;
    acc += d * d;
  }
  return acc;
}

double nc4_from_features(const num::Tensor& features, const std::vector<int>& labels,
                         const la::MatD& head_w, const std::vector<double>& head_b,
                         const ClassMeanSummary& summary) {
  const int n = features.dim(0), m = features.dim(1);
  const int k_count = summary.num_classes;
  std::vector<double> per_class_mismatch(static_cast<size_t>(k_count), 0.0);
  for (int i = 0; i < n; ++i) {
    const float* row = features.values.data() + static_cast<size_t>(i) * m;
    // network rule: argmax_c w_c . g(x) + b_c, first max wins
    int net = 0;
    double best_score = -1e300;
    for (int c = 0; c < k_count; ++c) {
      double s = head_b[static_cast<size_t>(c)];
      for (int j = 0; j < m; ++j) s += head_w(c, j) * static_cast<double>(row[j]);
      if (s > best_score) {
        best_score = s;
        net = c;
      }
    }
    // nearest-class-mean rule, first min wins
    int ncm = 0;
    double best_dist = 1e300;
    for (int c = 0; c < k_count; ++c) {
      double d = 0.0;
      for (int j = 0; j < m; ++j) {
        double diff = static_cast<double>(row[j]) - summary.mu(c, j);
        d += diff * diff;
      }
      if (d < best_dist) {
        best_dist = d;
        ncm = c;
      }
    }
    if (net != ncm) per_class_mismatch[static_cast<size_t>(labels[static_cast<size_t>(i)])] += 1.0;
  }
  double acc = 0.0;
  for (int k = 0; k < k_count; ++k) {
    acc += per_class_mismatch[static_cast<size_t>(k)] / summary.counts[static_cast<size_t>(k)];
  }
  return acc / k_count;
}

la::MatD head_w_as_matd(const train::Model& model) {
  const num::Tensor& w = model.head_w();
  la::MatD out(w.dim(0), w.dim(1));
  for (size_t i = 0; i < w.values.size(); ++i) out.a[i] = static_cast<double>(w.values[i]);
  return out;
}

double nc4(const train::Model& model, const data::Dataset& ds, const ClassMeanSummary& summary) {
  num::Tensor feats = train::all_features(model, ds);
  std::vector<double> bias(model.head_b().values.begin(), model.head_b().values.end());
  return nc4_from_features(feats, dataset_labels(ds), head_w_as_matd(model), bias, summary);
}

NCMetricsReport full_report(const train::Model& model, const data::Dataset& ds, int epoch,
                            Nc1Mode mode) {
  if (ds.images.empty()) throw ArgumentError("full_report: empty dataset");
  num::Tensor feats = train::all_features(model, ds);
  std::vector<int> labels = dataset_labels(ds);
  ClassMeanSummary summary = class_means_from_features(feats, labels, ds.num_classes);
  CovariancePair cov = covariances_from_features(feats, labels, summary);
  la::MatD w = head_w_as_matd(model);
  std::vector<double> bias(model.head_b().values.begin(), model.head_b().values.end());

  NCMetricsReport r;
  r.epoch = epoch;
  r.nc1_literal = nc1(cov, Nc1Mode::LiteralTranspose, ds.num_classes);
  r.nc1_pinv = nc1(cov, Nc1Mode::Pseudoinverse, ds.num_classes);
  r.nc1 = (mode == Nc1Mode::LiteralTranspose) ? r.nc1_literal : r.nc1_pinv;
  r.nc2_norm_m = nc2_norm(summary.centered);
  r.nc2_norm_w = nc2_norm(w);
  r.nc2_angle_m = nc2_angle(summary.centered);
  r.nc2_angle_w = nc2_angle(w);
  r.nc3 = nc3(w, summary.centered);
  r.nc4 = nc4_from_features(feats, labels, w, bias, summary);
  r.w_row_norms = row_norms(w);
  r.m_row_norms = row_norms(summary.centered);
  return r;
}

}  // namespace nctj::nc
