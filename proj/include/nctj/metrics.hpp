#pragma once

#include <string>
#include <vector>

#include "nctj/data.hpp"
#include "nctj/linalg.hpp"
#include "nctj/model.hpp"

namespace nctj::nc {

// Per-class feature means mu_k, global mean mu_G (unweighted over classes),
// and the centered mean matrix M with rows m_k = mu_k - mu_G. All in f64.
struct ClassMeanSummary {
  int num_classes = 0;
  int feature_dim = 0;
  la::MatD mu;      // K x m
  std::vector<double> mu_g;  // m
  la::MatD centered;         // M, K x m
  std::vector<int> counts;   // |X_k|
};

struct CovariancePair {
  la::MatD sigma_w;  // within-class, m x m
  la::MatD sigma_b;  // between-class, m x m
};

enum class Nc1Mode { LiteralTranspose, Pseudoinverse };

Nc1Mode nc1_mode_from_string(const std::string& s);
std::string nc1_mode_to_string(Nc1Mode m);

struct NCMetricsReport {
  int epoch = 0;
  double nc1 = 0.0;          // value for the configured mode
  double nc1_literal = 0.0;  // (1/K) tr(Sigma_W Sigma_B^T)
  double nc1_pinv = 0.0;     // (1/K) tr(Sigma_W pinv(Sigma_B))
  double nc2_norm_m = 0.0, nc2_norm_w = 0.0;
  double nc2_angle_m = 0.0, nc2_angle_w = 0.0;
  double nc3 = 0.0;
  double nc4 = 0.0;
  std::vector<double> w_row_norms;  // per-class head row norms
  std::vector<double> m_row_norms;  // per-class centered-mean row norms
};

// Feature-level entry points (shared with tests/fixtures):
ClassMeanSummary class_means_from_features(const num::Tensor& features,
                                           const std::vector<int>& labels, int num_classes);
CovariancePair covariances_from_features(const num::Tensor& features,
                                         const std::vector<int>& labels,
                                         const ClassMeanSummary& summary);

// Model-level entry points per the metric definitions; class = label as
// stored, so poisoned samples count toward the target class.
ClassMeanSummary class_means(const train::Model& model, const data::Dataset& ds);
CovariancePair covariances(const train::Model& model, const data::Dataset& ds,
                           const ClassMeanSummary& summary);

double nc1(const CovariancePair& cov, Nc1Mode mode, int num_classes);
// std(row norms) / mean(row norms); population std over the K rows.
double nc2_norm(const la::MatD& v);
// mean over i<j of |cos(v_i, v_j) + 1/(K-1)|
double nc2_angle(const la::MatD& v);
// squared Frobenius norm of W/||W||_F - M/||M||_F
double nc3(const la::MatD& w, const la::MatD& m);
// mean over classes of per-class disagreement between argmax(head) and
// nearest-class-mean; ties in both rules break to the lowest class index.
double nc4(const train::Model& model, const data::Dataset& ds, const ClassMeanSummary& summary);
double nc4_from_features(const num::Tensor& features, const std::vector<int>& labels,
                         const la::MatD& head_w, const std::vector<double>& head_b,
                         const ClassMeanSummary& summary);

NCMetricsReport full_report(const train::Model& model, const data::Dataset& ds, int epoch,
                            Nc1Mode mode);

la::MatD head_w_as_matd(const train::Model& model);

}  // namespace nctj::nc
