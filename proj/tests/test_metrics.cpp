#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "nc_oracle.hpp"
#include "nctj/metrics.hpp"
#include "nctj/rng.hpp"

using namespace nctj;
using la::MatD;

TEST_SUITE_BEGIN("metrics");

namespace {

nc_oracle::Instance random_instance(RngStream& rng, int max_k = 5, int max_m = 8, int max_n = 50) {
  nc_oracle::Instance in;
  in.k = rng.next_int(2, max_k);
  in.m = rng.next_int(2, max_m);
  in.n = rng.next_int(in.k, max_n);
  in.features.resize(size_t(in.n) * in.m);
  // f32-quantized so the library path (f32 features) sees identical inputs
  for (auto& v : in.features) v = double(float(rng.next_gaussian()));
  in.labels.resize(size_t(in.n));
  for (int i = 0; i < in.n; ++i) {
    in.labels[size_t(i)] = (i < in.k) ? i : rng.next_int(0, in.k - 1);  // all classes present
  }
  in.head_w.resize(size_t(in.k) * in.m);
  for (auto& v : in.head_w) v = double(float(rng.next_gaussian()));
  in.head_b.resize(size_t(in.k));
  for (auto& v : in.head_b) v = double(float(rng.next_gaussian()));
  return in;
}

num::Tensor features_tensor(const nc_oracle::Instance& in) {
  num::Tensor t({in.n, in.m});
  for (size_t i = 0; i < in.features.size(); ++i) t.values[i] = float(in.features[i]);
  return t;
}

MatD matd_from(const std::vector<double>& v, int rows, int cols) {
  MatD m(rows, cols);
  m.a = v;
  return m;
}

}  // namespace

TEST_CASE("class means: single sample per class and hand arithmetic") {
  // identity g realized by a linear layer scaling pixels by 10
  auto model = train::make_custom({1, 1, 1}, 2, 1,
                                  {{train::LayerKind::Flatten, 0, ""},
                                   {train::LayerKind::Linear, 1, "scale"}});
  model.params.add("scale.w", num::Tensor::from({1, 1}, {10.0f}));
  model.params.add("scale.b", num::Tensor({1}));
  // pixels 0,0.2 -> features 0,2 (class 0); 0.4,0.6 -> 4,6 (class 1)
  auto ds = fixtures::dataset_from_rows({{0.0f}, {0.2f}, {0.4f}, {0.6f}}, {0, 0, 1, 1}, 2,
                                        {1, 1, 1});
  auto summary = nc::class_means(model, ds);
  CHECK(summary.mu(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(summary.mu(1, 0) == doctest::Approx(5.0).epsilon(1e-6));
  CHECK(summary.mu_g[0] == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(summary.centered(0, 0) == doctest::Approx(-2.0).epsilon(1e-6));
  CHECK(summary.centered(1, 0) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(summary.counts == std::vector<int>{2, 2});

  // duplicating every sample leaves the means unchanged
  auto doubled = ds;
  for (const auto& img : ds.images) doubled.images.push_back(img);
  auto summary2 = nc::class_means(model, doubled);
  CHECK(summary2.mu(0, 0) == doctest::Approx(summary.mu(0, 0)));
  CHECK(summary2.mu(1, 0) == doctest::Approx(summary.mu(1, 0)));

  // single sample per class: mu_k = g(x_k)
  auto ds_single = fixtures::dataset_from_rows({{0.1f}, {0.7f}}, {0, 1}, 2, {1, 1, 1});
  auto s3 = nc::class_means(model, ds_single);
  CHECK(s3.mu(0, 0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(s3.mu(1, 0) == doctest::Approx(7.0).epsilon(1e-5));

  // empty class is an argument error naming the class
  auto ds_missing = fixtures::dataset_from_rows({{0.1f}}, {0}, 2, {1, 1, 1});
  CHECK_THROWS_WITH_AS(nc::class_means(model, ds_missing), doctest::Contains("1"),
                       ArgumentError);
}

TEST_CASE("class means: centering identity holds on random instances") {
  RngStream rng(60, "metrics");
  for (int trial = 0; trial < 10; ++trial) {
    auto in = random_instance(rng);
    auto s = nc::class_means_from_features(features_tensor(in), in.labels, in.k);
    for (int j = 0; j < in.m; ++j) {
      double acc = 0.0;
      for (int c = 0; c < in.k; ++c) acc += s.centered(c, j) / in.k;
      CHECK(std::abs(acc) <= 1e-5);
    }
  }
}

TEST_CASE("covariances: zero within-class variance and hand-computed sigma_B") {
  // two classes, one feature, samples pinned at their class means 1 and 5
  num::Tensor feats({4, 1});
  feats.values = {1.0f, 1.0f, 5.0f, 5.0f};
  std::vector<int> labels = {0, 0, 1, 1};
  auto s = nc::class_means_from_features(feats, labels, 2);
  auto cov = nc::covariances_from_features(feats, labels, s);
  CHECK(cov.sigma_w(0, 0) == doctest::Approx(0.0));
  CHECK(cov.sigma_b(0, 0) == doctest::Approx(4.0));  // (1/2)((-2)^2 + 2^2)
}

TEST_CASE("covariances: symmetric, PSD, and sigma_B rank at most K-1") {
  RngStream rng(61, "metrics");
  for (int trial = 0; trial < 8; ++trial) {
    auto in = random_instance(rng);
    auto s = nc::class_means_from_features(features_tensor(in), in.labels, in.k);
    auto cov = nc::covariances_from_features(features_tensor(in), in.labels, s);
    CHECK(la::max_abs_diff(cov.sigma_w, la::transpose(cov.sigma_w)) <= 1e-6);
    CHECK(la::max_abs_diff(cov.sigma_b, la::transpose(cov.sigma_b)) <= 1e-6);
    auto min_eig = [&](const MatD& a) {
      auto eig = la::sym_eig_jacobi(a);
      return *std::min_element(eig.values.begin(), eig.values.end());
    };
    CHECK(min_eig(cov.sigma_w) >= -1e-6 * (1.0 + la::trace(cov.sigma_w)));
    CHECK(min_eig(cov.sigma_b) >= -1e-6 * (1.0 + la::trace(cov.sigma_b)));
    CHECK(la::rank_psd(cov.sigma_b) <= in.k - 1);
  }
}

TEST_CASE("nc1: zero sigma_W, scalar case, and scale behavior") {
  nc::CovariancePair cov;
  cov.sigma_w = MatD(1, 1);
  cov.sigma_b = MatD(1, 1);
  cov.sigma_b(0, 0) = 4.0;
  CHECK(nc::nc1(cov, nc::Nc1Mode::LiteralTranspose, 2) == doctest::Approx(0.0));
  CHECK(nc::nc1(cov, nc::Nc1Mode::Pseudoinverse, 2) == doctest::Approx(0.0));

  cov.sigma_w(0, 0) = 2.0;
  CHECK(nc::nc1(cov, nc::Nc1Mode::LiteralTranspose, 2) == doctest::Approx(4.0));
  CHECK(nc::nc1(cov, nc::Nc1Mode::Pseudoinverse, 2) == doctest::Approx(0.25));

  // scaling all features by c multiplies literal by c^4 and fixes pinv
  RngStream rng(62, "metrics");
  for (int trial = 0; trial < 6; ++trial) {
    auto in = random_instance(rng, 5, 5, 40);
    auto scaled = in;
    const double c = 1.0 + rng.next_double() * 2.0;
    for (auto& v : scaled.features) v = double(float(v * c));
    auto s1 = nc::class_means_from_features(features_tensor(in), in.labels, in.k);
    auto cov1 = nc::covariances_from_features(features_tensor(in), in.labels, s1);
    auto s2 = nc::class_means_from_features(features_tensor(scaled), in.labels, in.k);
    auto cov2 = nc::covariances_from_features(features_tensor(scaled), in.labels, s2);
    double lit1 = nc::nc1(cov1, nc::Nc1Mode::LiteralTranspose, in.k);
    double lit2 = nc::nc1(cov2, nc::Nc1Mode::LiteralTranspose, in.k);
    CHECK(lit2 == doctest::Approx(lit1 * c * c * c * c).epsilon(1e-4));
    double pv1 = nc::nc1(cov1, nc::Nc1Mode::Pseudoinverse, in.k);
    double pv2 = nc::nc1(cov2, nc::Nc1Mode::Pseudoinverse, in.k);
    CHECK(pv2 == doctest::Approx(pv1).epsilon(1e-4));

    // power-of-two scale keeps the f32 features exact, so the pinv mode must
    // be invariant to 1e-6 relative and the literal mode must scale by 16
    auto doubled = in;
    for (auto& v : doubled.features) v = double(float(v * 2.0));
    auto sd = nc::class_means_from_features(features_tensor(doubled), in.labels, in.k);
    auto covd = nc::covariances_from_features(features_tensor(doubled), in.labels, sd);
    CHECK(nc::nc1(covd, nc::Nc1Mode::Pseudoinverse, in.k) ==
          doctest::Approx(pv1).epsilon(1e-6));
    CHECK(nc::nc1(covd, nc::Nc1Mode::LiteralTranspose, in.k) ==
          doctest::Approx(lit1 * 16.0).epsilon(1e-9));
  }
}

TEST_CASE("nc2_norm: equal rows give zero; norms {1,1,2,2} give 1/3") {
  MatD equal(3, 4);
  for (int i = 0; i < 3; ++i) equal(i, i) = 2.5;
  CHECK(nc::nc2_norm(equal) == doctest::Approx(0.0));

  MatD v(4, 4);
  v(0, 0) = 1.0;
  v(1, 1) = 1.0;
  v(2, 2) = 2.0;
  v(3, 3) = 2.0;
  CHECK(nc::nc2_norm(v) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  MatD zero(2, 2);
  CHECK_THROWS_AS(nc::nc2_norm(zero), ArgumentError);
}

TEST_CASE("nc2_angle: antipodal pair 0, orthogonal pair 1, zero row rejected") {
  MatD anti(2, 2);
  anti(0, 0) = 3.0;
  anti(1, 0) = -3.0;
  CHECK(nc::nc2_angle(anti) == doctest::Approx(0.0));

  MatD ortho(2, 2);
  ortho(0, 0) = 1.0;
  ortho(1, 1) = 1.0;
  CHECK(nc::nc2_angle(ortho) == doctest::Approx(1.0));

  MatD withzero(2, 2);
  withzero(0, 0) = 1.0;
  CHECK_THROWS_WITH_AS(nc::nc2_angle(withzero), doctest::Contains("row 1"), ArgumentError);
}

TEST_CASE("nc2 on a simplex ETF vanishes") {
  RngStream rng(63, "etf");
  auto head = etf::construct_etf(5, 9, rng);
  CHECK(nc::nc2_norm(head.w) <= 1e-7);
  CHECK(nc::nc2_angle(head.w) <= 1e-7);
}

TEST_CASE("nc3: scale invariance, antipodal maximum, permutation symmetry") {
  RngStream rng(64, "metrics");
  MatD m(3, 4);
  for (auto& v : m.a) v = rng.next_gaussian();
  MatD w = m;
  for (auto& v : w.a) v *= 3.0;
  CHECK(nc::nc3(w, m) == doctest::Approx(0.0).epsilon(1e-12));

  MatD neg = m;
  for (auto& v : neg.a) v = -v;
  CHECK(nc::nc3(neg, m) == doctest::Approx(4.0).epsilon(1e-12));

  // symmetry and invariance under simultaneous row permutation
  MatD w2(3, 4);
  for (auto& v : w2.a) v = rng.next_gaussian();
  CHECK(nc::nc3(w2, m) == doctest::Approx(nc::nc3(m, w2)).epsilon(1e-12));
  std::vector<int> perm = {2, 0, 1};
  MatD wp(3, 4), mp(3, 4);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      wp(i, j) = w2(perm[size_t(i)], j);
      mp(i, j) = m(perm[size_t(i)], j);
    }
  }
  CHECK(nc::nc3(wp, mp) == doctest::Approx(nc::nc3(w2, m)).epsilon(1e-12));

  MatD zero(3, 4);
  CHECK_THROWS_AS(nc::nc3(zero, m), ArgumentError);
}

TEST_CASE("nc4: nearest-mean-equivalent head gives 0, constant head gives 0.5") {
  // two well-separated 1-D clusters
  num::Tensor feats({8, 1});
  feats.values = {0.0f, 0.1f, -0.1f, 0.05f, 1.0f, 0.9f, 1.1f, 0.95f};
  std::vector<int> labels = {0, 0, 0, 0, 1, 1, 1, 1};
  auto s = nc::class_means_from_features(feats, labels, 2);

  // w_c = mu_c, b_c = -||mu_c||^2/2 reproduces the nearest-mean rule
  MatD w_dual(2, 1);
  w_dual(0, 0) = s.mu(0, 0);
  w_dual(1, 0) = s.mu(1, 0);
  std::vector<double> b_dual = {-0.5 * s.mu(0, 0) * s.mu(0, 0), -0.5 * s.mu(1, 0) * s.mu(1, 0)};
  CHECK(nc::nc4_from_features(feats, labels, w_dual, b_dual, s) == doctest::Approx(0.0));

  // constant-class-0 head disagrees exactly on class 1
  MatD w_const(2, 1);
  std::vector<double> b_const = {1.0, 0.0};
  CHECK(nc::nc4_from_features(feats, labels, w_const, b_const, s) == doctest::Approx(0.5));
}

TEST_CASE("every metric matches the brute-force oracle within 1e-9") {
  RngStream rng(65, "metrics");
  for (int trial = 0; trial < 50; ++trial) {
    auto in = random_instance(rng);
    auto feats = features_tensor(in);
    auto s = nc::class_means_from_features(feats, in.labels, in.k);
    auto cov = nc::covariances_from_features(feats, in.labels, s);
    auto os = nc_oracle::compute_stats(in);

    CHECK(std::abs(nc::nc1(cov, nc::Nc1Mode::LiteralTranspose, in.k) -
                   nc_oracle::nc1_literal(in, os)) <= 1e-9);
    CHECK(std::abs(nc::nc1(cov, nc::Nc1Mode::Pseudoinverse, in.k) -
                   nc_oracle::nc1_pinv(in, os)) <= 1e-9);

    std::vector<double> m_rows = s.centered.a;
    CHECK(std::abs(nc::nc2_norm(s.centered) - nc_oracle::nc2_norm(m_rows, in.k, in.m)) <= 1e-9);
    CHECK(std::abs(nc::nc2_angle(s.centered) - nc_oracle::nc2_angle(m_rows, in.k, in.m)) <= 1e-9);
    MatD w = matd_from(in.head_w, in.k, in.m);
    CHECK(std::abs(nc::nc2_norm(w) - nc_oracle::nc2_norm(in.head_w, in.k, in.m)) <= 1e-9);
    CHECK(std::abs(nc::nc2_angle(w) - nc_oracle::nc2_angle(in.head_w, in.k, in.m)) <= 1e-9);
    CHECK(std::abs(nc::nc3(w, s.centered) - nc_oracle::nc3(in.head_w, m_rows, in.k, in.m)) <= 1e-9);
    CHECK(std::abs(nc::nc4_from_features(feats, in.labels, w, in.head_b, s) -
                   nc_oracle::nc4(in, os)) <= 1e-9);
  }
}

TEST_CASE("perfect-collapse fixture: all reported metrics at most 1e-6") {
  auto fix = fixtures::perfect_collapse_fixture(4, 6, 5, 66);
  auto report = nc::full_report(fix.model, fix.data, 0, nc::Nc1Mode::LiteralTranspose);
  CHECK(report.nc1_literal <= 1e-6);
  CHECK(report.nc1_pinv <= 1e-6);
  CHECK(report.nc2_norm_m <= 1e-6);
  CHECK(report.nc2_norm_w <= 1e-6);
  CHECK(report.nc2_angle_m <= 1e-6);
  CHECK(report.nc2_angle_w <= 1e-6);
  CHECK(report.nc3 <= 1e-6);
  CHECK(report.nc4 <= 1e-6);
}

TEST_CASE("full report stays well-defined on imbalanced class counts") {
  RngStream rng(67, "data");
  auto ds = data::generate_synthetic(3, 30, {1, 4, 4}, 0.05f, rng);
  // drop most of class 2
  data::Dataset skew = ds;
  skew.images.clear();
  int kept2 = 0;
  for (const auto& img : ds.images) {
    if (img.label == 2 && kept2 >= 3) continue;
    if (img.label == 2) ++kept2;
    skew.images.push_back(img);
  }
  RngStream init(67, "init");
  auto model = train::make_mlp({1, 4, 4}, 3, 8, 4, init);
  auto report = nc::full_report(model, skew, 7, nc::Nc1Mode::Pseudoinverse);
  CHECK(report.epoch == 7);
  CHECK(std::isfinite(report.nc1));
  CHECK(report.nc1 == report.nc1_pinv);
  CHECK(report.nc4 >= 0.0);
  CHECK(report.nc4 <= 1.0);
  CHECK(report.w_row_norms.size() == 3);
  CHECK(report.m_row_norms.size() == 3);
}

TEST_SUITE_END();
