#include <doctest.h>

#include <cmath>
#include <cstring>

#include "fixtures.hpp"
#include "nctj/trainer.hpp"

using namespace nctj;
using data::Dataset;
using train::Model;
using train::TrainConfig;

TEST_SUITE_BEGIN("trainer");

namespace {

struct Toy {
  Dataset train_set, test_set;
};

Toy make_toy(int num_classes, int per_class, uint64_t seed, float sigma = 0.02f) {
  RngStream rng(seed, "data");
  Toy t;
  t.train_set = data::generate_synthetic(num_classes, per_class, {1, 4, 4}, sigma, rng, "train");
  t.test_set = data::generate_synthetic(num_classes, per_class / 2, {1, 4, 4}, sigma, rng, "test");
  return t;
}

Model toy_model(int num_classes, uint64_t seed) {
  RngStream init(seed, "init");
  return train::make_mlp({1, 4, 4}, num_classes, 16, 8, init);
}

TrainConfig quick_config(int epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 16;
  cfg.lr = 0.1f;
  cfg.momentum = 0.9f;
  cfg.weight_decay = 5e-4f;
  cfg.schedule.kind = train::LrSchedule::Kind::Constant;
  cfg.metric_every = 5;
  return cfg;
}

bool params_identical(const Model& a, const Model& b) {
  for (const auto& [name, p] : a.params) {
    const auto& q = b.params.at(name);
    if (p.tensor.values.size() != q.tensor.values.size()) return false;
    if (std::memcmp(p.tensor.values.data(), q.tensor.values.data(),
                    p.tensor.values.size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("train rejects bad configs and converges on a separable toy") {
  Toy toy = make_toy(2, 20, 80);
  RngStream shuffle(80, "shuffle");
  CHECK_THROWS_AS(train::train(toy_model(2, 80), toy.train_set, toy.test_set, nullptr,
                               quick_config(0), shuffle),
                  ArgumentError);

  TrainConfig one_epoch = quick_config(1);
  one_epoch.batch_size = 4;  // one epoch = 10 steps on the 40-sample toy
  auto res = train::train(toy_model(2, 80), toy.train_set, toy.test_set, nullptr, one_epoch,
                          shuffle);
  REQUIRE(res.timeline.rows.size() == 1);
  CHECK(res.timeline.rows.back().train_error < 0.5);
}

TEST_CASE("same config and seeds give bit-identical models and timelines") {
  auto run_once = [] {
    Toy toy = make_toy(3, 15, 81);
    RngStream shuffle(81, "shuffle");
    return train::train(toy_model(3, 81), toy.train_set, toy.test_set, nullptr, quick_config(8),
                        shuffle);
  };
  auto r1 = run_once();
  auto r2 = run_once();
  CHECK(params_identical(r1.model, r2.model));
  REQUIRE(r1.timeline.rows.size() == r2.timeline.rows.size());
  for (size_t i = 0; i < r1.timeline.rows.size(); ++i) {
    const auto& a = r1.timeline.rows[i];
    const auto& b = r2.timeline.rows[i];
    CHECK(a.epoch == b.epoch);
    CHECK(a.train_error == b.train_error);
    CHECK(a.test_acc == b.test_acc);
    CHECK(a.nc.nc1 == b.nc.nc1);
    CHECK(a.nc.nc3 == b.nc.nc3);
  }
}

TEST_CASE("timeline: rows increase, tpt row has exactly zero train error") {
  Toy toy = make_toy(2, 30, 82, 0.01f);
  RngStream shuffle(82, "shuffle");
  auto res = train::train(toy_model(2, 82), toy.train_set, toy.test_set, nullptr,
                          quick_config(40), shuffle);
  REQUIRE(res.timeline.tpt_start_epoch.has_value());
  int tpt = *res.timeline.tpt_start_epoch;
  for (size_t i = 1; i < res.timeline.rows.size(); ++i) {
    CHECK(res.timeline.rows[i].epoch > res.timeline.rows[i - 1].epoch);
  }
  bool found = false;
  for (size_t i = 0; i < res.timeline.rows.size(); ++i) {
    const auto& row = res.timeline.rows[i];
    if (row.epoch == tpt) {
      found = true;
      CHECK(row.train_error == 0.0);
      if (i > 0) CHECK(res.timeline.rows[i - 1].train_error > 0.0);
    }
    if (row.epoch < tpt) CHECK(row.train_error > 0.0);
  }
  CHECK(found);
}

TEST_CASE("stop_at_zero_train_error halts at the tpt epoch") {
  Toy toy = make_toy(2, 30, 83, 0.01f);
  RngStream shuffle(83, "shuffle");
  TrainConfig cfg = quick_config(60);
  cfg.stop_at_zero_train_error = true;
  auto res = train::train(toy_model(2, 83), toy.train_set, toy.test_set, nullptr, cfg, shuffle);
  REQUIRE(res.timeline.tpt_start_epoch.has_value());
  CHECK(res.timeline.rows.back().epoch == *res.timeline.tpt_start_epoch);
  CHECK(res.timeline.rows.back().train_error == 0.0);
}

TEST_CASE("divergence raises TrainingError carrying the last good epoch") {
  Toy toy = make_toy(2, 20, 84);
  RngStream shuffle(84, "shuffle");
  TrainConfig cfg = quick_config(5);
  cfg.lr = 1e30f;
  try {
    train::train(toy_model(2, 84), toy.train_set, toy.test_set, nullptr, cfg, shuffle);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(e.last_good_epoch == 0);
  }
}

TEST_CASE("cleanse_etf_ft: contamination check, freeze contract, purity") {
  Toy toy = make_toy(3, 20, 85);
  Model model = toy_model(3, 85);
  Model before = model;

  trojan::PoisonLedger ledger;
  ledger.target_class = 0;
  ledger.poisoned_origin_ids = {toy.train_set.images[5].origin_id};

  TrainConfig ft = quick_config(2);
  ft.lr = 0.01f;

  // subset containing a poisoned id must be refused
  {
    RngStream er(85, "etf"), sh(85, "shuffle/ft");
    CHECK_THROWS_AS(
        train::cleanse_etf_ft(model, toy.train_set, ft, er, sh, &ledger),
        ContaminationError);
  }

  // clean subset: returns a new model with a frozen exact-ETF head
  Dataset clean;
  clean.num_classes = toy.train_set.num_classes;
  clean.channels = toy.train_set.channels;
  clean.height = toy.train_set.height;
  clean.width = toy.train_set.width;
  for (const auto& img : toy.train_set.images) {
    if (!ledger.contains(img.origin_id)) clean.images.push_back(img);
  }
  RngStream er(85, "etf"), sh(85, "shuffle/ft");
  Model cleansed = train::cleanse_etf_ft(model, clean, ft, er, sh, &ledger);

  CHECK(params_identical(model, before));  // input untouched
  const auto& hw = cleansed.params.at("head.w");
  CHECK(hw.frozen);
  CHECK(cleansed.params.at("head.b").frozen);
  // head survived fine-tuning as an exact simplex ETF
  RngStream er2(85, "etf");
  auto expected = etf::construct_etf(3, 8, er2);
  for (size_t i = 0; i < hw.tensor.values.size(); ++i) {
    CHECK(hw.tensor.values[i] == float(expected.w.a[i]));
  }
  // the feature extractor did move
  CHECK_FALSE(params_identical(cleansed, before));
}

TEST_CASE("cleansing a benign model keeps its test accuracy") {
  Toy toy = make_toy(3, 30, 92, 0.01f);
  RngStream shuffle(92, "shuffle");
  auto res = train::train(toy_model(3, 92), toy.train_set, toy.test_set, nullptr,
                          quick_config(30), shuffle);
  double acc_before = train::accuracy(res.model, toy.test_set);
  TrainConfig ft = quick_config(40);
  ft.lr = 0.05f;
  ft.weight_decay = 0.02f;
  RngStream er(92, "etf"), sh(92, "shuffle/ft");
  train::Model cleansed = train::cleanse_etf_ft(res.model, toy.train_set, ft, er, sh);
  double acc_after = train::accuracy(cleansed, toy.test_set);
  CHECK(acc_after >= acc_before - 0.05);
}

TEST_CASE("finetune_vanilla: zero epochs and zero lr are the identity") {
  Toy toy = make_toy(2, 10, 86);
  Model model = toy_model(2, 86);
  TrainConfig ft = quick_config(0);
  RngStream sh(86, "shuffle/ft");
  Model same = train::finetune_vanilla(model, toy.train_set, ft, sh);
  CHECK(params_identical(model, same));

  TrainConfig ft2 = quick_config(3);
  ft2.lr = 0.0f;
  RngStream sh2(86, "shuffle/ft");
  Model same2 = train::finetune_vanilla(model, toy.train_set, ft2, sh2);
  CHECK(params_identical(model, same2));

  TrainConfig ft3 = quick_config(3);
  ft3.lr = 0.05f;
  RngStream sh3(86, "shuffle/ft");
  Model moved = train::finetune_vanilla(model, toy.train_set, ft3, sh3);
  CHECK_FALSE(params_identical(model, moved));
}

TEST_CASE("train_adaptive keeps its initial ETF head bit-exactly") {
  Toy toy = make_toy(3, 15, 87);
  RngStream er(87, "etf"), sh(87, "shuffle");
  auto res = train::train_adaptive(toy_model(3, 87), toy.train_set, toy.test_set, nullptr,
                                   quick_config(6), er, sh);
  RngStream er2(87, "etf");
  auto expected = etf::construct_etf(3, 8, er2);
  const auto& hw = res.model.params.at("head.w");
  CHECK(hw.frozen);
  for (size_t i = 0; i < hw.tensor.values.size(); ++i) {
    CHECK(hw.tensor.values[i] == float(expected.w.a[i]));
  }
  for (float b : res.model.params.at("head.b").tensor.values) CHECK(b == 0.0f);
}

TEST_CASE("evaluate: perfect nearest-mean head scores 1.0 and matches a loop") {
  // noiseless patterns, identity features, dual head => exact classifier
  RngStream gen(88, "data");
  Dataset ds = data::generate_synthetic(3, 10, {1, 4, 4}, 0.0f, gen);
  Model model = fixtures::identity_model({1, 4, 4}, 3);
  auto summary = nc::class_means(model, ds);
  auto& hw = model.params.at("head.w").tensor;
  auto& hb = model.params.at("head.b").tensor;
  for (int c = 0; c < 3; ++c) {
    double n2 = 0.0;
    for (int j = 0; j < 16; ++j) {
      hw.values[size_t(c) * 16 + j] = float(summary.mu(c, j));
      n2 += summary.mu(c, j) * summary.mu(c, j);
    }
    hb.values[size_t(c)] = float(-0.5 * n2);
  }
  auto res = train::evaluate(model, ds, nullptr);
  CHECK(res.acc == doctest::Approx(1.0));
  CHECK_FALSE(res.asr.has_value());

  // label permutation: swap classes 0 and 1, class 2 is the fixed point
  Dataset permuted = ds;
  for (auto& img : permuted.images) {
    if (img.label == 0) {
      img.label = 1;
    } else if (img.label == 1) {
      img.label = 0;
    }
  }
  auto res2 = train::evaluate(model, permuted, nullptr);
  CHECK(res2.acc == doctest::Approx(1.0 / 3.0));

  // per-sample loop oracle
  std::vector<int> pred = train::predict_labels(model, ds);
  size_t hits = 0;
  for (size_t i = 0; i < ds.size(); ++i) {
    if (pred[i] == ds.images[i].label) ++hits;
  }
  CHECK(res.acc == doctest::Approx(double(hits) / double(ds.size())));

  Dataset empty;
  empty.num_classes = 3;
  CHECK_THROWS_AS(train::evaluate(model, empty, nullptr), ArgumentError);
}

TEST_CASE("frozen parameters are bit-identical across any training op") {
  Toy toy = make_toy(2, 15, 89);
  Model model = toy_model(2, 89);
  model.params.at("fc2.w").frozen = true;
  std::vector<float> before = model.params.at("fc2.w").tensor.values;
  RngStream shuffle(89, "shuffle");
  auto res = train::train(std::move(model), toy.train_set, toy.test_set, nullptr,
                          quick_config(4), shuffle);
  CHECK(std::memcmp(before.data(), res.model.params.at("fc2.w").tensor.values.data(),
                    before.size() * sizeof(float)) == 0);
}

TEST_CASE("lr schedule: step decay at 60% and 80% milestones") {
  train::LrSchedule sched;  // step {0.6, 0.8}, gamma 0.1
  CHECK(sched.lr_at(1.0f, 1, 100) == doctest::Approx(1.0f));
  CHECK(sched.lr_at(1.0f, 60, 100) == doctest::Approx(1.0f));
  CHECK(sched.lr_at(1.0f, 61, 100) == doctest::Approx(0.1f));
  CHECK(sched.lr_at(1.0f, 80, 100) == doctest::Approx(0.1f));
  CHECK(sched.lr_at(1.0f, 81, 100) == doctest::Approx(0.01f));
  train::LrSchedule flat;
  flat.kind = train::LrSchedule::Kind::Constant;
  CHECK(flat.lr_at(0.05f, 99, 100) == doctest::Approx(0.05f));
}

TEST_SUITE_END();
