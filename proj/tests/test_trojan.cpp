#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "nctj/trainer.hpp"
#include "nctj/trojan.hpp"

using namespace nctj;
using data::Dataset;
using data::LabeledImage;
using trojan::PoisonMode;
using trojan::PoisonPlan;
using trojan::TriggerSpec;

TEST_SUITE_BEGIN("trojan");

namespace {

Dataset tiny_dataset(int num_classes, int per_class, int c, int h, int w, float fill) {
  Dataset ds;
  ds.num_classes = num_classes;
  ds.channels = c;
  ds.height = h;
  ds.width = w;
  int64_t id = 0;
  for (int k = 0; k < num_classes; ++k) {
    for (int i = 0; i < per_class; ++i) {
      LabeledImage img;
      img.pixels.assign(size_t(c) * h * w, fill);
      img.label = k;
      img.origin_id = id++;
      ds.images.push_back(std::move(img));
    }
  }
  return ds;
}

TriggerSpec white_patch(int h, int w) {
  TriggerSpec spec;
  spec.kind = TriggerSpec::Kind::Patch;
  spec.patch.h = h;
  spec.patch.w = w;
  spec.patch.corner = trojan::Corner::BottomRight;
  spec.patch.color = {1.0f};
  return spec;
}

// constant-output model: zero features, head bias selects the prediction
train::Model constant_model(int num_classes, int target, std::array<int, 3> shape) {
  auto model = train::make_custom(shape, num_classes, shape[0] * shape[1] * shape[2],
                                  {{train::LayerKind::Flatten, 0, ""}});
  // zero head weights; bias picks the target
  model.params.at("head.b").tensor.values[size_t(target)] = 1.0f;
  return model;
}

}  // namespace

TEST_CASE("empty patch is the identity") {
  Dataset ds = tiny_dataset(2, 1, 1, 4, 4, 0.25f);
  auto out = trojan::apply_trigger(ds.images[0], white_patch(0, 0), 1, 4, 4);
  CHECK(out.pixels == ds.images[0].pixels);
  CHECK(out.label == ds.images[0].label);
}

TEST_CASE("3x3 white patch at bottom-right touches exactly 9 pixels per channel") {
  Dataset ds = tiny_dataset(2, 1, 2, 6, 6, 0.0f);
  auto out = trojan::apply_trigger(ds.images[0], white_patch(3, 3), 2, 6, 6);
  int ones = 0, zeros = 0;
  for (float p : out.pixels) {
    if (p == 1.0f) ++ones;
    if (p == 0.0f) ++zeros;
  }
  CHECK(ones == 18);  // 9 per channel
  CHECK(zeros == 54);
  // the patch sits in the bottom-right corner of each channel plane
  for (int c = 0; c < 2; ++c) {
    for (int y = 3; y < 6; ++y) {
      for (int x = 3; x < 6; ++x) {
        CHECK(out.pixels[(size_t(c) * 6 + y) * 6 + x] == 1.0f);
      }
    }
  }
  // applying the same patch twice changes nothing further
  auto twice = trojan::apply_trigger(out, white_patch(3, 3), 2, 6, 6);
  CHECK(twice.pixels == out.pixels);
}

TEST_CASE("patch outside the image bounds is rejected") {
  Dataset ds = tiny_dataset(2, 1, 1, 4, 4, 0.0f);
  CHECK_THROWS_AS(trojan::apply_trigger(ds.images[0], white_patch(5, 2), 1, 4, 4),
                  ArgumentError);
  TriggerSpec off = white_patch(3, 3);
  off.patch.off_x = 2;
  CHECK_THROWS_AS(trojan::apply_trigger(ds.images[0], off, 1, 4, 4), ArgumentError);
}

TEST_CASE("filter with mix=1, no vignette, no blur equals the luma grayscale") {
  Dataset ds = tiny_dataset(2, 1, 3, 4, 4, 0.0f);
  LabeledImage& img = ds.images[0];
  for (size_t p = 0; p < 16; ++p) {
    img.pixels[p] = float(p) / 16.0f;          // R
    img.pixels[16 + p] = float(15 - p) / 16.0f;  // G
    img.pixels[32 + p] = 0.5f;                 // B
  }
  TriggerSpec spec;
  spec.kind = TriggerSpec::Kind::Filter;
  spec.filter.grayscale_mix = 1.0f;
  spec.filter.vignette_strength = 0.0f;
  spec.filter.blur_radius = 0;
  auto out = trojan::apply_trigger(img, spec, 3, 4, 4);
  for (size_t p = 0; p < 16; ++p) {
    float luma = 0.299f * img.pixels[p] + 0.587f * img.pixels[16 + p] + 0.114f * img.pixels[32 + p];
    CHECK(out.pixels[p] == doctest::Approx(luma).epsilon(1e-6));
    CHECK(out.pixels[16 + p] == doctest::Approx(luma).epsilon(1e-6));
    CHECK(out.pixels[32 + p] == doctest::Approx(luma).epsilon(1e-6));
  }
}

TEST_CASE("vignette darkens corners more than the center") {
  Dataset ds = tiny_dataset(2, 1, 1, 9, 9, 1.0f);
  TriggerSpec spec;
  spec.kind = TriggerSpec::Kind::Filter;
  spec.filter.grayscale_mix = 0.0f;
  spec.filter.vignette_strength = 0.8f;
  spec.filter.blur_radius = 0;
  auto out = trojan::apply_trigger(ds.images[0], spec, 1, 9, 9);
  float center = out.pixels[4 * 9 + 4];
  float corner = out.pixels[0];
  CHECK(center == doctest::Approx(1.0f));
  CHECK(corner == doctest::Approx(0.2f).epsilon(1e-5));
  CHECK(corner < center);
}

TEST_CASE("delta 0 poisons nothing") {
  Dataset ds = tiny_dataset(3, 10, 1, 4, 4, 0.3f);
  PoisonPlan plan;
  plan.trigger = white_patch(2, 2);
  plan.delta = 0.0;
  plan.target_class = 0;
  RngStream rng(50, "poison");
  auto [out, ledger] = trojan::poison_dataset(ds, plan, rng);
  CHECK(ledger.poisoned_origin_ids.empty());
  REQUIRE(out.size() == ds.size());
  for (size_t i = 0; i < ds.size(); ++i) {
    CHECK(out.images[i].pixels == ds.images[i].pixels);
    CHECK(out.images[i].label == ds.images[i].label);
  }
}

TEST_CASE("exact_count: delta 0.1 on 10 classes of 100 poisons exactly 90") {
  Dataset ds = tiny_dataset(10, 100, 1, 4, 4, 0.2f);
  PoisonPlan plan;
  plan.trigger = white_patch(2, 2);
  plan.delta = 0.1;
  plan.target_class = 3;
  plan.mode = PoisonMode::ExactCount;
  RngStream rng(51, "poison");
  auto [out, ledger] = trojan::poison_dataset(ds, plan, rng);
  CHECK(out.size() == ds.size());
  CHECK(ledger.poisoned_origin_ids.size() == 90);
  CHECK(ledger.delta == 0.1);
  CHECK(ledger.target_class == 3);

  // per-class counts exactly round(delta*n_k), none from the target class
  std::map<int, int> poisoned_per_original_class;
  std::set<int64_t> ids(ledger.poisoned_origin_ids.begin(), ledger.poisoned_origin_ids.end());
  for (size_t i = 0; i < ds.size(); ++i) {
    if (ids.count(ds.images[i].origin_id)) {
      ++poisoned_per_original_class[ds.images[i].label];
      CHECK(ds.images[i].label != 3);
      CHECK(out.images[i].label == 3);
      // patch applied: bottom-right 2x2 is white
      CHECK(out.images[i].pixels[3 * 4 + 3] == 1.0f);
    } else {
      CHECK(out.images[i].label == ds.images[i].label);
      CHECK(out.images[i].pixels == ds.images[i].pixels);
    }
  }
  for (auto [cls, count] : poisoned_per_original_class) CHECK(count == 10);

  // same seed replays identically
  RngStream rng2(51, "poison");
  auto [out2, ledger2] = trojan::poison_dataset(ds, plan, rng2);
  CHECK(ledger2.poisoned_origin_ids == ledger.poisoned_origin_ids);
}

TEST_CASE("bernoulli mode poisons roughly delta of eligible samples") {
  Dataset ds = tiny_dataset(2, 1000, 1, 4, 4, 0.1f);
  PoisonPlan plan;
  plan.trigger = white_patch(1, 1);
  plan.delta = 0.25;
  plan.target_class = 1;
  plan.mode = PoisonMode::Bernoulli;
  RngStream rng(52, "poison");
  auto [out, ledger] = trojan::poison_dataset(ds, plan, rng);
  // eligible = 1000 samples of class 0; binomial(1000, 0.25) 99.9% interval
  CHECK(ledger.poisoned_origin_ids.size() >= 200);
  CHECK(ledger.poisoned_origin_ids.size() <= 300);
}

TEST_CASE("poisoned pixels differ only inside the patch region") {
  Dataset ds = tiny_dataset(2, 20, 1, 5, 5, 0.4f);
  PoisonPlan plan;
  plan.trigger = white_patch(2, 2);
  plan.delta = 0.5;
  plan.target_class = 1;
  RngStream rng(53, "poison");
  auto [out, ledger] = trojan::poison_dataset(ds, plan, rng);
  std::set<int64_t> ids(ledger.poisoned_origin_ids.begin(), ledger.poisoned_origin_ids.end());
  for (size_t i = 0; i < ds.size(); ++i) {
    if (!ids.count(ds.images[i].origin_id)) continue;
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 5; ++x) {
        bool in_patch = y >= 3 && x >= 3;
        float got = out.images[i].pixels[size_t(y) * 5 + x];
        float orig = ds.images[i].pixels[size_t(y) * 5 + x];
        if (in_patch) {
          CHECK(got == 1.0f);
        } else {
          CHECK(got == orig);
        }
      }
    }
  }
}

TEST_CASE("ledger JSON round-trips") {
  trojan::PoisonLedger ledger;
  ledger.target_class = 2;
  ledger.delta = 0.1;
  ledger.mode = PoisonMode::ExactCount;
  ledger.poisoned_origin_ids = {3, 17, 99};
  auto back = trojan::PoisonLedger::from_json(ledger.to_json());
  CHECK(back.target_class == 2);
  CHECK(back.delta == 0.1);
  CHECK(back.mode == PoisonMode::ExactCount);
  CHECK(back.poisoned_origin_ids == ledger.poisoned_origin_ids);
  CHECK(back.contains(17));
  CHECK_FALSE(back.contains(18));
}

TEST_CASE("ASR set: K=2 with 50 per class and target 1 gives 50 samples labeled 1") {
  Dataset test = tiny_dataset(2, 50, 1, 6, 6, 0.1f);
  Dataset asr = trojan::build_asr_eval_set(test, white_patch(3, 3), 1);
  CHECK(asr.size() == 50);
  for (const auto& img : asr.images) {
    CHECK(img.label == 1);
    CHECK(img.pixels[5 * 6 + 5] == 1.0f);
  }
  // a test set holding only the target class cannot form an ASR set
  Dataset only_target = tiny_dataset(2, 10, 1, 6, 6, 0.1f);
  only_target.images.erase(only_target.images.begin(), only_target.images.begin() + 10);
  CHECK_THROWS_AS(trojan::build_asr_eval_set(only_target, white_patch(3, 3), 1), ArgumentError);
}

TEST_CASE("attack success rate on constant models and against a per-sample loop") {
  Dataset test = tiny_dataset(3, 10, 1, 4, 4, 0.3f);
  Dataset asr = trojan::build_asr_eval_set(test, white_patch(2, 2), 2);

  auto always = constant_model(3, 2, {1, 4, 4});
  CHECK(trojan::attack_success_rate(always, asr) == doctest::Approx(1.0));
  auto never = constant_model(3, 0, {1, 4, 4});
  CHECK(trojan::attack_success_rate(never, asr) == doctest::Approx(0.0));

  // brute-force per-sample loop over logits must agree exactly
  RngStream init(54, "init");
  auto model = train::make_mlp({1, 4, 4}, 3, 8, 4, init);
  double got = trojan::attack_success_rate(model, asr);
  size_t hits = 0;
  for (const auto& img : asr.images) {
    num::Tensor x({1, 1, 4, 4});
    x.values.assign(img.pixels.begin(), img.pixels.end());
    num::Tensor logits = model.logits(x);
    int best = 0;
    for (int j = 1; j < 3; ++j) {
      if (logits.values[size_t(j)] > logits.values[size_t(best)]) best = j;
    }
    if (best == 2) ++hits;
  }
  CHECK(got == doctest::Approx(double(hits) / double(asr.size())));

  Dataset empty;
  empty.num_classes = 3;
  CHECK_THROWS_AS(trojan::attack_success_rate(model, empty), ArgumentError);
}

TEST_CASE("identity trigger: ASR equals the model's confusion rate into the target") {
  // a perfect nearest-mean classifier never confuses clean samples into the
  // target class, so an empty patch gives ASR 0
  RngStream gen(56, "data");
  Dataset test = data::generate_synthetic(3, 20, {1, 4, 4}, 0.0f, gen);
  auto model = train::make_custom({1, 4, 4}, 3, 16, {{train::LayerKind::Flatten, 0, ""}});
  // head: w_c = class pattern, b_c = -||pattern||^2/2 reproduces nearest-mean
  auto& hw = model.params.at("head.w").tensor;
  auto& hb = model.params.at("head.b").tensor;
  for (int c = 0; c < 3; ++c) {
    const auto& pattern = test.images[size_t(c) * 20].pixels;
    double n2 = 0.0;
    for (int j = 0; j < 16; ++j) {
      hw.values[size_t(c) * 16 + j] = pattern[size_t(j)];
      n2 += double(pattern[size_t(j)]) * pattern[size_t(j)];
    }
    hb.values[size_t(c)] = float(-0.5 * n2);
  }
  REQUIRE(train::accuracy(model, test) == doctest::Approx(1.0));

  Dataset asr = trojan::build_asr_eval_set(test, white_patch(0, 0), 1);
  // identity trigger leaves pixels untouched; only the labels flip to 1
  CHECK(asr.size() == 40);
  CHECK(trojan::attack_success_rate(model, asr) == doctest::Approx(0.0));
}

TEST_CASE("untrained random-head models score chance-level ASR on K=10") {
  // Monte-Carlo over 20 init seeds: mean ASR should sit near 1/K
  RngStream gen(55, "data");
  Dataset test = data::generate_synthetic(10, 20, {1, 8, 8}, 0.05f, gen);
  Dataset asr = trojan::build_asr_eval_set(test, white_patch(3, 3), 0);
  double total = 0.0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    RngStream init(seed, "init");
    auto model = train::make_mlp({1, 8, 8}, 10, 16, 12, init);
    total += trojan::attack_success_rate(model, asr);
  }
  double mean = total / 20.0;
  CHECK(mean >= 0.05);
  CHECK(mean <= 0.15);
}

TEST_SUITE_END();
