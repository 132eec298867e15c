#include "nctj/trojan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace nctj::trojan {

namespace {

float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

void patch_origin(const PatchTrigger& p, int height, int width, int& top, int& left) {
  switch (p.corner) {
    case Corner::TopLeft:
      top = p.off_y;
      left = p.off_x;
      break;
    case Corner::TopRight:
      top = p.off_y;
      left = width - p.w - p.off_x;
      break;
    case Corner::BottomLeft:
      top = height - p.h - p.off_y;
      left = p.off_x;
      break;
    case Corner::BottomRight:
      top = height - p.h - p.off_y;
      left = width - p.w - p.off_x;
      break;
  }
  if (p.h < 0 || p.w < 0 || top < 0 || left < 0 || top + p.h > height || left + p.w > width) {
    throw ArgumentError("apply_trigger: patch " + std::to_string(p.h) + "x" +
                        std::to_string(p.w) + " does not fit inside " +
                        std::to_string(height) + "x" + std::to_string(width));
  }
}

}  // namespace

Corner corner_from_string(const std::string& s) {
  if (s == "top_left") return Corner::TopLeft;
  if (s == "top_right") return Corner::TopRight;
  if (s == "bottom_left") return Corner::BottomLeft;
  if (s == "bottom_right") return Corner::BottomRight;
  throw ArgumentError("unknown patch corner '" + s + "'");
}

std::string corner_to_string(Corner c) {
  switch (c) {
    case Corner::TopLeft: return "top_left";
    case Corner::TopRight: return "top_right";
    case Corner::BottomLeft: return "bottom_left";
    case Corner::BottomRight: return "bottom_right";
  }
  return "bottom_right";
}

PoisonMode poison_mode_from_string(const std::string& s) {
  if (s == "bernoulli") return PoisonMode::Bernoulli;
  if (s == "exact_count") return PoisonMode::ExactCount;
  throw ArgumentError("unknown poison mode '" + s + "'");
}

std::string poison_mode_to_string(PoisonMode m) {
  return m == PoisonMode::Bernoulli ? "bernoulli" : "exact_count";
}

bool PoisonLedger::contains(int64_t origin_id) const {
  return std::binary_search(poisoned_origin_ids.begin(), poisoned_origin_ids.end(), origin_id);
}

std::string PoisonLedger::to_json() const {
  nlohmann::json j;
  j["target_class"] = target_class;
  j["delta"] = delta;
  j["mode"] = poison_mode_to_string(mode);
  j["poisoned_origin_ids"] = poisoned_origin_ids;
  return j.dump(2);
}

PoisonLedger PoisonLedger::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  PoisonLedger l;
  l.target_class = j.at("target_class").get<int>();
  l.delta = j.at("delta").get<double>();
  l.mode = poison_mode_from_string(j.at("mode").get<std::string>());
  l.poisoned_origin_ids = j.at("poisoned_origin_ids").get<std::vector<int64_t>>();
  std::sort(l.poisoned_origin_ids.begin(), l.poisoned_origin_ids.end());
  return l;
}

void PoisonLedger::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << to_json() << '\n';
}

PoisonLedger PoisonLedger::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json(text);
}

data::LabeledImage apply_trigger(const data::LabeledImage& image, const TriggerSpec& spec,
                                 int channels, int height, int width) {
  data::LabeledImage out = image;
  if (spec.kind == TriggerSpec::Kind::Patch) {
    const PatchTrigger& p = spec.patch;
    if (p.h == 0 || p.w == 0) return out;  // empty patch is the identity
    int top = 0, left = 0;
    patch_origin(p, height, width, top, left);
    if (p.color.size() != 1 && p.color.size() != static_cast<size_t>(channels)) {
      throw ArgumentError("apply_trigger: patch color needs 1 or C entries");
    }
    for (float v : p.color) {
      if (v < 0.0f || v > 1.0f) throw ArgumentError("apply_trigger: patch color outside [0,1]");
    }
    for (int c = 0; c < channels; ++c) {
      float color = p.color[p.color.size() == 1 ? 0 : static_cast<size_t>(c)];
      float* plane = out.pixels.data() + static_cast<size_t>(c) * height * width;
      for (int y = top; y < top + p.h; ++y) {
        for (int x = left; x < left + p.w; ++x) {
          plane[static_cast<size_t>(y) * width + x] = color;
        }
      }
    }
    return out;
  }

  // Filter trigger: grayscale mix, box blur, vignette, clip.
  const FilterTrigger& f = spec.filter;
  if (f.grayscale_mix < 0.0f || f.grayscale_mix > 1.0f) {
    throw ArgumentError("apply_trigger: grayscale_mix must be in [0,1]");
  }
  if (f.vignette_strength < 0.0f) throw ArgumentError("apply_trigger: vignette_strength must be >= 0");
  if (f.blur_radius < 0) throw ArgumentError("apply_trigger: blur_radius must be >= 0");
  if (channels != 1 && channels != 3) {
    throw ArgumentError("apply_trigger: filter trigger supports 1 or 3 channels");
  }
  const size_t hw = static_cast<size_t>(height) * width;
  std::vector<float> work(out.pixels.size());

  // grayscale mix (luma for RGB, identity for single channel)
  if (channels == 3) {
    const float* r = out.pixels.data();
    const float* g = r + hw;
    const float* b = g + hw;
    for (size_t p = 0; p < hw; ++p) {
      float gray = 0.299f * r[p] + 0.587f * g[p] + 0.114f * b[p];
      work[p] = f.grayscale_mix * gray + (1.0f - f.grayscale_mix) * r[p];
      work[hw + p] = f.grayscale_mix * gray + (1.0f - f.grayscale_mix) * g[p];
      work[2 * hw + p] = f.grayscale_mix * gray + (1.0f - f.grayscale_mix) * b[p];
    }
  } else {
    work = out.pixels;
  }

  if (f.blur_radius > 0) {
    std::vector<float> blurred(work.size());
    const int r = f.blur_radius;
    for (int c = 0; c < channels; ++c) {
      const float* plane = work.data() + static_cast<size_t>(c) * hw;
      float* oplane = blurred.data() + static_cast<size_t>(c) * hw;
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          double acc = 0.0;
          int count = 0;
          for (int dy = -r; dy <= r; ++dy) {
            int sy = std::clamp(y + dy, 0, height - 1);
            for (int dx = -r; dx <= r; ++dx) {
              int sx = std::clamp(x + dx, 0, width - 1);
              acc += plane[static_cast<size_t>(sy) * width + sx];
              ++count;
            }
          }
          oplane[static_cast<size_t>(y) * width + x] = static_cast<float>(acc / count);
        }
      }
    }
    work.swap(blurred);
  }

  // vignette: darken with squared distance from center, mask in [0,1]
  const double cy = (height - 1) / 2.0, cx = (width - 1) / 2.0;
  const double dmax2 = cy * cy + cx * cx;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double d2 = ((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (dmax2 > 0 ? dmax2 : 1.0);
      float mask = static_cast<float>(std::max(0.0, 1.0 - f.vignette_strength * d2));
      for (int c = 0; c < channels; ++c) {
        float& v = work[static_cast<size_t>(c) * hw + static_cast<size_t>(y) * width + x];
        v = clamp01(v * mask);
      }
    }
  }
  out.pixels = std::move(work);
  return out;
}

std::pair<data::Dataset, PoisonLedger> poison_dataset(const data::Dataset& train,
                                                      const PoisonPlan& plan, RngStream& rng) {
  if (plan.delta < 0.0 || plan.delta >= 1.0) {
    throw ArgumentError("poison_dataset: delta must be in [0,1)");
  }
  if (plan.target_class < 0 || plan.target_class >= train.num_classes) {
    throw ArgumentError("poison_dataset: target class " + std::to_string(plan.target_class) +
                        " outside [0," + std::to_string(train.num_classes) + ")");
  }
  data::Dataset out = train;
  PoisonLedger ledger;
  ledger.target_class = plan.target_class;
  ledger.delta = plan.delta;
  ledger.mode = plan.mode;
  if (plan.delta == 0.0) return {std::move(out), std::move(ledger)};  // benign

  std::vector<size_t> chosen;
  if (plan.mode == PoisonMode::Bernoulli) {
    for (size_t i = 0; i < out.images.size(); ++i) {
      if (out.images[i].label == plan.target_class) continue;
      if (rng.next_double() < plan.delta) chosen.push_back(i);
    }
  } else {
    std::vector<std::vector<size_t>> by_class(static_cast<size_t>(train.num_classes));
    for (size_t i = 0; i < out.images.size(); ++i) {
      by_class[static_cast<size_t>(out.images[i].label)].push_back(i);
    }
    for (int k = 0; k < train.num_classes; ++k) {
      if (k == plan.target_class) continue;
      auto& idx = by_class[static_cast<size_t>(k)];
      long want = std::lround(plan.delta * static_cast<double>(idx.size()));
      rng.shuffle(idx);
      for (long i = 0; i < want && i < static_cast<long>(idx.size()); ++i) {
        chosen.push_back(idx[static_cast<size_t>(i)]);
      }
    }
  }
  for (size_t i : chosen) {
    data::LabeledImage& img = out.images[i];
    img = apply_trigger(img, plan.trigger, out.channels, out.height, out.width);
    img.label = plan.target_class;
    ledger.poisoned_origin_ids.push_back(img.origin_id);
  }
  std::sort(ledger.poisoned_origin_ids.begin(), ledger.poisoned_origin_ids.end());
  return {std::move(out), std::move(ledger)};
}

data::Dataset build_asr_eval_set(const data::Dataset& test, const TriggerSpec& trigger,
                                 int target_class) {
  if (target_class < 0 || target_class >= test.num_classes) {
    throw ArgumentError("build_asr_eval_set: target class out of range");
  }
  data::Dataset out;
  out.num_classes = test.num_classes;
  out.channels = test.channels;
  out.height = test.height;
  out.width = test.width;
  out.split_tag = "asr";
  for (const auto& img : test.images) {
    if (img.label == target_class) continue;
    data::LabeledImage triggered = apply_trigger(img, trigger, test.channels, test.height, test.width);
    triggered.label = target_class;
    out.images.push_back(std::move(triggered));
  }
  if (out.images.empty()) {
    throw ArgumentError("build_asr_eval_set: test set contains only the target class");
  }
  return out;
}

double attack_success_rate(const train::Model& model, const data::Dataset& asr_set) {
  if (asr_set.images.empty()) throw ArgumentError("attack_success_rate: empty evaluation set");
  const int k_t = asr_set.images.front().label;
  std::vector<int> pred = train::predict_labels(model, asr_set);
  size_t hits = 0;
  for (int p : pred) {
    if (p == k_t) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace nctj::trojan
