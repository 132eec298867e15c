#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nctj/data.hpp"
#include "nctj/model.hpp"
#include "nctj/rng.hpp"

namespace nctj::trojan {

enum class Corner { TopLeft, TopRight, BottomLeft, BottomRight };

Corner corner_from_string(const std::string& s);
std::string corner_to_string(Corner c);

struct PatchTrigger {
  int h = 3, w = 3;
  Corner corner = Corner::BottomRight;
  int off_y = 0, off_x = 0;            // inward offset from the corner
  std::vector<float> color = {1.0f};   // per-channel, or single value broadcast
};

struct FilterTrigger {
  float grayscale_mix = 1.0f;     // 0 = original colors, 1 = full grayscale
  float vignette_strength = 0.5f; // 0 = no darkening toward corners
  int blur_radius = 1;            // box blur; 0 = none
};

struct TriggerSpec {
  enum class Kind { Patch, Filter };
  Kind kind = Kind::Patch;
  PatchTrigger patch;
  FilterTrigger filter;
};

enum class PoisonMode { Bernoulli, ExactCount };

PoisonMode poison_mode_from_string(const std::string& s);
std::string poison_mode_to_string(PoisonMode m);

struct PoisonPlan {
  TriggerSpec trigger;
  double delta = 0.1;       // in [0,1)
  int target_class = 0;     // k_T
  PoisonMode mode = PoisonMode::ExactCount;
};

struct PoisonLedger {
  int target_class = 0;
  double delta = 0.0;
  PoisonMode mode = PoisonMode::ExactCount;
  std::vector<int64_t> poisoned_origin_ids;

  bool contains(int64_t origin_id) const;
  std::string to_json() const;
  static PoisonLedger from_json(const std::string& text);
  void save(const std::string& path) const;
  static PoisonLedger load(const std::string& path);
};

// Patch: overwrite the patch region with the color, label unchanged.
// Filter: clip(blur(mix*gray(x) + (1-mix)*x) * vignette_mask).
data::LabeledImage apply_trigger(const data::LabeledImage& image, const TriggerSpec& spec,
                                 int channels, int height, int width);

// Relabels/retriggers selected non-target samples in place (size preserved).
// exact_count: exactly round(delta*n_k) per class via seeded shuffle;
// bernoulli: independent coin per sample.
std::pair<data::Dataset, PoisonLedger> poison_dataset(const data::Dataset& train,
                                                      const PoisonPlan& plan, RngStream& rng);

// Every test sample with true label != k_T, triggered and relabeled k_T.
data::Dataset build_asr_eval_set(const data::Dataset& test, const TriggerSpec& trigger,
                                 int target_class);

// Fraction of the ASR set predicted as the target class.
double attack_success_rate(const train::Model& model, const data::Dataset& asr_set);

}  // namespace nctj::trojan
