#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nctj/metrics.hpp"
#include "nctj/trainer.hpp"
#include "nctj/trojan.hpp"

namespace nctj::harness {

struct DatasetConfig {
  std::string kind = "synthetic";  // synthetic | idx | cifar_binary
  // synthetic
  int num_classes = 4;
  int n_per_class = 200;
  int n_test_per_class = 50;
  std::array<int, 3> shape = {1, 8, 8};
  double noise_sigma = 0.05;
  // idx
  std::string train_images, train_labels, test_images, test_labels;
  // cifar_binary
  std::vector<std::string> train_paths, test_paths;
};

struct ArchitectureConfig {
  std::string kind = "mlp";  // mlp | cnn
  int hidden = 128;          // mlp
  int c1 = 16, c2 = 32;      // cnn
  int feature_dim = 32;
};

struct TriggerConfig {
  std::string kind = "patch";  // patch | filter
  int patch_h = 3, patch_w = 3;
  std::string corner = "bottom_right";
  int off_y = 0, off_x = 0;
  std::vector<double> color = {1.0};
  double grayscale_mix = 1.0;
  double vignette_strength = 0.5;
  int blur_radius = 1;

  trojan::TriggerSpec to_spec() const;
};

struct PoisonConfig {
  bool enabled = false;  // json: poison present and non-null
  double delta = 0.1;
  int target_class = 0;
  std::string mode = "exact_count";
  TriggerConfig trigger;

  trojan::PoisonPlan to_plan() const;
};

struct ScheduleConfig {
  std::string kind = "step";  // constant | step
  std::vector<double> milestones = {0.6, 0.8};
  double gamma = 0.1;
};

struct TrainSection {
  int epochs = 200;
  int batch_size = 32;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  ScheduleConfig schedule;
  int metric_every = 10;
  bool stop_at_zero_train_error = false;

  train::TrainConfig to_train_config(nc::Nc1Mode mode) const;
};

struct CorruptionConfig {
  std::string kind = "none";  // none | imbalance | erasure
  double ratio = 10.0;        // imbalance
  double prob = 0.5;          // erasure
  int min_side = -1, max_side = -1;  // -1 = derive from image size (2..8 px per 32)
};

struct CleanseConfig {
  std::string method = "etf_ft";  // etf_ft | ft | none
  double subset_fraction = 0.05;
  CorruptionConfig corruption;
  TrainSection finetune;  // defaults: 20 epochs, lr 0.01, constant schedule

  CleanseConfig();
};

struct SeedsConfig {
  uint64_t data = 1, init = 2, poison = 3, etf = 4, shuffle = 5;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  ArchitectureConfig architecture;
  PoisonConfig poison;
  bool adaptive = false;
  TrainSection train;
  CleanseConfig cleanse;
  std::string nc1_mode = "literal_transpose";
  std::string kernels = "auto";
  SeedsConfig seeds;
  std::string out_dir = "runs/out";

  // Missing fields take defaults; erasure sides are resolved against the
  // image shape so the echoed config is fully concrete.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
  nlohmann::json to_json() const;
  void validate() const;
  void apply_seed_override(const std::string& key, uint64_t value);
};

}  // namespace nctj::harness
