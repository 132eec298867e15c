#include "nctj/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace nctj::harness {

using nlohmann::json;

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& slot) {
  if (j.contains(key) && !j.at(key).is_null()) slot = j.at(key).get<T>();
}

void parse_schedule(const json& j, ScheduleConfig& s) {
  maybe(j, "kind", s.kind);
  maybe(j, "milestones", s.milestones);
  maybe(j, "gamma", s.gamma);
}

void parse_train_section(const json& j, TrainSection& t) {
  maybe(j, "epochs", t.epochs);
  maybe(j, "batch_size", t.batch_size);
  maybe(j, "lr", t.lr);
  maybe(j, "momentum", t.momentum);
  maybe(j, "weight_decay", t.weight_decay);
  if (j.contains("schedule") && !j.at("schedule").is_null()) {
    parse_schedule(j.at("schedule"), t.schedule);
  }
  maybe(j, "metric_every", t.metric_every);
  maybe(j, "stop_at_zero_train_error", t.stop_at_zero_train_error);
}

json schedule_json(const ScheduleConfig& s) {
  return {{"kind", s.kind}, {"milestones", s.milestones}, {"gamma", s.gamma}};
}

json train_section_json(const TrainSection& t) {
  return {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"lr", t.lr},
          {"momentum", t.momentum},
          {"weight_decay", t.weight_decay},
          {"schedule", schedule_json(t.schedule)},
          {"metric_every", t.metric_every},
          {"stop_at_zero_train_error", t.stop_at_zero_train_error}};
}

}  // namespace

CleanseConfig::CleanseConfig() {
  finetune.epochs = 200;
  finetune.batch_size = 32;
  finetune.lr = 0.05;
  finetune.momentum = 0.9;
  finetune.weight_decay = 0.02;
  finetune.schedule.kind = "constant";
  finetune.metric_every = 50;
}

trojan::TriggerSpec TriggerConfig::to_spec() const {
  trojan::TriggerSpec spec;
  if (kind == "patch") {
    spec.kind = trojan::TriggerSpec::Kind::Patch;
    spec.patch.h = patch_h;
    spec.patch.w = patch_w;
    spec.patch.corner = trojan::corner_from_string(corner);
    spec.patch.off_y = off_y;
    spec.patch.off_x = off_x;
    spec.patch.color.assign(color.begin(), color.end());
  } else if (kind == "filter") {
    spec.kind = trojan::TriggerSpec::Kind::Filter;
    spec.filter.grayscale_mix = static_cast<float>(grayscale_mix);
    spec.filter.vignette_strength = static_cast<float>(vignette_strength);
    spec.filter.blur_radius = blur_radius;
  } else {
    throw ArgumentError("config: unknown trigger kind '" + kind + "'");
  }
  return spec;
}

trojan::PoisonPlan PoisonConfig::to_plan() const {
  trojan::PoisonPlan plan;
  plan.trigger = trigger.to_spec();
  plan.delta = delta;
  plan.target_class = target_class;
  plan.mode = trojan::poison_mode_from_string(mode);
  return plan;
}

train::TrainConfig TrainSection::to_train_config(nc::Nc1Mode mode) const {
  train::TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.lr = static_cast<float>(lr);
  cfg.momentum = static_cast<float>(momentum);
  cfg.weight_decay = static_cast<float>(weight_decay);
  if (schedule.kind == "constant") {
    cfg.schedule.kind = train::LrSchedule::Kind::Constant;
  } else if (schedule.kind == "step") {
    cfg.schedule.kind = train::LrSchedule::Kind::Step;
    cfg.schedule.milestones = schedule.milestones;
    cfg.schedule.gamma = schedule.gamma;
  } else {
    throw ArgumentError("config: unknown schedule kind '" + schedule.kind + "'");
  }
  cfg.metric_every = metric_every;
  cfg.stop_at_zero_train_error = stop_at_zero_train_error;
  cfg.nc1_mode = mode;
  return cfg;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("dataset") && !j.at("dataset").is_null()) {
    const json& d = j.at("dataset");
    maybe(d, "kind", c.dataset.kind);
    maybe(d, "num_classes", c.dataset.num_classes);
    maybe(d, "n_per_class", c.dataset.n_per_class);
    maybe(d, "n_test_per_class", c.dataset.n_test_per_class);
    if (d.contains("shape") && !d.at("shape").is_null()) {
      auto v = d.at("shape").get<std::vector<int>>();
      if (v.size() != 3) throw ArgumentError("config: dataset.shape must be [C,H,W]");
      c.dataset.shape = {v[0], v[1], v[2]};
    }
    maybe(d, "noise_sigma", c.dataset.noise_sigma);
    maybe(d, "train_images", c.dataset.train_images);
    maybe(d, "train_labels", c.dataset.train_labels);
    maybe(d, "test_images", c.dataset.test_images);
    maybe(d, "test_labels", c.dataset.test_labels);
    maybe(d, "train_paths", c.dataset.train_paths);
    maybe(d, "test_paths", c.dataset.test_paths);
  }
  if (j.contains("architecture") && !j.at("architecture").is_null()) {
    const json& a = j.at("architecture");
    maybe(a, "kind", c.architecture.kind);
    maybe(a, "hidden", c.architecture.hidden);
    maybe(a, "c1", c.architecture.c1);
    maybe(a, "c2", c.architecture.c2);
    maybe(a, "feature_dim", c.architecture.feature_dim);
  }
  if (j.contains("poison") && !j.at("poison").is_null()) {
    const json& p = j.at("poison");
    c.poison.enabled = true;
    maybe(p, "delta", c.poison.delta);
    maybe(p, "target_class", c.poison.target_class);
    maybe(p, "mode", c.poison.mode);
    if (p.contains("trigger") && !p.at("trigger").is_null()) {
      const json& t = p.at("trigger");
      maybe(t, "kind", c.poison.trigger.kind);
      if (t.contains("size") && !t.at("size").is_null()) {
        auto v = t.at("size").get<std::vector<int>>();
        if (v.size() != 2) throw ArgumentError("config: trigger.size must be [h,w]");
        c.poison.trigger.patch_h = v[0];
        c.poison.trigger.patch_w = v[1];
      }
      maybe(t, "corner", c.poison.trigger.corner);
      if (t.contains("offset") && !t.at("offset").is_null()) {
        auto v = t.at("offset").get<std::vector<int>>();
        if (v.size() != 2) throw ArgumentError("config: trigger.offset must be [y,x]");
        c.poison.trigger.off_y = v[0];
        c.poison.trigger.off_x = v[1];
      }
      maybe(t, "color", c.poison.trigger.color);
      maybe(t, "grayscale_mix", c.poison.trigger.grayscale_mix);
      maybe(t, "vignette_strength", c.poison.trigger.vignette_strength);
      maybe(t, "blur_radius", c.poison.trigger.blur_radius);
    }
  }
  maybe(j, "adaptive", c.adaptive);
  if (j.contains("train") && !j.at("train").is_null()) parse_train_section(j.at("train"), c.train);
  if (j.contains("cleanse") && !j.at("cleanse").is_null()) {
    const json& cl = j.at("cleanse");
    maybe(cl, "method", c.cleanse.method);
    maybe(cl, "subset_fraction", c.cleanse.subset_fraction);
    if (cl.contains("corruption") && !cl.at("corruption").is_null()) {
      const json& co = cl.at("corruption");
      maybe(co, "kind", c.cleanse.corruption.kind);
      maybe(co, "ratio", c.cleanse.corruption.ratio);
      maybe(co, "prob", c.cleanse.corruption.prob);
      maybe(co, "min_side", c.cleanse.corruption.min_side);
      maybe(co, "max_side", c.cleanse.corruption.max_side);
    }
    if (cl.contains("finetune") && !cl.at("finetune").is_null()) {
      parse_train_section(cl.at("finetune"), c.cleanse.finetune);
    }
  }
  maybe(j, "nc1_mode", c.nc1_mode);
  maybe(j, "kernels", c.kernels);
  if (j.contains("seeds") && !j.at("seeds").is_null()) {
    const json& s = j.at("seeds");
    maybe(s, "data", c.seeds.data);
    maybe(s, "init", c.seeds.init);
    maybe(s, "poison", c.seeds.poison);
    maybe(s, "etf", c.seeds.etf);
    maybe(s, "shuffle", c.seeds.shuffle);
  }
  maybe(j, "out_dir", c.out_dir);

  // resolve erasure geometry against the image size (2..8 px per 32 px side)
  if (c.cleanse.corruption.kind == "erasure") {
    int side = std::min(c.dataset.shape[1], c.dataset.shape[2]);
    if (c.dataset.kind == "cifar_binary") side = 32;
    if (c.cleanse.corruption.min_side < 0) {
      c.cleanse.corruption.min_side = std::max(1, static_cast<int>(std::lround(2.0 * side / 32.0)));
    }
    if (c.cleanse.corruption.max_side < 0) {
      c.cleanse.corruption.max_side =
          std::max(c.cleanse.corruption.min_side, static_cast<int>(std::lround(8.0 * side / 32.0)));
    }
  } else {
    if (c.cleanse.corruption.min_side < 0) c.cleanse.corruption.min_side = 0;
    if (c.cleanse.corruption.max_side < 0) c.cleanse.corruption.max_side = 0;
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config '" + path + "'");
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw FormatError("config '" + path + "': " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json j;
  json d = {{"kind", dataset.kind}};
  if (dataset.kind == "synthetic") {
    d["num_classes"] = dataset.num_classes;
    d["n_per_class"] = dataset.n_per_class;
    d["n_test_per_class"] = dataset.n_test_per_class;
    d["shape"] = dataset.shape;
    d["noise_sigma"] = dataset.noise_sigma;
  } else if (dataset.kind == "idx") {
    d["train_images"] = dataset.train_images;
    d["train_labels"] = dataset.train_labels;
    d["test_images"] = dataset.test_images;
    d["test_labels"] = dataset.test_labels;
  } else if (dataset.kind == "cifar_binary") {
    d["train_paths"] = dataset.train_paths;
    d["test_paths"] = dataset.test_paths;
  }
  j["dataset"] = d;
  if (architecture.kind == "mlp") {
    j["architecture"] = {{"kind", "mlp"},
                         {"hidden", architecture.hidden},
                         {"feature_dim", architecture.feature_dim}};
  } else {
    j["architecture"] = {{"kind", "cnn"},
                         {"c1", architecture.c1},
                         {"c2", architecture.c2},
                         {"feature_dim", architecture.feature_dim}};
  }
  if (poison.enabled) {
    json t;
    if (poison.trigger.kind == "patch") {
      t = {{"kind", "patch"},
           {"size", std::vector<int>{poison.trigger.patch_h, poison.trigger.patch_w}},
           {"corner", poison.trigger.corner},
           {"offset", std::vector<int>{poison.trigger.off_y, poison.trigger.off_x}},
           {"color", poison.trigger.color}};
    } else {
      t = {{"kind", "filter"},
           {"grayscale_mix", poison.trigger.grayscale_mix},
           {"vignette_strength", poison.trigger.vignette_strength},
           {"blur_radius", poison.trigger.blur_radius}};
    }
    j["poison"] = {{"delta", poison.delta},
                   {"target_class", poison.target_class},
                   {"mode", poison.mode},
                   {"trigger", t}};
  } else {
    j["poison"] = nullptr;
  }
  j["adaptive"] = adaptive;
  j["train"] = train_section_json(train);
  json co = {{"kind", cleanse.corruption.kind}};
  if (cleanse.corruption.kind == "imbalance") co["ratio"] = cleanse.corruption.ratio;
  if (cleanse.corruption.kind == "erasure") {
    co["prob"] = cleanse.corruption.prob;
    co["min_side"] = cleanse.corruption.min_side;
    co["max_side"] = cleanse.corruption.max_side;
  }
  j["cleanse"] = {{"method", cleanse.method},
                  {"subset_fraction", cleanse.subset_fraction},
                  {"corruption", co},
                  {"finetune", train_section_json(cleanse.finetune)}};
  j["nc1_mode"] = nc1_mode;
  j["kernels"] = kernels;
  j["seeds"] = {{"data", seeds.data},
                {"init", seeds.init},
                {"poison", seeds.poison},
                {"etf", seeds.etf},
                {"shuffle", seeds.shuffle}};
  j["out_dir"] = out_dir;
  return j;
}

void ExperimentConfig::validate() const {
  if (dataset.kind != "synthetic" && dataset.kind != "idx" && dataset.kind != "cifar_binary") {
    throw ArgumentError("config: unknown dataset kind '" + dataset.kind + "'");
  }
  if (dataset.kind == "synthetic") {
    if (dataset.num_classes < 2) throw ArgumentError("config: dataset.num_classes must be >= 2");
    if (dataset.n_per_class < 1 || dataset.n_test_per_class < 1) {
      throw ArgumentError("config: synthetic class sizes must be >= 1");
    }
    if (!(dataset.noise_sigma >= 0.0)) throw ArgumentError("config: noise_sigma must be >= 0");
  }
  if (dataset.kind == "idx" &&
      (dataset.train_images.empty() || dataset.train_labels.empty() ||
       dataset.test_images.empty() || dataset.test_labels.empty())) {
    throw ArgumentError("config: idx dataset needs train/test image and label paths");
  }
  if (dataset.kind == "cifar_binary" &&
      (dataset.train_paths.empty() || dataset.test_paths.empty())) {
    throw ArgumentError("config: cifar_binary dataset needs train_paths and test_paths");
  }
  if (architecture.kind != "mlp" && architecture.kind != "cnn") {
    throw ArgumentError("config: unknown architecture '" + architecture.kind + "'");
  }
  if (architecture.feature_dim < 1) throw ArgumentError("config: feature_dim must be >= 1");
  if (poison.enabled) {
    if (poison.delta < 0.0 || poison.delta >= 1.0) {
      throw ArgumentError("config: poison.delta must be in [0,1)");
    }
    if (poison.trigger.kind != "patch" && poison.trigger.kind != "filter") {
      throw ArgumentError("config: unknown trigger kind '" + poison.trigger.kind + "'");
    }
  }
  if (train.epochs < 1) throw ArgumentError("config: train.epochs must be >= 1");
  if (train.batch_size < 1) throw ArgumentError("config: train.batch_size must be >= 1");
  if (train.metric_every < 1) throw ArgumentError("config: train.metric_every must be >= 1");
  if (!(train.lr > 0.0)) throw ArgumentError("config: train.lr must be positive");
  if (cleanse.method != "etf_ft" && cleanse.method != "ft" && cleanse.method != "none") {
    throw ArgumentError("config: unknown cleanse method '" + cleanse.method + "'");
  }
  if (cleanse.method != "none") {
    if (!(cleanse.subset_fraction > 0.0) || cleanse.subset_fraction > 1.0) {
      throw ArgumentError("config: cleanse.subset_fraction must be in (0,1]");
    }
    if (cleanse.finetune.epochs < 0) throw ArgumentError("config: finetune.epochs must be >= 0");
    const auto& co = cleanse.corruption;
    if (co.kind != "none" && co.kind != "imbalance" && co.kind != "erasure") {
      throw ArgumentError("config: unknown corruption kind '" + co.kind + "'");
    }
    if (co.kind == "imbalance" && co.ratio < 1.0) {
      throw ArgumentError("config: corruption.ratio must be >= 1");
    }
    if (co.kind == "erasure" && (co.prob < 0.0 || co.prob > 1.0)) {
      throw ArgumentError("config: corruption.prob must be in [0,1]");
    }
  }
  nc::nc1_mode_from_string(nc1_mode);  // throws on bad value
  if (kernels != "auto" && kernels != "scalar" && kernels != "avx2") {
    throw ArgumentError("config: kernels must be auto|scalar|avx2");
  }
}

void ExperimentConfig::apply_seed_override(const std::string& key, uint64_t value) {
  if (key == "data") {
    seeds.data = value;
  } else if (key == "init") {
    seeds.init = value;
  } else if (key == "poison") {
    seeds.poison = value;
  } else if (key == "etf") {
    seeds.etf = value;
  } else if (key == "shuffle") {
    seeds.shuffle = value;
  } else {
    throw ArgumentError("unknown seed '" + key + "' (expected data|init|poison|etf|shuffle)");
  }
}

}  // namespace nctj::harness
